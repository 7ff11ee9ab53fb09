"""gdw/1: the message protocol between a gaze client and the session gateway.

Messages are single JSON objects, one per text frame, tagged by "type".

    client -> server:  HELLO {protocol_version}
                       PAGE_LAYOUT {layout}
                       GAZE {t, x, y}
                       CANCEL {}
                       RESET {}
    server -> client:  ACK {what, ...}
                       DWELLS {links: [{id, n, t_ms, p}]}
                       COMMAND {name, t, cancelled_link?}
                       SELECTED {id, t, response_time_ms}
                       ERROR {code, msg}

Sessions must open with a HELLO carrying a supported protocol version, and
must send PAGE_LAYOUT before any GAZE.  Sample stamps t strictly increase
within a session.  Protocol violations produce an ERROR followed by channel
close; merely malformed frames produce an ERROR and the session continues.

`GatewaySession` is transport independent: it maps incoming frames to
outgoing frames synchronously, so a recorded client transcript replays to a
byte-identical server transcript.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .engine import (CommandActivated, DwellsAssigned, LinkSelected, SelectionCancelled,
                     SelectionEngine)
from .intent import IntentModelParams
from .policy import PolicyParams
from .segmentation import GazeSample, SegModelParams
from .traceio import layout_from_obj
from .units import TS_MS

PROTOCOL_VERSION = "gdw/1"

CLIENT_TYPES = {"HELLO", "PAGE_LAYOUT", "GAZE", "CANCEL", "RESET"}


def encode_message(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":"))


@dataclass
class SessionConfig:
    policy: PolicyParams
    quantize: str = "per-sample"
    include_posterior: bool = True
    window_factor: float = 1.5
    consecutive_buttons: bool = False


class GatewaySession:
    """One protocol session wrapping one selection engine."""

    def __init__(self, seg_params: SegModelParams, intent_params: IntentModelParams,
                 config: SessionConfig):
        self.config = config
        self.engine = SelectionEngine(
            seg_params, intent_params, config.policy, config.quantize,
            window_factor=config.window_factor,
            consecutive_buttons=config.consecutive_buttons,
        )
        self.helloed = False
        self.has_layout = False
        self.closed = False

    # -- frame level ---------------------------------------------------------

    def handle_text(self, text: str) -> tuple[list[str], bool]:
        out, close = self.handle(text)
        return [encode_message(m) for m in out], close

    def handle(self, frame) -> tuple[list[dict], bool]:
        """Process one incoming frame; returns (replies, close flag)."""
        if self.closed:
            return [], True
        if isinstance(frame, str):
            try:
                msg = json.loads(frame)
            except json.JSONDecodeError:
                return [_error("bad_json", "frame is not valid JSON")], False
        else:
            msg = frame
        if not isinstance(msg, dict) or "type" not in msg:
            return [_error("bad_message", "frame must be an object with a 'type'")], False
        mtype = msg["type"]
        if mtype not in CLIENT_TYPES:
            return [_error("unknown_type", f"unknown message type {mtype!r}")], False
        if not self.helloed and mtype != "HELLO":
            return self._fatal("expected_hello", "session must open with HELLO")
        try:
            handler = getattr(self, f"_on_{mtype.lower()}")
            return handler(msg)
        except _Fatal as exc:
            return self._fatal(exc.code, exc.msg)
        except (KeyError, TypeError, ValueError) as exc:
            return [_error("bad_message", f"malformed {mtype}: {exc}")], False

    def _fatal(self, code: str, msg: str) -> tuple[list[dict], bool]:
        self.closed = True
        return [_error(code, msg)], True

    # -- message handlers ------------------------------------------------------

    def _on_hello(self, msg: dict) -> tuple[list[dict], bool]:
        version = msg.get("protocol_version")
        if version != PROTOCOL_VERSION:
            return self._fatal("bad_version",
                               f"unsupported protocol version {version!r}, need {PROTOCOL_VERSION!r}")
        self.helloed = True
        return [{"type": "ACK", "what": "HELLO", "protocol_version": PROTOCOL_VERSION}], False

    def _on_page_layout(self, msg: dict) -> tuple[list[dict], bool]:
        layout, buttons = layout_from_obj(msg["layout"])
        self.engine.present_page(layout, buttons)
        self.has_layout = True
        return [{"type": "ACK", "what": "PAGE_LAYOUT", "links": layout.n_links}], False

    def _on_gaze(self, msg: dict) -> tuple[list[dict], bool]:
        if not self.has_layout:
            raise _Fatal("no_layout", "GAZE before PAGE_LAYOUT")
        sample = GazeSample(int(msg["t"]), float(msg["x"]), float(msg["y"]))
        try:
            events = self.engine.feed_gaze(sample)
        except ValueError as exc:  # out-of-order stamps are a protocol violation
            raise _Fatal("out_of_order", str(exc)) from None
        return self._events_to_messages(events), False

    def _on_cancel(self, msg: dict) -> tuple[list[dict], bool]:
        ev = self.engine.cancel()
        ack = {"type": "ACK", "what": "CANCEL"}
        if isinstance(ev, SelectionCancelled):
            ack["cancelled_link"] = ev.link_id
        return [ack], False

    def _on_reset(self, msg: dict) -> tuple[list[dict], bool]:
        if self.engine.layout is not None:
            self.engine.present_page(self.engine.layout)
        return [{"type": "ACK", "what": "RESET"}], False

    # -- engine events -----------------------------------------------------------

    def _events_to_messages(self, events) -> list[dict]:
        out: list[dict] = []
        cancelled: Optional[int] = None
        for ev in events:
            if isinstance(ev, SelectionCancelled):
                cancelled = ev.link_id
        for ev in events:
            if isinstance(ev, CommandActivated):
                m = {"type": "COMMAND", "name": ev.command.value, "t": ev.t}
                if ev.command.value == "CANCEL" and cancelled is not None:
                    m["cancelled_link"] = cancelled
                out.append(m)
            elif isinstance(ev, DwellsAssigned):
                links = []
                for i, n in enumerate(ev.assignment.n_samples):
                    entry = {"id": i + 1, "n": n, "t_ms": round(n * TS_MS, 4)}
                    if self.config.include_posterior:
                        entry["p"] = round(float(ev.posterior.probs[i]), 6)
                    links.append(entry)
                out.append({"type": "DWELLS", "links": links})
            elif isinstance(ev, LinkSelected):
                out.append({"type": "SELECTED", "id": ev.link_id, "t": ev.t,
                            "response_time_ms": round(ev.response_time_ms, 4)})
        return out


class _Fatal(Exception):
    def __init__(self, code: str, msg: str):
        super().__init__(msg)
        self.code = code
        self.msg = msg


def _error(code: str, msg: str) -> dict:
    return {"type": "ERROR", "code": code, "msg": msg}


def replay_transcript(session: GatewaySession, frames) -> list[dict]:
    """Feed a recorded client message sequence; returns the flattened server
    message sequence (closing the session when the protocol demands it)."""
    out: list[dict] = []
    for frame in frames:
        replies, close = session.handle(frame)
        out.extend(replies)
        if close:
            break
    return out
