import numpy as np

from gazedwell.engine import Command, default_task_bar
from gazedwell.policy import PolicyParams
from gazedwell.protocol import (PROTOCOL_VERSION, GatewaySession, SessionConfig,
                                encode_message, replay_transcript)
from gazedwell.traceio import layout_to_obj

from conftest import make_layout

LAYOUT = make_layout([(100, 100, 200, 20), (100, 200, 200, 20)])
BUTTONS = default_task_bar(1280, 1024)
SELECT_BOX = next(b for b in BUTTONS if b.command is Command.SELECT).bbox


def new_session(fixture_bundle, **kw):
    config = SessionConfig(policy=kw.pop("policy", PolicyParams(500, 100, 100, 1.0)), **kw)
    return GatewaySession(fixture_bundle.seg, fixture_bundle.intent, config)


def hello():
    return {"type": "HELLO", "protocol_version": PROTOCOL_VERSION}


def page_layout():
    return {"type": "PAGE_LAYOUT", "layout": layout_to_obj(LAYOUT, BUTTONS)}


def gaze(t, x, y):
    return {"type": "GAZE", "t": t, "x": x, "y": y}


def scripted_selection_frames(link_xy=(150.0, 110.0), read_samples=70):
    frames = [hello(), page_layout()]
    t = 0
    for _ in range(read_samples):
        frames.append(gaze(t, link_xy[0], link_xy[1]))
        t += 1
    for x in np.linspace(link_xy[0], SELECT_BOX.center.x, 5)[1:-1]:
        frames.append(gaze(t, float(x), 500.0))
        t += 1
    for _ in range(26):
        frames.append(gaze(t, SELECT_BOX.center.x, SELECT_BOX.center.y))
        t += 1
    for _ in range(40):
        frames.append(gaze(t, link_xy[0], link_xy[1]))
        t += 1
    return frames


def test_hello_ack_and_version_check(fixture_bundle):
    session = new_session(fixture_bundle)
    out, close = session.handle(hello())
    assert not close
    assert out == [{"type": "ACK", "what": "HELLO", "protocol_version": PROTOCOL_VERSION}]
    bad = new_session(fixture_bundle)
    out, close = bad.handle({"type": "HELLO", "protocol_version": "gdw/0"})
    assert close
    assert out[0]["type"] == "ERROR" and out[0]["code"] == "bad_version"


def test_messages_before_hello_close_session(fixture_bundle):
    session = new_session(fixture_bundle)
    out, close = session.handle(gaze(0, 1.0, 2.0))
    assert close
    assert out[0]["code"] == "expected_hello"


def test_gaze_before_layout_is_protocol_error(fixture_bundle):
    session = new_session(fixture_bundle)
    session.handle(hello())
    out, close = session.handle(gaze(0, 1.0, 2.0))
    assert close
    assert out[0]["code"] == "no_layout"


def test_malformed_frames_keep_session_alive(fixture_bundle):
    session = new_session(fixture_bundle)
    session.handle(hello())
    out, close = session.handle("this is not json")
    assert not close and out[0]["code"] == "bad_json"
    out, close = session.handle({"type": "WAT"})
    assert not close and out[0]["code"] == "unknown_type"
    out, close = session.handle(page_layout())
    assert not close and out[0]["what"] == "PAGE_LAYOUT"
    out, close = session.handle({"type": "GAZE", "t": 0})  # missing coordinates
    assert not close and out[0]["code"] == "bad_message"
    out, close = session.handle(gaze(0, 150.0, 110.0))
    assert not close and out == []


def test_out_of_order_stamp_closes_session(fixture_bundle):
    session = new_session(fixture_bundle)
    session.handle(hello())
    session.handle(page_layout())
    session.handle(gaze(5, 1.0, 2.0))
    out, close = session.handle(gaze(5, 1.0, 2.0))
    assert close and out[0]["code"] == "out_of_order"


def test_full_selection_flow(fixture_bundle):
    session = new_session(fixture_bundle)
    out = replay_transcript(session, scripted_selection_frames())
    kinds = [m["type"] for m in out]
    assert kinds[:2] == ["ACK", "ACK"]
    assert "COMMAND" in kinds and "DWELLS" in kinds and "SELECTED" in kinds
    cmd = out[kinds.index("COMMAND")]
    assert cmd["name"] == "SELECT"
    dwells = out[kinds.index("DWELLS")]
    assert {e["id"] for e in dwells["links"]} == {1, 2}
    assert all("p" in e and "n" in e and "t_ms" in e for e in dwells["links"])
    selected = out[kinds.index("SELECTED")]
    assert selected["id"] == 1
    assert selected["response_time_ms"] <= dwells["links"][0]["t_ms"] + 200.0


def test_posterior_suppressed_by_privacy_flag(fixture_bundle):
    session = new_session(fixture_bundle, include_posterior=False)
    out = replay_transcript(session, scripted_selection_frames())
    dwells = next(m for m in out if m["type"] == "DWELLS")
    assert all("p" not in e for e in dwells["links"])


def test_replay_determinism(fixture_bundle):
    frames = scripted_selection_frames()
    a = replay_transcript(new_session(fixture_bundle), frames)
    b = replay_transcript(new_session(fixture_bundle), frames)
    assert a == b


def test_interleaved_sessions_match_solo_transcripts(fixture_bundle):
    frames_a = scripted_selection_frames()
    frames_b = scripted_selection_frames(link_xy=(150.0, 210.0))
    solo_a = replay_transcript(new_session(fixture_bundle), frames_a)
    solo_b = replay_transcript(new_session(fixture_bundle), frames_b)
    sa, sb = new_session(fixture_bundle), new_session(fixture_bundle)
    out_a, out_b = [], []
    for fa, fb in zip(frames_a, frames_b):
        out_a.extend(sa.handle(fa)[0])
        out_b.extend(sb.handle(fb)[0])
    assert out_a == solo_a
    assert out_b == solo_b


def test_reset_mid_selection_returns_to_browsing(fixture_bundle):
    session = new_session(fixture_bundle)
    frames = scripted_selection_frames()
    # Stop right after the DWELLS message (selection phase active).
    for frame in frames:
        out, _ = session.handle(frame)
        if any(m["type"] == "DWELLS" for m in out):
            break
    assert session.engine.state.phase.value == "SELECTING"
    out, close = session.handle({"type": "RESET"})
    assert not close and out == [{"type": "ACK", "what": "RESET"}]
    assert session.engine.state.phase.value == "BROWSING"


def test_cancel_after_selection_reports_link(fixture_bundle):
    session = new_session(fixture_bundle)
    replay_transcript(session, scripted_selection_frames())
    out, close = session.handle({"type": "CANCEL"})
    assert not close
    assert out == [{"type": "ACK", "what": "CANCEL", "cancelled_link": 1}]
    out, _ = session.handle({"type": "CANCEL"})
    assert out == [{"type": "ACK", "what": "CANCEL"}]


def test_page_layout_resets_gaze_buffer(fixture_bundle):
    session = new_session(fixture_bundle)
    session.handle(hello())
    session.handle(page_layout())
    for t in range(10):
        session.handle(gaze(t, 150.0, 110.0))
    assert len(session.engine.state.buffer) == 10
    session.handle(page_layout())
    assert session.engine.state.buffer == []


def test_encode_message_compact():
    assert encode_message({"type": "ACK", "what": "HELLO"}) == '{"type":"ACK","what":"HELLO"}'
