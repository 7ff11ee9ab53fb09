"""Real-time session state machine for two-step gaze selection.

The engine consumes one 60 Hz gaze sample at a time.  While BROWSING it
watches the four command buttons (400 ms dwell each) and buffers the gaze
trajectory.  Activating "Select" runs the two-stage model over the buffered
trajectory, assigns per-link dwells from the posterior and enters the
SELECTING phase, in which hyperlink m fires as soon as N_m of the most
recent ceil(1.5 * N_m) samples are assigned to it.

A sample assigned to no entity still advances every window (it counts
against the window, not the threshold).  The window factor is configurable;
buttons can alternatively require strictly consecutive samples.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .geometry import BoundingBox, PageLayout, Point, assign_gaze
from .intent import IntentModelParams, IntentPosterior, forward_posterior
from .policy import DwellAssignment, PolicyParams, assign_dwells
from .segmentation import GazeSample, SegModelParams, extract_fixations, viterbi_labels
from .units import TS_MS

BUTTON_DWELL_MS = 400.0
WINDOW_FACTOR = 1.5


class Command(str, Enum):
    BACK = "BACK"
    SELECT = "SELECT"
    CANCEL = "CANCEL"
    FORWARD = "FORWARD"


@dataclass(frozen=True)
class ButtonRegion:
    command: Command
    bbox: BoundingBox


def default_task_bar(screen_width: float, screen_height: float,
                     width: float = 90.0, height: float = 90.0,
                     gap: float = 30.0) -> list[ButtonRegion]:
    """Back/Select/Cancel/Forward stacked on the right-hand task bar."""
    commands = (Command.BACK, Command.SELECT, Command.CANCEL, Command.FORWARD)
    total = len(commands) * height + (len(commands) - 1) * gap
    top = (screen_height - total) / 2.0
    left = screen_width - width - 10.0
    buttons = []
    for i, cmd in enumerate(commands):
        buttons.append(ButtonRegion(cmd, BoundingBox(left, top + i * (height + gap), width, height)))
    return buttons


class Phase(str, Enum):
    BROWSING = "BROWSING"
    SELECTING = "SELECTING"


@dataclass(frozen=True)
class CommandActivated:
    command: Command
    t: int


@dataclass(frozen=True)
class DwellsAssigned:
    assignment: DwellAssignment
    posterior: IntentPosterior


@dataclass(frozen=True)
class LinkSelected:
    link_id: int
    t: int
    left_select_at: Optional[int]  # first post-activation sample off the Select button
    response_time_ms: float


@dataclass(frozen=True)
class SelectionCancelled:
    link_id: Optional[int]


EngineEvent = Union[CommandActivated, DwellsAssigned, LinkSelected, SelectionCancelled]


class OutOfOrderError(ValueError):
    pass


class _Window:
    """Sliding count of hits over the last `size` samples."""

    __slots__ = ("n", "size", "buf", "count")

    def __init__(self, n: int, factor: float = WINDOW_FACTOR):
        self.n = n
        self.size = max(1, math.ceil(factor * n))
        self.buf: deque[int] = deque(maxlen=self.size)
        self.count = 0

    def push(self, hit: bool) -> bool:
        if len(self.buf) == self.size:
            self.count -= self.buf[0]
        self.buf.append(1 if hit else 0)
        if hit:
            self.count += 1
        return self.count >= self.n

    def reset(self):
        self.buf.clear()
        self.count = 0


class _Consecutive:
    """Strict variant: fires after n consecutive hits."""

    __slots__ = ("n", "run")

    def __init__(self, n: int):
        self.n = n
        self.run = 0

    def push(self, hit: bool) -> bool:
        self.run = self.run + 1 if hit else 0
        return self.run >= self.n

    def reset(self):
        self.run = 0


class LinkSelector:
    """The N_m-of-ceil(1.5*N_m) rule over every link of a layout."""

    def __init__(self, layout: PageLayout, assignment: DwellAssignment,
                 window_factor: float = WINDOW_FACTOR, threshold: float = 40.0):
        self.layout = layout
        self.assignment = assignment
        self.threshold = threshold
        self.windows = [_Window(assignment.n_samples[i], window_factor)
                        for i in range(layout.n_links)]

    def push_assignment(self, assigned: Optional[int]) -> Optional[int]:
        """Advance all windows with a precomputed link assignment; return the
        selected link id if one or more links fire (smallest dwell, then
        lowest id, wins)."""
        fired = []
        for i, w in enumerate(self.windows):
            if w.push(assigned == i + 1):
                fired.append(i + 1)
        if not fired:
            return None
        return min(fired, key=lambda m: (self.assignment.n_samples[m - 1], m))

    def push(self, p: Point) -> Optional[int]:
        return self.push_assignment(assign_gaze(p, self.layout, self.threshold))


def replay_selection(samples: Sequence[GazeSample], layout: PageLayout,
                     assignment: DwellAssignment, window_factor: float = WINDOW_FACTOR,
                     threshold: float = 40.0) -> tuple[Optional[int], Optional[int]]:
    """Run only the SELECTING phase over a sample stream.

    Returns (link id, sample index of the selection) or (None, None) when the
    stream ends without any link firing.
    """
    selector = LinkSelector(layout, assignment, window_factor, threshold)
    for s in samples:
        winner = selector.push(Point(s.x, s.y))
        if winner is not None:
            return winner, s.t
    return None, None


@dataclass
class SessionState:
    phase: Phase = Phase.BROWSING
    buffer: list[GazeSample] = field(default_factory=list)
    assignment: Optional[DwellAssignment] = None
    posterior: Optional[IntentPosterior] = None
    last_selected: Optional[int] = None
    last_t: Optional[int] = None
    left_select_at: Optional[int] = None


class SelectionEngine:
    """One engine per session; feed_gaze/cancel must be called from a single
    logical stream.  Trained parameters are never mutated."""

    def __init__(self, seg_params: SegModelParams, intent_params: IntentModelParams,
                 policy: PolicyParams, quantize: str = "per-sample",
                 layout: Optional[PageLayout] = None,
                 buttons: Optional[Sequence[ButtonRegion]] = None,
                 button_dwell_ms: float = BUTTON_DWELL_MS,
                 window_factor: float = WINDOW_FACTOR,
                 consecutive_buttons: bool = False,
                 assign_threshold: float = 40.0):
        self.seg_params = seg_params
        self.intent_params = intent_params
        self.policy = policy
        self.quantize = quantize
        self.window_factor = window_factor
        self.consecutive_buttons = consecutive_buttons
        self.assign_threshold = assign_threshold
        self.button_n = max(1, math.floor(button_dwell_ms / TS_MS + 0.5))
        self.state = SessionState()
        self.layout: Optional[PageLayout] = None
        self.buttons: list[ButtonRegion] = []
        self._button_windows: list[_Window | _Consecutive] = []
        self._selector: Optional[LinkSelector] = None
        self._select_box: Optional[BoundingBox] = None
        if layout is not None:
            self.present_page(layout, buttons)

    # -- session control ----------------------------------------------------

    def present_page(self, layout: PageLayout, buttons: Optional[Sequence[ButtonRegion]] = None):
        """Install a new page; resets the whole session to BROWSING."""
        self.layout = layout
        if buttons is not None:
            self.buttons = list(buttons)
        elif not self.buttons:
            self.buttons = default_task_bar(layout.screen_width, layout.screen_height)
        self._button_windows = [self._new_button_window() for _ in self.buttons]
        last_t = self.state.last_t
        self.state = SessionState(last_t=last_t)
        self._selector = None
        self._select_box = None

    def _new_button_window(self):
        if self.consecutive_buttons:
            return _Consecutive(self.button_n)
        return _Window(self.button_n, self.window_factor)

    def _reset_button_windows(self):
        for w in self._button_windows:
            w.reset()

    # -- the 60 Hz path ------------------------------------------------------

    def feed_gaze(self, sample: GazeSample) -> list[EngineEvent]:
        if self.layout is None:
            raise RuntimeError("no page layout presented")
        st = self.state
        if st.last_t is not None and sample.t <= st.last_t:
            raise OutOfOrderError(f"sample index {sample.t} not after {st.last_t}")
        st.last_t = sample.t
        p = Point(sample.x, sample.y)
        if st.phase is Phase.BROWSING:
            return self._feed_browsing(sample, p)
        return self._feed_selecting(sample, p)

    def _feed_browsing(self, sample: GazeSample, p: Point) -> list[EngineEvent]:
        st = self.state
        st.buffer.append(sample)
        fired = None
        for button, window in zip(self.buttons, self._button_windows):
            if window.push(button.bbox.contains(p)) and fired is None:
                fired = button
        if fired is None:
            return []
        self._reset_button_windows()
        events: list[EngineEvent] = [CommandActivated(fired.command, sample.t)]
        if fired.command is Command.SELECT:
            posterior = self._infer(st.buffer)
            assignment = assign_dwells(posterior, self.policy, self.quantize)
            events.append(DwellsAssigned(assignment, posterior))
            st.buffer = []
            st.phase = Phase.SELECTING
            st.assignment = assignment
            st.posterior = posterior
            st.left_select_at = None
            self._select_box = fired.bbox
            self._selector = LinkSelector(self.layout, assignment,
                                          self.window_factor, self.assign_threshold)
        elif fired.command is Command.CANCEL:
            ev = self.cancel()
            if ev is not None:
                events.append(ev)
        return events

    def _feed_selecting(self, sample: GazeSample, p: Point) -> list[EngineEvent]:
        st = self.state
        if st.left_select_at is None and not self._select_box.contains(p):
            st.left_select_at = sample.t
        # The Cancel button stays live during selection.
        for button, window in zip(self.buttons, self._button_windows):
            if button.command is Command.CANCEL and window.push(button.bbox.contains(p)):
                self._revert_to_browsing()
                return [CommandActivated(Command.CANCEL, sample.t)]
        winner = self._selector.push(p)
        if winner is None:
            return []
        left_at = st.left_select_at
        rt_ms = 0.0 if left_at is None else (sample.t - left_at) * TS_MS
        event = LinkSelected(winner, sample.t, left_at, rt_ms)
        st.last_selected = winner
        self._revert_to_browsing()
        return [event]

    def cancel(self) -> Optional[EngineEvent]:
        """Cancel the selection phase, or the selection that just fired.

        Returns SELECTION_CANCELLED (with the link to undo) when a completed
        selection was cancelled, None otherwise (including the no-op case).
        """
        st = self.state
        if st.phase is Phase.SELECTING:
            self._revert_to_browsing()
            return None
        if st.last_selected is not None:
            ev = SelectionCancelled(st.last_selected)
            st.last_selected = None
            st.buffer = []
            return ev
        return None

    def _revert_to_browsing(self):
        st = self.state
        st.phase = Phase.BROWSING
        st.assignment = None
        st.posterior = None
        st.left_select_at = None
        st.buffer = []
        self._selector = None
        self._select_box = None
        self._reset_button_windows()

    # -- inference ------------------------------------------------------------

    def _infer(self, buffer: Sequence[GazeSample]) -> IntentPosterior:
        """Posterior from the buffered trajectory; uniform when the buffer is
        too short to segment or contains no usable fixation."""
        M = self.layout.n_links
        if len(buffer) >= 3:
            trace = [GazeSample(i, s.x, s.y) for i, s in enumerate(buffer)]
            labels = viterbi_labels(trace, self.seg_params)
            scanpath = extract_fixations(trace, labels)
            if scanpath:
                return forward_posterior(scanpath, self.layout, self.intent_params)
        return IntentPosterior(np.full(M, 1.0 / M))


def response_time(events: Sequence[EngineEvent]) -> float:
    """Time from leaving the activated Select button to the link selection.

    Scans the event log for the most recent Select activation followed by a
    LINK_SELECTED event and returns (selection index - first off-button
    index) * sample period; 0 when the selection fired before the gaze ever
    left the button.
    """
    select_seen = False
    for ev in reversed(list(events)):
        if isinstance(ev, LinkSelected):
            chosen = ev
            break
    else:
        raise ValueError("no LINK_SELECTED event in the log")
    for ev in events:
        if isinstance(ev, CommandActivated) and ev.command is Command.SELECT and ev.t <= chosen.t:
            select_seen = True
    if not select_seen:
        raise ValueError("no Select activation precedes the selection")
    if chosen.left_select_at is None:
        return 0.0
    return (chosen.t - chosen.left_select_at) * TS_MS
