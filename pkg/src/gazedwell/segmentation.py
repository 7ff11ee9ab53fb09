"""Second-order HMM labelling of raw gaze samples and scanpath extraction.

Every 60 Hz gaze sample gets one of three labels: FIXATION, SACCADE or
OUTLIER.  Outliers are isolated bad samples inside fixations, so transitions
between OUTLIER and SACCADE (either direction) and OUTLIER self-transitions
are structurally forbidden.  The label chain is second order: the
distribution of the current label conditions on the previous two labels, and
the Gaussian emission of the current sample conditions on the previous two
samples and the label triple.

Decoding and training reduce the second-order chain to a first-order chain
over label *pairs* (previous label, current label).  Only 6 of the 9 pairs
are reachable, and only 14 pair-to-pair edges (the allowed triples) exist.
All probability arithmetic is done in log space; 30 s of 60 Hz data (~1800
samples) underflows linear-space products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np

from .units import TS_MS

LOG_2PI = math.log(2.0 * math.pi)

MIN_FIXATION_MS = 100.0
VARIANCE_FLOOR = 1.0  # px^2, keeps EM away from singular covariances


class Label(IntEnum):
    FIXATION = 0
    SACCADE = 1
    OUTLIER = 2


F, S, O = Label.FIXATION, Label.SACCADE, Label.OUTLIER

# Reachable (previous, current) label pairs; o-s, s-o and o-o never occur.
ALLOWED_PAIRS: tuple[tuple[Label, Label], ...] = (
    (F, F), (F, S), (F, O), (S, F), (S, S), (O, F),
)
PAIR_INDEX = {pair: i for i, pair in enumerate(ALLOWED_PAIRS)}

# The 14 allowed triples (a, b, c): (a, b) and (b, c) both allowed pairs.
ALLOWED_TRIPLES: tuple[tuple[Label, Label, Label], ...] = tuple(
    (a, b, c)
    for (a, b) in ALLOWED_PAIRS
    for c in (F, S, O)
    if (b, c) in PAIR_INDEX
)

# Edge view of the triples for the pair-state chain.
EDGE_SRC = np.array([PAIR_INDEX[(a, b)] for a, b, c in ALLOWED_TRIPLES])
EDGE_DST = np.array([PAIR_INDEX[(b, c)] for a, b, c in ALLOWED_TRIPLES])
EDGE_NEXT = np.array([int(c) for a, b, c in ALLOWED_TRIPLES])
_EDGES_INTO = [np.nonzero(EDGE_DST == d)[0] for d in range(len(ALLOWED_PAIRS))]
_EDGES_FROM = [np.nonzero(EDGE_SRC == s)[0] for s in range(len(ALLOWED_PAIRS))]


@dataclass(frozen=True)
class GazeSample:
    """One 60 Hz gaze tracker sample; t counts sample periods (TS_MS each)."""
    t: int
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass
class SegModelParams:
    """Transition table and emission covariances of the label model.

    transition[p, c] = P(next label = c | previous pair = ALLOWED_PAIRS[p]);
    forbidden entries are exactly zero, each row sums to one over its allowed
    continuations (14 nonzero entries in total).  var_f/var_s/var_o are the
    diagonals of the three emission covariance matrices, in px^2.
    """
    transition: np.ndarray
    var_f: np.ndarray
    var_s: np.ndarray
    var_o: np.ndarray

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.var_f = np.asarray(self.var_f, dtype=float)
        self.var_s = np.asarray(self.var_s, dtype=float)
        self.var_o = np.asarray(self.var_o, dtype=float)
        if self.transition.shape != (len(ALLOWED_PAIRS), 3):
            raise ValueError("transition must be 6x3 over (pair, next label)")
        for p, (a, b) in enumerate(ALLOWED_PAIRS):
            row = self.transition[p]
            for c in (F, S, O):
                if (b, c) not in PAIR_INDEX and row[int(c)] != 0.0:
                    raise ValueError(f"forbidden transition {a.name},{b.name}->{c.name} must be 0")
            if not math.isclose(row.sum(), 1.0, abs_tol=1e-9):
                raise ValueError(f"transition row {a.name},{b.name} must sum to 1")
        for v in (self.var_f, self.var_s, self.var_o):
            if v.shape != (2,) or np.any(v <= 0):
                raise ValueError("covariance diagonals must be two strictly positive values")

    def log_transition(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.transition)


def default_seg_params() -> SegModelParams:
    """Untrained starting point: uniform allowed transitions, fixation jitter
    far smaller than saccade amplitude."""
    trans = np.zeros((len(ALLOWED_PAIRS), 3))
    for p, (a, b) in enumerate(ALLOWED_PAIRS):
        allowed = [int(c) for c in (F, S, O) if (b, c) in PAIR_INDEX]
        trans[p, allowed] = 1.0 / len(allowed)
    return SegModelParams(
        transition=trans,
        var_f=np.array([25.0, 25.0]),
        var_s=np.array([1.0e4, 1.0e4]),
        var_o=np.array([4.0e4, 4.0e4]),
    )


def _emission_mean(a: Label, b: Label, g2: tuple[float, float], g1: tuple[float, float]):
    """Predicted location of the current sample given the two previous ones."""
    if b == F:
        if a == O:
            return g1
        return ((g2[0] + g1[0]) / 2.0, (g2[1] + g1[1]) / 2.0)
    if b == O:  # only reachable with a == F
        return g2
    return g1  # b == S (a != O by construction)


def _emission_var(a: Label, b: Label, c: Label, params: SegModelParams) -> np.ndarray:
    if c == S:
        return params.var_s
    if c == O:
        return params.var_o
    if b == F and a != O:
        return 1.5 * params.var_f
    return 2.0 * params.var_f


def emission_logdensity(l2: Label, l1: Label, l0: Label,
                        g2: tuple[float, float], g1: tuple[float, float],
                        g0: tuple[float, float], params: SegModelParams) -> float:
    """Log density of sample g0 under label triple (l2, l1, l0).

    Raises ValueError for triples the chain cannot produce.
    """
    if (l2, l1, l0) not in set(ALLOWED_TRIPLES):
        raise ValueError(f"forbidden label triple {l2.name},{l1.name},{l0.name}")
    mx, my = _emission_mean(l2, l1, g2, g1)
    vx, vy = _emission_var(l2, l1, l0, params)
    return (-LOG_2PI - 0.5 * (math.log(vx) + math.log(vy))
            - 0.5 * ((g0[0] - mx) ** 2 / vx + (g0[1] - my) ** 2 / vy))


def _triple_emissions(xs: np.ndarray, ys: np.ndarray, params: SegModelParams,
                      want_residuals: bool = False):
    """Emission log densities for every allowed triple at every position t >= 2.

    Returns an array of shape (T-2, 14); column k corresponds to
    ALLOWED_TRIPLES[k] scoring sample t given samples t-2 and t-1.  When
    want_residuals is set, also returns squared residuals (dx^2, dy^2) per
    position and triple, which the M-step reuses.
    """
    T = len(xs)
    x0, x1, x2 = xs[2:], xs[1:-1], xs[:-2]
    y0, y1, y2 = ys[2:], ys[1:-1], ys[:-2]
    le = np.empty((T - 2, len(ALLOWED_TRIPLES)))
    r2x = np.empty_like(le) if want_residuals else None
    r2y = np.empty_like(le) if want_residuals else None
    for k, (a, b, c) in enumerate(ALLOWED_TRIPLES):
        if b == F:
            if a == O:
                mx, my = x1, y1
            else:
                mx, my = (x2 + x1) / 2.0, (y2 + y1) / 2.0
        elif b == O:
            mx, my = x2, y2
        else:
            mx, my = x1, y1
        vx, vy = _emission_var(a, b, c, params)
        dx2 = (x0 - mx) ** 2
        dy2 = (y0 - my) ** 2
        le[:, k] = (-LOG_2PI - 0.5 * (math.log(vx) + math.log(vy))
                    - 0.5 * (dx2 / vx + dy2 / vy))
        if want_residuals:
            r2x[:, k] = dx2
            r2y[:, k] = dy2
    if want_residuals:
        return le, r2x, r2y
    return le


def _as_xy(trace: Sequence[GazeSample]) -> tuple[np.ndarray, np.ndarray]:
    xs = np.array([s.x for s in trace], dtype=float)
    ys = np.array([s.y for s in trace], dtype=float)
    return xs, ys


def _check_trace(trace: Sequence[GazeSample]):
    if len(trace) < 3:
        raise ValueError("need at least 3 samples to label a trace")
    for prev, cur in zip(trace, trace[1:]):
        if cur.t != prev.t + 1:
            raise ValueError(f"sample indices must increase by 1 (got {prev.t} -> {cur.t})")


_LOG_INIT = math.log(1.0 / len(ALLOWED_PAIRS))


def sequence_logprob(trace: Sequence[GazeSample], labels: Sequence[Label],
                     params: SegModelParams) -> float:
    """Joint log probability of (labels, samples) under the chain.

    The uniform density of the first two coordinates over the screen is a
    label-independent constant and is omitted, here and in every other score
    in this module, so returned values are comparable to each other.
    """
    _check_trace(trace)
    if len(labels) != len(trace):
        raise ValueError("labels must align with the trace")
    logt = params.log_transition()
    total = _LOG_INIT
    for t in range(2, len(trace)):
        a, b, c = labels[t - 2], labels[t - 1], labels[t]
        if (a, b) not in PAIR_INDEX or (b, c) not in PAIR_INDEX:
            return -math.inf
        total += logt[PAIR_INDEX[(a, b)], int(c)]
        total += emission_logdensity(a, b, c,
                                     (trace[t - 2].x, trace[t - 2].y),
                                     (trace[t - 1].x, trace[t - 1].y),
                                     (trace[t].x, trace[t].y), params)
    return total


def viterbi_labels(trace: Sequence[GazeSample], params: SegModelParams) -> list[Label]:
    """Most probable label sequence (max of the joint in sequence_logprob)."""
    _check_trace(trace)
    xs, ys = _as_xy(trace)
    T = len(trace)
    le = _triple_emissions(xs, ys, params)
    logt_edge = params.log_transition()[EDGE_SRC, EDGE_NEXT]

    n_pairs = len(ALLOWED_PAIRS)
    delta = np.full(n_pairs, _LOG_INIT)
    back = np.zeros((T - 2, n_pairs), dtype=int)  # winning edge index per (t, dst)
    for t in range(2, T):
        scores = delta[EDGE_SRC] + logt_edge + le[t - 2]
        new = np.full(n_pairs, -np.inf)
        for d in range(n_pairs):
            e = _EDGES_INTO[d]
            k = e[np.argmax(scores[e])]
            back[t - 2, d] = k
            new[d] = scores[k]
        delta = new

    labels: list[Label] = [F] * T
    d = int(np.argmax(delta))
    labels[T - 2], labels[T - 1] = ALLOWED_PAIRS[d]
    for t in range(T - 1, 1, -1):
        k = back[t - 2, d]
        d = int(EDGE_SRC[k])
        labels[t - 2] = ALLOWED_PAIRS[d][0]
    return labels


def _logsumexp(v: np.ndarray) -> float:
    m = v.max()
    if m == -np.inf:
        return -math.inf
    return float(m + np.log(np.exp(v - m).sum()))


def _forward(le: np.ndarray, logt_edge: np.ndarray) -> tuple[np.ndarray, float]:
    """Log forward messages over pair states; returns (alphas, log likelihood)."""
    n_steps = le.shape[0]
    n_pairs = len(ALLOWED_PAIRS)
    alpha = np.empty((n_steps + 1, n_pairs))
    alpha[0, :] = _LOG_INIT
    for i in range(n_steps):
        scores = alpha[i, EDGE_SRC] + logt_edge + le[i]
        for d in range(n_pairs):
            alpha[i + 1, d] = _logsumexp(scores[_EDGES_INTO[d]])
    return alpha, _logsumexp(alpha[-1])


def _backward(le: np.ndarray, logt_edge: np.ndarray) -> np.ndarray:
    n_steps = le.shape[0]
    n_pairs = len(ALLOWED_PAIRS)
    beta = np.empty((n_steps + 1, n_pairs))
    beta[-1, :] = 0.0
    for i in range(n_steps - 1, -1, -1):
        scores = logt_edge + le[i] + beta[i + 1, EDGE_DST]
        for s in range(n_pairs):
            beta[i, s] = _logsumexp(scores[_EDGES_FROM[s]])
    return beta


def trace_loglik(trace: Sequence[GazeSample], params: SegModelParams) -> float:
    """Log likelihood of one trace with labels marginalised out."""
    _check_trace(trace)
    xs, ys = _as_xy(trace)
    le = _triple_emissions(xs, ys, params)
    logt_edge = params.log_transition()[EDGE_SRC, EDGE_NEXT]
    return _forward(le, logt_edge)[1]


@dataclass
class SegTrainResult:
    params: SegModelParams
    log_likelihoods: list[float]
    notes: list[str] = field(default_factory=list)


def train_segmentation(traces: Iterable[Sequence[GazeSample]],
                       init: Optional[SegModelParams] = None,
                       max_iters: int = 200,
                       tol: float = 1e-6,
                       var_floor: float = VARIANCE_FLOOR) -> SegTrainResult:
    """Baum-Welch on the pair-state chain, preserving the structural zeros.

    The fit alternates exact E-steps (forward-backward per trace) with closed
    form M-steps for the 14 transition probabilities and three diagonal
    covariances.  Diagonals are floored at `var_floor` so constant traces
    cannot collapse a covariance.  Stops when the relative improvement in
    total log likelihood falls below `tol`.
    """
    traces = [list(tr) for tr in traces]
    if not traces:
        raise ValueError("training corpus is empty")
    for tr in traces:
        _check_trace(tr)
    params = init if init is not None else default_seg_params()

    # Per-trace data reused every iteration.
    data = [_as_xy(tr) for tr in traces]

    n_pairs = len(ALLOWED_PAIRS)
    n_edges = len(ALLOWED_TRIPLES)
    f_edges = [k for k, (a, b, c) in enumerate(ALLOWED_TRIPLES) if c == F]
    f_scale = np.array([1.5 if (b == F and a != O) else 2.0
                        for (a, b, c) in [ALLOWED_TRIPLES[k] for k in f_edges]])
    s_edges = [k for k, (a, b, c) in enumerate(ALLOWED_TRIPLES) if c == S]
    o_edges = [k for k, (a, b, c) in enumerate(ALLOWED_TRIPLES) if c == O]

    history: list[float] = []
    notes: list[str] = []
    prev_ll = -math.inf
    for iteration in range(max_iters):
        logt_edge = params.log_transition()[EDGE_SRC, EDGE_NEXT]
        edge_counts = np.zeros(n_edges)
        var_num = {"f": np.zeros(2), "s": np.zeros(2), "o": np.zeros(2)}
        var_den = {"f": 0.0, "s": 0.0, "o": 0.0}
        total_ll = 0.0

        for xs, ys in data:
            le, r2x, r2y = _triple_emissions(xs, ys, params, want_residuals=True)
            alpha, ll = _forward(le, logt_edge)
            beta = _backward(le, logt_edge)
            total_ll += ll
            # Posterior edge weights, all steps at once: (n_steps, 14).
            xi = np.exp(alpha[:-1, EDGE_SRC] + logt_edge + le + beta[1:, EDGE_DST] - ll)
            edge_counts += xi.sum(axis=0)
            xi_f = xi[:, f_edges]
            var_num["f"][0] += (xi_f * r2x[:, f_edges] / f_scale).sum()
            var_num["f"][1] += (xi_f * r2y[:, f_edges] / f_scale).sum()
            var_den["f"] += xi_f.sum()
            xi_s = xi[:, s_edges]
            var_num["s"][0] += (xi_s * r2x[:, s_edges]).sum()
            var_num["s"][1] += (xi_s * r2y[:, s_edges]).sum()
            var_den["s"] += xi_s.sum()
            xi_o = xi[:, o_edges]
            var_num["o"][0] += (xi_o * r2x[:, o_edges]).sum()
            var_num["o"][1] += (xi_o * r2y[:, o_edges]).sum()
            var_den["o"] += xi_o.sum()

        history.append(total_ll)

        # M-step: transitions.
        trans = np.zeros((n_pairs, 3))
        for p in range(n_pairs):
            ks = _EDGES_FROM[p]
            row_total = edge_counts[ks].sum()
            if row_total <= 0.0:
                trans[p] = params.transition[p]
                notes.append(f"pair {ALLOWED_PAIRS[p][0].name},{ALLOWED_PAIRS[p][1].name} "
                             "had zero occupancy; row left at its previous value")
                continue
            for k in ks:
                trans[p, EDGE_NEXT[k]] = edge_counts[k] / row_total
        # M-step: covariances (floored).
        new_vars = {}
        for name, current in (("f", params.var_f), ("s", params.var_s), ("o", params.var_o)):
            if var_den[name] <= 0.0:
                new_vars[name] = current
                notes.append(f"state {name} had zero occupancy; covariance left at its previous value")
            else:
                new_vars[name] = np.maximum(var_num[name] / var_den[name], var_floor)
        params = SegModelParams(transition=trans, var_f=new_vars["f"],
                                var_s=new_vars["s"], var_o=new_vars["o"])

        if iteration > 0 and total_ll - prev_ll < tol * abs(prev_ll):
            break
        prev_ll = total_ll

    return SegTrainResult(params=params, log_likelihoods=history, notes=notes)


@dataclass(frozen=True)
class FixationEvent:
    """One fixation: mean location of its FIXATION samples plus the full span
    (in sample indices) between the bounding saccades."""
    x: float
    y: float
    duration_ms: float
    start_index: int
    end_index: int


Scanpath = list  # list[FixationEvent]; the ordered fixation sequence


def extract_fixations(trace: Sequence[GazeSample], labels: Sequence[Label],
                      min_duration_ms: float = MIN_FIXATION_MS) -> list[FixationEvent]:
    """Group labelled samples into fixations.

    Each maximal run of non-SACCADE samples (fixations plus embedded
    outliers) is one candidate.  Its location averages only the
    FIXATION-labelled samples; its duration spans the run inclusively, i.e.
    first-to-last sample of the run at one sample period each.  Candidates
    shorter than `min_duration_ms` or with no FIXATION samples are dropped.
    """
    if len(labels) != len(trace):
        raise ValueError("labels must align with the trace")
    events: list[FixationEvent] = []
    run_start: Optional[int] = None
    for i in range(len(trace) + 1):
        boundary = i == len(trace) or labels[i] == S
        if boundary:
            if run_start is not None:
                events.extend(_close_run(trace, labels, run_start, i - 1, min_duration_ms))
                run_start = None
        elif run_start is None:
            run_start = i
    return events


def _close_run(trace, labels, i0, i1, min_duration_ms):
    n = i1 - i0 + 1
    duration = n * TS_MS
    fix_pts = [(trace[i].x, trace[i].y) for i in range(i0, i1 + 1) if labels[i] == F]
    if duration < min_duration_ms or not fix_pts:
        return []
    x = sum(p[0] for p in fix_pts) / len(fix_pts)
    y = sum(p[1] for p in fix_pts) / len(fix_pts)
    return [FixationEvent(x=x, y=y, duration_ms=duration,
                          start_index=trace[i0].t, end_index=trace[i1].t)]


def segment_trace(trace: Sequence[GazeSample], params: SegModelParams,
                  min_duration_ms: float = MIN_FIXATION_MS) -> list[FixationEvent]:
    """Label a trace and extract its scanpath in one call."""
    labels = viterbi_labels(trace, params)
    return extract_fixations(trace, labels, min_duration_ms)
