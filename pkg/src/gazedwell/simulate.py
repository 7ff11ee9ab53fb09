"""Policy evaluation by trace replay, synthetic corpora and grid search.

A trial is replayed in two halves: the gaze trajectory up to the "Select"
activation feeds the two-stage model and fixes the per-link dwells, then the
trajectory after the gaze left the button runs through the selection rule
until some link fires (or the trial times out).  Error rate counts trials
whose selected link is not the recorded target (timeouts included); response
time averages the selection delay over trials that selected anything.

`grid_search` sweeps every valid four-parameter policy on a shared set of
precomputed replay tables; `simulate_policy` replays a single policy through
the selection engine itself.  Both paths are exact implementations of the
same rule and are cross-checked in the test suite.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import WINDOW_FACTOR, replay_selection
from .geometry import BoundingBox, Hyperlink, PageLayout, assign_gaze_batch
from .intent import IntentModelParams, forward_posterior, sample_scanpath
from .policy import PolicyParams, assign_dwells, quantize_dwell
from .segmentation import GazeSample, SegModelParams, extract_fixations, viterbi_labels
from .traceio import TrialRecord
from .units import TS_MS

_NEVER = 10 ** 6  # firing-offset sentinel for "this link never fires"


@dataclass(frozen=True)
class PolicyEvalResult:
    policy: PolicyParams
    error_rate: float
    error_ci: float
    mean_response_time_ms: float
    rt_ci: float
    n_trials: int
    n_timeouts: int


def infer_posterior(trial: TrialRecord, seg_params: SegModelParams,
                    intent_params: IntentModelParams) -> np.ndarray:
    """Segment the pre-select trajectory and run intent inference.

    Falls back to a uniform posterior when the trajectory is too short to
    segment or yields no usable fixation.
    """
    M = trial.layout.n_links
    if len(trial.pre_select) >= 3:
        trace = [GazeSample(i, s.x, s.y) for i, s in enumerate(trial.pre_select)]
        labels = viterbi_labels(trace, seg_params)
        scanpath = extract_fixations(trace, labels)
        if scanpath:
            return forward_posterior(scanpath, trial.layout, intent_params).probs
    return np.full(M, 1.0 / M)


def _aggregate(policy: PolicyParams, n_trials: int, n_wrong: int, n_timeouts: int,
               rts_ms: Sequence[float]) -> PolicyEvalResult:
    n_err = n_wrong + n_timeouts
    p = n_err / n_trials
    err_ci = 1.96 * math.sqrt(p * (1.0 - p) / n_trials)
    rts = np.asarray(rts_ms, dtype=float)
    if rts.size == 0:
        mean_rt, rt_ci = float("nan"), float("nan")
    else:
        mean_rt = float(rts.mean())
        rt_ci = 1.96 * float(rts.std(ddof=1)) / math.sqrt(rts.size) if rts.size > 1 else 0.0
    return PolicyEvalResult(policy=policy, error_rate=p, error_ci=err_ci,
                            mean_response_time_ms=mean_rt, rt_ci=rt_ci,
                            n_trials=n_trials, n_timeouts=n_timeouts)


def simulate_policy(trials: Sequence[TrialRecord], policy: PolicyParams,
                    seg_params: SegModelParams, intent_params: IntentModelParams,
                    quantize: str = "per-sample",
                    posteriors: Optional[Sequence[np.ndarray]] = None) -> PolicyEvalResult:
    """Replay every trial through the selection engine under one policy.

    `posteriors` short-circuits the inference stage (one vector per trial),
    which both speeds up repeated calls and lets tests substitute arbitrary
    distributions.
    """
    if not trials:
        raise ValueError("no trials to simulate")
    if posteriors is None:
        posteriors = [infer_posterior(t, seg_params, intent_params) for t in trials]
    n_wrong = 0
    n_timeouts = 0
    rts: list[float] = []
    for trial, post in zip(trials, posteriors):
        assignment = assign_dwells(post, policy, quantize)
        selected, sel_t = replay_selection(trial.post_select, trial.layout, assignment)
        if selected is None:
            n_timeouts += 1
            continue
        rts.append((sel_t - trial.post_select[0].t) * TS_MS)
        if selected != trial.true_target:
            n_wrong += 1
    return _aggregate(policy, len(trials), n_wrong, n_timeouts, rts)


# ---------------------------------------------------------------------------
# Replay tables: policy-independent per-trial state for the grid sweep
# ---------------------------------------------------------------------------

@dataclass
class ReplayTables:
    posteriors: np.ndarray      # (n_trials, max_links), padded with 0
    firing: np.ndarray          # (n_trials, max_links, max_n) first firing offset or _NEVER
    link_valid: np.ndarray      # (n_trials, max_links) bool
    true_target: np.ndarray     # (n_trials,)
    max_n: int
    n_trials: int


def _firing_offsets(hits: np.ndarray, max_n: int, window_factor: float) -> np.ndarray:
    """First sample offset at which n-of-ceil(factor*n) holds, per n in 1..max_n."""
    L = len(hits)
    out = np.full(max_n, _NEVER, dtype=np.int64)
    if L == 0 or not hits.any():
        return out
    cum = np.concatenate([[0], np.cumsum(hits)])
    pos = np.arange(1, L + 1)
    for n in range(1, max_n + 1):
        w = math.ceil(window_factor * n)
        counts = cum[pos] - cum[np.maximum(0, pos - w)]
        idx = np.nonzero(counts >= n)[0]
        if idx.size:
            out[n - 1] = idx[0]
    return out


def precompute_tables(trials: Sequence[TrialRecord], seg_params: SegModelParams,
                      intent_params: IntentModelParams, max_n: int = 30,
                      window_factor: float = WINDOW_FACTOR,
                      posteriors: Optional[Sequence[np.ndarray]] = None) -> ReplayTables:
    if not trials:
        raise ValueError("no trials to precompute")
    if posteriors is None:
        posteriors = [infer_posterior(t, seg_params, intent_params) for t in trials]
    n_trials = len(trials)
    max_links = max(t.layout.n_links for t in trials)
    post = np.zeros((n_trials, max_links))
    firing = np.full((n_trials, max_links, max_n), _NEVER, dtype=np.int64)
    valid = np.zeros((n_trials, max_links), dtype=bool)
    target = np.zeros(n_trials, dtype=np.int64)
    for i, trial in enumerate(trials):
        M = trial.layout.n_links
        post[i, :M] = posteriors[i]
        valid[i, :M] = True
        target[i] = trial.true_target
        if trial.post_select:
            xs = np.array([s.x for s in trial.post_select])
            ys = np.array([s.y for s in trial.post_select])
            assigned = assign_gaze_batch(xs, ys, trial.layout)
            for m in range(1, M + 1):
                hits = assigned == m
                if hits.any():
                    firing[i, m - 1] = _firing_offsets(hits, max_n, window_factor)
    return ReplayTables(posteriors=post, firing=firing, link_valid=valid,
                        true_target=target, max_n=max_n, n_trials=n_trials)


def _nominal_array(p: np.ndarray, policy: PolicyParams) -> np.ndarray:
    """Vectorised nominal_dwell with branch expressions identical to the scalar."""
    pb = policy.p_break
    if pb == 0.0:
        second = policy.t_break - (policy.t_break - policy.t_min) * p
        return np.where(p == 0.0, policy.t_max, second)
    first = policy.t_max - (policy.t_max - policy.t_break) * p / pb
    if pb == 1.0:
        return first
    second = policy.t_break - (policy.t_break - policy.t_min) * (p - pb) / (1.0 - pb)
    return np.where(p <= pb, first, second)


def _quantize_array(t_ms: np.ndarray, mode: str) -> np.ndarray:
    if mode == "per-sample":
        return np.maximum(1, np.floor(t_ms / TS_MS + 0.5).astype(np.int64))
    if mode.startswith("coarse:"):
        q = int(mode.split(":", 1)[1])
        return np.maximum(q, q * np.floor(t_ms / (q * TS_MS)).astype(np.int64))
    raise ValueError(f"unknown quantisation mode {mode!r}")


def evaluate_policy_tabled(policy: PolicyParams, tables: ReplayTables,
                           quantize: str = "per-sample") -> PolicyEvalResult:
    """Evaluate one policy on precomputed tables (same rule as the engine)."""
    n = _quantize_array(_nominal_array(tables.posteriors, policy), quantize)
    if n.max() > tables.max_n:
        raise ValueError(f"dwell of {n.max()} samples exceeds the table depth {tables.max_n}")
    rows = np.arange(tables.n_trials)[:, None]
    cols = np.arange(tables.posteriors.shape[1])[None, :]
    fire = tables.firing[rows, cols, n - 1]
    fire = np.where(tables.link_valid, fire, _NEVER)
    # Winner: earliest firing, then smallest dwell, then lowest id, packed
    # into one sortable integer key.
    id_base = np.int64(tables.posteriors.shape[1] + 1)
    n_base = np.int64(tables.max_n + 1)
    key = (fire * n_base + n) * id_base + (cols + 1)
    key = np.where(tables.link_valid, key, np.iinfo(np.int64).max)
    winner_idx = np.argmin(key, axis=1)
    winner_fire = fire[np.arange(tables.n_trials), winner_idx]
    winner_id = winner_idx + 1
    timeout = winner_fire >= _NEVER
    wrong = (~timeout) & (winner_id != tables.true_target)
    rts = winner_fire[~timeout] * TS_MS
    return _aggregate(policy, tables.n_trials, int(wrong.sum()), int(timeout.sum()), rts)


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Policy grid: dwell axes in whole samples, probability axis in fixed steps.

    The default is one-sample time resolution from 1 to 30 samples (16.67 ms
    to 500 ms) and 0.1 probability steps, which includes every uniform policy
    as the t_min = t_max slice.
    """
    n_time_steps: int = 30
    time_step_ms: float = TS_MS
    p_breaks: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(11))

    def policies(self) -> list[PolicyParams]:
        times = [k * self.time_step_ms for k in range(1, self.n_time_steps + 1)]
        out = []
        for i, t_max in enumerate(times):
            for j in range(i + 1):          # t_min <= t_max
                for k in range(j, i + 1):   # t_min <= t_break <= t_max
                    for pb in self.p_breaks:
                        out.append(PolicyParams(t_max=t_max, t_min=times[j],
                                                t_break=times[k], p_break=pb))
        return out

    @staticmethod
    def coarse() -> "GridSpec":
        """Documented coarser default for quick sweeps: 6-sample (100 ms) time
        steps, 0.2 probability steps."""
        return GridSpec(n_time_steps=5, time_step_ms=6 * TS_MS,
                        p_breaks=tuple(round(0.2 * i, 1) for i in range(6)))


_WORKER_STATE: dict = {}


def _grid_worker_init(tables: ReplayTables, quantize: str):
    _WORKER_STATE["tables"] = tables
    _WORKER_STATE["quantize"] = quantize


def _grid_worker(chunk: list[PolicyParams]) -> list[PolicyEvalResult]:
    tables = _WORKER_STATE["tables"]
    quantize = _WORKER_STATE["quantize"]
    return [evaluate_policy_tabled(p, tables, quantize) for p in chunk]


def grid_search(trials: Sequence[TrialRecord], seg_params: SegModelParams,
                intent_params: IntentModelParams, spec: Optional[GridSpec] = None,
                quantize: str = "per-sample", jobs: int = 1,
                tables: Optional[ReplayTables] = None) -> list[PolicyEvalResult]:
    """Evaluate every policy of the grid; rows come back in grid order and
    are bit-identical no matter how many worker processes run the sweep."""
    spec = spec or GridSpec()
    policies = spec.policies()
    if tables is None:
        max_n = max(quantize_dwell(k * spec.time_step_ms, quantize)
                    for k in range(1, spec.n_time_steps + 1))
        tables = precompute_tables(trials, seg_params, intent_params, max_n=max_n)
    if jobs <= 1:
        return [evaluate_policy_tabled(p, tables, quantize) for p in policies]
    chunk_size = math.ceil(len(policies) / (jobs * 8))
    chunks = [policies[i:i + chunk_size] for i in range(0, len(policies), chunk_size)]
    results: list[PolicyEvalResult] = []
    with ProcessPoolExecutor(max_workers=jobs, initializer=_grid_worker_init,
                             initargs=(tables, quantize)) as pool:
        for part in pool.map(_grid_worker, chunks):
            results.extend(part)
    return results


def pareto_frontier(results: Sequence[PolicyEvalResult]) -> list[PolicyEvalResult]:
    """Rows not dominated in (error_rate, mean response time), both minimised.

    Rows without a response time (no selection in any trial) cannot sit on
    the frontier and are skipped.
    """
    rows = [r for r in results if not math.isnan(r.mean_response_time_ms)]
    order = sorted(range(len(rows)),
                   key=lambda i: (rows[i].error_rate, rows[i].mean_response_time_ms))
    frontier: list[PolicyEvalResult] = []
    best_rt = math.inf
    i = 0
    while i < len(order):
        # Group rows sharing one error rate; only the fastest survive.
        j = i
        group_rt = math.inf
        while j < len(order) and rows[order[j]].error_rate == rows[order[i]].error_rate:
            group_rt = min(group_rt, rows[order[j]].mean_response_time_ms)
            j += 1
        if group_rt < best_rt:
            frontier.extend(rows[order[k]] for k in range(i, j)
                            if rows[order[k]].mean_response_time_ms == group_rt)
            best_rt = group_rt
        i = j
    return frontier


CSV_HEADER = "tmax_ms,tmin_ms,tbreak_ms,pbreak,error_rate,err_ci,mean_rt_ms,rt_ci,n,timeouts"


def results_to_csv(results: Sequence[PolicyEvalResult]) -> str:
    lines = [CSV_HEADER]
    for r in results:
        p = r.policy
        lines.append(",".join([
            f"{p.t_max:.4f}", f"{p.t_min:.4f}", f"{p.t_break:.4f}", f"{p.p_break:.2f}",
            f"{r.error_rate:.6f}", f"{r.error_ci:.6f}",
            f"{r.mean_response_time_ms:.4f}", f"{r.rt_ci:.4f}",
            str(r.n_trials), str(r.n_timeouts),
        ]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic corpus generator.

    The pre-select trajectory is sampled from the intent model (behaviors,
    targets, fixation locations and durations) and expanded to 60 Hz with
    Gaussian jitter plus a few interpolated saccade-transit samples.  The
    post-select trajectory is NOT drawn from the inference model: it dwells
    on the true target with jitter, interrupted by distractor glances at
    other links at a configurable rate.
    """
    n_trials: int = 500
    seed: int = 0
    n_links: tuple[int, int] = (6, 12)
    screen: tuple[float, float] = (1280.0, 1024.0)
    fixation_jitter_px: float = 4.0
    saccade_samples: tuple[int, int] = (2, 4)
    post_seconds: float = 2.0
    post_jitter_px: float = 6.0
    distractor_rate: float = 0.12
    glance_samples: tuple[int, int] = (6, 14)
    max_fixations: int = 40


def random_column_layout(rng: np.random.Generator, n_links: int,
                         screen: tuple[float, float] = (1280.0, 1024.0)) -> PageLayout:
    """A column of link boxes with random sizes and vertical gaps, the shape
    of a link list on an article page."""
    links = []
    heights = rng.uniform(16.0, 24.0, n_links)
    gaps = rng.uniform(8.0, 26.0, n_links)
    total = float(np.sum(heights) + np.sum(gaps))
    top = rng.uniform(60.0, max(61.0, screen[1] - total - 60.0))
    for i in range(n_links):
        width = float(rng.uniform(80.0, 280.0))
        left = float(rng.uniform(80.0, 420.0))
        links.append(Hyperlink(i + 1, BoundingBox(left, float(top), width, float(heights[i]))))
        top += heights[i] + gaps[i]
    return PageLayout(links, screen[0], screen[1])


def _expand_scanpath(fixations, rng: np.random.Generator, jitter: float,
                     saccade_samples: tuple[int, int], t0: int) -> list[GazeSample]:
    samples: list[GazeSample] = []
    t = t0
    prev = None
    for fix in fixations:
        if prev is not None:
            n_sac = int(rng.integers(saccade_samples[0], saccade_samples[1] + 1))
            for i in range(1, n_sac + 1):
                frac = i / (n_sac + 1)
                x = prev[0] + (fix.x - prev[0]) * frac + rng.normal(0.0, jitter)
                y = prev[1] + (fix.y - prev[1]) * frac + rng.normal(0.0, jitter)
                samples.append(GazeSample(t, float(x), float(y)))
                t += 1
        n_fix = max(1, round(fix.duration_ms / TS_MS))
        for _ in range(n_fix):
            samples.append(GazeSample(t, float(fix.x + rng.normal(0.0, jitter)),
                                      float(fix.y + rng.normal(0.0, jitter))))
            t += 1
        prev = (fix.x, fix.y)
    return samples


def synth_trials(config: SynthConfig, intent_params: IntentModelParams) -> list[TrialRecord]:
    """Deterministic synthetic corpus for the given seed."""
    rng = np.random.default_rng(config.seed)
    trials: list[TrialRecord] = []
    n_post = max(1, round(config.post_seconds * 1000.0 / TS_MS))
    for _ in range(config.n_trials):
        n_links = int(rng.integers(config.n_links[0], config.n_links[1] + 1))
        layout = random_column_layout(rng, n_links, config.screen)
        sample = sample_scanpath(layout, intent_params, rng, config.max_fixations)
        pre = _expand_scanpath(sample.fixations, rng, config.fixation_jitter_px,
                               config.saccade_samples, t0=0)
        target_box = layout.link(sample.true_target).bbox
        t = pre[-1].t + 1 + 24 + int(rng.integers(0, 6))  # gap: the button dwell
        post: list[GazeSample] = []
        while len(post) < n_post:
            chunk = int(rng.integers(config.glance_samples[0], config.glance_samples[1] + 1))
            if n_links > 1 and rng.random() < config.distractor_rate:
                others = [m for m in range(1, n_links + 1) if m != sample.true_target]
                box = layout.link(others[int(rng.integers(0, n_links - 1))]).bbox
            else:
                box = target_box
            cx, cy = box.center.x, box.center.y
            for _ in range(chunk):
                post.append(GazeSample(t, float(cx + rng.normal(0.0, config.post_jitter_px)),
                                       float(cy + rng.normal(0.0, config.post_jitter_px))))
                t += 1
        trials.append(TrialRecord(layout=layout, pre_select=pre, post_select=post[:n_post],
                                  true_target=sample.true_target,
                                  meta={"seed": config.seed, "generator": "synth"}))
    return trials
