"""Factorial HMM over the scanpath: which hyperlink does the user intend?

Two hidden chains evolve independently over the fixation sequence: the
intended target link I_t (1..M) and the gaze behavior B_t (reading the link,
reading near it, reading away from it).  Each fixation emits its location
(Gaussian around the link centre for behaviors 1-2, uniform over the screen
for behavior 3) and its duration (lognormal per behavior).  Both chains end
in an absorbing terminal state when the user activates "Select"; the
terminal entry probability depends only on the behavior, and weights the
forward probabilities when the per-link posterior is read out.

Only the most recent MAX_HISTORY (5) fixations feed inference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .geometry import PageLayout, Point, assign_gaze
from .segmentation import FixationEvent
from .units import TS_MS

LOG_2PI = math.log(2.0 * math.pi)

MAX_HISTORY = 5

# Milliseconds per duration unit used by the lognormal parameters.
DURATION_UNIT_MS = {"samples": TS_MS, "ms": 1.0, "s": 1000.0}


class Behavior(IntEnum):
    ON_LINK = 1
    NEAR_LINK = 2
    AWAY = 3
    TERMINAL = 4


@dataclass
class IntentModelParams:
    """Parameters of the target/behavior chains and their emissions.

    behavior_transition is 3x4, row B_{t-1} in {1,2,3} against columns
    (B_t = 1, 2, 3, terminal); rows sum to one.  beta_*/sigma_* hold the
    location-emission parameters for behaviors 1 and 2 (index k-1); the
    behavior-3 location is uniform over the screen and has no parameters.
    mu_d/sigma_d are lognormal duration parameters for behaviors 1..3 in
    `duration_unit` units, and pi is the initial behavior distribution.
    """
    behavior_transition: np.ndarray
    p_s: float
    beta_x: np.ndarray
    beta_y: np.ndarray
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    mu_d: np.ndarray
    sigma_d: np.ndarray
    pi: np.ndarray
    duration_unit: str = "samples"

    def __post_init__(self):
        self.behavior_transition = np.asarray(self.behavior_transition, dtype=float)
        for name in ("beta_x", "beta_y", "sigma_x", "sigma_y", "mu_d", "sigma_d", "pi"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.behavior_transition.shape != (3, 4):
            raise ValueError("behavior_transition must be 3x4 (rows 1..3, columns 1..3 + terminal)")
        if not np.allclose(self.behavior_transition.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("behavior_transition rows must sum to 1")
        if np.any(self.behavior_transition < 0):
            raise ValueError("behavior_transition entries must be non-negative")
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError("p_s must lie in [0, 1]")
        for name in ("beta_x", "beta_y", "sigma_x", "sigma_y"):
            if getattr(self, name).shape != (2,):
                raise ValueError(f"{name} must have one value per behavior 1 and 2")
        if np.any(self.sigma_x <= 0) or np.any(self.sigma_y <= 0):
            raise ValueError("location sigmas must be positive")
        for name in ("mu_d", "sigma_d", "pi"):
            if getattr(self, name).shape != (3,):
                raise ValueError(f"{name} must have one value per behavior 1..3")
        if np.any(self.sigma_d <= 0):
            raise ValueError("duration sigmas must be positive")
        if not math.isclose(self.pi.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("pi must sum to 1")
        if self.duration_unit not in DURATION_UNIT_MS:
            raise ValueError(f"unknown duration unit {self.duration_unit!r}")

    @property
    def terminal_probs(self) -> np.ndarray:
        return self.behavior_transition[:, 3]


@dataclass
class IntentPosterior:
    """Per-link probability of being the intended target; index i is link i+1."""
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)

    @property
    def argmax_link(self) -> int:
        # np.argmax takes the first maximum, i.e. the lowest link id on ties.
        return int(np.argmax(self.probs)) + 1

    def prob(self, link_id: int) -> float:
        return float(self.probs[link_id - 1])


def default_intent_params() -> IntentModelParams:
    """Neutral starting point for training."""
    return IntentModelParams(
        behavior_transition=np.full((3, 4), 0.25),
        p_s=0.1,
        beta_x=np.array([0.1, 0.2]),
        beta_y=np.array([0.1, 0.2]),
        sigma_x=np.array([30.0, 60.0]),
        sigma_y=np.array([15.0, 30.0]),
        mu_d=np.array([3.0, 2.8, 2.6]),
        sigma_d=np.array([0.5, 0.5, 0.5]),
        pi=np.array([1.0, 1.0, 1.0]) / 3.0,
        duration_unit="samples",
    )


def _location_variances(layout: PageLayout, params: IntentModelParams):
    """Per-link emission variances for behaviors 1 and 2: shape (2, M) per axis."""
    w = np.array([l.bbox.width for l in layout.links])
    h = np.array([l.bbox.height for l in layout.links])
    vx = (params.beta_x[:, None] * w[None, :]) ** 2 + params.sigma_x[:, None] ** 2
    vy = (params.beta_y[:, None] * h[None, :]) ** 2 + params.sigma_y[:, None] ** 2
    return vx, vy


def location_logdensity(f: FixationEvent, m: int, k: Behavior | int,
                        layout: PageLayout, params: IntentModelParams) -> float:
    """Log density of the fixation location given target link m and behavior k."""
    k = int(k)
    if k not in (1, 2, 3):
        raise ValueError("behavior must be 1, 2 or 3")
    if k == 3:
        return -math.log(layout.screen_width * layout.screen_height)
    box = layout.link(m).bbox
    c = box.center
    vx = (params.beta_x[k - 1] * box.width) ** 2 + params.sigma_x[k - 1] ** 2
    vy = (params.beta_y[k - 1] * box.height) ** 2 + params.sigma_y[k - 1] ** 2
    return (-LOG_2PI - 0.5 * (math.log(vx) + math.log(vy))
            - 0.5 * ((f.x - c.x) ** 2 / vx + (f.y - c.y) ** 2 / vy))


def duration_logdensity(d_ms: float, k: Behavior | int, params: IntentModelParams) -> float:
    """Lognormal log density of a fixation duration (given in milliseconds)."""
    k = int(k)
    if k not in (1, 2, 3):
        raise ValueError("behavior must be 1, 2 or 3")
    if d_ms <= 0:
        raise ValueError("duration must be positive")
    u = d_ms / DURATION_UNIT_MS[params.duration_unit]
    mu, sd = params.mu_d[k - 1], params.sigma_d[k - 1]
    z = (math.log(u) - mu) / sd
    return -math.log(u) - math.log(sd) - 0.5 * LOG_2PI - 0.5 * z * z


def target_transition(j: int, k: int, n_links: int, p_s: float) -> float:
    """P(I_t = k | I_{t-1} = j) for M candidate links.

    With a single link the chain is absorbing: the switch mass has nowhere
    to go, so the self-transition is 1.
    """
    if n_links < 1:
        raise ValueError("need at least one link")
    if n_links == 1:
        return 1.0 if k == j else 0.0
    return (1.0 - p_s) if k == j else p_s / (n_links - 1)


def _emission_logs(scanpath: Sequence[FixationEvent], layout: PageLayout,
                   params: IntentModelParams) -> np.ndarray:
    """Joint location+duration emission logs, shape (T, M, 3)."""
    M = layout.n_links
    xs = np.array([f.x for f in scanpath])
    ys = np.array([f.y for f in scanpath])
    cx = np.array([l.bbox.center.x for l in layout.links])
    cy = np.array([l.bbox.center.y for l in layout.links])
    vx, vy = _location_variances(layout, params)  # (2, M)

    out = np.empty((len(scanpath), M, 3))
    dx2 = (xs[:, None] - cx[None, :]) ** 2  # (T, M)
    dy2 = (ys[:, None] - cy[None, :]) ** 2
    for k in (1, 2):
        out[:, :, k - 1] = (-LOG_2PI - 0.5 * (np.log(vx[k - 1]) + np.log(vy[k - 1]))
                            - 0.5 * (dx2 / vx[k - 1] + dy2 / vy[k - 1]))
    out[:, :, 2] = -math.log(layout.screen_width * layout.screen_height)

    scale = DURATION_UNIT_MS[params.duration_unit]
    logu = np.log(np.array([f.duration_ms for f in scanpath]) / scale)
    z = (logu[:, None] - params.mu_d[None, :]) / params.sigma_d[None, :]
    dur = -logu[:, None] - np.log(params.sigma_d)[None, :] - 0.5 * LOG_2PI - 0.5 * z * z
    return out + dur[:, None, :]


def _forward_terminal_logs(log_emit: np.ndarray, params: IntentModelParams) -> np.ndarray:
    """Terminal-weighted forward logs per link: log sum_k alpha_T(m,k) p(TS|k)."""
    T, M, _ = log_emit.shape
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi) - math.log(M)
        log_pb = np.log(params.behavior_transition[:, :3])  # (3, 3) rows B_{t-1}
        log_ts = np.log(params.terminal_probs)
        if M > 1:
            log_pi_target = np.full((M, M), np.log(params.p_s / (M - 1)))
            np.fill_diagonal(log_pi_target, np.log(1.0 - params.p_s))
        else:
            log_pi_target = np.zeros((1, 1))

    la = log_pi[None, :] + log_emit[0]  # (M, 3)
    for t in range(1, T):
        # inner[l, m] = lse_j la[j, l] + logP(I_t=m | I_{t-1}=j)
        inner = logsumexp(la.T[:, :, None] + log_pi_target[None, :, :], axis=1)
        # comb[m, k] = lse_l inner[l, m] + logP(B_t=k | B_{t-1}=l)
        comb = logsumexp(inner[:, :, None] + log_pb[:, None, :], axis=0)
        la = log_emit[t] + comb
    return logsumexp(la + log_ts[None, :], axis=1)


def forward_posterior(scanpath: Sequence[FixationEvent], layout: PageLayout,
                      params: IntentModelParams, max_history: int = MAX_HISTORY) -> IntentPosterior:
    """Posterior over links at "Select" activation, from the recent scanpath.

    Runs the forward algorithm over the joint (target, behavior) state in log
    space, weights the final forward probabilities by the terminal entry
    probability of the behavior, and normalises over links.  Only the last
    `max_history` fixations participate.
    """
    if not scanpath:
        raise ValueError("scanpath is empty")
    if layout.n_links < 1:
        raise ValueError("layout has no links")
    if layout.n_links == 1:
        return IntentPosterior(np.array([1.0]))
    recent = list(scanpath)[-max_history:]
    log_w = _forward_terminal_logs(_emission_logs(recent, layout, params), params)
    probs = np.exp(log_w - logsumexp(log_w))
    return IntentPosterior(probs / probs.sum())


def last_fixated_baseline(scanpath: Sequence[FixationEvent], layout: PageLayout,
                          threshold: float = 40.0) -> Optional[int]:
    """Heuristic competitor: the link of the most recent fixation that is
    assigned to any link; None when no fixation is near a link."""
    for f in reversed(list(scanpath)):
        link = assign_gaze(Point(f.x, f.y), layout, threshold)
        if link is not None:
            return link
    return None


# ---------------------------------------------------------------------------
# Semi-supervised training
# ---------------------------------------------------------------------------

TrainingTrial = tuple  # (scanpath, PageLayout, true target id)

DEFAULT_PS_GRID = tuple(round(0.01 * i, 2) for i in range(51))  # 0 .. 0.5


@dataclass
class IntentTrainResult:
    params: IntentModelParams
    log_likelihoods: list[float]
    p_s_accuracies: dict[float, float]
    notes: list[str] = field(default_factory=list)


def _clamped_emissions(trial_data: dict, params: IntentModelParams) -> np.ndarray:
    """Emission logs (T, 3) with the target chain clamped to the known link."""
    vx = (params.beta_x * trial_data["w"]) ** 2 + params.sigma_x ** 2  # (2,)
    vy = (params.beta_y * trial_data["h"]) ** 2 + params.sigma_y ** 2
    T = len(trial_data["rx"])
    out = np.empty((T, 3))
    for k in (0, 1):
        out[:, k] = (-LOG_2PI - 0.5 * (math.log(vx[k]) + math.log(vy[k]))
                     - 0.5 * (trial_data["rx"] ** 2 / vx[k] + trial_data["ry"] ** 2 / vy[k]))
    out[:, 2] = trial_data["log_uniform"]
    logu = trial_data["logd"]
    z = (logu[:, None] - params.mu_d[None, :]) / params.sigma_d[None, :]
    out += -logu[:, None] - np.log(params.sigma_d)[None, :] - 0.5 * LOG_2PI - 0.5 * z * z
    return out


def _behavior_forward_backward(log_b: np.ndarray, params: IntentModelParams):
    """3-state forward/backward with the terminal weight folded into beta_T."""
    with np.errstate(divide="ignore"):
        log_pb = np.log(params.behavior_transition[:, :3])
        log_ts = np.log(params.terminal_probs)
        log_pi = np.log(params.pi)
    T = log_b.shape[0]
    la = np.empty((T, 3))
    la[0] = log_pi + log_b[0]
    for t in range(1, T):
        la[t] = log_b[t] + logsumexp(la[t - 1][:, None] + log_pb, axis=0)
    lb = np.empty((T, 3))
    lb[-1] = log_ts
    for t in range(T - 2, -1, -1):
        lb[t] = logsumexp(log_pb + (log_b[t + 1] + lb[t + 1])[None, :], axis=1)
    ll = float(logsumexp(la[-1] + lb[-1]))
    gamma = np.exp(la + lb - ll)
    xi = np.zeros((3, 3))
    for t in range(T - 1):
        xi += np.exp(la[t][:, None] + log_pb + (log_b[t + 1] + lb[t + 1])[None, :] - ll)
    return gamma, xi, ll


def _fit_location_axis(gammas: np.ndarray, r2: np.ndarray, sizes: np.ndarray,
                       beta: np.ndarray, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Constrained M-step for one axis: maximise the expected log likelihood
    of behaviors 1 and 2 subject to beta_2 >= beta_1 and sigma_2 >= sigma_1.

    The parameterisation (beta_1, sigma_1, d_beta >= 0, d_sigma >= 0) keeps
    every point the optimiser can visit feasible.  gammas: (N, 2) posterior
    weights, r2: (N,) squared residuals, sizes: (N,) link extent along this
    axis.  Starts from the current (feasible) parameters and keeps them when
    the optimiser cannot improve, so the EM objective never decreases.
    """
    w2 = sizes ** 2

    def neg_ll(x):
        b1, s1, db, ds = x
        total = 0.0
        for k, (b, s) in enumerate(((b1, s1), (b1 + db, s1 + ds))):
            v = b * b * w2 + s * s
            total += 0.5 * np.dot(gammas[:, k], np.log(v) + r2 / v)
        return total

    x0 = np.array([beta[0], sigma[0], beta[1] - beta[0], sigma[1] - sigma[0]])
    x0 = np.maximum(x0, [0.0, 1e-2, 0.0, 0.0])
    res = minimize(neg_ll, x0, method="L-BFGS-B",
                   bounds=[(0.0, 10.0), (1e-2, 1e5), (0.0, 10.0), (0.0, 1e5)])
    best = res.x if res.fun <= neg_ll(x0) else x0
    b1, s1, db, ds = best
    return np.array([b1, b1 + db]), np.array([s1, s1 + ds])


def train_intent(corpus: Sequence[TrainingTrial],
                 init: Optional[IntentModelParams] = None,
                 max_iters: int = 100,
                 tol: float = 1e-6,
                 p_s_grid: Sequence[float] = DEFAULT_PS_GRID) -> IntentTrainResult:
    """Two-phase semi-supervised fit.

    Phase 1 runs EM over the behavior chain alone, with the target chain
    clamped to each trial's known target link: it updates the behavior
    transitions (terminal column included), the initial distribution, the
    location emission parameters (under the k=2 >= k=1 ordering constraint)
    and the lognormal duration parameters.  Phase 2 freezes those parameters
    and picks p_s from a grid by maximising argmax-posterior accuracy over
    the corpus with the target chain free; ties go to the smallest p_s.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    params = init if init is not None else default_intent_params()
    notes: list[str] = []

    trials = []
    for scanpath, layout, target in corpus:
        if not 1 <= target <= layout.n_links:
            raise ValueError(f"target {target} outside layout with {layout.n_links} links")
        if not scanpath:
            raise ValueError("empty scanpath in training corpus")
        box = layout.link(target).bbox
        c = box.center
        scale = DURATION_UNIT_MS[params.duration_unit]
        trials.append({
            "rx": np.array([f.x - c.x for f in scanpath]),
            "ry": np.array([f.y - c.y for f in scanpath]),
            "w": box.width,
            "h": box.height,
            "logd": np.log(np.array([f.duration_ms for f in scanpath]) / scale),
            "log_uniform": -math.log(layout.screen_width * layout.screen_height),
        })

    history: list[float] = []
    prev_ll = -math.inf
    for iteration in range(max_iters):
        pi_acc = np.zeros(3)
        trans_acc = np.zeros((3, 3))
        ts_acc = np.zeros(3)
        dur_w = np.zeros(3)
        dur_wl = np.zeros(3)
        dur_wl2 = np.zeros(3)
        gx: list[np.ndarray] = []
        total_ll = 0.0

        for td in trials:
            log_b = _clamped_emissions(td, params)
            gamma, xi, ll = _behavior_forward_backward(log_b, params)
            total_ll += ll
            pi_acc += gamma[0]
            trans_acc += xi
            ts_acc += gamma[-1]
            dur_w += gamma.sum(axis=0)
            dur_wl += gamma.T @ td["logd"]
            dur_wl2 += gamma.T @ td["logd"] ** 2
            gx.append(gamma)

        history.append(total_ll)

        new_pi = pi_acc / pi_acc.sum()
        bt = np.concatenate([trans_acc, ts_acc[:, None]], axis=1)
        row_tot = bt.sum(axis=1)
        for k in range(3):
            if row_tot[k] <= 0:
                bt[k] = params.behavior_transition[k]
                notes.append(f"behavior {k + 1} had zero occupancy; row left at its previous value")
            else:
                bt[k] /= row_tot[k]
        occupied = dur_w > 0
        mu_d = np.where(occupied, dur_wl / np.where(occupied, dur_w, 1.0), params.mu_d)
        var_d = np.where(occupied, dur_wl2 / np.where(occupied, dur_w, 1.0) - mu_d ** 2, params.sigma_d ** 2)
        sigma_d = np.sqrt(np.maximum(var_d, 1e-6))

        g12 = np.concatenate([g[:, :2] for g in gx], axis=0)
        rx = np.concatenate([td["rx"] for td in trials])
        ry = np.concatenate([td["ry"] for td in trials])
        wx = np.concatenate([np.full(len(td["rx"]), td["w"]) for td in trials])
        hy = np.concatenate([np.full(len(td["ry"]), td["h"]) for td in trials])
        beta_x, sigma_x = _fit_location_axis(g12, rx ** 2, wx, params.beta_x, params.sigma_x)
        beta_y, sigma_y = _fit_location_axis(g12, ry ** 2, hy, params.beta_y, params.sigma_y)

        params = replace(params, behavior_transition=bt, pi=new_pi,
                         mu_d=mu_d, sigma_d=sigma_d,
                         beta_x=beta_x, beta_y=beta_y, sigma_x=sigma_x, sigma_y=sigma_y)

        if iteration > 0 and total_ll - prev_ll < tol * abs(prev_ll):
            break
        prev_ll = total_ll

    # Phase 2: grid-search p_s against held-in inference accuracy.  The
    # emission logs do not depend on p_s, so compute them once per trial.
    emits = [(_emission_logs(list(sp)[-MAX_HISTORY:], layout, params), target)
             for sp, layout, target in corpus]
    accuracies: dict[float, float] = {}
    best = (-1.0, None)
    for p_s in p_s_grid:
        cand = replace(params, p_s=float(p_s))
        hits = 0
        for log_emit, target in emits:
            log_w = _forward_terminal_logs(log_emit, cand)
            hits += int(np.argmax(log_w) + 1 == target)
        acc = hits / len(corpus)
        accuracies[float(p_s)] = acc
        if acc > best[0]:
            best = (acc, float(p_s))
    params = replace(params, p_s=best[1])

    return IntentTrainResult(params=params, log_likelihoods=history,
                             p_s_accuracies=accuracies, notes=notes)


# ---------------------------------------------------------------------------
# Generative sampling (used by the simulator's synthetic corpora)
# ---------------------------------------------------------------------------

@dataclass
class ScanpathSample:
    fixations: list[FixationEvent]
    targets: list[int]
    behaviors: list[int]

    @property
    def true_target(self) -> int:
        return self.targets[-1]


def sample_scanpath(layout: PageLayout, params: IntentModelParams,
                    rng: np.random.Generator, max_fixations: int = 50) -> ScanpathSample:
    """Draw one scanpath from the generative model, ending at the terminal
    state (forced at `max_fixations` if the chain has not terminated)."""
    M = layout.n_links
    scale = DURATION_UNIT_MS[params.duration_unit]
    target = int(rng.integers(1, M + 1))
    behavior = int(rng.choice(3, p=params.pi)) + 1

    fixations: list[FixationEvent] = []
    targets: list[int] = []
    behaviors: list[int] = []
    cursor = 0
    while True:
        box = layout.link(target).bbox
        if behavior in (1, 2):
            k = behavior - 1
            vx = (params.beta_x[k] * box.width) ** 2 + params.sigma_x[k] ** 2
            vy = (params.beta_y[k] * box.height) ** 2 + params.sigma_y[k] ** 2
            x = box.center.x + rng.normal(0.0, math.sqrt(vx))
            y = box.center.y + rng.normal(0.0, math.sqrt(vy))
        else:
            x = rng.uniform(0.0, layout.screen_width)
            y = rng.uniform(0.0, layout.screen_height)
        d_units = math.exp(rng.normal(params.mu_d[behavior - 1], params.sigma_d[behavior - 1]))
        d_ms = d_units * scale
        n = max(1, round(d_ms / TS_MS))
        fixations.append(FixationEvent(x=x, y=y, duration_ms=d_ms,
                                       start_index=cursor, end_index=cursor + n - 1))
        targets.append(target)
        behaviors.append(behavior)
        cursor += n

        if len(fixations) >= max_fixations:
            break
        step = int(rng.choice(4, p=params.behavior_transition[behavior - 1]))
        if step == 3:
            break
        behavior = step + 1
        if M > 1 and rng.random() < params.p_s:
            others = [m for m in range(1, M + 1) if m != target]
            target = int(others[rng.integers(0, M - 1)])
    return ScanpathSample(fixations=fixations, targets=targets, behaviors=behaviors)
