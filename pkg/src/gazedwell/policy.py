"""Piecewise-linear mapping from target probability to per-link dwell time.

A policy is four numbers [t_max, t_min, t_break, p_break]: the nominal dwell
drops linearly from t_max at probability 0 to t_break at p_break, then
linearly on to t_min at probability 1.  Nominal times are quantised to an
integer number of gaze samples before the selection engine uses them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .intent import IntentPosterior
from .units import TS_MS


@dataclass(frozen=True)
class PolicyParams:
    t_max: float
    t_min: float
    t_break: float
    p_break: float

    def __post_init__(self):
        if not 0.0 < self.t_min <= self.t_break <= self.t_max:
            raise ValueError("policy needs 0 < t_min <= t_break <= t_max")
        if not 0.0 <= self.p_break <= 1.0:
            raise ValueError("p_break must lie in [0, 1]")

    def as_literal(self) -> str:
        return f"{self.t_max:g},{self.t_min:g},{self.t_break:g},{self.p_break:g}"


def parse_policy(text: str) -> PolicyParams:
    """Parse the CLI/config literal `tmax,tmin,tbreak,pbreak` (ms,ms,ms,unitless)."""
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"policy literal needs 4 comma-separated values, got {text!r}")
    try:
        t_max, t_min, t_break, p_break = (float(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"bad policy literal {text!r}: {exc}") from None
    return PolicyParams(t_max=t_max, t_min=t_min, t_break=t_break, p_break=p_break)


def nominal_dwell(p: float, policy: PolicyParams) -> float:
    """Nominal dwell time in ms for a link with target probability p.

    With p_break = 0 the first segment degenerates to the single point
    h(0) = t_max and the second segment covers (0, 1]; with p_break = 1 the
    first segment covers all of [0, 1].
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    pb = policy.p_break
    if pb == 0.0:
        if p == 0.0:
            return policy.t_max
        return policy.t_break - (policy.t_break - policy.t_min) * p
    if p <= pb:
        return policy.t_max - (policy.t_max - policy.t_break) * p / pb
    return policy.t_break - (policy.t_break - policy.t_min) * (p - pb) / (1.0 - pb)


def quantize_dwell(t_ms: float, mode: str = "per-sample") -> int:
    """Integer number of samples for a nominal dwell time.

    "per-sample" rounds to the nearest sample (half rounds up) and floors at
    one sample; "coarse:q" floors to a multiple of q samples and floors at q.
    """
    if t_ms <= 0:
        raise ValueError("dwell time must be positive")
    if mode == "per-sample":
        return max(1, math.floor(t_ms / TS_MS + 0.5))
    if mode.startswith("coarse:"):
        q = int(mode.split(":", 1)[1])
        if q < 1:
            raise ValueError("coarse quantisation step must be >= 1 sample")
        return max(q, q * math.floor(t_ms / (q * TS_MS)))
    raise ValueError(f"unknown quantisation mode {mode!r}")


@dataclass(frozen=True)
class DwellAssignment:
    """Per-link dwell counts (samples) and the nominal times they came from."""
    n_samples: tuple[int, ...]
    nominal_ms: tuple[float, ...]

    def dwell_samples(self, link_id: int) -> int:
        return self.n_samples[link_id - 1]

    def dwell_ms(self, link_id: int) -> float:
        return self.n_samples[link_id - 1] * TS_MS


def assign_dwells(posterior: IntentPosterior | Sequence[float] | np.ndarray,
                  policy: PolicyParams, mode: str = "per-sample") -> DwellAssignment:
    probs = posterior.probs if isinstance(posterior, IntentPosterior) else np.asarray(posterior, dtype=float)
    nominal = tuple(nominal_dwell(float(p), policy) for p in probs)
    return DwellAssignment(
        n_samples=tuple(quantize_dwell(t, mode) for t in nominal),
        nominal_ms=nominal,
    )


# The two single-parameter families that trace the speed/accuracy frontier.
FAMILY_I_T_MAX = 500.0
FAMILY_I_T_MIN = TS_MS
FAMILY_I_T_BREAK = 50.0
# Largest family-I breakpoint: where [500, TS_MS, 50, p] becomes the straight
# line from (0, 500) to (1, TS_MS), i.e. coincides with family II at its
# fastest setting.  Evaluates to 0.93103..., usually quoted rounded as 0.93.
FAMILY_I_PBREAK_MAX = (FAMILY_I_T_MAX - FAMILY_I_T_BREAK) / (FAMILY_I_T_MAX - FAMILY_I_T_MIN)


def policy_family_i(p_break: float) -> PolicyParams:
    """[500 ms, 16.67 ms, 50 ms, p_break] with p_break in [0, 0.931]."""
    if not 0.0 <= p_break <= FAMILY_I_PBREAK_MAX + 1e-12:
        raise ValueError(f"family-I p_break must lie in [0, {FAMILY_I_PBREAK_MAX:.4f}]")
    return PolicyParams(FAMILY_I_T_MAX, FAMILY_I_T_MIN, FAMILY_I_T_BREAK, p_break)


def policy_family_ii(t_min_ms: float) -> PolicyParams:
    """[500 ms, t_min, t_min, 1] with t_min in [16.67 ms, 500 ms]."""
    if not FAMILY_I_T_MIN - 1e-9 <= t_min_ms <= FAMILY_I_T_MAX:
        raise ValueError(f"family-II t_min must lie in [{FAMILY_I_T_MIN:.2f}, {FAMILY_I_T_MAX:.0f}] ms")
    t = max(t_min_ms, FAMILY_I_T_MIN)
    return PolicyParams(FAMILY_I_T_MAX, t, t, 1.0)
