"""Probabilities of the five instantaneous SNR regions under Rayleigh fading."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import SystemParams, classify_regions, draw_gains_batch, make_thresholds

# Shared absolute tolerance for probability equality tests (branch boundaries etc.).
EPS = 1e-12


@dataclass(frozen=True)
class RegionProbabilities:
    p_r1: float
    p_r2: float
    p_r3: float
    p_r4: float
    p_r5: float

    def __post_init__(self):
        vals = self.as_tuple()
        for v in vals:
            if not (math.isfinite(v) and -EPS <= v <= 1 + EPS):
                raise ValueError(f"region probability out of [0, 1]: {v!r}")
        if abs(math.fsum(vals) - 1.0) > 1e-12:
            raise ValueError(f"region probabilities must sum to 1, got {math.fsum(vals)!r}")

    @classmethod
    def from_sequence(cls, p) -> "RegionProbabilities":
        p = [min(max(float(x), 0.0), 1.0) for x in p]
        if len(p) != 5:
            raise ValueError("need exactly five region probabilities")
        return cls(*p)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.p_r1, self.p_r2, self.p_r3, self.p_r4, self.p_r5)

    def __getitem__(self, region: int) -> float:
        """Probability of region 1..5."""
        return self.as_tuple()[int(region) - 1]

    @property
    def p_max(self) -> float:
        return max(self.p_r3, self.p_r4)

    @property
    def p_min(self) -> float:
        return min(self.p_r3, self.p_r4)

    def swapped(self) -> "RegionProbabilities":
        """Probabilities after exchanging the user labels (R3 <-> R4)."""
        return RegionProbabilities(self.p_r1, self.p_r2, self.p_r4, self.p_r3, self.p_r5)


def _one_minus_exp(x: float) -> float:
    return -math.expm1(-x)


def _decay_integral(c: float, lo: float, length: float) -> float:
    """int_lo^{lo+length} exp(-c x) dx, stable as c -> 0."""
    if c == 0.0:
        return length
    return math.exp(-c * lo) * (-math.expm1(-c * length)) / c


def analytic_probabilities(params: SystemParams) -> RegionProbabilities:
    if not isinstance(params, SystemParams):
        raise TypeError("params must be SystemParams")
    thr = make_thresholds(params.rate0)
    t, s = thr.gamma_thr, thr.gamma_thr_sum
    a = 1.0 / (params.omega1 * params.gamma)
    b = 1.0 / (params.omega2 * params.gamma)

    e1, e2 = math.exp(-a * t), math.exp(-b * t)
    f1, f2 = _one_minus_exp(a * t), _one_minus_exp(b * t)
    p3 = e1 * f2
    p4 = e2 * f1
    p5 = f1 * f2

    # R2: both links above t but sum below s, i.e. x in (t, s - t], y in (t, s - x].
    length = s - 2.0 * t
    if abs(a - b) < 1e-9 * max(a, b):
        tail = a * math.exp(-b * s) * length  # equal-mean limit of the second term
    else:
        tail = a * math.exp(-b * s) * _decay_integral(a - b, t, length)
    p2 = e2 * e1 * _one_minus_exp(a * length) - tail
    p1 = e1 * e2 - p2

    return RegionProbabilities.from_sequence([p1, p2, p3, p4, p5])


def empirical_probabilities(params: SystemParams, n_samples: int, rng: np.random.Generator) -> RegionProbabilities:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    thr = make_thresholds(params.rate0)
    snr = draw_gains_batch(rng, params, n_samples)
    return probabilities_from_regions(classify_regions(snr[:, 0], snr[:, 1], thr))


def probabilities_from_regions(regions: np.ndarray) -> RegionProbabilities:
    counts = np.bincount(np.asarray(regions, dtype=np.int64), minlength=6)[1:6]
    n = int(counts.sum())
    p = [int(c) / n for c in counts]
    # Put any rounding residue on the largest entry so the estimate sums to one.
    k = int(np.argmax(counts))
    p[k] = 1.0 - math.fsum(p[:k] + p[k + 1:])
    return RegionProbabilities.from_sequence(p)


class PmaxResult(NamedTuple):
    exact: float
    asymptote: float


def high_snr_pmax(params: SystemParams) -> PmaxResult:
    """Exact P_max = max(P_R3, P_R4) and its first-order high-SNR asymptote."""
    t = make_thresholds(params.rate0).gamma_thr
    exact = _one_minus_exp(t / (params.omega_min * params.gamma)) * math.exp(
        -t / (params.omega_max * params.gamma)
    )
    return PmaxResult(exact, t / (params.omega_min * params.gamma))
