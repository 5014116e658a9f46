"""Closed-form maximum sum throughput and minimum system outage."""
from __future__ import annotations

from typing import NamedTuple

from .channel import SystemParams, make_thresholds
from .regions import EPS, RegionProbabilities, analytic_probabilities, high_snr_pmax


def first_branch(probs: RegionProbabilities) -> bool:
    """True when (P_R2 - P_R1) / P_min <= 2 P_max / P_min - 1.

    Tested multiplied through by P_min, so P_min = 0 falls on the side that
    keeps the throughput continuous.
    """
    d = probs.p_r2 - probs.p_r1
    return d <= 2.0 * probs.p_max - probs.p_min + EPS


def _check(probs) -> RegionProbabilities:
    if not isinstance(probs, RegionProbabilities):
        probs = RegionProbabilities.from_sequence(probs)
    return probs


def max_sum_throughput(probs: RegionProbabilities, rate0: float = 1.0) -> float:
    probs = _check(probs)
    make_thresholds(rate0)  # validates rate0
    p1, p2, p3, p4, _ = probs.as_tuple()
    if first_branch(probs):
        return (p1 + p2 + probs.p_min) * rate0
    return (2.0 / 3.0) * (2.0 * p1 + p2 + p3 + p4) * rate0


def system_outage(probs: RegionProbabilities) -> float:
    probs = _check(probs)
    if first_branch(probs):
        return probs.p_r5 + probs.p_max
    return 1.0 / 3.0 - (2.0 / 3.0) * (probs.p_r1 - probs.p_r5)


class HighSnrSummary(NamedTuple):
    r_sum_limit: float
    f_sys_exact: float
    f_sys_asymptote: float


def high_snr_summary(params: SystemParams) -> HighSnrSummary:
    """(R0, P_max at this SNR, gamma_thr / (omega_min * gamma))."""
    pm = high_snr_pmax(params)
    return HighSnrSummary(params.rate0, pm.exact, pm.asymptote)


def analytic_point(params: SystemParams) -> tuple[float, float]:
    """(R_sum, F_sys) for the optimal policy at the given parameters."""
    probs = analytic_probabilities(params)
    return max_sum_throughput(probs, params.rate0), system_outage(probs)
