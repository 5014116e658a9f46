"""Fixed-schedule comparison protocols with relay buffering.

Each protocol splits the horizon into phases with fixed transmission modes:

    twoway: M1 (a), M5 (b), M2 (c), M4 (d)   one hop and one direction per phase
    tdbc:   M1 (t1), M2 (t2), M6 (tb)        two uplinks, one joint broadcast
    mabc:   M3 (t), M6 (1 - t)               joint uplink, joint broadcast

A phase slot carries R0 when its mode is decodable. With infinite buffers the
delivered rate of a direction is the smaller of its two per-hop flows. The
joint modes succeed only when both receivers decode (p_mac = P_R1 for M3,
p_bc = e1 * e2 for M6), matching the slot engine.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .channel import SystemParams, classify_regions, draw_gains_batch, make_thresholds
from .engine import ThroughputReport, _streams, simulate_modes, summarize
from .modes import TransmissionMode as M
from .regions import analytic_probabilities


class SchemeTag(str, enum.Enum):
    TWOWAY = "twoway"
    TDBC = "tdbc"
    MABC = "mabc"


PHASE_MODES = {
    SchemeTag.TWOWAY: (M.M1, M.M5, M.M2, M.M4),
    SchemeTag.TDBC: (M.M1, M.M2, M.M6),
    SchemeTag.MABC: (M.M3, M.M6),
}


def scheme_tag(tag) -> SchemeTag:
    if isinstance(tag, SchemeTag):
        return tag
    try:
        return SchemeTag(str(tag).lower())
    except ValueError:
        raise ValueError(f"unknown benchmark scheme {tag!r}") from None


@dataclass(frozen=True)
class BenchmarkScheme:
    tag: SchemeTag
    fractions: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "tag", scheme_tag(self.tag))
        fr = tuple(float(x) for x in self.fractions)
        object.__setattr__(self, "fractions", fr)
        if len(fr) != len(PHASE_MODES[self.tag]):
            raise ValueError(f"{self.tag.value} needs {len(PHASE_MODES[self.tag])} fractions")
        if any(x < 0 or not math.isfinite(x) for x in fr):
            raise ValueError("fractions must be finite and nonnegative")
        if abs(math.fsum(fr) - 1.0) > 1e-12:
            raise ValueError("fractions must sum to 1")

    @property
    def modes(self) -> tuple[M, ...]:
        return PHASE_MODES[self.tag]


class LinkSuccess(NamedTuple):
    e1: float
    e2: float
    p_mac: float

    @property
    def p_bc(self) -> float:
        return self.e1 * self.e2


def link_success_probs(params: SystemParams) -> LinkSuccess:
    t = make_thresholds(params.rate0).gamma_thr
    e1 = math.exp(-t / (params.omega1 * params.gamma))
    e2 = math.exp(-t / (params.omega2 * params.gamma))
    return LinkSuccess(e1, e2, analytic_probabilities(params).p_r1)


class BenchmarkResult(NamedTuple):
    r_sum: float
    f_sys: float
    scheme: BenchmarkScheme


def _phase_success(tag: SchemeTag, s: LinkSuccess) -> tuple[float, ...]:
    if tag is SchemeTag.TWOWAY:
        return (s.e1, s.e2, s.e2, s.e1)
    if tag is SchemeTag.TDBC:
        return (s.e1, s.e2, s.p_bc)
    return (s.p_mac, s.p_bc)


def flow_rates(scheme: BenchmarkScheme, s: LinkSuccess) -> tuple[float, float]:
    """Delivered (1->2, 2->1) rates in packets/slot for given fractions."""
    q = [f * p for f, p in zip(scheme.fractions, _phase_success(scheme.tag, s))]
    if scheme.tag is SchemeTag.TWOWAY:
        return min(q[0], q[1]), min(q[2], q[3])
    if scheme.tag is SchemeTag.TDBC:
        return min(q[0], q[2]), min(q[1], q[2])
    return min(q[0], q[1]), min(q[0], q[1])


def _closed_form(tag: SchemeTag, s: LinkSuccess) -> tuple[float, ...]:
    e1, e2, pmac, pbc = s.e1, s.e2, s.p_mac, s.p_bc
    if tag is SchemeTag.TWOWAY:
        if e1 + e2 <= 0:
            return (0.25, 0.25, 0.25, 0.25)
        h = 2.0 * (e1 + e2)
        return (e2 / h, e1 / h, e1 / h, e2 / h)
    if tag is SchemeTag.TDBC:
        tb = 1.0 / (1.0 + e1 + e2)
        return (tb * e2, tb * e1, tb)
    if pmac + pbc <= 0:
        return (0.5, 0.5)
    t = pbc / (pmac + pbc)
    return (t, 1.0 - t)


def _normalize(fr) -> tuple[float, ...]:
    fr = np.clip(np.asarray(fr, dtype=float), 0.0, None)
    fr = fr / fr.sum()
    fr[-1] = 1.0 - math.fsum(fr[:-1])
    return tuple(float(x) for x in fr)


def optimize_benchmark(tag, params: SystemParams) -> BenchmarkResult:
    """Sum-throughput-optimal phase fractions (flow equalization)."""
    tag = scheme_tag(tag)
    s = link_success_probs(params)
    scheme = BenchmarkScheme(tag, _normalize(_closed_form(tag, s)))
    r = sum(flow_rates(scheme, s)) * params.rate0
    return BenchmarkResult(r, 1.0 - r / params.rate0, scheme)


def flow_lp(tag, params: SystemParams) -> BenchmarkResult:
    """Same optimum as an explicit linear program over (fractions, f12, f21)."""
    tag = scheme_tag(tag)
    s = link_success_probs(params)
    succ = _phase_success(tag, s)
    k = len(succ)
    # hop constraints: f_dir <= fraction[phase] * success[phase]
    hops = {
        SchemeTag.TWOWAY: [(0, 0), (0, 1), (1, 2), (1, 3)],
        SchemeTag.TDBC: [(0, 0), (0, 2), (1, 1), (1, 2)],
        SchemeTag.MABC: [(0, 0), (0, 1), (1, 0), (1, 1)],
    }[tag]
    a_ub = np.zeros((len(hops), k + 2))
    for row, (direction, phase) in enumerate(hops):
        a_ub[row, k + direction] = 1.0
        a_ub[row, phase] = -succ[phase]
    a_eq = np.zeros((1, k + 2))
    a_eq[0, :k] = 1.0
    c = np.zeros(k + 2)
    c[k:] = -1.0
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(hops)), A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (k + 2), method="highs")
    if res.status != 0:
        raise RuntimeError(f"flow LP failed: {res.message}")
    scheme = BenchmarkScheme(tag, _normalize(res.x[:k]))
    r = -res.fun * params.rate0
    return BenchmarkResult(r, 1.0 - r / params.rate0, scheme)


def apportion(fractions, n: int) -> np.ndarray:
    """Largest-remainder integer slot counts summing to n."""
    fr = np.asarray(fractions, dtype=float)
    raw = fr * n
    counts = np.floor(raw).astype(np.int64)
    rest = n - int(counts.sum())
    if rest:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:rest]] += 1
    return counts


def phase_schedule(scheme: BenchmarkScheme, n_slots: int) -> np.ndarray:
    """Mode per slot, one contiguous block per phase (input phases first)."""
    counts = apportion(scheme.fractions, n_slots)
    return np.repeat(np.array([int(m) for m in scheme.modes], dtype=np.int64), counts)


def simulate_benchmark(tag, params: SystemParams, n_slots: int = 100_000, seed=0,
                       scheme: BenchmarkScheme | None = None) -> ThroughputReport:
    """Monte-Carlo run of a benchmark schedule through the slot engine.

    Averages over the whole horizon; block phases make a warmup cut meaningless.
    """
    tag = scheme_tag(tag)
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    if scheme is None:
        scheme = optimize_benchmark(tag, params).scheme
    elif scheme.tag is not tag:
        raise ValueError("scheme tag mismatch")
    thr = make_thresholds(params.rate0)
    fading_rng, _ = _streams(seed)
    snr = draw_gains_batch(fading_rng, params, n_slots)
    regions = classify_regions(snr[:, 0], snr[:, 1], thr)
    out = simulate_modes(regions, phase_schedule(scheme, n_slots))
    rep = summarize(out, params.rate0)
    return _with_stderr(rep, scheme, link_success_probs(params), n_slots)


def _with_stderr(rep: ThroughputReport, scheme: BenchmarkScheme, s: LinkSuccess, n: int) -> ThroughputReport:
    # Each direction delivers min(in, out) of two binomial counts; bound its
    # variance by the larger hop variance and add the directions' sds.
    from dataclasses import replace

    counts = apportion(scheme.fractions, n)
    var = [c * p * (1.0 - p) for c, p in zip(counts, _phase_success(scheme.tag, s))]
    if scheme.tag is SchemeTag.TWOWAY:
        dirs = (max(var[0], var[1]), max(var[2], var[3]))
    elif scheme.tag is SchemeTag.TDBC:
        dirs = (max(var[0], var[2]), max(var[1], var[2]))
    else:
        dirs = (max(var[0], var[1]),) * 2
    sd = (math.sqrt(dirs[0]) + math.sqrt(dirs[1])) / n * rep.rate0
    return replace(rep, r_sum_stderr=sd)
