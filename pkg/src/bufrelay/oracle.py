"""Verification oracles.

* ``dp_offline_optimum``: offline optimum of total delivered bits over a known
  fading trace, by forward dynamic programming over integer queue levels.
* ``enumerate_optimum``: brute force over all 7**N mode sequences (N <= 8).
* ``lp_relaxation_bound``: LP relaxation of the same problem, an upper bound.
* ``stationary_lp``: best stationary randomized policy from region probabilities.
* selection metrics and ``verify_policy_kkt``, which checks that every mode the
  dice can pick maximizes the metric at the branch's multiplier point.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .channel import ChannelDraw, Thresholds, classify_region, classify_regions, region_flags
from .modes import DECODABLE, SnrRegion, TransmissionMode as M
from .policy import DIE_FACES, FACE_TOL, DiceTable, StatisticalBranch, identify_branch
from .regions import EPS, RegionProbabilities

DP_HORIZON_CAP = 10_000
NEG = np.iinfo(np.int64).min // 4

# queue moves of M1..M6: (dq1, dq2, delivered packets)
MOVES = {1: (1, 0, 0), 2: (0, 1, 0), 3: (1, 1, 0), 4: (0, -1, 1), 5: (-1, 0, 1), 6: (-1, -1, 2)}


def _region_codes(fading, thr: Thresholds) -> np.ndarray:
    """Accept a sequence of ChannelDraw, an (N, 2) SNR array, or region codes."""
    if isinstance(fading, np.ndarray) and fading.ndim == 1:
        return fading.astype(np.int64)
    if isinstance(fading, np.ndarray):
        return classify_regions(fading[:, 0], fading[:, 1], thr).astype(np.int64)
    return np.array([int(classify_region(d, thr)) for d in fading], dtype=np.int64)


def _slices(dq1, dq2, k):
    n = k + 1
    return (slice(max(0, -dq1), n - max(0, dq1)), slice(max(0, -dq2), n - max(0, dq2)),
            slice(max(0, dq1), n - max(0, -dq1)), slice(max(0, dq2), n - max(0, -dq2)))


def _shift(dst, src, dq1, dq2, gain, k):
    """dst[q + dq] = max(dst[q + dq], src[q] + gain); returns the improved mask."""
    s1, s2, d1, d2 = _slices(dq1, dq2, k)
    cand = src[s1, s2] + gain
    view = dst[d1, d2]
    better = cand > view
    view[better] = cand[better]
    return better, d1, d2


def _dp(regions: np.ndarray, k: int, keep_path: bool):
    f = np.full((k + 1, k + 1), NEG, dtype=np.int64)
    f[0, 0] = 0
    choice = np.zeros((len(regions), k + 1, k + 1), dtype=np.int8) if keep_path else None
    for i, r in enumerate(regions):
        g = f.copy()  # M7 (or any starved mode): no change
        for m in range(1, 7):
            if not DECODABLE[r, m]:
                continue
            dq1, dq2, gain = MOVES[m]
            if keep_path:
                better, d1, d2 = _shift(g, f, dq1, dq2, gain, k)
                choice[i][d1, d2][better] = m
            else:
                s1, s2, d1, d2 = _slices(dq1, dq2, k)
                np.maximum(g[d1, d2], f[s1, s2] + gain, out=g[d1, d2])
        f = g
    best = np.unravel_index(int(np.argmax(f)), f.shape)
    return int(f[best]), best, choice


def _backtrack(choice, end):
    q1, q2 = end
    modes = np.full(choice.shape[0], int(M.M7), dtype=np.int8)
    for i in range(choice.shape[0] - 1, -1, -1):
        m = int(choice[i, q1, q2])
        if m:
            modes[i] = m
            dq1, dq2, _ = MOVES[m]
            q1 -= dq1
            q2 -= dq2
    if (q1, q2) != (0, 0):
        raise AssertionError("DP backtrack did not return to empty buffers")
    return modes


@dataclass
class DpResult:
    delivered: float  # bits over the horizon
    modes: np.ndarray  # one optimal mode sequence
    queue_cap: int
    exact: bool  # cap large enough that no optimal path can hit it
    horizon: int
    lp_bound: float | None = None

    @property
    def per_slot(self) -> float:
        return self.delivered / self.horizon if self.horizon else 0.0


def dp_offline_optimum(fading, thr: Thresholds, rate0: float = 1.0, horizon: int | None = None,
                       cap: int = DP_HORIZON_CAP, queue_cap: int | None = None,
                       certify: bool = False) -> DpResult:
    """Maximum total delivered bits over the trace, with one optimal mode sequence.

    Useful queue levels never exceed min(i, N - i) <= N // 2 (packets stored but
    never forwarded only waste slots), so a grid of side N // 2 is exact. Larger
    horizons start from a small grid that doubles until the optimum stops
    changing; ``certify`` additionally solves the LP relaxation as a proof bound.
    """
    regions = _region_codes(fading, thr)
    if horizon is not None:
        regions = regions[:horizon]
    n = len(regions)
    if n > cap:
        raise ValueError(f"horizon {n} exceeds DP cap {cap}")
    full = n // 2
    if queue_cap is not None:
        k = min(queue_cap, full)
        value, _, _ = _dp(regions, k, False)
    else:
        k = min(32, full)
        value, _, _ = _dp(regions, k, False)
        while k < full:
            k2 = min(2 * k, full)
            v2, _, _ = _dp(regions, k2, False)
            k, stable, value = k2, v2 == value, v2
            if stable:
                break
    value, end, choice = _dp(regions, k, True)
    modes = _backtrack(choice, end) if n else np.zeros(0, dtype=np.int8)
    res = DpResult(value * rate0, modes, k, k >= full, n)
    if certify and n:
        res.lp_bound = lp_relaxation_bound(regions, thr, rate0)
    return res


def _dp_batch(regions: np.ndarray, k: int) -> np.ndarray:
    """Optimal delivered packets for each row of an (T, N) region matrix."""
    t = regions.shape[0]
    f = np.full((t, k + 1, k + 1), NEG, dtype=np.int64)
    f[:, 0, 0] = 0
    allowed = DECODABLE[regions]  # (T, N, 8)
    for i in range(regions.shape[1]):
        g = f.copy()
        for m in range(1, 7):
            mask = allowed[:, i, m]
            if not mask.any():
                continue
            dq1, dq2, gain = MOVES[m]
            s1, s2, d1, d2 = _slices(dq1, dq2, k)
            cand = f[:, s1, s2] + gain
            cand[~mask] = NEG
            np.maximum(g[:, d1, d2], cand, out=g[:, d1, d2])
        f = g
    return f.reshape(t, -1).max(axis=1)


def dp_offline_batch(traces, thr: Thresholds, rate0: float = 1.0, cap: int = DP_HORIZON_CAP) -> np.ndarray:
    """Offline optima (bits) for many equal-length traces; values only.

    Same doubling rule as :func:`dp_offline_optimum`, applied per trace.
    """
    regions = np.stack([_region_codes(tr, thr) for tr in traces])
    n = regions.shape[1]
    if n > cap:
        raise ValueError(f"horizon {n} exceeds DP cap {cap}")
    full = n // 2
    k = min(32, full)
    values = _dp_batch(regions, k)
    todo = np.arange(len(regions))
    while k < full and todo.size:
        k = min(2 * k, full)
        nxt = _dp_batch(regions[todo], k)
        changed = nxt != values[todo]
        values[todo] = nxt
        todo = todo[changed]
    return values.astype(float) * rate0


def enumerate_optimum(fading, thr: Thresholds, rate0: float = 1.0) -> tuple[float, tuple[int, ...]]:
    """Exhaustive search over all 7**N mode sequences, engine transition rules."""
    regions = _region_codes(fading, thr)
    n = len(regions)
    if n > 8:
        raise ValueError("enumeration limited to N <= 8")
    if n == 0:
        return 0.0, ()
    seqs = np.array(list(itertools.product(range(1, 8), repeat=n)), dtype=np.int8)
    q1 = np.zeros(len(seqs), dtype=np.int16)
    q2 = np.zeros(len(seqs), dtype=np.int16)
    total = np.zeros(len(seqs), dtype=np.int16)
    for i, r in enumerate(regions):
        m = seqs[:, i]
        ok = DECODABLE[r, m]
        for code, (dq1, dq2, gain) in MOVES.items():
            sel = ok & (m == code)
            if dq1 < 0:
                sel &= q1 >= 1
            if dq2 < 0:
                sel &= q2 >= 1
            q1[sel] += dq1
            q2[sel] += dq2
            total[sel] += gain
    best = int(np.argmax(total))
    return float(total[best]) * rate0, tuple(int(x) for x in seqs[best])


def lp_relaxation_bound(fading, thr: Thresholds, rate0: float = 1.0) -> float:
    """Upper bound on the offline optimum: mode indicators relaxed to [0, 1]."""
    regions = _region_codes(fading, thr)
    n = len(regions)
    if n == 0:
        return 0.0
    nx = 6 * n
    # variables: x[i, m-1] for M1..M6, then q1[i], q2[i] after slot i
    ub = np.concatenate([DECODABLE[regions][:, 1:7].astype(float).ravel(), np.full(2 * n, np.inf)])
    c = np.zeros(nx + 2 * n)
    c[3:nx:6] = -1.0
    c[4:nx:6] = -1.0
    c[5:nx:6] = -2.0
    rows, cols, vals = [], [], []
    slots = np.arange(n)
    for q, (ins, outs) in enumerate((((0, 2), (4, 5)), ((1, 2), (3, 5)))):
        row = 2 * slots + q
        rows.append(row), cols.append(nx + 2 * slots + q), vals.append(np.ones(n))
        rows.append(row[1:]), cols.append(nx + 2 * slots[:-1] + q), vals.append(-np.ones(n - 1))
        for m in ins:
            rows.append(row), cols.append(6 * slots + m), vals.append(-np.ones(n))
        for m in outs:
            rows.append(row), cols.append(6 * slots + m), vals.append(np.ones(n))
    a_eq = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(2 * n, nx + 2 * n))
    a_ub = sparse.csr_matrix((np.ones(nx), (np.repeat(slots, 6), np.arange(nx))), shape=(n, nx + 2 * n))
    res = linprog(c, A_ub=a_ub, b_ub=np.ones(n), A_eq=a_eq, b_eq=np.zeros(2 * n),
                  bounds=np.column_stack([np.zeros_like(ub), ub]), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    return -res.fun * rate0


def stationary_lp(probs: RegionProbabilities, rate0: float = 1.0) -> tuple[float, np.ndarray]:
    """Best stationary policy: maximize sum throughput subject to queue balance.

    Returns (R_sum, x) where x[l-1, k-1] is the probability of being in region
    l and choosing mode k.
    """
    p = probs.as_tuple()
    idx = [(l, k) for l in range(1, 6) for k in range(1, 8) if DECODABLE[l, k]]
    nv = len(idx)
    c = np.zeros(nv)
    a_eq = np.zeros((7, nv))
    for j, (l, k) in enumerate(idx):
        dq1, dq2, gain = MOVES.get(k, (0, 0, 0))
        c[j] = -gain
        a_eq[l - 1, j] = 1.0
        a_eq[5, j] = dq1  # buffer 1 inflow equals outflow
        a_eq[6, j] = dq2
    res = linprog(c, A_eq=a_eq, b_eq=list(p) + [0.0, 0.0], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"stationary LP failed: {res.message}")
    x = np.zeros((5, 7))
    for j, (l, k) in enumerate(idx):
        x[l - 1, k - 1] = res.x[j]
    return -res.fun * rate0, x


# -- selection metrics ----------------------------------------------------

@dataclass(frozen=True)
class SelectionWeights:
    """Multipliers (mu1, mu2) of the two queue-balance constraints."""

    mu1: float
    mu2: float

    def __post_init__(self):
        m1, m2, tol = self.mu1, self.mu2, 1e-12
        if not (m1 + m2 <= 1 + tol and m1 + 2 * m2 >= 1 - tol and 2 * m1 + m2 >= 1 - tol):
            raise ValueError(f"weights ({m1}, {m2}) outside the feasible triangle")


POINT_A = SelectionWeights(0.0, 1.0)
POINT_B = SelectionWeights(1.0 / 3.0, 1.0 / 3.0)
POINT_C = SelectionWeights(1.0, 0.0)


@dataclass(frozen=True)
class SelectionMetrics:
    values: tuple[float, ...]  # Lambda_1..Lambda_7

    def __getitem__(self, mode) -> float:
        return self.values[int(mode) - 1]

    def argmax(self, flags: Sequence[bool], tol: float = 1e-12) -> set[M]:
        best = max(v for v, o in zip(self.values, flags) if o)
        return {M(k + 1) for k, (v, o) in enumerate(zip(self.values, flags)) if o and v >= best - tol}


def selection_metrics(weights: SelectionWeights, o_flags: Sequence[bool], rate0: float = 1.0) -> SelectionMetrics:
    if len(o_flags) != 7:
        raise ValueError("need seven decodability flags")
    m1, m2 = weights.mu1, weights.mu2
    coef = (1 - m1, 1 - m2, 2 - m1 - m2, m2, m1, m1 + m2, 0.0)
    return SelectionMetrics(tuple(c * float(bool(o)) * rate0 for c, o in zip(coef, o_flags)))


def weight_point(branch: StatisticalBranch) -> SelectionWeights:
    """Multiplier point at which a branch's dice satisfy the argmax conditions.

    Cells 1 to 3 keep buffer 2 (P_R3 <= P_R4) or buffer 1 binding, which puts
    the multipliers at a corner of the triangle; cell 4 needs the centre point.
    """
    if branch.cell == 4:
        return POINT_B
    return POINT_A if branch.order == 1 else POINT_C


@dataclass
class KktViolation:
    region: int
    mode: int
    probability: float
    metrics: list[float]


@dataclass
class KktReport:
    branch: str
    mu1: float
    mu2: float
    checked: int = 0
    violations: list[KktViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def verify_policy_kkt(probs: RegionProbabilities, dice: DiceTable, rate0: float = 1.0,
                      tol: float = 1e-12) -> KktReport:
    """Check that every mode used with positive probability is a metric argmax."""
    branch = identify_branch(probs)
    w = weight_point(branch)
    rep = KktReport(branch.label, w.mu1, w.mu2)
    for region in SnrRegion:
        if probs[int(region)] <= 0:
            continue
        flags = region_flags(region)
        lam = selection_metrics(w, flags, rate0)
        best = lam.argmax(flags, tol)
        used = dice.mode_probabilities(region) if region in DIE_FACES else {M.M7: 1.0}
        for mode, p in used.items():
            if p <= FACE_TOL:
                continue
            rep.checked += 1
            if mode not in best:
                rep.violations.append(KktViolation(int(region), int(mode), float(p), list(lam.values)))
    return rep


def integrated_probabilities(params) -> tuple[float, float, float, float, float]:
    """Region probabilities by direct 2-D quadrature, in unit-mean variables.

    Returned raw (not renormalized) so quadrature error stays visible.
    """
    from scipy.integrate import dblquad, quad

    from .channel import make_thresholds

    thr = make_thresholds(params.rate0)
    a, b = params.omega1 * params.gamma, params.omega2 * params.gamma
    tu, tv = thr.gamma_thr / a, thr.gamma_thr / b
    opts = dict(epsabs=1e-15, epsrel=1e-13)

    def pdf(v, u):
        return math.exp(-u - v)

    def v_sum(u):  # v on the boundary a u + b v = gamma_thr_sum
        return (thr.gamma_thr_sum - a * u) / b

    u_mid = max(tu, (thr.gamma_thr_sum - thr.gamma_thr) / a)  # where v_sum(u) = tv
    p2 = dblquad(pdf, tu, u_mid, lambda u: tv, lambda u: max(tv, v_sum(u)), **opts)[0]
    p1 = dblquad(pdf, tu, u_mid, lambda u: max(tv, v_sum(u)), lambda u: np.inf, **opts)[0]
    p1 += quad(lambda u: math.exp(-u), u_mid, np.inf, **opts)[0] * math.exp(-tv)
    above_u = quad(lambda u: math.exp(-u), tu, np.inf, **opts)[0]
    below_u = quad(lambda u: math.exp(-u), 0.0, tu, **opts)[0]
    above_v = quad(lambda v: math.exp(-v), tv, np.inf, **opts)[0]
    below_v = quad(lambda v: math.exp(-v), 0.0, tv, **opts)[0]
    return (p1, p2, above_u * below_v, below_u * above_v, below_u * below_v)
