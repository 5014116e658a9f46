"""Optimal fixed-rate mode selection: statistical branch, die probabilities, mode draws.

Dice (faces in order):
    die 1, region R1: M3, M6
    die 2, region R2: M1, M2, M6
    die 3, region R3: M1, M4, M7
    die 4, region R4: M2, M5, M7
Region R5 always selects M7.

The die probabilities depend on the region probabilities only, through one of
eight statistical branches: the order of P_R3 and P_R4 and four ranges of
(P_R2 - P_R1) / P_min. The ratio tests are evaluated multiplied through by
P_min >= 0, which keeps them defined when P_min = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .modes import SnrRegion, TransmissionMode as M
from .regions import EPS, RegionProbabilities

DIE_FACES = {
    SnrRegion.R1: (M.M3, M.M6),
    SnrRegion.R2: (M.M1, M.M2, M.M6),
    SnrRegion.R3: (M.M1, M.M4, M.M7),
    SnrRegion.R4: (M.M2, M.M5, M.M7),
}

FACE_TOL = 1e-12


class InvalidProbabilityError(ValueError):
    """A die face fell outside [0, 1]; points at a branch-identification bug."""


@dataclass(frozen=True)
class StatisticalBranch:
    order: int  # 1: P_R3 <= P_R4, 2: P_R3 >= P_R4
    cell: int  # 1..4, column of the die-probability table

    def __post_init__(self):
        if self.order not in (1, 2) or self.cell not in (1, 2, 3, 4):
            raise ValueError(f"invalid branch {self.order}/{self.cell}")

    @property
    def label(self) -> str:
        return f"{'P3<=P4' if self.order == 1 else 'P3>=P4'}/cell{self.cell}"


def branch_ratio(probs: RegionProbabilities) -> float:
    """(P_R2 - P_R1) / P_min, +-inf when P_min = 0."""
    d = probs.p_r2 - probs.p_r1
    if probs.p_min > 0:
        return d / probs.p_min
    return math.copysign(math.inf, d) if d != 0 else 0.0


def identify_branch(probs: RegionProbabilities) -> StatisticalBranch:
    """Branch of the die table for ``probs``; ties resolve to the lower cell.

    Comparisons are exact. Adjacent branches agree on their common boundary,
    and exact tests keep every face formula inside [0, 1] even when P_min is
    tiny, where an epsilon slack would let ratios like d / P_min blow up.
    """
    p1, p2, p3, p4, _ = probs.as_tuple()
    order = 1 if p3 <= p4 else 2
    pmin, pmax = (p3, p4) if order == 1 else (p4, p3)
    d = p2 - p1
    if d <= 0.0:
        cell = 1
    elif d <= pmin:
        cell = 2
    elif d <= 2.0 * pmax - pmin:
        cell = 3
    else:
        cell = 4
    return StatisticalBranch(order, cell)


@dataclass(frozen=True)
class DiceTable:
    die1: tuple[float, float]
    die2: tuple[float, float, float]
    die3: tuple[float, float, float]
    die4: tuple[float, float, float]
    branch: StatisticalBranch
    fairness: float
    fairness_range: tuple[float, float] = (0.0, 0.0)
    _cum: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        for die in self.dice:
            if any(not (0.0 <= p <= 1.0) for p in die) or abs(math.fsum(die) - 1.0) > 1e-12:
                raise InvalidProbabilityError(f"invalid die {die}")
        cum = {}
        for region, die in zip(DIE_FACES, self.dice):
            c = np.cumsum(die)
            c[-1] = 1.0
            cum[region] = c
        object.__setattr__(self, "_cum", cum)

    @property
    def dice(self):
        return (self.die1, self.die2, self.die3, self.die4)

    def die_for(self, region: SnrRegion) -> tuple[float, ...]:
        return self.dice[int(region) - 1]

    def mode_probabilities(self, region: SnrRegion) -> dict[M, float]:
        """Probability of each mode being selected in ``region``."""
        region = SnrRegion(region)
        if region is SnrRegion.R5:
            return {M.M7: 1.0}
        return dict(zip(DIE_FACES[region], self.die_for(region)))


def _finish(faces, name):
    """Clamp listed faces, append the last face as 1 - sum, validate."""
    out = []
    for p in faces:
        if not (-FACE_TOL <= p <= 1 + FACE_TOL):
            raise InvalidProbabilityError(f"{name}: face {p!r} outside [0, 1]")
        out.append(min(max(p, 0.0), 1.0))
    last = 1.0 - math.fsum(out)
    if not (-FACE_TOL <= last <= 1 + FACE_TOL):
        raise InvalidProbabilityError(f"{name}: last face {last!r} outside [0, 1]")
    out.append(min(max(last, 0.0), 1.0))
    return tuple(out)


def _table_faces(probs: RegionProbabilities, branch: StatisticalBranch, lam: float):
    """Listed (M-1) faces of every die for one branch; ``lam`` splits the free sum."""
    p1, p2, p3, p4, _ = probs.as_tuple()
    o, c = branch.order, branch.cell
    silent = (0.0, 0.0)

    if c in (1, 2):
        d1 = (0.5 + p2 / (2.0 * p1),) if c == 1 and p1 > 0 else (1.0,)
        d2 = (0.0, 0.0)
        if o == 1:
            if p4 == 0:  # P_R3 = P_R4 = 0: dice 3 and 4 never rolled
                return d1, d2, silent, silent
            s = p3 / p4
            d4 = ((1.0 - lam) * s, lam * s)
            if p3 == 0:
                return d1, d2, silent, d4
            # balance of buffer 2 gives P3 p3(1) = P4 p4(2) + (P2 - P1), i.e. lam + offset
            p31 = lam + ((p2 - p1) / p3 if c == 2 else 0.0)
            return d1, d2, (p31, 1.0 - p31), d4
        else:
            s = p4 / p3
            d3 = ((1.0 - lam) * s, lam * s)
            if p4 == 0:
                return d1, d2, d3, silent
            p41 = lam + ((p2 - p1) / p4 if c == 2 else 0.0)
            return d1, d2, d3, (p41, 1.0 - p41)

    d1 = (1.0,)
    if c == 3:
        if o == 1:
            d2 = (0.5 - (p1 + p3) / (2.0 * p2), 0.0)
            d3 = (1.0, 0.0)
            d4 = ((p2 - p1 + p3) / (2.0 * p4), 0.0)
        else:
            d2 = (0.0, 0.5 - (p1 + p4) / (2.0 * p2))
            d3 = ((p2 - p1 + p4) / (2.0 * p3), 0.0)
            d4 = (1.0, 0.0)
        return d1, d2, d3, d4

    d2 = (
        1.0 / 3.0 - (p1 + 2.0 * p3 - p4) / (3.0 * p2),
        1.0 / 3.0 - (p1 + 2.0 * p4 - p3) / (3.0 * p2),
    )
    return d1, d2, (1.0, 0.0), (1.0, 0.0)


def fairness_range(probs: RegionProbabilities, branch: StatisticalBranch) -> tuple[float, float]:
    """Interval of the split parameter keeping every coupled face inside [0, 1]."""
    if branch.cell == 1:
        return (0.0, 1.0)
    if branch.cell == 2:
        pmin = probs.p_min
        off = (probs.p_r2 - probs.p_r1) / pmin if pmin > 0 else 0.0
        return (0.0, min(max(1.0 - off, 0.0), 1.0))
    return (0.0, 0.0)


def _assemble(probs, branch, lam, rng_range) -> DiceTable:
    faces = _table_faces(probs, branch, lam)
    dice = [_finish(f, f"die{i + 1}") for i, f in enumerate(faces)]
    return DiceTable(*dice, branch=branch, fairness=lam, fairness_range=rng_range)


def build_dice(probs: RegionProbabilities, fairness: float | None = None) -> DiceTable:
    """Die probabilities for ``probs``.

    ``fairness`` in [0, 1] splits the one free sum (die 4 when P_R3 <= P_R4 in
    cells 1-2, die 3 symmetrically): face 2 gets ``fairness * s`` and face 1
    the rest. It is clamped to the feasible interval. ``None`` picks the
    endpoint with the larger user-1-to-user-2 rate.
    """
    return build_dice_for_branch(probs, identify_branch(probs), fairness)


def build_dice_for_branch(probs, branch: StatisticalBranch, fairness: float | None = None) -> DiceTable:
    lo, hi = fairness_range(probs, branch)
    if fairness is None:
        cands = [_assemble(probs, branch, lam, (lo, hi)) for lam in (lo, hi)]
        r12 = [expected_rates(probs, d, 1.0).r_r2 for d in cands]
        return cands[1] if r12[1] > r12[0] + EPS else cands[0]
    if not (0.0 <= fairness <= 1.0):
        raise ValueError(f"fairness must lie in [0, 1], got {fairness!r}")
    return _assemble(probs, branch, min(max(fairness, lo), hi), (lo, hi))


def select_mode(region: SnrRegion, dice: DiceTable, rng: np.random.Generator) -> M:
    region = SnrRegion(region)
    if region is SnrRegion.R5:
        return M.M7
    u = rng.random()
    idx = int(np.searchsorted(dice._cum[region], u, side="right"))
    return DIE_FACES[region][idx]


def select_modes(regions: np.ndarray, dice: DiceTable, rng: np.random.Generator) -> np.ndarray:
    """Vectorised select_mode over a region sequence; same uniforms as slot-by-slot calls."""
    regions = np.asarray(regions)
    modes = np.full(regions.shape, int(M.M7), dtype=np.int8)
    active = np.flatnonzero(regions != SnrRegion.R5)
    u = rng.random(active.size)
    reg = regions[active]
    for region, faces in DIE_FACES.items():
        sel = reg == region
        idx = np.searchsorted(dice._cum[region], u[sel], side="right")
        modes[active[sel]] = np.asarray(faces, dtype=np.int8)[idx]
    return modes


class LinkRates(NamedTuple):
    r_1r: float
    r_2r: float
    r_r1: float
    r_r2: float

    @property
    def r_sum(self) -> float:
        return self.r_1r + self.r_2r


def expected_rates(probs: RegionProbabilities, dice: DiceTable, rate0: float) -> LinkRates:
    """Average per-link rates of the dice, assuming the relay buffers never run dry."""
    p1, p2, p3, p4, _ = probs.as_tuple()
    d1, d2, d3, d4 = dice.dice
    r_1r = p1 * d1[0] + p2 * d2[0] + p3 * d3[0]
    r_2r = p1 * d1[0] + p2 * d2[1] + p4 * d4[0]
    r_r1 = p1 * d1[1] + p2 * d2[2] + p3 * d3[1]
    r_r2 = p1 * d1[1] + p2 * d2[2] + p4 * d4[1]
    return LinkRates(r_1r * rate0, r_2r * rate0, r_r1 * rate0, r_r2 * rate0)


def swap_users(dice: DiceTable) -> tuple:
    """Dice of the relabelled system (user 1 <-> user 2), as plain tuples."""
    d2 = dice.die2
    return (dice.die1, (d2[1], d2[0], d2[2]), dice.die4, dice.die3)
