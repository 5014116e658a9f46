"""Slot-level simulation of the buffer-aided two-way relay.

Each slot: fading draw -> region -> mode (dice) -> decodability and buffer
check -> queue update. Queues are kept as integer packet counts (one packet =
rate0 bits/symbol); rates are scaled by rate0 only when reported.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .channel import (
    ChannelDraw,
    SystemParams,
    Thresholds,
    classify_region,
    classify_regions,
    decodable,
    draw_gains_batch,
    make_thresholds,
)
from .modes import DECODABLE, SnrRegion, TransmissionMode as M
from .policy import DiceTable, build_dice, select_modes
from .regions import analytic_probabilities

N_BATCHES = 50


@dataclass(frozen=True)
class RelayBuffers:
    """Packets held in B1 (from user 1) and B2 (from user 2)."""

    n1: int = 0
    n2: int = 0

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("buffer contents cannot be negative")

    def levels(self, rate0: float) -> tuple[float, float]:
        """(Q1, Q2) in bits/symbol."""
        return (self.n1 * rate0, self.n2 * rate0)


@dataclass(frozen=True)
class SlotRecord:
    index: int
    region: SnrRegion
    mode: M
    delivered_12: float = 0.0
    delivered_21: float = 0.0
    stored_1: float = 0.0
    stored_2: float = 0.0
    starved: bool = False


def step(buffers: RelayBuffers, draw: ChannelDraw, mode: M, thr: Thresholds, rate0: float,
         index: int = 0) -> tuple[RelayBuffers, SlotRecord]:
    """Apply one slot's queue transition for an already selected mode."""
    mode = M(mode)
    region = classify_region(draw, thr)
    rec = SlotRecord(index, region, mode)
    if not decodable(mode, draw, thr) or mode is M.M7:
        return buffers, rec
    n1, n2 = buffers.n1, buffers.n2
    if mode is M.M1:
        return RelayBuffers(n1 + 1, n2), replace(rec, stored_1=rate0)
    if mode is M.M2:
        return RelayBuffers(n1, n2 + 1), replace(rec, stored_2=rate0)
    if mode is M.M3:
        return RelayBuffers(n1 + 1, n2 + 1), replace(rec, stored_1=rate0, stored_2=rate0)
    if mode is M.M4:
        if n2 >= 1:
            return RelayBuffers(n1, n2 - 1), replace(rec, delivered_21=rate0)
    elif mode is M.M5:
        if n1 >= 1:
            return RelayBuffers(n1 - 1, n2), replace(rec, delivered_12=rate0)
    elif n1 >= 1 and n2 >= 1:
        return RelayBuffers(n1 - 1, n2 - 1), replace(rec, delivered_12=rate0, delivered_21=rate0)
    return buffers, replace(rec, starved=True)


@dataclass(frozen=True)
class ThroughputReport:
    r_1r: float
    r_2r: float
    r_r1: float
    r_r2: float
    rate0: float
    n_slots: int
    starvation_rate: float
    r_sum_stderr: float = float("nan")

    @property
    def r_12(self) -> float:
        return self.r_r2

    @property
    def r_21(self) -> float:
        return self.r_r1

    @property
    def r_sum(self) -> float:
        return self.r_12 + self.r_21

    @property
    def f_12(self) -> float:
        return 1.0 - self.r_12 / (self.rate0 / 2.0)

    @property
    def f_21(self) -> float:
        return 1.0 - self.r_21 / (self.rate0 / 2.0)

    @property
    def f_sys(self) -> float:
        return (self.f_12 + self.f_21) / 2.0

    def as_dict(self) -> dict:
        keys = ("r_1r", "r_2r", "r_r1", "r_r2", "r_12", "r_21", "r_sum", "f_12", "f_21",
                "f_sys", "n_slots", "starvation_rate", "r_sum_stderr")
        return {k: getattr(self, k) for k in keys}


@dataclass
class SlotTrace:
    """Per-slot arrays of a run (length n_slots, warmup included)."""

    snr: np.ndarray
    regions: np.ndarray
    modes: np.ndarray
    q1: np.ndarray  # packets after the slot
    q2: np.ndarray
    delivered_12: np.ndarray  # packets
    delivered_21: np.ndarray
    starved: np.ndarray
    rate0: float = 1.0

    def __len__(self):
        return len(self.modes)


@dataclass
class SlotOutcome:
    """Packet-level outcome arrays of simulate_modes."""

    stored_1: np.ndarray
    stored_2: np.ndarray
    delivered_12: np.ndarray
    delivered_21: np.ndarray
    starved: np.ndarray
    final: RelayBuffers
    q1: np.ndarray | None = None
    q2: np.ndarray | None = None


def simulate_modes(regions: np.ndarray, modes: np.ndarray, initial: RelayBuffers = RelayBuffers(),
                   keep_queues: bool = False) -> SlotOutcome:
    """Run the queue chain for given per-slot regions and selected modes.

    Same transitions as :func:`step`, operating on integer region/mode codes.
    """
    regions = np.asarray(regions, dtype=np.int64)
    modes = np.asarray(modes, dtype=np.int64)
    n = modes.size
    ok = DECODABLE[regions, modes] & (modes != M.M7)
    events = np.flatnonzero(ok)
    codes = modes[events].tolist()
    success = bytearray(len(codes))
    n1, n2 = initial.n1, initial.n2
    if keep_queues:
        ev_q1 = np.empty(len(codes), dtype=np.int64)
        ev_q2 = np.empty(len(codes), dtype=np.int64)
    for j, m in enumerate(codes):
        if m == 3:
            n1 += 1
            n2 += 1
        elif m == 6:
            if n1 and n2:
                n1 -= 1
                n2 -= 1
                success[j] = 1
        elif m == 1:
            n1 += 1
        elif m == 2:
            n2 += 1
        elif m == 5:
            if n1:
                n1 -= 1
                success[j] = 1
        elif n2:  # m == 4
            n2 -= 1
            success[j] = 1
        if keep_queues:
            ev_q1[j] = n1
            ev_q2[j] = n2

    ev_modes = modes[events]
    ev_ok = np.frombuffer(bytes(success), dtype=np.uint8).astype(bool)
    relay = ev_modes >= 4

    def scatter(values):
        out = np.zeros(n, dtype=bool)
        out[events] = values
        return out

    out = SlotOutcome(
        stored_1=scatter((ev_modes == 1) | (ev_modes == 3)),
        stored_2=scatter((ev_modes == 2) | (ev_modes == 3)),
        delivered_12=scatter(ev_ok & ((ev_modes == 5) | (ev_modes == 6))),
        delivered_21=scatter(ev_ok & ((ev_modes == 4) | (ev_modes == 6))),
        starved=scatter(relay & ~ev_ok),
        final=RelayBuffers(n1, n2),
    )
    if keep_queues:
        # carry the last event's queue level forward over silent/failed slots
        pos = np.zeros(n, dtype=np.int64)
        pos[events] = np.arange(1, len(codes) + 1)
        pos = np.maximum.accumulate(pos)
        q1 = np.concatenate([[initial.n1], ev_q1])[pos]
        q2 = np.concatenate([[initial.n2], ev_q2])[pos]
        out.q1, out.q2 = q1, q2
    return out


def _batch_stderr(per_slot: np.ndarray, n_batches: int = N_BATCHES) -> float:
    n = per_slot.size
    if n < 2 * n_batches:
        return float("nan")
    size = n // n_batches
    means = per_slot[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def summarize(out: SlotOutcome, rate0: float, start: int = 0, stop: int | None = None) -> ThroughputReport:
    """ThroughputReport over slots [start, stop)."""
    sl = slice(start, stop)
    n = out.starved[sl].size
    if n < 1:
        raise ValueError("empty averaging window")
    d12 = out.delivered_12[sl]
    d21 = out.delivered_21[sl]
    per_slot = (d12.astype(np.int8) + d21.astype(np.int8)) * rate0
    return ThroughputReport(
        r_1r=int(out.stored_1[sl].sum()) * rate0 / n,
        r_2r=int(out.stored_2[sl].sum()) * rate0 / n,
        r_r1=int(d21.sum()) * rate0 / n,
        r_r2=int(d12.sum()) * rate0 / n,
        rate0=rate0,
        n_slots=n,
        starvation_rate=int(out.starved[sl].sum()) / n,
        r_sum_stderr=_batch_stderr(per_slot),
    )


def default_warmup(n_slots: int) -> int:
    return n_slots // 100


def _streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (fading, dice) generators for one run."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    fading, dice = ss.spawn(2)
    return np.random.default_rng(fading), np.random.default_rng(dice)


@dataclass
class RunResult:
    report: ThroughputReport
    report_no_warmup: ThroughputReport
    dice: DiceTable
    warmup: int
    trace: SlotTrace | None = None


def simulate(params: SystemParams, fairness: float | None = None, n_slots: int = 100_000,
             seed=0, warmup: int | None = None, trace: bool = False,
             dice: DiceTable | None = None) -> RunResult:
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    if warmup is None:
        warmup = default_warmup(n_slots)
    if not 0 <= warmup < n_slots:
        raise ValueError("warmup must satisfy 0 <= warmup < n_slots")
    thr = make_thresholds(params.rate0)
    if dice is None:
        dice = build_dice(analytic_probabilities(params), fairness)
    fading_rng, dice_rng = _streams(seed)
    snr = draw_gains_batch(fading_rng, params, n_slots)
    regions = classify_regions(snr[:, 0], snr[:, 1], thr)
    modes = select_modes(regions, dice, dice_rng)
    out = simulate_modes(regions, modes, keep_queues=trace)
    slot_trace = None
    if trace:
        slot_trace = SlotTrace(snr, regions, modes, out.q1, out.q2, out.delivered_12,
                               out.delivered_21, out.starved, params.rate0)
    return RunResult(
        report=summarize(out, params.rate0, warmup),
        report_no_warmup=summarize(out, params.rate0),
        dice=dice,
        warmup=warmup,
        trace=slot_trace,
    )


def run(params: SystemParams, fairness: float | None = None, n_slots: int = 100_000, seed=0,
        warmup: int | None = None) -> ThroughputReport:
    """Simulate the optimal policy and report post-warmup averages."""
    return simulate(params, fairness, n_slots, seed, warmup).report


def run_policy_on_trace(snr: np.ndarray, dice: DiceTable, thr: Thresholds, rng: np.random.Generator,
                        rate0: float = 1.0) -> tuple[ThroughputReport, np.ndarray]:
    """Policy throughput on a given fading trace; returns (report, modes)."""
    snr = np.asarray(snr, dtype=float)
    regions = classify_regions(snr[:, 0], snr[:, 1], thr)
    modes = select_modes(regions, dice, rng)
    return summarize(simulate_modes(regions, modes), rate0), modes


def queue_trace(trace: SlotTrace) -> list[tuple[int, float, float]]:
    """(i, Q1(i), Q2(i)) for every slot, in bits/symbol."""
    r0 = trace.rate0
    return [(i, int(a) * r0, int(b) * r0) for i, (a, b) in enumerate(zip(trace.q1, trace.q2))]


TRACE_COLUMNS = ("slot", "gamma1", "gamma2", "region", "mode", "q1", "q2", "delivered12",
                 "delivered21", "starved")


def trace_rows(trace: SlotTrace) -> Iterable[tuple]:
    r0 = trace.rate0
    for i in range(len(trace)):
        yield (
            i,
            repr(float(trace.snr[i, 0])),
            repr(float(trace.snr[i, 1])),
            f"R{int(trace.regions[i])}",
            f"M{int(trace.modes[i])}",
            repr(int(trace.q1[i]) * r0),
            repr(int(trace.q2[i]) * r0),
            repr(int(trace.delivered_12[i]) * r0),
            repr(int(trace.delivered_21[i]) * r0),
            int(trace.starved[i]),
        )


def write_trace_csv(trace: SlotTrace, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerows(trace_rows(trace))
