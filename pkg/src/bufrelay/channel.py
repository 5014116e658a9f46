"""Block Rayleigh fading draws and per-slot SNR region classification.

All SNRs are linear. Each link gain is exponential with mean ``omega`` and is
generated by inverse CDF from a single uniform, link 1 first, so a seeded
generator reproduces the same fading sequence whether slots are drawn one at a
time or in a batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modes import DECODABLE, SnrRegion, TransmissionMode


def _check_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemParams:
    omega1: float = 1.0
    omega2: float = 1.0
    gamma: float = 10.0
    rate0: float = 1.0

    def __post_init__(self):
        for name in ("omega1", "omega2", "gamma", "rate0"):
            _check_positive(name, getattr(self, name))

    @classmethod
    def from_db(cls, gamma_db: float, omega1=1.0, omega2=1.0, rate0=1.0) -> "SystemParams":
        return cls(omega1=omega1, omega2=omega2, gamma=db_to_linear(gamma_db), rate0=rate0)

    @property
    def omega_min(self) -> float:
        return min(self.omega1, self.omega2)

    @property
    def omega_max(self) -> float:
        return max(self.omega1, self.omega2)

    def swapped(self) -> "SystemParams":
        """Same system with the user labels exchanged."""
        return SystemParams(self.omega2, self.omega1, self.gamma, self.rate0)


@dataclass(frozen=True)
class Thresholds:
    gamma_thr: float
    gamma_thr_sum: float


def make_thresholds(rate0: float) -> Thresholds:
    _check_positive("rate0", rate0)
    return Thresholds(2.0**rate0 - 1.0, 2.0 ** (2.0 * rate0) - 1.0)


@dataclass(frozen=True)
class ChannelDraw:
    snr1: float
    snr2: float

    def __post_init__(self):
        for v in (self.snr1, self.snr2):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"instantaneous SNR must be finite and >= 0, got {v!r}")


def inverse_cdf_gain(u, omega):
    """Exponential(mean omega) sample from a uniform u in [0, 1)."""
    return -omega * np.log1p(-np.asarray(u, dtype=float)) if np.ndim(u) else -omega * math.log1p(-u)


def draw_gains(rng: np.random.Generator, params: SystemParams) -> ChannelDraw:
    u1, u2 = rng.random(2)
    return ChannelDraw(
        params.gamma * inverse_cdf_gain(float(u1), params.omega1),
        params.gamma * inverse_cdf_gain(float(u2), params.omega2),
    )


def draw_gains_batch(rng: np.random.Generator, params: SystemParams, n: int) -> np.ndarray:
    """``n`` slots of (snr1, snr2) as an (n, 2) array; same stream as ``n`` calls to draw_gains."""
    u = rng.random((n, 2))
    out = np.empty_like(u)
    out[:, 0] = params.gamma * inverse_cdf_gain(u[:, 0], params.omega1)
    out[:, 1] = params.gamma * inverse_cdf_gain(u[:, 1], params.omega2)
    return out


def classify_region(draw: ChannelDraw, thr: Thresholds) -> SnrRegion:
    g1, g2 = draw.snr1, draw.snr2
    ok1 = g1 > thr.gamma_thr
    ok2 = g2 > thr.gamma_thr
    if ok1 and ok2:
        return SnrRegion.R1 if g1 + g2 > thr.gamma_thr_sum else SnrRegion.R2
    if ok1:
        return SnrRegion.R3
    if ok2:
        return SnrRegion.R4
    return SnrRegion.R5


def classify_regions(snr1, snr2, thr: Thresholds) -> np.ndarray:
    """Vectorised classify_region; returns int8 region codes 1..5."""
    snr1 = np.asarray(snr1, dtype=float)
    snr2 = np.asarray(snr2, dtype=float)
    ok1 = snr1 > thr.gamma_thr
    ok2 = snr2 > thr.gamma_thr
    out = np.full(snr1.shape, 5, dtype=np.int8)
    both = ok1 & ok2
    out[both] = np.where(snr1[both] + snr2[both] > thr.gamma_thr_sum, 1, 2)
    out[ok1 & ~ok2] = 3
    out[~ok1 & ok2] = 4
    return out


def decodable(mode: TransmissionMode, draw: ChannelDraw, thr: Thresholds) -> bool:
    """Decodability flag O_k of ``mode`` for this slot, ignoring buffer contents."""
    mode = TransmissionMode(mode)
    g1, g2, t = draw.snr1, draw.snr2, thr.gamma_thr
    if mode in (TransmissionMode.M1, TransmissionMode.M4):
        return g1 > t
    if mode in (TransmissionMode.M2, TransmissionMode.M5):
        return g2 > t
    if mode is TransmissionMode.M3:
        return g1 > t and g2 > t and g1 + g2 > thr.gamma_thr_sum
    if mode is TransmissionMode.M6:
        return g1 > t and g2 > t
    return True


def region_flags(region: SnrRegion) -> tuple[bool, ...]:
    """(O_1, ..., O_7) for any slot falling in ``region``."""
    return tuple(bool(x) for x in DECODABLE[int(region), 1:8])
