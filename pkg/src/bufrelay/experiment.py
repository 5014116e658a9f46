"""Experiment configuration and SNR sweeps."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from .analytics import max_sum_throughput, system_outage
from .benchmarks import SchemeTag, optimize_benchmark, simulate_benchmark
from .channel import SystemParams
from .engine import simulate
from .regions import analytic_probabilities

SCHEMES = ("proposed", "twoway", "tdbc", "mabc")

CSV_COLUMNS = ("gamma_db", "scheme", "r_sum_analytic", "r_sum_sim", "r_sum_stderr", "f_sys_analytic",
               "f_sys_sim", "f12", "f21", "starvation_rate", "n_slots", "seed")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    gamma_db: float = 10.0
    omega1: float = 1.0
    omega2: float = 1.0
    rate0: float = 1.0
    sweep: tuple[float, float, float] | None = None  # (start, stop, step) in dB, stop inclusive
    n_slots: int = 100_000
    warmup: int | None = None
    seed: int = 0
    fairness: float | None = None
    schemes: tuple[str, ...] = SCHEMES
    csv: str | None = None
    json: str | None = None
    trace: bool = False
    workers: int = 1

    def __post_init__(self):
        try:
            for name in ("gamma_db", "omega1", "omega2", "rate0"):
                v = float(getattr(self, name))
                if not math.isfinite(v):
                    raise ConfigError(f"{name} must be finite")
                object.__setattr__(self, name, v)
            self.params_at(self.gamma_db)
            if self.sweep is not None:
                sw = tuple(float(x) for x in self.sweep)
                if len(sw) != 3 or not all(math.isfinite(x) for x in sw):
                    raise ConfigError("sweep must be [start, stop, step]")
                if sw[2] <= 0:
                    raise ConfigError("sweep step must be > 0")
                if sw[1] < sw[0]:
                    raise ConfigError("sweep stop must be >= start")
                object.__setattr__(self, "sweep", sw)
            if isinstance(self.n_slots, bool) or int(self.n_slots) != self.n_slots or self.n_slots < 1:
                raise ConfigError("n_slots must be an integer >= 1")
            object.__setattr__(self, "n_slots", int(self.n_slots))
            if self.warmup is not None and not 0 <= int(self.warmup) < self.n_slots:
                raise ConfigError("warmup must satisfy 0 <= warmup < n_slots")
            if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
                raise ConfigError("seed must be a nonnegative integer")
            if self.fairness is not None and not 0.0 <= float(self.fairness) <= 1.0:
                raise ConfigError("fairness must lie in [0, 1]")
            schemes = tuple(str(s).lower() for s in self.schemes)
            bad = [s for s in schemes if s not in SCHEMES]
            if bad or not schemes:
                raise ConfigError(f"unknown schemes {bad}; choose from {SCHEMES}")
            object.__setattr__(self, "schemes", tuple(s for s in SCHEMES if s in schemes))
            if int(self.workers) < 1:
                raise ConfigError("workers must be >= 1")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def params_at(self, gamma_db: float) -> SystemParams:
        return SystemParams.from_db(gamma_db, self.omega1, self.omega2, self.rate0)

    @property
    def params(self) -> SystemParams:
        return self.params_at(self.gamma_db)

    def gamma_points(self) -> list[float]:
        if self.sweep is None:
            return [self.gamma_db]
        start, stop, step = self.sweep
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        d = dict(d)
        if isinstance(d.get("schemes"), str):
            d["schemes"] = (d["schemes"],)
        if "schemes" in d:
            d["schemes"] = tuple(d["schemes"])
        if d.get("sweep") is not None:
            d["sweep"] = tuple(d["sweep"])
        return cls(**d)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class SweepRow:
    gamma_db: float
    scheme: str
    r_sum_analytic: float
    r_sum_sim: float
    r_sum_stderr: float
    f_sys_analytic: float
    f_sys_sim: float
    f12: float
    f21: float
    starvation_rate: float
    n_slots: int
    seed: int

    def sort_key(self):
        return (self.gamma_db, SCHEMES.index(self.scheme))

    def cells(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out


def point_seed(seed: int, point: int, scheme: str) -> np.random.SeedSequence:
    """Per-(point, scheme) stream, independent of execution order."""
    return np.random.SeedSequence(seed, spawn_key=(point, SCHEMES.index(scheme)))


def evaluate_point(cfg: ExperimentConfig, point: int, gamma_db: float, scheme: str,
                   simulate_runs: bool = True) -> SweepRow:
    params = cfg.params_at(gamma_db)
    ss = point_seed(cfg.seed, point, scheme)
    nan = float("nan")
    if scheme == "proposed":
        probs = analytic_probabilities(params)
        r_an, f_an = max_sum_throughput(probs, params.rate0), system_outage(probs)
        rep = simulate(params, cfg.fairness, cfg.n_slots, ss, cfg.warmup).report if simulate_runs else None
    else:
        res = optimize_benchmark(scheme, params)
        r_an, f_an = res.r_sum, res.f_sys
        rep = simulate_benchmark(scheme, params, cfg.n_slots, ss, res.scheme) if simulate_runs else None
    if rep is None:
        return SweepRow(gamma_db, scheme, r_an, nan, nan, f_an, nan, nan, nan, nan, 0, cfg.seed)
    return SweepRow(gamma_db, scheme, r_an, rep.r_sum, rep.r_sum_stderr, f_an, rep.f_sys, rep.f_12,
                    rep.f_21, rep.starvation_rate, rep.n_slots, cfg.seed)


def _job(args):
    return evaluate_point(*args)


def run_sweep(cfg: ExperimentConfig, schemes=None, simulate_runs: bool = True) -> list[SweepRow]:
    """Evaluate every (gamma, scheme) point; rows come back in (gamma, scheme) order."""
    schemes = cfg.schemes if schemes is None else tuple(s for s in cfg.schemes if s in schemes)
    jobs = [(cfg, i, g, s, simulate_runs) for i, g in enumerate(cfg.gamma_points()) for s in schemes]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as ex:
            rows = list(ex.map(_job, jobs))
    else:
        rows = [_job(j) for j in jobs]
    return sorted(rows, key=SweepRow.sort_key)


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()
