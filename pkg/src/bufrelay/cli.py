"""Command line entry point: run, sweep, bench, verify, trace."""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from .analytics import max_sum_throughput, system_outage
from .engine import simulate, write_trace_csv
from .experiment import SCHEMES, ConfigError, ExperimentConfig, rows_to_csv, run_sweep
from .policy import InvalidProbabilityError
from .regions import analytic_probabilities

EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--gamma-db", type=float)
    common.add_argument("--omega1", type=float)
    common.add_argument("--omega2", type=float)
    common.add_argument("--rate0", type=float)
    common.add_argument("--sweep", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    common.add_argument("--n-slots", type=int)
    common.add_argument("--warmup", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--fairness", type=float)
    common.add_argument("--schemes", nargs="+", choices=SCHEMES)
    common.add_argument("--csv", help="CSV output path (default stdout)")
    common.add_argument("--json", help="JSON output path")
    common.add_argument("--workers", type=int)

    p = argparse.ArgumentParser(prog="bufrelay", description="Buffer-aided two-way relay simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single SNR point, JSON report")
    sub.add_parser("sweep", parents=[common], help="SNR sweep for all schemes, CSV")
    b = sub.add_parser("bench", parents=[common], help="benchmark schemes only, CSV")
    b.add_argument("--analytic-only", action="store_true")
    v = sub.add_parser("verify", parents=[common], help="oracle suites, JSON report")
    v.add_argument("--points", type=int, default=1000, help="random simplex points for the KKT suite")
    sub.add_parser("trace", parents=[common], help="per-slot CSV of one run")
    return p


FLAG_KEYS = ("gamma_db", "omega1", "omega2", "rate0", "sweep", "n_slots", "warmup", "seed", "fairness",
             "schemes", "csv", "json", "workers")


def load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = dataclasses.asdict(ExperimentConfig.load(args.config))
    for key in FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if args.command == "trace":
        data["trace"] = True
    return ExperimentConfig.from_dict(data)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(cfg: ExperimentConfig) -> int:
    params = cfg.params
    probs = analytic_probabilities(params)
    res = simulate(params, cfg.fairness, cfg.n_slots, cfg.seed, cfg.warmup)
    out = {
        "gamma_db": cfg.gamma_db,
        "branch": res.dice.branch.label,
        "dice": [list(d) for d in res.dice.dice],
        "region_probabilities": list(probs.as_tuple()),
        "r_sum_analytic": max_sum_throughput(probs, params.rate0),
        "f_sys_analytic": system_outage(probs),
        "warmup": res.warmup,
        "report": res.report.as_dict(),
        "report_no_warmup": res.report_no_warmup.as_dict(),
    }
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", cfg.json)
    return 0


def cmd_sweep(cfg: ExperimentConfig, schemes=None, simulate_runs=True) -> int:
    rows = run_sweep(cfg, schemes, simulate_runs)
    _emit(rows_to_csv(rows), cfg.csv)
    if cfg.json:
        _emit(json.dumps([dataclasses.asdict(r) for r in rows], indent=2) + "\n", cfg.json)
    return 0


def cmd_trace(cfg: ExperimentConfig) -> int:
    res = simulate(cfg.params, cfg.fairness, cfg.n_slots, cfg.seed, cfg.warmup, trace=True)
    if cfg.csv:
        with open(cfg.csv, "w", encoding="utf-8", newline="") as fh:
            write_trace_csv(res.trace, fh)
    else:
        write_trace_csv(res.trace, sys.stdout)
    return 0


def cmd_verify(cfg: ExperimentConfig, points: int) -> int:
    from .verify import run_suites

    report = run_suites(cfg, points)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", cfg.json)
    return 0 if report["ok"] else EXIT_INVARIANT


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "bench":
            return cmd_sweep(cfg, [s for s in SCHEMES if s != "proposed"], not args.analytic_only)
        if args.command == "verify":
            return cmd_verify(cfg, args.points)
        return cmd_trace(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AssertionError, InvalidProbabilityError, RuntimeError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
