"""Self-check suites run by ``bufrelay verify`` and the acceptance tests."""
from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .analytics import max_sum_throughput, system_outage
from .channel import SystemParams, make_thresholds
from .oracle import dp_offline_optimum, enumerate_optimum, integrated_probabilities, stationary_lp, verify_policy_kkt
from .policy import StatisticalBranch, build_dice, expected_rates, identify_branch
from .regions import RegionProbabilities, analytic_probabilities

ALL_BRANCHES = tuple(StatisticalBranch(o, c) for o in (1, 2) for c in (1, 2, 3, 4))


def random_simplex_points(rng: np.random.Generator, n: int, min_per_branch: int | None = None) -> list[RegionProbabilities]:
    """Random region-probability vectors with every branch represented.

    Draws Dirichlet points with random concentration so both the bulk and the
    edges of the simplex appear; rejection keeps at least ``min_per_branch``
    points per branch (default n // 8).
    """
    if min_per_branch is None:
        min_per_branch = n // 8
    want = {b: min_per_branch for b in ALL_BRANCHES}
    out: list[RegionProbabilities] = []
    extra = n - min_per_branch * len(ALL_BRANCHES)
    for _ in range(1000 * max(n, 1)):
        if len(out) >= n:
            break
        alpha = rng.uniform(0.2, 3.0, size=5)
        p = rng.dirichlet(alpha)
        if rng.random() < 0.1:  # exercise P_min = 0 and P_R5 = 0 edges
            p[rng.choice([2, 3, 4])] = 0.0
            p /= p.sum()
        probs = RegionProbabilities.from_sequence(p)
        b = identify_branch(probs)
        if want[b] > 0:
            want[b] -= 1
            out.append(probs)
        elif extra > 0:
            extra -= 1
            out.append(probs)
    if any(want.values()):
        raise RuntimeError(f"could not cover branches: {want}")
    return out


def table_checks(probs: RegionProbabilities, tol: float = 1e-10) -> list[str]:
    """Die and rate invariants for one point; returns failure messages."""
    errs = []
    opt = max_sum_throughput(probs, 1.0)
    sums = []
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0, None):
        dice = build_dice(probs, lam)
        for i, die in enumerate(dice.dice):
            if abs(math.fsum(die) - 1.0) > tol or min(die) < 0:
                errs.append(f"die{i + 1} invalid {die}")
        r = expected_rates(probs, dice, 1.0)
        if abs(r.r_1r - r.r_r2) > tol or abs(r.r_2r - r.r_r1) > tol:
            errs.append(f"queue balance fails at fairness={lam}: {r}")
        if abs(r.r_sum - opt) > tol:
            errs.append(f"rate sum {r.r_sum} != optimum {opt} at fairness={lam}")
        sums.append(r.r_sum)
    if max(sums) - min(sums) > tol:
        errs.append("fairness changes the sum rate")
    if abs(system_outage(probs) - (1.0 - opt)) > 1e-12:
        errs.append("outage identity fails")
    return errs


def suite_table(points) -> dict:
    fails = []
    seen = Counter()
    for probs in points:
        seen[identify_branch(probs).label] += 1
        for e in table_checks(probs):
            fails.append({"probs": list(probs.as_tuple()), "error": e})
    return {"points": len(points), "branches": dict(seen), "failures": fails[:20],
            "n_failures": len(fails), "ok": not fails and len(seen) == 8}


def suite_kkt(points) -> dict:
    bad = []
    per_branch = Counter()
    for probs in points:
        rep = verify_policy_kkt(probs, build_dice(probs))
        per_branch[rep.branch] += len(rep.violations)
        if rep.violations:
            bad.append(rep.to_dict())
    return {"points": len(points), "violations_per_branch": dict(per_branch),
            "n_violations": sum(per_branch.values()), "examples": bad[:5], "ok": not bad}


def suite_stationary_lp(points, tol: float = 1e-8) -> dict:
    worst = 0.0
    for probs in points:
        worst = max(worst, abs(stationary_lp(probs)[0] - max_sum_throughput(probs)))
    return {"points": len(points), "max_abs_diff": worst, "ok": worst <= tol}


def suite_dp_enumeration(rng: np.random.Generator, traces: int = 40) -> dict:
    thr = make_thresholds(1.0)
    mism = []
    for _ in range(traces):
        n = int(rng.integers(0, 9))
        regions = rng.integers(1, 6, size=n)
        a = enumerate_optimum(regions, thr)[0]
        d = dp_offline_optimum(regions, thr).delivered
        if a != d:
            mism.append({"regions": regions.tolist(), "enumeration": a, "dp": d})
    return {"traces": traces, "mismatches": mism, "ok": not mism}


def suite_regions(params_list, tol: float = 1e-8) -> dict:
    worst = 0.0
    for p in params_list:
        a = analytic_probabilities(p).as_tuple()
        b = integrated_probabilities(p)
        worst = max(worst, max(abs(x - y) for x, y in zip(a, b)))
    return {"cases": len(params_list), "max_abs_diff": worst, "ok": worst <= tol}


def run_suites(cfg, points: int = 1000) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(99,)))
    pts = random_simplex_points(rng, points)
    params = [cfg.params_at(g) for g in cfg.gamma_points()]
    params += [SystemParams.from_db(10.0, 2.0, 1.0), SystemParams.from_db(25.0, 1.0, 10.0)]
    suites = {
        "table": suite_table(pts),
        "kkt": suite_kkt(pts),
        "stationary_lp": suite_stationary_lp(pts[: min(len(pts), 200)]),
        "dp_enumeration": suite_dp_enumeration(rng),
        "regions": suite_regions(params),
    }
    suites["ok"] = all(s["ok"] for s in suites.values())
    return suites
