"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line (printed in the pytest summary) before
asserting, so the summary lists all ten even when some fail.
"""
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from bufrelay.analytics import analytic_point, high_snr_summary, max_sum_throughput, system_outage
from bufrelay.benchmarks import optimize_benchmark, simulate_benchmark
from bufrelay.channel import SystemParams, draw_gains_batch, make_thresholds
from bufrelay.cli import main
from bufrelay.engine import run_policy_on_trace, simulate
from bufrelay.oracle import (
    dp_offline_batch,
    enumerate_optimum,
    dp_offline_optimum,
    integrated_probabilities,
    stationary_lp,
)
from bufrelay.policy import build_dice
from bufrelay.regions import analytic_probabilities, empirical_probabilities, high_snr_pmax
from bufrelay.verify import random_simplex_points, suite_kkt, table_checks

GAMMAS = list(range(0, 45, 5))


@pytest.fixture(scope="module")
def proposed_runs():
    """One 10**6-slot run per sweep point, shared by criteria 1 and 5."""
    runs = {}
    for i, g in enumerate(GAMMAS):
        ss = np.random.SeedSequence(2024, spawn_key=(i,))
        runs[g] = simulate(SystemParams.from_db(g), n_slots=10**6, seed=ss).report
    return runs


@pytest.fixture(scope="module")
def simplex_points():
    return random_simplex_points(np.random.default_rng(6), 1000)


def test_c1_analytic_vs_simulated(proposed_runs, criterion):
    worst_sigma, worst_abs, bad = 0.0, 0.0, []
    for g, rep in proposed_runs.items():
        exact = analytic_point(SystemParams.from_db(g))[0]
        diff = abs(rep.r_sum - exact)
        sig = diff / rep.r_sum_stderr
        worst_sigma, worst_abs = max(worst_sigma, sig), max(worst_abs, diff)
        if sig > 3 or diff > 0.01:
            bad.append(g)
    ok = not bad
    criterion(1, ok, f"max |sim - closed form| = {worst_abs:.2e}, max {worst_sigma:.2f} stderr; failing gamma {bad}")
    assert ok


def test_c2_saturation_values(criterion):
    p = SystemParams.from_db(40)
    vals = {"proposed": analytic_point(p)[0]}
    for s in ("mabc", "tdbc", "twoway"):
        vals[s] = optimize_benchmark(s, p).r_sum
    sims = {"proposed": simulate(p, n_slots=10**6, seed=40).report.r_sum}
    for s in ("mabc", "tdbc", "twoway"):
        sims[s] = simulate_benchmark(s, p, 10**6, seed=40).r_sum
    bands = {"proposed": (0.99, 1.0), "mabc": (0.99, 1.0), "tdbc": (0.66, 0.67), "twoway": (0.495, 0.505)}
    ok = all(lo <= vals[s] <= hi and lo <= sims[s] <= hi for s, (lo, hi) in bands.items())
    detail = ", ".join(f"{s} {vals[s]:.4f}/{sims[s]:.4f}" for s in bands)
    criterion(2, ok, f"R_sum at 40 dB analytic/simulated: {detail}")
    assert ok


def test_c3_outage_ordering_and_gain(criterion):
    order_ok = True
    for g in GAMMAS[1:]:
        p = SystemParams.from_db(g)
        f_p = analytic_point(p)[1]
        f_m = optimize_benchmark("mabc", p).f_sys
        f_t = optimize_benchmark("tdbc", p).f_sys
        order_ok &= f_p < f_m < f_t

    def crossing(f):
        return brentq(lambda g: f(SystemParams.from_db(g)) - 1e-2, 0.0, 40.0, xtol=1e-10)

    g_prop = crossing(lambda p: analytic_point(p)[1])
    g_mabc = crossing(lambda p: optimize_benchmark("mabc", p).f_sys)
    gain = g_mabc - g_prop
    ok = order_ok and abs(gain - 4.0) <= 1.5
    criterion(3, ok, f"ordering {'holds' if order_ok else 'broken'}; gain over MABC at F=1e-2 = {gain:.3f} dB")
    assert ok


def test_c4_high_snr_asymptote(criterion):
    p = SystemParams.from_db(40)
    thr = make_thresholds(p.rate0)
    scale = p.gamma * p.omega_min / thr.gamma_thr
    analytic_ratio = system_outage(analytic_probabilities(p)) * scale
    rep = simulate(p, n_slots=10**7, seed=4040).report
    mc_ratio = rep.f_sys * scale
    # independent evaluation of the exact P_max expression
    t = thr.gamma_thr
    pmax_direct = (1 - math.exp(-t / (p.omega_min * p.gamma))) * math.exp(-t / (p.omega_max * p.gamma))
    pmax_err = abs(high_snr_summary(p).f_sys_exact - pmax_direct)
    ok_an = 0.9 <= analytic_ratio <= 1.1
    ok_mc = 0.9 <= mc_ratio <= 1.1
    ok = ok_an and ok_mc and pmax_err <= 1e-12
    criterion(4, ok, f"analytic ratio {analytic_ratio:.5f}, Monte-Carlo ratio {mc_ratio:.3f} "
                     f"(10^7 slots), P_max error {pmax_err:.1e}")
    assert ok_an and pmax_err <= 1e-12
    assert ok_mc, "Monte-Carlo outage at 40 dB dominated by finite-horizon queue effects"


def test_c5_queue_balance(proposed_runs, criterion):
    worst_bal, worst_starve = 0.0, 0.0
    for rep in proposed_runs.values():
        worst_bal = max(worst_bal, abs(rep.r_1r - rep.r_r2), abs(rep.r_2r - rep.r_r1))
        worst_starve = max(worst_starve, rep.starvation_rate)
    ok = worst_bal < 0.005 and worst_starve < 0.01
    criterion(5, ok, f"max imbalance {worst_bal:.2e}, max starvation rate {worst_starve:.2e}")
    assert ok


def test_c6_table_properties(simplex_points, criterion):
    errors = [e for p in simplex_points for e in table_checks(p, tol=1e-10)]
    lp_gap = max(abs(stationary_lp(p)[0] - max_sum_throughput(p)) for p in simplex_points[::5])
    ok = not errors and lp_gap < 1e-9
    criterion(6, ok, f"{len(simplex_points)} points, {len(errors)} failures, stationary-LP gap {lp_gap:.1e}")
    assert not errors, errors[:3]
    assert lp_gap < 1e-9


def test_c7_oracle_dominance_and_tightness(criterion):
    thr = make_thresholds(1.0)
    gaps, dominated = [], True
    for gi, (g, count) in enumerate(((5, 34), (15, 33), (25, 33))):
        p = SystemParams.from_db(g)
        probs = analytic_probabilities(p)
        dice, opt = build_dice(probs), max_sum_throughput(probs)
        traces, policy = [], []
        for j in range(count):
            fad, sel = np.random.SeedSequence(77, spawn_key=(gi, j)).spawn(2)
            snr = draw_gains_batch(np.random.default_rng(fad), p, 10**4)
            traces.append(snr)
            policy.append(run_policy_on_trace(snr, dice, thr, np.random.default_rng(sel))[0].r_sum)
        best = dp_offline_batch(traces, thr) / 10**4
        policy = np.array(policy)
        dominated &= bool(np.all(best >= policy))
        gaps.extend((best - policy) / opt)
    gaps = np.array(gaps)

    rng = np.random.default_rng(8)
    exact = True
    for n in range(0, 9):
        for _ in range(3 if n == 8 else 10):
            regions = rng.integers(1, 6, size=n)
            exact &= dp_offline_optimum(regions, thr).delivered == enumerate_optimum(regions, thr)[0]
    ok = dominated and gaps.mean() < 0.03 and exact
    criterion(7, ok, f"DP >= policy on all {gaps.size} traces: {dominated}; mean gap {gaps.mean():.2%} "
                     f"(per-trace max {gaps.max():.2%}); DP == 7^N enumeration: {exact}")
    assert ok


def test_c8_kkt_argmax(simplex_points, criterion):
    rep = suite_kkt(simplex_points)
    ok = rep["ok"] and len(rep["violations_per_branch"]) == 8
    criterion(8, ok, f"{rep['points']} points over {len(rep['violations_per_branch'])} branches, "
                     f"{rep['n_violations']} violations")
    assert ok


def test_c9_region_probabilities(criterion):
    cases = [SystemParams.from_db(g) for g in (0, 10, 20, 40)]
    cases += [SystemParams.from_db(g, 2.0, 1.0) for g in (0, 10, 20)]
    quad_err = max(
        max(abs(a - b) for a, b in zip(analytic_probabilities(p).as_tuple(), integrated_probabilities(p)))
        for p in cases
    )
    n = 10**6
    worst_z = 0.0
    for k, p in enumerate((SystemParams.from_db(10), SystemParams.from_db(10, 2.0, 1.0))):
        exact = analytic_probabilities(p).as_tuple()
        emp = empirical_probabilities(p, n, np.random.default_rng(900 + k)).as_tuple()
        for a, b in zip(exact, emp):
            sd = math.sqrt(a * (1 - a) / n)
            worst_z = max(worst_z, abs(a - b) / sd if sd > 0 else 0.0)
    ok = quad_err <= 1e-8 and worst_z <= 3.0
    criterion(9, ok, f"quadrature max diff {quad_err:.1e}; Monte-Carlo max |z| = {worst_z:.2f}")
    assert ok


def test_c10_sweep_determinism(tmp_path, criterion):
    args = ["sweep", "--sweep", "0", "40", "5", "--n-slots", "20000", "--seed", "11"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(args + ["--csv", str(a)]) == 0
    assert main(args + ["--csv", str(b)]) == 0
    assert main(args + ["--csv", str(c), "--workers", "2"]) == 0
    ok = a.read_bytes() == b.read_bytes() == c.read_bytes()
    criterion(10, ok, f"3 sweeps (1, 1, 2 workers) byte-identical: {ok}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
