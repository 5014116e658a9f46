import itertools
import math

import numpy as np
import pytest

from bufrelay.analytics import analytic_point
from bufrelay.benchmarks import (
    BenchmarkScheme,
    LinkSuccess,
    apportion,
    flow_lp,
    flow_rates,
    link_success_probs,
    optimize_benchmark,
    phase_schedule,
    simulate_benchmark,
)
from bufrelay.channel import SystemParams
from bufrelay.regions import analytic_probabilities

TAGS = ("twoway", "tdbc", "mabc")


def test_link_success():
    s = link_success_probs(SystemParams.from_db(10))
    assert s.e1 == pytest.approx(math.exp(-0.1), abs=1e-15) == s.e2
    assert s.p_mac == analytic_probabilities(SystemParams.from_db(10)).p_r1
    hi = link_success_probs(SystemParams.from_db(200))
    assert hi == pytest.approx((1, 1, 1), abs=1e-15)
    assert link_success_probs(SystemParams.from_db(10, 2.0, 1.0)).e1 > s.e1


def test_symmetric_closed_forms():
    p = SystemParams.from_db(10)
    e = math.exp(-0.1)
    assert optimize_benchmark("twoway", p).r_sum == pytest.approx(e / 2, abs=1e-14)
    # joint broadcast: success e^2, so the three-phase optimum is 2 e^2 / (1 + 2 e)
    assert optimize_benchmark("tdbc", p).r_sum == pytest.approx(2 * e * e / (1 + 2 * e), abs=1e-14)


@pytest.mark.parametrize("tag, value", [("twoway", 0.5), ("tdbc", 2 / 3), ("mabc", 1.0)])
def test_saturation(tag, value):
    assert optimize_benchmark(tag, SystemParams.from_db(80)).r_sum == pytest.approx(value, abs=1e-6)


def _grid_optimum(tag, s: LinkSuccess, step=0.01):
    """Brute force over a simplex grid of phase fractions."""
    k = {"twoway": 4, "tdbc": 3, "mabc": 2}[tag]
    n = int(round(1 / step))
    best = 0.0
    for c in itertools.product(range(n + 1), repeat=k - 1):
        if sum(c) > n:
            continue
        fr = [x / n for x in c] + [(n - sum(c)) / n]
        fr[-1] = 1.0 - math.fsum(fr[:-1])
        best = max(best, sum(flow_rates(BenchmarkScheme(tag, fr), s)))
    return best


@pytest.mark.parametrize("tag", TAGS)
@pytest.mark.parametrize("gamma_db, o1, o2", [(0, 1, 1), (10, 2, 1), (25, 1, 10)])
def test_closed_form_matches_lp_and_grid(tag, gamma_db, o1, o2):
    p = SystemParams.from_db(gamma_db, o1, o2)
    closed = optimize_benchmark(tag, p)
    assert closed.r_sum == pytest.approx(flow_lp(tag, p).r_sum, abs=1e-6)
    grid = _grid_optimum(tag, link_success_probs(p), 0.05 if tag == "twoway" else 0.01)
    assert grid <= closed.r_sum + 1e-12
    assert closed.r_sum - grid < 0.03
    assert closed.f_sys == pytest.approx(1 - closed.r_sum)


def test_dominance_grid():
    for g in range(-5, 41, 5):
        for ratio in (1, 2, 10):
            for r0 in (0.5, 1.0, 2.0):
                p = SystemParams.from_db(g, ratio, 1.0, r0)
                best = analytic_point(p)[0]
                vals = {t: optimize_benchmark(t, p).r_sum for t in TAGS}
                assert all(v <= best + 1e-12 for v in vals.values())
                if g >= 20:
                    assert vals["mabc"] >= vals["tdbc"] >= vals["twoway"]


def test_scheme_validation():
    with pytest.raises(ValueError):
        BenchmarkScheme("mabc", (0.7, 0.2))
    with pytest.raises(ValueError):
        BenchmarkScheme("tdbc", (0.5, 0.5))
    with pytest.raises(ValueError):
        optimize_benchmark("dft", SystemParams())


def test_apportion():
    counts = apportion((1 / 3, 1 / 3, 1 / 3), 100)
    assert counts.sum() == 100 and max(counts) - min(counts) <= 1
    fr = np.array([0.123, 0.456, 0.421])
    assert np.all(np.abs(apportion(fr, 997) / 997 - fr) < 1 / 997)


def test_phase_schedule_blocks():
    sched = phase_schedule(BenchmarkScheme("mabc", (0.25, 0.75)), 8)
    assert sched.tolist() == [3, 3, 6, 6, 6, 6, 6, 6]


@pytest.mark.parametrize("tag", TAGS)
def test_simulation_matches_optimizer(tag):
    p = SystemParams.from_db(10)
    rep = simulate_benchmark(tag, p, 10**6, seed=21)
    assert abs(rep.r_sum - optimize_benchmark(tag, p).r_sum) <= 3 * rep.r_sum_stderr


def test_mabc_without_uplink_delivers_nothing():
    rep = simulate_benchmark("mabc", SystemParams.from_db(20), 5000, seed=1,
                             scheme=BenchmarkScheme("mabc", (0.0, 1.0)))
    assert rep.r_sum == 0.0


def test_twoway_flat_optimum():
    s = link_success_probs(SystemParams.from_db(10))
    a = sum(flow_rates(BenchmarkScheme("twoway", (0.25, 0.25, 0.25, 0.25)), s))
    b = sum(flow_rates(BenchmarkScheme("twoway", (0.1, 0.1, 0.4, 0.4)), s))
    assert a == pytest.approx(b, abs=1e-15)
