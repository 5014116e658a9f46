import io

import numpy as np
import pytest

from bufrelay.channel import ChannelDraw, SystemParams, make_thresholds
from bufrelay.engine import (
    TRACE_COLUMNS,
    RelayBuffers,
    queue_trace,
    run,
    simulate,
    simulate_modes,
    step,
    summarize,
    write_trace_csv,
)
from bufrelay.modes import SnrRegion, TransmissionMode as M

THR = make_thresholds(1.0)
R1_DRAW = ChannelDraw(5.0, 5.0)
R3_DRAW = ChannelDraw(5.0, 0.1)


def test_m6_on_empty_buffers_starves():
    buf, rec = step(RelayBuffers(), R1_DRAW, M.M6, THR, 1.0)
    assert buf == RelayBuffers()
    assert rec.starved and rec.delivered_12 == rec.delivered_21 == 0.0


def test_m3_then_m6_delivers_both():
    buf, rec = step(RelayBuffers(), R1_DRAW, M.M3, THR, 1.0)
    assert buf == RelayBuffers(1, 1) and rec.stored_1 == rec.stored_2 == 1.0
    buf, rec = step(buf, R1_DRAW, M.M6, THR, 1.0)
    assert buf == RelayBuffers() and rec.delivered_12 == rec.delivered_21 == 1.0


def test_undecodable_mode_is_not_starvation():
    buf, rec = step(RelayBuffers(3, 3), R3_DRAW, M.M5, THR, 1.0)  # link 2 down
    assert buf == RelayBuffers(3, 3) and not rec.starved


def test_m4_uses_buffer_two():
    buf, rec = step(RelayBuffers(0, 2), R3_DRAW, M.M4, THR, 1.0)
    assert buf == RelayBuffers(0, 1) and rec.delivered_21 == 1.0
    buf, rec = step(RelayBuffers(2, 0), R3_DRAW, M.M4, THR, 1.0)
    assert rec.starved


def test_negative_buffers_rejected():
    with pytest.raises(ValueError):
        RelayBuffers(-1, 0)


def test_vectorised_chain_matches_step():
    rng = np.random.default_rng(5)
    regions = rng.integers(1, 6, 3000)
    modes = rng.integers(1, 8, 3000)
    draws = {1: ChannelDraw(5, 5), 2: ChannelDraw(1.5, 1.2), 3: ChannelDraw(5, 0.1), 4: ChannelDraw(0.1, 5),
             5: ChannelDraw(0.1, 0.1)}
    out = simulate_modes(regions, modes, keep_queues=True)
    buf = RelayBuffers()
    for i, (r, m) in enumerate(zip(regions, modes)):
        buf, rec = step(buf, draws[int(r)], M(int(m)), THR, 1.0, i)
        assert rec.region == SnrRegion(int(r))
        assert (out.q1[i], out.q2[i]) == (buf.n1, buf.n2)
        assert out.delivered_12[i] == (rec.delivered_12 > 0)
        assert out.delivered_21[i] == (rec.delivered_21 > 0)
        assert out.starved[i] == rec.starved
    assert out.final == buf


def test_single_slot_delivers_nothing():
    rep = run(SystemParams.from_db(30), n_slots=1, seed=0, warmup=0)
    assert rep.r_sum == 0.0


def test_bad_arguments():
    with pytest.raises(ValueError):
        run(SystemParams(), n_slots=0)
    with pytest.raises(ValueError):
        run(SystemParams(), n_slots=10, warmup=10)


def test_ten_db_throughput():
    rep = run(SystemParams.from_db(10), n_slots=10**6, seed=1, warmup=10**4)
    assert rep.r_sum == pytest.approx(0.9048374180359594, abs=0.003)
    assert rep.f_sys == pytest.approx(1 - rep.r_sum)


def test_rate0_two():
    from bufrelay.analytics import analytic_point

    p = SystemParams.from_db(20, rate0=2.0)
    rep = run(p, n_slots=200_000, seed=3)
    assert rep.r_sum == pytest.approx(analytic_point(p)[0], abs=4 * rep.r_sum_stderr)
    assert rep.r_sum / 2.0 == pytest.approx(1 - rep.f_sys)


def test_seed_determinism_and_stream_separation():
    p = SystemParams.from_db(10)
    a = simulate(p, n_slots=5000, seed=7, trace=True)
    b = simulate(p, n_slots=5000, seed=7, trace=True)
    assert np.array_equal(a.trace.modes, b.trace.modes)
    # changing the fairness changes only the dice, never the fading stream
    c = simulate(p, fairness=1.0, n_slots=5000, seed=7, trace=True)
    assert np.array_equal(a.trace.snr, c.trace.snr)


def test_trace_csv_and_queue_trace():
    res = simulate(SystemParams.from_db(10), n_slots=50, seed=2, trace=True)
    buf = io.StringIO()
    write_trace_csv(res.trace, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == 51
    q = queue_trace(res.trace)
    assert len(q) == 50 and all(a >= 0 and b >= 0 for _, a, b in q)


def test_summarize_window():
    out = simulate_modes(np.ones(4, dtype=int), np.array([3, 6, 3, 6]))
    rep = summarize(out, 1.0)
    assert rep.r_sum == 1.0 and rep.r_1r == 0.5 and rep.starvation_rate == 0.0
    assert summarize(out, 1.0, start=2).r_sum == 1.0
