from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agingcost import (
    DispatchProfile,
    InfeasibleError,
    SegmentCostCurve,
    StressFunction,
    ValidationError,
    benchmark_cost,
    count_cycles,
    init_segments,
    linearize,
    segment_throughput,
    simulate,
    soc_series,
    step,
)
from agingcost.segments import read_dispatch_csv, read_trace_csv, write_trace_csv
from oracles import WORKED_COSTS, WORKED_SOC

J_LADDER = (1, 2, 4, 8, 16, 32, 64)


def test_init_worked(worked_curve):
    np.testing.assert_allclose(init_segments(0.6, worked_curve), [0.1] * 6 + [0] * 4, atol=1e-15)


def test_init_empty(worked_curve):
    assert not init_segments(0.0, worked_curve).any()


def test_init_partial_segment():
    curve = linearize(StressFunction.power_law(1.0, 2.0), 2, 1.0, 1.0, 8.0)
    np.testing.assert_array_equal(init_segments(2.0, curve), [2.0, 0.0])


def test_init_out_of_range(worked_curve):
    with pytest.raises(ValidationError):
        init_segments(1.5, worked_curve)


def test_first_worked_step(worked_curve):
    e0 = init_segments(0.6, worked_curve)
    e1, p_ch, p_dis = step(e0, 0.0, 0.5, worked_curve, 1.0, 1.0, 1.0)
    np.testing.assert_allclose(p_dis, [0.1] * 5 + [0] * 5, atol=1e-15)
    assert not p_ch.any()
    assert float(np.dot(worked_curve.c, p_dis)) == pytest.approx(25.0, rel=1e-12)
    np.testing.assert_allclose(e1, [0] * 5 + [0.1] + [0] * 4, atol=1e-15)


def test_idle_step(worked_curve):
    e0 = init_segments(0.37, worked_curve)
    e1, p_ch, p_dis = step(e0, 0.0, 0.0, worked_curve, 0.9, 0.9, 0.5)
    np.testing.assert_array_equal(e1, e0)
    assert not p_ch.any() and not p_dis.any()


def test_single_segment_drain_from_full():
    curve = linearize(StressFunction.power_law(2.0, 2.0), 4, 10.0, 0.9, 8.0)
    full = init_segments(8.0, curve)
    g = curve.e_bar[0] * 0.9 / 0.5
    e1, _, p_dis = step(full, 0.0, g, curve, 0.95, 0.9, 0.5)
    assert p_dis[0] == pytest.approx(g) and not p_dis[1:].any()
    assert e1[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_array_equal(e1[1:], full[1:])


def test_step_errors(worked_curve):
    e0 = init_segments(0.2, worked_curve)
    with pytest.raises(InfeasibleError, match="interval 7"):
        step(e0, 0.0, 0.5, worked_curve, 1.0, 1.0, 1.0, t=7)
    with pytest.raises(InfeasibleError):
        step(e0, 0.9, 0.0, worked_curve, 1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        step(e0, 0.1, 0.1, worked_curve, 1.0, 1.0, 1.0)


def test_worked_simulation(worked_profile, worked_curve):
    trace = simulate(worked_profile, worked_curve)
    assert trace.cost == pytest.approx(43.0, rel=1e-12)
    np.testing.assert_allclose(trace.interval_costs, WORKED_COSTS, atol=1e-9)


def test_worked_soc(worked_profile, worked_curve):
    soc = soc_series(simulate(worked_profile, worked_curve), 1.0)
    np.testing.assert_allclose(soc.samples, [s / 100 for s in WORKED_SOC], atol=1e-12)


def test_worked_throughput(worked_profile, worked_curve):
    theta = segment_throughput(simulate(worked_profile, worked_curve))
    np.testing.assert_allclose(theta, [0.4, 0.2, 0.2, 0.2, 0.1, 0, 0, 0, 0, 0], atol=1e-12)
    # the same throughput prices the profile at 43
    assert float(np.dot(theta, worked_curve.c)) == pytest.approx(43.0)


def test_zero_profile(worked_curve):
    trace = simulate(DispatchProfile.of([0] * 5, [0] * 5, 1.0, 0.3), worked_curve)
    assert trace.cost == 0.0
    assert not segment_throughput(trace).any()


def test_empty_profile_soc(worked_curve):
    trace = simulate(DispatchProfile.of([], [], 1.0, 0.3), worked_curve)
    assert soc_series(trace, 1.0).samples == pytest.approx((0.3,))


@pytest.mark.parametrize("j", [1, 3, 6, 10])
def test_aligned_single_discharge(worked_curve, quadratic, j):
    prof = DispatchProfile.from_soc([1.0, 1.0 - j / 10, 1.0], 1.0)
    trace = simulate(prof, worked_curve)
    assert trace.cost == pytest.approx(quadratic(j / 10), rel=1e-12)
    assert trace.cost == pytest.approx(sum(worked_curve.c[:j]) * 0.1, rel=1e-12)


def test_full_depth_throughput_uniform():
    curve = linearize(StressFunction.power_law(1.0, 2.0), 8, 1.0, 1.0, 4.0)
    theta = segment_throughput(simulate(DispatchProfile.from_soc([1.0, 0.0], 4.0), curve))
    np.testing.assert_allclose(theta, curve.e_bar, rtol=1e-12)


def test_profile_rejects_simultaneous_flows():
    with pytest.raises(ValidationError):
        DispatchProfile.of([1.0], [1.0], 1.0, 0.0)


soc_paths = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=40)


def _aligned(J):
    return st.lists(st.integers(0, J).map(lambda k: k / J), min_size=2, max_size=40)


@given(st.integers(1, 16).flatmap(lambda J: st.tuples(st.just(J), _aligned(J))))
def test_segment_counts_match_cycle_counts(case):
    J, soc = case
    curve = linearize(StressFunction.power_law(1.0, 2.0), J, 1.0, 1.0, 1.0)
    trace = simulate(DispatchProfile.from_soc(soc, 1.0), curve)
    N = segment_throughput(trace) / np.array(curve.e_bar)
    cycles = count_cycles(soc_series(trace, 1.0))
    for j in range(1, J + 1):
        assert abs(N[j - 1] - round(N[j - 1])) < 1e-9
        assert round(N[j - 1]) == cycles.count_at_least(j / J, tol=1e-9)


@given(st.integers(1, 16).flatmap(lambda J: st.tuples(st.just(J), _aligned(J))),
       st.floats(1.0, 3.0))
def test_exact_at_alignment(case, alpha):
    J, soc = case
    phi = StressFunction.power_law(1e-3, alpha)
    R = 5000.0
    trace = simulate(DispatchProfile.from_soc(soc, 2.0), linearize(phi, J, R, 1.0, 2.0))
    bench = benchmark_cost(count_cycles(soc_series(trace, 2.0)), phi, R)
    assert trace.cost == pytest.approx(bench, rel=1e-9, abs=1e-12)


@given(soc_paths, st.integers(1, 24), st.floats(1.0, 3.0))
def test_model_cost_bounds_benchmark(soc, J, alpha):
    phi = StressFunction.power_law(1e-3, alpha)
    trace = simulate(DispatchProfile.from_soc(soc, 3.0), linearize(phi, J, 1e4, 1.0, 3.0))
    bench = benchmark_cost(count_cycles(soc_series(trace, 3.0)), phi, 1e4)
    assert trace.cost >= bench * (1 - 1e-9) - 1e-12


@given(soc_paths)
def test_gap_shrinks_with_segments(soc):
    phi = StressFunction.power_law(5.24e-4, 2.03)
    prof = DispatchProfile.from_soc(soc, 12.5)
    bench = None
    gaps = []
    for J in J_LADDER:
        trace = simulate(prof, linearize(phi, J, 3.75e6, 1.0, 12.5))
        if bench is None:
            bench = benchmark_cost(count_cycles(soc_series(trace, 12.5)), phi, 3.75e6)
        gaps.append(trace.cost - bench)
    for a, b in zip(gaps, gaps[1:]):
        assert b <= a + 1e-9 * max(1.0, abs(a))


def test_gap_below_one_percent_at_64_segments():
    phi = StressFunction.power_law(5.24e-4, 2.03)
    rng = np.random.default_rng(11)
    for _ in range(20):
        prof = DispatchProfile.from_soc(rng.random(49), 12.5)
        trace = simulate(prof, linearize(phi, 64, 3.75e6, 1.0, 12.5))
        bench = benchmark_cost(count_cycles(soc_series(trace, 12.5)), phi, 3.75e6)
        assert (trace.cost - bench) / bench < 0.01


@given(soc_paths, st.floats(0.7, 1.0), st.floats(0.7, 1.0), st.sampled_from([0.25, 1.0]))
def test_energy_balance(soc, eta_ch, eta_dis, M):
    curve = linearize(StressFunction.power_law(1.0, 2.0), 6, 1.0, eta_dis, 5.0)
    prof = DispatchProfile.from_soc(soc, 5.0, M, eta_ch, eta_dis)
    trace = simulate(prof, curve, eta_ch, eta_dis)
    stored = trace.energies.sum(axis=1)
    for t in range(prof.T):
        expected = M * (prof.d[t] * eta_ch - prof.g[t] / eta_dis)
        assert stored[t + 1] - stored[t] == pytest.approx(expected, abs=1e-9)
    assert np.all(trace.energies >= 0)
    assert np.all(trace.energies <= np.array(curve.e_bar) + 1e-12)


def test_trace_csv_round_trip(worked_profile, worked_curve, tmp_path):
    trace = simulate(worked_profile, worked_curve)
    buf = io.StringIO()
    write_trace_csv(trace, 1.0, buf)
    header = buf.getvalue().splitlines()[0]
    assert header == "t,soc," + ",".join(f"e_{j}" for j in range(1, 11)) + ",interval_cost"
    path = tmp_path / "trace.csv"
    path.write_text(buf.getvalue())
    soc, costs = read_trace_csv(path)
    assert len(soc) == 15 and len(costs) == 14
    assert math.fsum(costs) == pytest.approx(43.0)


def test_dispatch_csv(tmp_path):
    path = tmp_path / "dispatch.csv"
    path.write_text("timestamp,charge_mw,discharge_mw\n"
                    "2015-01-01T00:00:00Z,1.0,0\n2015-01-01T00:15:00Z,0,2.0\n")
    prof = read_dispatch_csv(path, None, 0.5)
    assert prof.M == 0.25 and prof.d == (1.0, 0.0) and prof.g == (0.0, 2.0)
    path.write_text("timestamp,charge_mw,discharge_mw\nx,1,1\n")
    with pytest.raises(ValidationError):
        read_dispatch_csv(path, None, 0.5)


def test_zero_cost_curve_prices_nothing():
    curve = SegmentCostCurve.zero_cost(4, 2.0)
    trace = simulate(DispatchProfile.from_soc([0, 1, 0, 1], 2.0), curve)
    assert trace.cost == 0.0
