from __future__ import annotations

import io

import numpy as np
import pytest

from agingcost import InfeasibleError, SegmentCostCurve, StressFunction, ValidationError, linearize, simulate
from agingcost.dispatch import (
    CAPACITY,
    STORED_ENERGY,
    BatteryParams,
    MarketScenario,
    build_model,
    check_solution,
    marginal_offer_curve,
    optimize_horizon,
    write_offer_csv,
    write_solution_csv,
)
from agingcost.solver import solve_lp, solve_mip
from oracles import CASE_C1, enumerate_binaries, grid_search

NMC = StressFunction.power_law(5.24e-4, 2.03)


def case_curve(battery, J):
    return linearize(NMC, J, battery.R, battery.eta_dis, battery.E_rate)


def small_battery(**kw):
    params = dict(charge_rating=1.0, discharge_rating=1.0, E_rate=2.0, soc_min=0.1, soc_max=0.9,
                  eta_ch=0.9, eta_dis=0.9, R=400.0)
    params.update(kw)
    return BatteryParams(**params)


# --- model structure ---------------------------------------------------------

@pytest.mark.parametrize("J", [1, 3])
def test_counts_without_reserve(pack, J):
    p = build_model(pack, case_curve(pack, J), MarketScenario.of([10, 20]))
    assert p.n_binary == 2
    assert p.n_vars == 2 * (3 + 3 * J)
    assert p.n_rows == 2 * (J + 5) + 1
    assert [p.var_names[i] for i in np.flatnonzero(p.binary)] == ["v_1", "v_2"]


def test_counts_with_reserve(pack):
    J = 2
    base = build_model(pack, case_curve(pack, J), MarketScenario.of([10, 20], [5, 5]))
    res = build_model(pack, case_curve(pack, J), MarketScenario.of([10, 20], [5, 5], reserve_enabled=True))
    assert res.n_vars - base.n_vars == 2 * 4
    assert res.n_binary == 4
    # two-sided baseline limits are stored as separate one-sided rows
    assert res.n_rows - base.n_rows == 2 * 9


def test_relax_option_has_no_binaries(pack):
    p = build_model(pack, case_curve(pack, 4), MarketScenario.of([10, 20, 30]), relax_v=True)
    assert p.n_binary == 0


def test_curve_battery_mismatch(pack):
    other = linearize(NMC, 4, 1.0, 0.95, 10.0)
    with pytest.raises(ValidationError):
        build_model(pack, other, MarketScenario.of([1, 2]))
    with pytest.raises(ValidationError):
        build_model(pack, linearize(NMC, 4, 1.0, 0.9, 12.5), MarketScenario.of([1, 2]))
    with pytest.raises(ValidationError):
        build_model(pack, case_curve(pack, 2), MarketScenario.of([]))
    with pytest.raises(ValidationError):
        build_model(pack, case_curve(pack, 2), MarketScenario.of([1, 2], reserve_enabled=True))


def test_parameter_validation():
    with pytest.raises(ValidationError):
        BatteryParams.case_study(E0=0.5)
    with pytest.raises(ValidationError):
        BatteryParams.case_study(eta_ch=1.2)
    with pytest.raises(ValidationError):
        MarketScenario.of([1, 2], [1])
    with pytest.raises(ValidationError):
        MarketScenario.of([1, 2], M=0)


def test_defaults(pack):
    assert pack.initial_energy == pytest.approx(0.15 * 12.5)
    assert pack.final_energy == pack.initial_energy
    assert MarketScenario.of([1]).sustainability_bound == STORED_ENERGY
    assert MarketScenario.of([1]).epsilon_reserve == 0.1


# --- optimization against brute force ---------------------------------------

def test_zero_cost_two_interval_example(pack):
    curve = SegmentCostCurve.zero_cost(1, pack.E_rate)
    sol = optimize_horizon(pack, curve, MarketScenario.of([0, 1000]))
    headroom = (pack.E_max - pack.E_min) / pack.eta_ch
    assert sol.d[0] == pytest.approx(min(pack.charge_rating, headroom))
    assert sol.g[1] == pytest.approx((pack.E_max - pack.E_min) * pack.eta_dis)
    assert sol.profit == pytest.approx(9500.0)
    grid, _ = grid_search([0, 1000], pack, curve)
    # the grid can only approach the optimum from below, within one step per interval
    assert grid <= sol.profit + 1e-6
    assert sol.profit - grid <= 0.1 * 1000


def test_constant_price_is_idle(pack):
    sol = optimize_horizon(pack, case_curve(pack, 4), MarketScenario.of([42.0] * 6))
    assert sol.profit == 0.0
    assert not sol.d.any() and not sol.g.any()


def spread_threshold(battery, c1, base=10.0):
    return base / (battery.eta_ch * battery.eta_dis) - base + c1


def test_spread_threshold(pack):
    curve = case_curve(pack, 1)
    cut = spread_threshold(pack, curve.c[0])
    assert cut == pytest.approx(10 / 0.9025 - 10 + CASE_C1)
    below = optimize_horizon(pack, curve, MarketScenario.of([10, 10 + cut - 0.5]))
    above = optimize_horizon(pack, curve, MarketScenario.of([10, 10 + cut + 0.5]))
    assert below.profit == 0.0
    assert above.g[1] == pytest.approx((pack.E_max - pack.E_min) * pack.eta_dis)
    assert above.profit == pytest.approx(0.5 * above.g[1], rel=1e-9)


def test_spread_sweep_matches_grid():
    battery = small_battery()
    curve = linearize(NMC, 2, 4e5, 0.9, 2.0)
    profits = []
    for delta in (0.0, 50.0, 100.0, 150.0, 200.0, 300.0):
        prices = [10.0, 10.0 + delta]
        sol = optimize_horizon(battery, curve, MarketScenario.of(prices))
        grid, _ = grid_search(prices, battery, curve, step=0.01)
        assert grid <= sol.profit + 1e-6
        assert sol.profit - grid <= 0.01 * (10 + delta) * 2
        profits.append(sol.profit)
    assert profits[0] == 0.0 and profits[-1] > 0
    assert all(b >= a - 1e-9 for a, b in zip(profits, profits[1:]))


@pytest.mark.parametrize("seed", range(8))
def test_relaxation_matches_milp(seed):
    rng = np.random.default_rng(seed)
    battery = small_battery(E0=float(rng.uniform(0.2, 1.8)))
    curve = linearize(NMC, int(rng.integers(1, 5)), 4e5, 0.9, 2.0)
    scen = MarketScenario.of(rng.uniform(0, 150, 5))
    relaxed = solve_lp(build_model(battery, curve, scen, relax_v=True))
    exact = solve_mip(build_model(battery, curve, scen))
    assert relaxed.objective == pytest.approx(exact.objective, rel=1e-6, abs=1e-6)
    sol = optimize_horizon(battery, curve, scen)
    assert sol.relaxed
    assert sol.objective == pytest.approx(exact.objective, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_milp_matches_enumeration(seed):
    rng = np.random.default_rng(50 + seed)
    battery = small_battery(E0=float(rng.uniform(0.2, 1.8)))
    curve = linearize(NMC, int(rng.integers(1, 4)), 4e5, 0.9, 2.0)
    scen = MarketScenario.of(rng.uniform(-40, 150, 4), relax_v=False)
    sol = optimize_horizon(battery, curve, scen)
    assert sol.objective == pytest.approx(enumerate_binaries(build_model(battery, curve, scen)), abs=1e-6)


def test_negative_price_uses_binaries():
    battery = small_battery(E0=1.0)
    curve = linearize(NMC, 2, 4e5, 0.9, 2.0)
    sol = optimize_horizon(battery, curve, MarketScenario.of([-50.0, 20.0, 80.0]))
    assert not sol.relaxed
    assert np.all(sol.d * sol.g == 0)


def test_forced_relaxation_falls_back():
    # a negative price rewards burning energy through simultaneous flows
    battery = small_battery(E0=1.0)
    curve = SegmentCostCurve.zero_cost(2, 2.0)
    scen = MarketScenario.of([-100.0, 5.0], relax_v=True)
    lp = solve_lp(build_model(battery, curve, scen, relax_v=True))
    idx = build_model(battery, curve, scen, relax_v=True).meta["idx"]
    assert np.any((lp.x[idx["d"]] > 1e-9) & (lp.x[idx["g"]] > 1e-9))
    sol = optimize_horizon(battery, curve, scen)
    assert not sol.relaxed
    assert np.all(sol.d * sol.g == 0)


# --- reserve -------------------------------------------------------------------

@pytest.mark.parametrize("mode", [CAPACITY, STORED_ENERGY])
@pytest.mark.parametrize("seed", range(3))
def test_reserve_matches_enumeration(mode, seed):
    rng = np.random.default_rng(70 + seed)
    battery = small_battery(E0=float(rng.uniform(0.3, 1.5)))
    curve = linearize(NMC, 2, 4e5, 0.9, 2.0)
    scen = MarketScenario.of(rng.uniform(0, 120, 3), rng.uniform(0, 40, 3), M=0.5,
                             reserve_enabled=True, sustainability_bound=mode)
    sol = optimize_horizon(battery, curve, scen)
    assert sol.objective == pytest.approx(enumerate_binaries(build_model(battery, curve, scen)), abs=1e-6)
    assert sol.profit == pytest.approx(sol.objective, rel=1e-9, abs=1e-9)
    assert np.all(sol.q[sol.u == 0] == 0)
    assert np.all(sol.q[sol.u == 1] >= 0.1 - 1e-9)


def _reserve_example(mode):
    battery = BatteryParams(charge_rating=36.0, discharge_rating=36.0, E_rate=4.0, E0=3.0, E_final=0.0)
    curve = SegmentCostCurve.zero_cost(1, 4.0)
    scen = MarketScenario.of([100.0], [1.0], M=1 / 12, S=1.0, reserve_enabled=True,
                             sustainability_bound=mode)
    p = build_model(battery, curve, scen)
    q = p.meta["idx"]["q"][0]
    lb, ub = p.lb.copy(), p.ub.copy()
    lb[q] = ub[q] = 1.0
    sol = solve_mip(p.with_bounds(lb, ub))
    return sol.x[p.meta["idx"]["g"][0]]


def test_reserve_limits_baseline_by_stored_energy():
    # 3 MWh stored, 1 MW reserve for one hour leaves 2 MW of baseline discharge
    assert _reserve_example(STORED_ENERGY) == pytest.approx(2.0)


def test_reserve_capacity_bound():
    assert _reserve_example(CAPACITY) == pytest.approx(3.0)


# --- invariants and failures ----------------------------------------------------

@pytest.mark.parametrize("seed", range(6))
def test_solution_invariants(seed, pack):
    rng = np.random.default_rng(90 + seed)
    curve = case_curve(pack, int(rng.choice([1, 4, 8])))
    prices = rng.uniform(0, 400, 12)
    sol = optimize_horizon(pack, curve, MarketScenario.of(prices))
    assert np.all(sol.d * sol.g == 0)
    assert np.all(sol.e >= 0) and np.all(sol.e <= curve.capacities + 1e-9)
    assert np.all(sol.stored[1:] >= pack.E_min - 1e-9) and np.all(sol.stored[1:] <= pack.E_max + 1e-9)
    assert sol.terminal_energy >= pack.final_energy - 1e-9
    replay = simulate(sol.profile(), curve, pack.eta_ch, pack.eta_dis).cost
    assert sol.aging_cost == pytest.approx(replay, rel=1e-6, abs=1e-9)
    assert sol.profit == pytest.approx(sol.revenue_energy - sol.aging_cost)
    assert sol.profit == pytest.approx(sol.objective, rel=1e-9)
    assert check_solution(sol, pack, curve) == pytest.approx(replay)


def test_check_solution_rejects_tampering(pack):
    curve = case_curve(pack, 2)
    sol = optimize_horizon(pack, curve, MarketScenario.of([10, 400]))
    sol.d[1] = 1.0
    with pytest.raises(AssertionError, match="simultaneous"):
        check_solution(sol, pack, curve)


def test_unreachable_terminal_energy():
    battery = small_battery(E0=0.2, E_final=1.8)
    with pytest.raises(InfeasibleError, match=r"E_final=1.8 .*at most 1.1 MWh"):
        optimize_horizon(battery, linearize(NMC, 2, 4e5, 0.9, 2.0), MarketScenario.of([10]))


# --- offer curve and output -------------------------------------------------------

def test_worked_offer(worked_curve):
    battery = BatteryParams(1.0, 1.0, 1.0)
    offer = marginal_offer_curve(battery, worked_curve)
    assert len(offer.segments) == 10
    np.testing.assert_allclose([s.price for s in offer.segments], range(10, 200, 20), rtol=1e-12)
    np.testing.assert_allclose([s.energy for s in offer.segments], [0.1] * 10)
    assert offer.segments[0].depth_lo == 0 and offer.segments[-1].depth_hi == 1


def test_single_segment_offer(pack):
    offer = marginal_offer_curve(pack, case_curve(pack, 1))
    assert offer.segments[0].price == pytest.approx(CASE_C1, rel=1e-12)
    assert (offer.charge_rating, offer.discharge_rating, offer.E_min) == (20.0, 20.0, pack.E_min)
    assert (offer.eta_ch, offer.eta_dis, offer.E_final) == (0.95, 0.95, pack.final_energy)


def test_zero_cost_offer_and_csv(pack):
    offer = marginal_offer_curve(pack, SegmentCostCurve.zero_cost(3, pack.E_rate))
    assert all(s.price == 0 for s in offer.segments)
    buf = io.StringIO()
    write_offer_csv(offer, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "segment,depth_lo,depth_hi,price,energy_mwh"
    assert len(lines) == 4 and lines[1].startswith("1,0.0,")


def test_solution_csv(pack):
    sol = optimize_horizon(pack, case_curve(pack, 2), MarketScenario.of([10, 400]))
    buf = io.StringIO()
    write_solution_csv(sol, ["2015-01-01T00:00:00Z", "2015-01-01T01:00:00Z"], buf)
    rows = [r.split(",") for r in buf.getvalue().splitlines()]
    assert rows[0] == ["timestamp", "d", "g", "q", "soc", "aging_cost", "energy_revenue", "reserve_revenue"]
    assert float(rows[2][2]) == pytest.approx(sol.g[1])
    assert sum(float(r[5]) for r in rows[1:]) == pytest.approx(sol.aging_cost)
