"""Price-taker battery dispatch with segment-based aging cost.

The model maximizes energy (and optionally reserve) revenue minus the aging
cost ``sum_t sum_j M c_j p_dis[t, j]``.  Stored energy is tracked per depth
segment; because the segment costs are non-decreasing, the optimizer fills
and drains the cheap (shallow) segments first on its own, so the cost term
agrees with the greedy replay in :mod:`agingcost.segments`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, ValidationError
from .segments import DispatchProfile, SegmentTrace, init_segments, simulate
from .solver import LpProblem, ModelBuilder, Status, solve_lp, solve_mip
from .stress import SegmentCostCurve

log = logging.getLogger(__name__)

CAPACITY = "capacity"
STORED_ENERGY = "stored_energy"

_ZERO = 1e-9


@dataclass(frozen=True)
class BatteryParams:
    """Physical ratings.  ``charge_rating`` bounds ``d``, ``discharge_rating`` bounds ``g``."""

    charge_rating: float
    discharge_rating: float
    E_rate: float
    soc_min: float = 0.0
    soc_max: float = 1.0
    E0: float | None = None
    E_final: float | None = None
    eta_ch: float = 1.0
    eta_dis: float = 1.0
    R: float = 0.0
    shelf_life_years: float = 10.0

    def __post_init__(self):
        if self.charge_rating < 0 or self.discharge_rating < 0:
            raise ValidationError("power ratings must be non-negative")
        if not self.E_rate > 0:
            raise ValidationError("energy rating must be positive")
        if not 0 <= self.soc_min <= self.soc_max <= 1:
            raise ValidationError("need 0 <= soc_min <= soc_max <= 1")
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dis <= 1):
            raise ValidationError("efficiencies must lie in (0, 1]")
        if self.R < 0:
            raise ValidationError("replacement cost must be non-negative")
        if not self.shelf_life_years > 0:
            raise ValidationError("shelf life must be positive")
        tol = 1e-9 * self.E_rate
        if not self.E_min - tol <= self.initial_energy <= self.E_max + tol:
            raise ValidationError(f"E0={self.initial_energy} outside [{self.E_min}, {self.E_max}]")
        if self.E_final is not None and self.E_final > self.E_max + tol:
            raise ValidationError(f"E_final={self.E_final} exceeds E_max={self.E_max}")

    @property
    def E_min(self) -> float:
        return self.soc_min * self.E_rate

    @property
    def E_max(self) -> float:
        return self.soc_max * self.E_rate

    @property
    def initial_energy(self) -> float:
        return self.E_min if self.E0 is None else self.E0

    @property
    def final_energy(self) -> float:
        return self.initial_energy if self.E_final is None else self.E_final

    def with_energy(self, E0: float, E_final: float | None = None) -> "BatteryParams":
        return replace(self, E0=E0, E_final=E_final)

    @classmethod
    def case_study(cls, **overrides) -> "BatteryParams":
        """20 MW / 12.5 MWh NMC battery, 95 % efficiencies, SoC 15-95 %, 300 k$/MWh cells."""
        params = dict(
            charge_rating=20.0,
            discharge_rating=20.0,
            E_rate=12.5,
            soc_min=0.15,
            soc_max=0.95,
            eta_ch=0.95,
            eta_dis=0.95,
            R=300_000.0 * 12.5,
            shelf_life_years=10.0,
        )
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True)
class MarketScenario:
    lambda_e: tuple[float, ...]
    lambda_q: tuple[float, ...] | None = None
    M: float = 1.0
    S: float = 1.0
    epsilon_reserve: float = 0.1
    reserve_enabled: bool = False
    sustainability_bound: str = STORED_ENERGY
    relax_v: bool | None = None

    def __post_init__(self):
        if self.lambda_q is not None and len(self.lambda_q) != len(self.lambda_e):
            raise ValidationError("energy and reserve price series differ in length")
        if not self.M > 0:
            raise ValidationError("interval duration M must be positive")
        if self.S < 0:
            raise ValidationError("sustainability time S must be non-negative")
        if self.epsilon_reserve < 0:
            raise ValidationError("minimum reserve offer must be non-negative")
        if self.sustainability_bound not in (CAPACITY, STORED_ENERGY):
            raise ValidationError(f"unknown sustainability bound {self.sustainability_bound!r}")
        if not all(math.isfinite(p) for p in self.lambda_e):
            raise ValidationError("energy prices must be finite")

    @property
    def T(self) -> int:
        return len(self.lambda_e)

    @classmethod
    def of(cls, lambda_e: Sequence[float], lambda_q: Sequence[float] | None = None, **kw) -> "MarketScenario":
        return cls(tuple(float(p) for p in lambda_e),
                   None if lambda_q is None else tuple(float(p) for p in lambda_q), **kw)

    @property
    def reserve_prices(self) -> np.ndarray:
        if self.lambda_q is None:
            return np.zeros(self.T)
        return np.asarray(self.lambda_q, dtype=float)


@dataclass
class DispatchSolution:
    d: np.ndarray
    g: np.ndarray
    q: np.ndarray
    d_q: np.ndarray
    g_q: np.ndarray
    v: np.ndarray
    u: np.ndarray
    p_ch: np.ndarray
    p_dis: np.ndarray
    e: np.ndarray  # (T + 1, J), row 0 is the initial segment state
    interval_aging_cost: np.ndarray
    interval_energy_revenue: np.ndarray
    interval_reserve_revenue: np.ndarray
    M: float
    E_rate: float
    E0: float
    objective: float
    nodes: int = 0
    relaxed: bool = False

    @property
    def T(self) -> int:
        return len(self.d)

    @property
    def revenue_energy(self) -> float:
        return math.fsum(self.interval_energy_revenue)

    @property
    def revenue_reserve(self) -> float:
        return math.fsum(self.interval_reserve_revenue)

    @property
    def aging_cost(self) -> float:
        return math.fsum(self.interval_aging_cost)

    @property
    def profit(self) -> float:
        return self.revenue_energy + self.revenue_reserve - self.aging_cost

    @property
    def stored(self) -> np.ndarray:
        """Total stored energy, initial value first."""
        return self.e.sum(axis=1)

    @property
    def soc(self) -> np.ndarray:
        return self.stored / self.E_rate

    @property
    def terminal_energy(self) -> float:
        return float(self.stored[-1])

    def profile(self) -> DispatchProfile:
        return DispatchProfile.of(self.d, self.g, self.M, self.E0)

    def to_trace(self) -> SegmentTrace:
        return SegmentTrace(self.e.copy(), self.p_ch.copy(), self.p_dis.copy(),
                            self.interval_aging_cost.copy(), self.M)


def _check_consistency(battery: BatteryParams, curve: SegmentCostCurve, scenario: MarketScenario) -> None:
    if scenario.T < 1:
        raise ValidationError("empty price horizon")
    if not math.isclose(math.fsum(curve.e_bar), battery.E_rate, rel_tol=1e-9):
        raise ValidationError(f"cost curve capacity {math.fsum(curve.e_bar)} != battery E_rate {battery.E_rate}")
    if curve.R > 0 and not math.isclose(curve.eta_dis, battery.eta_dis, rel_tol=1e-12):
        raise ValidationError("cost curve was built for a different discharge efficiency")
    if scenario.reserve_enabled and scenario.lambda_q is None:
        raise ValidationError("reserve enabled but no reserve prices given")


def _use_relaxation(scenario: MarketScenario) -> bool:
    if scenario.relax_v is not None:
        return scenario.relax_v
    return not scenario.reserve_enabled and min(scenario.lambda_e) >= 0


def build_model(
    battery: BatteryParams,
    curve: SegmentCostCurve,
    scenario: MarketScenario,
    relax_v: bool = False,
) -> LpProblem:
    """Encode the dispatch MILP.  ``relax_v`` makes the mode variables continuous."""
    _check_consistency(battery, curve, scenario)
    T, J, M = scenario.T, curve.J, scenario.M
    D, G = battery.charge_rating, battery.discharge_rating
    eta_ch, eta_dis = battery.eta_ch, battery.eta_dis
    lam_e = np.asarray(scenario.lambda_e, dtype=float)
    lam_q = scenario.reserve_prices
    c = curve.costs
    e_bar = curve.capacities
    e_init = init_segments(battery.initial_energy, curve)

    b = ModelBuilder()
    idx = {k: np.zeros(T, dtype=int) for k in ("d", "g", "v")}
    for k in ("p_ch", "p_dis", "e"):
        idx[k] = np.zeros((T, J), dtype=int)
    if scenario.reserve_enabled:
        for k in ("u", "d_q", "g_q", "q"):
            idx[k] = np.zeros(T, dtype=int)

    for t in range(T):
        n = t + 1
        idx["d"][t] = d = b.var(f"d_{n}", 0.0, D, obj=-M * lam_e[t])
        idx["g"][t] = g = b.var(f"g_{n}", 0.0, G, obj=M * lam_e[t])
        idx["v"][t] = v = b.var(f"v_{n}", 0.0, 1.0, binary=not relax_v)
        for j in range(J):
            idx["p_ch"][t, j] = b.var(f"pch_{n}_{j + 1}")
            idx["p_dis"][t, j] = b.var(f"pdis_{n}_{j + 1}", obj=-M * c[j])
            idx["e"][t, j] = b.var(f"e_{n}_{j + 1}", 0.0, e_bar[j])

        b.row({d: 1.0, **{int(k): -1.0 for k in idx["p_ch"][t]}}, 0.0, 0.0, f"chsplit_{n}")
        b.row({g: 1.0, **{int(k): -1.0 for k in idx["p_dis"][t]}}, 0.0, 0.0, f"dissplit_{n}")
        b.row({d: 1.0, v: D}, hi=D, name=f"chmode_{n}")
        b.row({g: 1.0, v: -G}, hi=0.0, name=f"dismode_{n}")
        for j in range(J):
            coeffs = {int(idx["e"][t, j]): 1.0, int(idx["p_ch"][t, j]): -M * eta_ch, int(idx["p_dis"][t, j]): M / eta_dis}
            rhs = 0.0
            if t == 0:
                rhs = e_init[j]
            else:
                coeffs[int(idx["e"][t - 1, j])] = -1.0
            b.row(coeffs, rhs, rhs, f"seg_{n}_{j + 1}")
        b.row({int(k): 1.0 for k in idx["e"][t]}, battery.E_min, battery.E_max, f"soc_{n}")

        if scenario.reserve_enabled:
            idx["u"][t] = u = b.var(f"u_{n}", 0.0, 1.0, binary=True)
            idx["d_q"][t] = dq = b.var(f"dq_{n}")
            idx["g_q"][t] = gq = b.var(f"gq_{n}")
            idx["q"][t] = q = b.var(f"q_{n}", obj=M * lam_q[t])
            # 0 <= d - dq <= D(1 - u), same for g
            b.row({d: 1.0, dq: -1.0}, lo=0.0, name=f"chbase_lo_{n}")
            b.row({d: 1.0, dq: -1.0, u: D}, hi=D, name=f"chbase_hi_{n}")
            b.row({g: 1.0, gq: -1.0}, lo=0.0, name=f"disbase_lo_{n}")
            b.row({g: 1.0, gq: -1.0, u: G}, hi=G, name=f"disbase_hi_{n}")
            b.row({dq: 1.0, u: -D}, hi=0.0, name=f"basech_{n}")
            b.row({gq: 1.0, u: -G}, hi=0.0, name=f"basedis_{n}")
            b.row({gq: 1.0, q: 1.0, dq: -1.0, u: -G}, hi=0.0, name=f"headroom_{n}")
            b.row({q: 1.0, u: -scenario.epsilon_reserve}, lo=0.0, name=f"minoffer_{n}")
            S = scenario.S
            if scenario.sustainability_bound == CAPACITY:
                b.row({gq: S, q: S, dq: -S}, hi=float(np.sum(e_bar)), name=f"sustain_{n}")
            else:
                coeffs = {gq: S, q: S, dq: -S}
                hi = 0.0
                if t == 0:
                    hi = float(np.sum(e_init))
                else:
                    for k in idx["e"][t - 1]:
                        coeffs[int(k)] = -1.0
                b.row(coeffs, hi=hi, name=f"sustain_{n}")

    last = {int(k): 1.0 for k in idx["e"][T - 1]}
    b.row(last, lo=battery.final_energy, name="terminal")

    problem = b.build()
    problem.meta = {"idx": idx, "T": T, "J": J}
    return problem


def _diagnose(battery: BatteryParams, scenario: MarketScenario) -> str:
    T, M = scenario.T, scenario.M
    E0, Ef = battery.initial_energy, battery.final_energy
    reachable = min(battery.E_max, E0 + T * M * battery.charge_rating * battery.eta_ch)
    if Ef > reachable + 1e-9:
        return (f"terminal energy requirement E_final={Ef:.6g} MWh is unreachable "
                f"(at most {reachable:.6g} MWh after {T} intervals)")
    return "dispatch problem is infeasible"


def optimize_horizon(
    battery: BatteryParams,
    curve: SegmentCostCurve,
    scenario: MarketScenario,
    *,
    check: bool = True,
) -> DispatchSolution:
    """Solve one horizon and decode the schedule, revenues and aging cost."""
    relaxed = _use_relaxation(scenario)
    problem = build_model(battery, curve, scenario, relax_v=relaxed)
    sol = solve_lp(problem) if problem.n_binary == 0 else solve_mip(problem)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleError(_diagnose(battery, scenario))
    if sol.status is not Status.OPTIMAL:
        raise InfeasibleError(f"solver stopped with status {sol.status.value}")
    idx = problem.meta["idx"]
    if relaxed:
        x = sol.x
        if np.any((x[idx["d"]] > _ZERO) & (x[idx["g"]] > _ZERO)):
            log.info("relaxed mode variables allow simultaneous flows; solving with binaries")
            problem = build_model(battery, curve, scenario, relax_v=False)
            sol = solve_mip(problem)
            relaxed = False
            if sol.status is not Status.OPTIMAL:
                raise InfeasibleError(_diagnose(battery, scenario))
            idx = problem.meta["idx"]
    out = _decode(sol.x, idx, battery, curve, scenario, sol.objective, sol.nodes, relaxed)
    if check:
        check_solution(out, battery, curve)
    return out


def _snap(a: np.ndarray, scale: float = 1.0) -> np.ndarray:
    a = np.array(a, dtype=float)
    a[np.abs(a) <= _ZERO * max(1.0, scale)] = 0.0
    return a


def _decode(x, idx, battery, curve, scenario, objective, nodes, relaxed) -> DispatchSolution:
    T, J, M = scenario.T, curve.J, scenario.M
    d = _snap(x[idx["d"]], battery.charge_rating)
    g = _snap(x[idx["g"]], battery.discharge_rating)
    v = np.round(x[idx["v"]]) if not relaxed else x[idx["v"]].copy()
    p_ch = _snap(x[idx["p_ch"]])
    p_dis = _snap(x[idx["p_dis"]])
    e = np.vstack([init_segments(battery.initial_energy, curve), np.clip(x[idx["e"]], 0.0, curve.capacities)])
    if scenario.reserve_enabled:
        u = np.round(x[idx["u"]])
        q = _snap(x[idx["q"]])
        d_q = _snap(x[idx["d_q"]])
        g_q = _snap(x[idx["g_q"]])
    else:
        u = q = d_q = g_q = np.zeros(T)
    lam_e = np.asarray(scenario.lambda_e, dtype=float)
    lam_q = scenario.reserve_prices
    return DispatchSolution(
        d=d, g=g, q=q, d_q=d_q, g_q=g_q, v=v, u=u, p_ch=p_ch, p_dis=p_dis, e=e,
        interval_aging_cost=M * (p_dis @ curve.costs),
        interval_energy_revenue=M * lam_e * (g - d),
        interval_reserve_revenue=M * lam_q * q,
        M=M, E_rate=battery.E_rate, E0=battery.initial_energy,
        objective=float(objective), nodes=nodes, relaxed=relaxed,
    )


def check_solution(sol: DispatchSolution, battery: BatteryParams, curve: SegmentCostCurve,
                   tol: float = 1e-6) -> float:
    """Assert the physical invariants of a decoded solution.

    Returns the aging cost of the same schedule under the greedy segment replay,
    after checking it matches the optimizer's cost term.
    """
    if np.any(sol.d * sol.g != 0):
        t = int(np.flatnonzero(sol.d * sol.g)[0]) + 1
        raise AssertionError(f"interval {t}: simultaneous charge and discharge")
    if np.any(sol.d > battery.charge_rating * (1 + tol)) or np.any(sol.g > battery.discharge_rating * (1 + tol)):
        raise AssertionError("power rating exceeded")
    if np.any(sol.e < -tol) or np.any(sol.e > curve.capacities * (1 + tol) + tol):
        raise AssertionError("segment energy outside its bounds")
    stored = sol.stored[1:]
    if np.any(stored < battery.E_min - tol) or np.any(stored > battery.E_max + tol):
        raise AssertionError("stored energy outside the SoC window")
    if sol.terminal_energy < battery.final_energy - tol:
        raise AssertionError("terminal energy requirement violated")
    replay = simulate(sol.profile(), curve, battery.eta_ch, battery.eta_dis).cost
    if abs(replay - sol.aging_cost) > tol * max(1.0, abs(replay)):
        raise AssertionError(f"optimizer aging cost {sol.aging_cost} != segment replay {replay}")
    return replay


@dataclass(frozen=True)
class OfferSegment:
    depth_lo: float
    depth_hi: float
    price: float
    energy: float


@dataclass(frozen=True)
class MarketOffer:
    segments: tuple[OfferSegment, ...]
    charge_rating: float
    discharge_rating: float
    E_min: float
    E_final: float
    eta_ch: float
    eta_dis: float


def marginal_offer_curve(battery: BatteryParams, curve: SegmentCostCurve) -> MarketOffer:
    """Offer record: per-segment price and energy plus the SoC-management parameters."""
    J = curve.J
    segs = tuple(OfferSegment((j) / J, (j + 1) / J, curve.c[j], curve.e_bar[j]) for j in range(J))
    return MarketOffer(segs, battery.charge_rating, battery.discharge_rating, battery.E_min,
                       battery.final_energy, battery.eta_ch, battery.eta_dis)


def write_offer_csv(offer: MarketOffer, path_or_file) -> None:
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment", "depth_lo", "depth_hi", "price", "energy_mwh"])
        for j, s in enumerate(offer.segments, start=1):
            w.writerow([j, repr(s.depth_lo), repr(s.depth_hi), repr(s.price), repr(s.energy)])
    finally:
        if own:
            fh.close()


def write_solution_csv(sol: DispatchSolution, timestamps: Sequence[str] | None, path_or_file) -> None:
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "d", "g", "q", "soc", "aging_cost", "energy_revenue", "reserve_revenue"])
        soc = sol.soc
        for t in range(sol.T):
            stamp = timestamps[t] if timestamps is not None else str(t + 1)
            w.writerow([stamp, repr(float(sol.d[t])), repr(float(sol.g[t])), repr(float(sol.q[t])),
                        repr(float(soc[t + 1])), repr(float(sol.interval_aging_cost[t])),
                        repr(float(sol.interval_energy_revenue[t])), repr(float(sol.interval_reserve_revenue[t]))])
    finally:
        if own:
            fh.close()
