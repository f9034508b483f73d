"""Daily-horizon backtests, ex-post validation and annual reporting."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dispatch import BatteryParams, DispatchSolution, MarketScenario, optimize_horizon
from .errors import InfeasibleError, ValidationError
from .market import PriceSeries, format_timestamp
from .rainflow import SocProfile, count_cycles, life_loss
from .segments import SegmentTrace, soc_series
from .stress import SegmentCostCurve, StressFunction

log = logging.getLogger(__name__)

HOURS_PER_YEAR = 365 * 24


def life_expectancy(annual_cycle_loss: float, annual_calendar_loss: float) -> float:
    """Years until 100 % of life is used, from annual loss rates in percent."""
    if annual_cycle_loss < 0 or annual_calendar_loss < 0:
        raise ValidationError("annual loss rates must be non-negative")
    total = annual_cycle_loss + annual_calendar_loss
    if total == 0:
        raise ValidationError("zero total loss rate gives an unbounded life expectancy")
    return 100.0 / total


@dataclass(frozen=True)
class ExpostResult:
    predicted: float
    benchmark: float
    epsilon: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.epsilon)


def expost_validate(
    source: DispatchSolution | SegmentTrace,
    phi: StressFunction,
    R: float,
    E_rate: float | None = None,
) -> ExpostResult:
    """Compare the segment-model aging cost with the rainflow benchmark ``R * L``.

    ``epsilon`` is 0 when both costs are zero and ``inf`` when only the
    benchmark is zero.
    """
    if isinstance(source, DispatchSolution):
        trace = source.to_trace()
        E_rate = source.E_rate if E_rate is None else E_rate
    else:
        trace = source
        if E_rate is None:
            raise ValidationError("E_rate is required to validate a bare trace")
    predicted = trace.cost
    benchmark = R * life_loss(count_cycles(soc_series(trace, E_rate)), phi)
    return ExpostResult(predicted, benchmark, relative_error(predicted, benchmark))


def relative_error(predicted: float, benchmark: float) -> float:
    if benchmark == 0:
        return 0.0 if predicted == 0 else math.inf
    return abs(predicted - benchmark) / benchmark


@dataclass(frozen=True)
class DayRecord:
    start: str
    E0: float
    E_end: float
    revenue_energy: float
    revenue_reserve: float
    predicted_aging_cost: float
    nodes: int


@dataclass
class BacktestReport:
    """Annualized results; money in $, rates in percent."""

    hours: float
    revenue: float
    reserve_revenue_share: float
    annual_cycle_loss: float
    prorated_aging_cost: float
    profit: float
    reserve_profit_share: float | None
    life_expectancy: float
    predicted_aging_cost: float
    expost_epsilon: float
    segments: int
    days: list[DayRecord] = field(default_factory=list)
    soc: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    power: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    prices: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    interval_hours: float = 1.0

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "hours", "revenue", "reserve_revenue_share", "annual_cycle_loss", "prorated_aging_cost",
            "profit", "reserve_profit_share", "life_expectancy", "predicted_aging_cost",
            "expost_epsilon", "segments")}
        if math.isinf(out["expost_epsilon"]):
            out["expost_epsilon"] = "inf"
        out["days"] = [asdict(d) for d in self.days]
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "BacktestReport":
        try:
            kw = {k: data[k] for k in (
                "hours", "revenue", "reserve_revenue_share", "annual_cycle_loss", "prorated_aging_cost",
                "profit", "reserve_profit_share", "life_expectancy", "predicted_aging_cost",
                "expost_epsilon", "segments")}
        except KeyError as exc:
            raise ValidationError(f"report is missing field {exc.args[0]!r}") from None
        kw["expost_epsilon"] = float(kw["expost_epsilon"])
        days = [DayRecord(**d) for d in data.get("days", [])]
        return cls(days=days, **kw)


def _solve_day(args):
    battery, curve, scenario = args
    return optimize_horizon(battery, curve, scenario)


def backtest(
    prices: PriceSeries,
    battery: BatteryParams,
    curve: SegmentCostCurve,
    phi: StressFunction,
    scenario: MarketScenario | None = None,
    *,
    horizon_hours: float = 24.0,
    independent_days: bool = False,
    workers: int = 1,
) -> BacktestReport:
    """Optimize consecutive horizons and report annualized economics.

    ``scenario`` supplies everything except the prices and interval length.
    Days are chained through their terminal energy unless
    ``independent_days`` is set, in which case every day starts from
    ``battery.E0`` and may be solved in parallel.
    """
    template = scenario if scenario is not None else MarketScenario(())
    M = prices.interval_hours
    per_day = horizon_hours / M
    if abs(per_day - round(per_day)) > 1e-9 or round(per_day) < 1:
        raise ValidationError(f"horizon of {horizon_hours} h is not a whole number of {M} h intervals")
    per_day = int(round(per_day))
    T = len(prices.timestamps)
    if T % per_day:
        raise ValidationError(f"{T} intervals do not cover a whole number of {horizon_hours} h horizons")
    energy = prices.energy_array
    reserve = prices.reserve_array if prices.reserve is not None else None
    if template.reserve_enabled and reserve is None:
        raise ValidationError("reserve enabled but the price file has no reserve_price column")

    def scenario_for(k: int) -> MarketScenario:
        sl = slice(k * per_day, (k + 1) * per_day)
        return replace(template, lambda_e=tuple(energy[sl]),
                       lambda_q=None if reserve is None else tuple(reserve[sl]), M=M)

    n_days = T // per_day
    solutions: list[DispatchSolution] = []
    if independent_days:
        jobs = [(battery, curve, scenario_for(k)) for k in range(n_days)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                solutions = list(pool.map(_solve_day, jobs))
        else:
            solutions = [_solve_day(j) for j in jobs]
    else:
        E0 = battery.initial_energy
        for k in range(n_days):
            day_battery = battery.with_energy(E0, battery.E_final)
            try:
                sol = optimize_horizon(day_battery, curve, scenario_for(k))
            except InfeasibleError as exc:
                raise InfeasibleError(f"{format_timestamp(prices.timestamps[k * per_day])}: {exc}") from exc
            solutions.append(sol)
            E0 = sol.terminal_energy

    days = []
    soc_parts = []
    for k, sol in enumerate(solutions):
        days.append(DayRecord(format_timestamp(prices.timestamps[k * per_day]), sol.E0, sol.terminal_energy,
                              sol.revenue_energy, sol.revenue_reserve, sol.aging_cost, sol.nodes))
        soc_parts.append(sol.soc if k == 0 else sol.soc[1:])
    soc = np.clip(np.concatenate(soc_parts), 0.0, 1.0)
    power = np.concatenate([s.g - s.d for s in solutions])

    hours = T * M
    scale = HOURS_PER_YEAR / hours
    revenue_energy = math.fsum(d.revenue_energy for d in days)
    revenue_reserve = math.fsum(d.revenue_reserve for d in days)
    predicted = math.fsum(d.predicted_aging_cost for d in days)
    L = life_loss(count_cycles(SocProfile(tuple(soc), M)), phi)
    benchmark = battery.R * L

    revenue = (revenue_energy + revenue_reserve) * scale
    cost = benchmark * scale
    profit = revenue - cost
    cycle_pct = 100.0 * L * scale
    return BacktestReport(
        hours=hours,
        revenue=revenue,
        reserve_revenue_share=100.0 * revenue_reserve * scale / revenue if revenue > 0 else 0.0,
        annual_cycle_loss=cycle_pct,
        prorated_aging_cost=cost,
        profit=profit,
        reserve_profit_share=100.0 * revenue_reserve * scale / profit if profit > 0 else None,
        life_expectancy=life_expectancy(cycle_pct, 100.0 / battery.shelf_life_years),
        predicted_aging_cost=predicted * scale,
        expost_epsilon=relative_error(predicted, benchmark),
        segments=curve.J,
        days=days,
        soc=soc,
        power=power,
        prices=energy.copy(),
        interval_hours=M,
    )


_ROWS = (
    ("Annual market revenue (k$)", "revenue", 1e-3),
    ("Reserve revenue share (%)", "reserve_revenue_share", 1.0),
    ("Annual cycle life loss (%)", "annual_cycle_loss", 1.0),
    ("Annual prorated aging cost (k$)", "prorated_aging_cost", 1e-3),
    ("Annual prorated profit (k$)", "profit", 1e-3),
    ("Reserve profit share (%)", "reserve_profit_share", 1.0),
    ("Life expectancy (years)", "life_expectancy", 1.0),
)


def format_report(reports: Mapping[str, BacktestReport]) -> str:
    """Text table with one column per model, one decimal per cell."""
    names = list(reports)
    label_w = max(len(r[0]) for r in _ROWS)
    col_w = max(10, *(len(n) for n in names))
    lines = [" " * label_w + "".join(f"  {n:>{col_w}}" for n in names)]
    for label, key, scale in _ROWS:
        cells = []
        for n in names:
            value = getattr(reports[n], key)
            cells.append("-" if value is None else f"{value * scale:.1f}")
        lines.append(f"{label:<{label_w}}" + "".join(f"  {c:>{col_w}}" for c in cells))
    return "\n".join(lines) + "\n"


def write_report_csv(reports: Mapping[str, BacktestReport], fh) -> None:
    """Same rows as :func:`format_report`, unrounded, one column per model."""
    names = list(reports)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["metric"] + names)
    for label, key, scale in _ROWS:
        cells = []
        for n in names:
            value = getattr(reports[n], key)
            cells.append("" if value is None else repr(value * scale))
        w.writerow([label] + cells)


def reports_to_json(reports: Mapping[str, BacktestReport]) -> str:
    return json.dumps({k: v.to_dict() for k, v in reports.items()}, indent=2) + "\n"


def write_plot_data(report: BacktestReport, out_dir: str | Path, prefix: str = "") -> list[Path]:
    """Two-column CSVs of price, SoC and net power against time in hours."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    M = report.interval_hours
    series = {
        "price": ("price", np.arange(len(report.prices)) * M, report.prices),
        "soc": ("soc", np.arange(len(report.soc)) * M, report.soc),
        "power": ("net_discharge_mw", np.arange(len(report.power)) * M, report.power),
    }
    written = []
    for name, (col, t, y) in series.items():
        path = out / f"{prefix}{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["hour", col])
            for a, b in zip(t, y):
                w.writerow([repr(float(a)), repr(float(b))])
        written.append(path)
    return written


def backtest_models(
    prices: PriceSeries,
    battery: BatteryParams,
    curves: Mapping[str, SegmentCostCurve],
    phi: StressFunction,
    scenario: MarketScenario | None = None,
    **kw,
) -> dict[str, BacktestReport]:
    """Run :func:`backtest` once per named cost curve."""
    return {name: backtest(prices, battery, curve, phi, scenario, **kw) for name, curve in curves.items()}


def expost_errors(
    profiles: Sequence[DispatchSolution | SegmentTrace],
    phi: StressFunction,
    R: float,
    E_rate: float | None = None,
) -> np.ndarray:
    return np.array([expost_validate(p, phi, R, E_rate).epsilon for p in profiles])
