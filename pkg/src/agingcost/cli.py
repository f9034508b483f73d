"""Command-line entry point: ``agingcost <command> [options]``.

Exit status is 0 on success, 1 for invalid input and 2 when a dispatch problem
is infeasible (argparse also uses 2 for usage errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import backtest as bt
from .config import Settings, load_settings
from .dispatch import (
    CAPACITY,
    STORED_ENERGY,
    MarketScenario,
    build_model,
    marginal_offer_curve,
    optimize_horizon,
    write_offer_csv,
    write_solution_csv,
)
from .errors import InfeasibleError, ValidationError
from .market import PriceSeries, aggregate_settlement, format_timestamp, load_prices, synth_prices
from .rainflow import count_cycles, life_loss, read_soc_csv, write_cycles_csv
from .segments import read_dispatch_csv, read_trace_csv, simulate, write_trace_csv
from .solver import write_mps
from .stress import SegmentCostCurve, linearize

log = logging.getLogger("agingcost")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2


def _curve(settings: Settings, J: int, no_cost: bool = False) -> SegmentCostCurve:
    b = settings.battery
    if no_cost:
        return SegmentCostCurve.zero_cost(J, b.E_rate, b.eta_dis)
    return linearize(settings.phi, J, b.R, b.eta_dis, b.E_rate)


def _prices(args, settings: Settings) -> PriceSeries:
    if args.prices is None:
        raise ValidationError("--prices is required")
    if args.prices.startswith("synth:"):
        kind = args.prices.split(":", 1)[1]
        series = synth_prices(kind, 24 * args.days, seed=args.seed)
    else:
        series = load_prices(args.prices)
    if settings.settlement_minutes and settings.settlement_minutes != series.interval_minutes:
        series = aggregate_settlement(series, settings.settlement_minutes)
    return series


def _scenario(args, settings: Settings) -> MarketScenario:
    sc = settings.scenario
    if getattr(args, "sustainability", None):
        sc = replace(sc, sustainability_bound=CAPACITY if args.sustainability == "capacity" else STORED_ENERGY)
    if getattr(args, "reserve", False):
        sc = replace(sc, reserve_enabled=True)
    if getattr(args, "relax_v", False):
        sc = replace(sc, relax_v=True)
    return sc


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_text(text)


def cmd_linearize(args) -> int:
    settings = load_settings(args.config)
    curve = _curve(settings, args.segments)
    offer = marginal_offer_curve(settings.battery, curve)
    out = _out_dir(args)
    if args.format == "json":
        data = {
            "segments": [{"depth_lo": s.depth_lo, "depth_hi": s.depth_hi, "price": s.price, "energy_mwh": s.energy}
                         for s in offer.segments],
            "charge_rating": offer.charge_rating, "discharge_rating": offer.discharge_rating,
            "E_min": offer.E_min, "E_final": offer.E_final, "eta_ch": offer.eta_ch, "eta_dis": offer.eta_dis,
        }
        _emit(json.dumps(data, indent=2) + "\n", out, "offer.json")
    elif out is None:
        write_offer_csv(offer, sys.stdout)
    else:
        write_offer_csv(offer, out / "offer.csv")
    return EXIT_OK


def cmd_count(args) -> int:
    profile = read_soc_csv(args.soc)
    cycles = count_cycles(profile)
    out = _out_dir(args)
    if args.format == "json":
        data = {"full": list(cycles.full_cycles), "discharge_half": list(cycles.discharge_half_cycles),
                "charge_half": list(cycles.charge_half_cycles)}
        if args.config:
            data["life_loss"] = life_loss(cycles, load_settings(args.config).phi)
        _emit(json.dumps(data, indent=2) + "\n", out, "cycles.json")
    elif out is None:
        write_cycles_csv(cycles, sys.stdout)
    else:
        write_cycles_csv(cycles, out / "cycles.csv")
    return EXIT_OK


def cmd_simulate(args) -> int:
    settings = load_settings(args.config)
    b = settings.battery
    curve = _curve(settings, args.segments, args.no_cost)
    profile = read_dispatch_csv(args.dispatch, None, b.initial_energy)
    trace = simulate(profile, curve, b.eta_ch, b.eta_dis)
    out = _out_dir(args)
    if args.format == "json":
        data = {"cost": trace.cost, "interval_costs": trace.interval_costs.tolist(),
                "soc": (trace.energies.sum(axis=1) / b.E_rate).tolist()}
        _emit(json.dumps(data, indent=2) + "\n", out, "trace.json")
    elif out is None:
        write_trace_csv(trace, b.E_rate, sys.stdout)
    else:
        write_trace_csv(trace, b.E_rate, out / "trace.csv")
    log.info("aging cost %.6g", trace.cost)
    return EXIT_OK


def cmd_optimize(args) -> int:
    settings = load_settings(args.config)
    prices = _prices(args, settings)
    curve = _curve(settings, args.segments, args.no_cost)
    template = _scenario(args, settings)
    scenario = replace(template, lambda_e=tuple(prices.energy_array),
                       lambda_q=None if prices.reserve is None else tuple(prices.reserve_array),
                       M=prices.interval_hours)
    if args.mps:
        write_mps(build_model(settings.battery, curve, scenario), args.mps)
    sol = optimize_horizon(settings.battery, curve, scenario)
    summary = {
        "revenue_energy": sol.revenue_energy,
        "revenue_reserve": sol.revenue_reserve,
        "aging_cost": sol.aging_cost,
        "profit": sol.profit,
        "terminal_energy": sol.terminal_energy,
        "nodes": sol.nodes,
    }
    out = _out_dir(args)
    stamps = [format_timestamp(t) for t in prices.timestamps]
    if out is not None:
        write_solution_csv(sol, stamps, out / "solution.csv")
        write_trace_csv(sol.to_trace(), sol.E_rate, out / "trace.csv")
        write_offer_csv(marginal_offer_curve(settings.battery, curve), out / "offer.csv")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.format == "json":
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    elif out is None:
        write_solution_csv(sol, stamps, sys.stdout)
    else:
        sys.stdout.write(f"profit={sol.profit!r} aging_cost={sol.aging_cost!r}\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    settings = load_settings(args.config)
    path = Path(args.trace)
    if path.is_dir():
        path = path / "trace.csv"
    soc, costs = read_trace_csv(path)
    predicted = sum(costs)
    benchmark = settings.battery.R * life_loss(count_cycles(soc), settings.phi)
    eps = bt.relative_error(predicted, benchmark)
    if args.format == "json":
        sys.stdout.write(json.dumps({"epsilon": "inf" if eps == float("inf") else eps,
                                     "predicted": predicted, "benchmark": benchmark}) + "\n")
    else:
        sys.stdout.write(f"epsilon={eps!r} predicted={predicted!r} benchmark={benchmark!r}\n")
    return EXIT_OK


def cmd_backtest(args) -> int:
    settings = load_settings(args.config)
    prices = _prices(args, settings)
    scenario = _scenario(args, settings)
    curves: dict[str, SegmentCostCurve] = {}
    if args.no_cost:
        curves["no-cost"] = _curve(settings, 1, no_cost=True)
    for J in args.segments_list or ([args.segments] if not args.no_cost else []):
        curves[f"{J}-seg"] = _curve(settings, J)
    reports = bt.backtest_models(prices, settings.battery, curves, settings.phi, scenario,
                                 horizon_hours=settings.horizon_hours,
                                 independent_days=args.independent_days, workers=args.workers)
    out = _out_dir(args)
    if out is not None:
        (out / "report.json").write_text(bt.reports_to_json(reports))
        (out / "report.txt").write_text(bt.format_report(reports))
        for name, rep in reports.items():
            bt.write_plot_data(rep, out / "plots", prefix=f"{name}_")
    _write_reports(reports, args.format)
    return EXIT_OK


def cmd_report(args) -> int:
    reports: dict[str, bt.BacktestReport] = {}
    for path in args.inputs:
        p = Path(path)
        if p.is_dir():
            p = p / "report.json"
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{p}: not a JSON report ({exc})") from None
        for name, rep in data.items():
            key = name if name not in reports else f"{p.parent.name}/{name}"
            reports[key] = bt.BacktestReport.from_dict(rep)
    _write_reports(reports, args.format)
    return EXIT_OK


def _write_reports(reports, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(bt.reports_to_json(reports))
    elif fmt == "csv":
        bt.write_report_csv(reports, sys.stdout)
    else:
        sys.stdout.write(bt.format_report(reports))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agingcost", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, segments=True, out=True, formats=("csv", "json")):
        if config:
            p.add_argument("--config", help="key = value settings file (default: built-in case-study pack)")
        if segments:
            p.add_argument("--segments", type=int, default=16, metavar="J", help="number of depth segments")
        if out:
            p.add_argument("--out", metavar="DIR", help="write files here instead of stdout")
        p.add_argument("--format", choices=formats, default=formats[0])

    def market(p):
        p.add_argument("--prices", metavar="FILE", help="price CSV, or synth:KIND for a generated series")
        p.add_argument("--days", type=int, default=1, help="length of a synthetic series")
        p.add_argument("--seed", type=int, default=0, help="seed for synthetic prices")
        p.add_argument("--no-cost", action="store_true", help="ignore aging in the optimizer")
        p.add_argument("--reserve", action="store_true", help="co-optimize reserve")
        p.add_argument("--relax-v", action="store_true", help="relax the mode binaries (falls back when needed)")
        p.add_argument("--sustainability", choices=("capacity", "stored"))

    p = sub.add_parser("linearize", help="piecewise-linear marginal aging cost")
    common(p)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("count", help="rainflow cycles of an SoC series")
    common(p, segments=False)
    p.add_argument("--soc", required=True, metavar="FILE", help="timestamp,soc_fraction CSV")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("simulate", help="segment-model aging cost of a dispatch")
    common(p)
    p.add_argument("--dispatch", required=True, metavar="FILE", help="timestamp,charge_mw,discharge_mw CSV")
    p.add_argument("--no-cost", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="optimal dispatch over one horizon")
    common(p)
    market(p)
    p.add_argument("--mps", metavar="FILE", help="also export the model in MPS format")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("validate", help="ex-post error against the rainflow benchmark")
    common(p, segments=False, out=False)
    p.add_argument("--trace", required=True, metavar="FILE", help="trace CSV or an optimize output directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("backtest", help="daily-horizon backtest with annual report")
    common(p, formats=("text", "csv", "json"))
    market(p)
    p.add_argument("--compare", dest="segments_list", type=int, nargs="+", metavar="J",
                   help="run one model per segment count")
    p.add_argument("--independent-days", action="store_true", help="start every day from E0")
    p.add_argument("--workers", type=int, default=1, help="processes for --independent-days")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("report", help="tabulate saved backtest reports")
    p.add_argument("inputs", nargs="+", metavar="REPORT", help="report.json files or backtest output dirs")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
