"""Shallowest-segment-first simulation of the piecewise-linear aging model.

Given a fixed charge/discharge schedule, the cheapest way to assign energy to
depth segments of a convex cost curve is greedy: charge fills the shallowest
segment that still has headroom, discharge drains the shallowest segment that
still holds energy.  Replaying a schedule this way gives the aging cost the
dispatch model would charge for it, plus the per-segment throughput that ties
the model back to rainflow counts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, ValidationError
from .rainflow import SocProfile
from .stress import SegmentCostCurve

# Residual power / energy below this (relative to rating) is float noise.
_TOL = 1e-9


@dataclass(frozen=True)
class DispatchProfile:
    """Charge power ``d`` and discharge power ``g`` per interval, in MW."""

    d: tuple[float, ...]
    g: tuple[float, ...]
    M: float
    e0: float

    def __post_init__(self):
        if len(self.d) != len(self.g):
            raise ValidationError("charge and discharge series differ in length")
        if not self.M > 0:
            raise ValidationError("interval duration M must be positive")
        for t, (dt, gt) in enumerate(zip(self.d, self.g), start=1):
            if dt < 0 or gt < 0:
                raise ValidationError(f"interval {t}: powers must be non-negative")
            if dt > 0 and gt > 0:
                raise ValidationError(f"interval {t}: simultaneous charge and discharge")

    @classmethod
    def of(cls, d: Sequence[float], g: Sequence[float], M: float, e0: float) -> "DispatchProfile":
        return cls(tuple(float(x) for x in d), tuple(float(x) for x in g), float(M), float(e0))

    @classmethod
    def from_soc(cls, soc: Sequence[float], E_rate: float, M: float = 1.0,
                 eta_ch: float = 1.0, eta_dis: float = 1.0) -> "DispatchProfile":
        """Schedule that moves stored energy through the SoC fractions ``soc``."""
        soc = [float(s) for s in soc]
        d, g = [], []
        for a, b in zip(soc, soc[1:]):
            delta = (b - a) * E_rate
            d.append(delta / (eta_ch * M) if delta > 0 else 0.0)
            g.append(-delta * eta_dis / M if delta < 0 else 0.0)
        return cls.of(d, g, M, soc[0] * E_rate)

    @property
    def T(self) -> int:
        return len(self.d)


@dataclass
class SegmentTrace:
    """Result of replaying a schedule.

    ``energies`` has ``T + 1`` rows: the initial state followed by the state
    after each interval.
    """

    energies: np.ndarray
    p_ch: np.ndarray
    p_dis: np.ndarray
    interval_costs: np.ndarray
    M: float

    @property
    def cost(self) -> float:
        return math.fsum(self.interval_costs)

    @property
    def T(self) -> int:
        return self.p_dis.shape[0]


def init_segments(e0: float, curve: SegmentCostCurve) -> np.ndarray:
    """Spread initial energy ``e0`` over segments, shallowest first."""
    e_bar = curve.capacities
    total = float(np.sum(e_bar))
    if e0 < -_TOL * total or e0 > total * (1 + _TOL):
        raise ValidationError(f"initial energy {e0} outside [0, {total}]")
    e = np.zeros(curve.J)
    assigned = 0.0
    for j in range(curve.J):
        e[j] = min(e_bar[j], max(0.0, e0 - assigned))
        assigned += e[j]
    return e


def step(
    state: np.ndarray,
    d_t: float,
    g_t: float,
    curve: SegmentCostCurve,
    eta_ch: float,
    eta_dis: float,
    M: float,
    t: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance one interval; returns ``(new_state, p_ch, p_dis)`` per segment."""
    label = f"interval {t}" if t is not None else "step"
    if d_t < 0 or g_t < 0:
        raise ValidationError(f"{label}: powers must be non-negative")
    if d_t > 0 and g_t > 0:
        raise ValidationError(f"{label}: simultaneous charge and discharge")
    e_bar = curve.capacities
    J = curve.J
    e = np.array(state, dtype=float)
    p_ch = np.zeros(J)
    p_dis = np.zeros(J)
    scale = max(1.0, d_t, g_t)

    if d_t > 0:
        remaining = d_t
        for j in range(J):
            if remaining <= 0:
                break
            p = min(remaining, (e_bar[j] - e[j]) / (eta_ch * M))
            if p > 0:
                p_ch[j] = p
                remaining -= p
        if remaining > _TOL * scale:
            raise InfeasibleError(f"{label}: {remaining:.6g} MW of charge exceeds segment headroom")
    elif g_t > 0:
        remaining = g_t
        for j in range(J):
            if remaining <= 0:
                break
            p = min(remaining, eta_dis * e[j] / M)
            if p > 0:
                p_dis[j] = p
                remaining -= p
        if remaining > _TOL * scale:
            raise InfeasibleError(f"{label}: {remaining:.6g} MW of discharge exceeds stored energy")

    e = e + M * (p_ch * eta_ch - p_dis / eta_dis)
    # clip float noise at the segment bounds
    np.clip(e, 0.0, e_bar, out=e)
    return e, p_ch, p_dis


def simulate(
    profile: DispatchProfile,
    curve: SegmentCostCurve,
    eta_ch: float = 1.0,
    eta_dis: float = 1.0,
) -> SegmentTrace:
    """Replay ``profile`` with the greedy policy and price the discharge."""
    T, J, M = profile.T, curve.J, profile.M
    c = curve.costs
    energies = np.zeros((T + 1, J))
    p_ch = np.zeros((T, J))
    p_dis = np.zeros((T, J))
    costs = np.zeros(T)
    energies[0] = init_segments(profile.e0, curve)
    for t in range(T):
        energies[t + 1], p_ch[t], p_dis[t] = step(
            energies[t], profile.d[t], profile.g[t], curve, eta_ch, eta_dis, M, t=t + 1
        )
        costs[t] = math.fsum(M * c * p_dis[t])
    return SegmentTrace(energies, p_ch, p_dis, costs, M)


def soc_series(trace: SegmentTrace, E_rate: float) -> SocProfile:
    """SoC fraction after each interval, preceded by the initial SoC."""
    soc = trace.energies.sum(axis=1) / E_rate
    return SocProfile.of(np.clip(soc, 0.0, 1.0), trace.M)


def segment_throughput(trace: SegmentTrace) -> np.ndarray:
    """Discharge power integrated over time for each segment (MWh, grid side)."""
    return trace.M * trace.p_dis.sum(axis=0)


def read_dispatch_csv(path: str | Path, M: float | None, e0: float) -> DispatchProfile:
    """Read ``timestamp,charge_mw,discharge_mw`` rows.

    ``M`` defaults to the timestamp spacing (or 1 h when timestamps are not
    ISO-8601).
    """
    from .market import parse_timestamp

    stamps, d, g = [], [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and row[0].strip().lower() in ("timestamp", "t", "time"):
                continue
            try:
                d.append(float(row[1]))
                g.append(float(row[2]))
            except (ValueError, IndexError):
                raise ValidationError(f"{path}:{lineno}: expected 'timestamp,charge_mw,discharge_mw'") from None
            stamps.append(row[0].strip())
    if M is None:
        M = 1.0
        if len(stamps) >= 2:
            try:
                M = (parse_timestamp(stamps[1]) - parse_timestamp(stamps[0])).total_seconds() / 3600.0
            except ValidationError:
                pass
    return DispatchProfile.of(d, g, M, e0)


def write_trace_csv(trace: SegmentTrace, E_rate: float, path_or_file) -> None:
    """Write ``t,soc,e_1..e_J,interval_cost``; row ``t=0`` is the initial state."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        J = trace.energies.shape[1]
        w.writerow(["t", "soc"] + [f"e_{j + 1}" for j in range(J)] + ["interval_cost"])
        soc = soc_series(trace, E_rate).samples
        for t in range(trace.energies.shape[0]):
            cost = trace.interval_costs[t - 1] if t > 0 else 0.0
            w.writerow([t, repr(soc[t])] + [repr(float(x)) for x in trace.energies[t]] + [repr(float(cost))])
    finally:
        if own:
            fh.close()


def read_trace_csv(path: str | Path) -> tuple[list[float], list[float]]:
    """Return ``(soc, interval_costs)`` from a trace CSV written by :func:`write_trace_csv`."""
    soc: list[float] = []
    costs: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "soc" not in reader.fieldnames or "interval_cost" not in reader.fieldnames:
            raise ValidationError(f"{path}: not a trace CSV (needs soc and interval_cost columns)")
        for lineno, row in enumerate(reader, start=2):
            try:
                soc.append(float(row["soc"]))
                if int(row["t"]) > 0:
                    costs.append(float(row["interval_cost"]))
            except (ValueError, TypeError):
                raise ValidationError(f"{path}:{lineno}: malformed trace row") from None
    return soc, costs
