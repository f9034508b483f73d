"""Rainflow cycle counting on state-of-charge profiles.

The counter is the four-point method: look at four consecutive extrema, and if
the middle range is no larger than either neighbour, record it as a full cycle,
delete the two middle points and start over from the beginning.  Whatever is
left (the residue) is split into half cycles.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .stress import StressFunction, eval_stress

FULL = "full"
DISCHARGE_HALF = "discharge_half"
CHARGE_HALF = "charge_half"


@dataclass(frozen=True)
class SocProfile:
    """Time-ordered SoC samples as fractions of rated energy."""

    samples: tuple[float, ...]
    interval: float = 1.0

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValidationError("SoC profile needs at least one sample")
        arr = np.asarray(self.samples, dtype=float)
        # allow float noise from segment arithmetic
        if np.any(~np.isfinite(arr)) or arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
            raise ValidationError("SoC samples must lie in [0, 1]")
        if not self.interval > 0:
            raise ValidationError("interval must be positive")

    @classmethod
    def of(cls, samples: Iterable[float], interval: float = 1.0) -> "SocProfile":
        return cls(tuple(float(s) for s in samples), interval)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class CycleSet:
    full_cycles: tuple[float, ...] = ()
    discharge_half_cycles: tuple[float, ...] = ()
    charge_half_cycles: tuple[float, ...] = ()

    @property
    def discharge_depths(self) -> tuple[float, ...]:
        """Depths of every discharge stage: full cycles and discharge halves."""
        return self.full_cycles + self.discharge_half_cycles

    def count_at_least(self, depth: float, tol: float = 0.0) -> int:
        """Number of discharge stages with depth >= ``depth`` (minus ``tol``)."""
        return sum(1 for d in self.discharge_depths if d >= depth - tol)

    def rows(self) -> list[tuple[str, float]]:
        return (
            [(FULL, d) for d in self.full_cycles]
            + [(DISCHARGE_HALF, d) for d in self.discharge_half_cycles]
            + [(CHARGE_HALF, d) for d in self.charge_half_cycles]
        )

    def __len__(self) -> int:
        return len(self.full_cycles) + len(self.discharge_half_cycles) + len(self.charge_half_cycles)


def _values(profile: SocProfile | Sequence[float]) -> list[float]:
    if isinstance(profile, SocProfile):
        return list(profile.samples)
    vals = [float(v) for v in profile]
    if not vals:
        raise ValidationError("SoC profile needs at least one sample")
    return vals


def extract_extrema(profile: SocProfile | Sequence[float]) -> list[float]:
    """Turning points of the profile, keeping the first and last sample.

    Runs of equal values are collapsed to one point first.
    """
    vals = _values(profile)
    collapsed = [vals[0]]
    for v in vals[1:]:
        if v != collapsed[-1]:
            collapsed.append(v)
    if len(collapsed) <= 2:
        return collapsed
    out = [collapsed[0]]
    for prev, cur, nxt in zip(collapsed, collapsed[1:], collapsed[2:]):
        if (cur - prev) * (nxt - cur) < 0:
            out.append(cur)
    out.append(collapsed[-1])
    return out


def count_cycles(profile: SocProfile | Sequence[float]) -> CycleSet:
    """Rainflow-count ``profile`` into full cycles and residue half cycles."""
    s = extract_extrema(profile)
    full: list[float] = []
    i = 0
    while i + 3 < len(s):
        d1 = abs(s[i] - s[i + 1])
        d2 = abs(s[i + 1] - s[i + 2])
        d3 = abs(s[i + 2] - s[i + 3])
        if d2 <= d1 and d2 <= d3:
            if d2 > 0:
                full.append(d2)
            del s[i + 1 : i + 3]
            i = 0
        else:
            i += 1
    dis: list[float] = []
    ch: list[float] = []
    for a, b in zip(s, s[1:]):
        if b < a:
            dis.append(a - b)
        elif b > a:
            ch.append(b - a)
    return CycleSet(tuple(full), tuple(dis), tuple(ch))


def benchmark_cost(cycles: CycleSet, phi: StressFunction, R: float) -> float:
    """Ex-post aging cost: ``R`` times the life lost to full and discharge-half cycles.

    Charge half cycles are free.
    """
    return R * math.fsum(eval_stress(phi, min(d, 1.0)) for d in cycles.discharge_depths)


def life_loss(cycles: CycleSet, phi: StressFunction) -> float:
    """Fraction of battery life consumed by ``cycles``."""
    return benchmark_cost(cycles, phi, 1.0)


def read_soc_csv(path: str | Path, interval: float | None = None) -> SocProfile:
    """Read a ``timestamp,soc_fraction`` CSV.

    The interval is taken from the timestamp spacing when they parse as
    ISO-8601, otherwise from ``interval`` (default 1 h).
    """
    from .market import parse_timestamp

    stamps: list[str] = []
    socs: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and row[0].strip().lower() in ("timestamp", "t", "time"):
                continue
            if len(row) < 2:
                raise ValidationError(f"{path}:{lineno}: expected 'timestamp,soc_fraction'")
            try:
                socs.append(float(row[1]))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad SoC value {row[1]!r}") from None
            stamps.append(row[0].strip())
    if interval is None:
        interval = 1.0
        if len(stamps) >= 2:
            try:
                t0, t1 = parse_timestamp(stamps[0]), parse_timestamp(stamps[1])
                interval = (t1 - t0).total_seconds() / 3600.0
            except ValidationError:
                pass
    return SocProfile.of(socs, interval)


def write_cycles_csv(cycles: CycleSet, path_or_file) -> None:
    """Write ``kind,depth`` rows."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "depth"])
        for kind, depth in cycles.rows():
            w.writerow([kind, repr(float(depth))])
    finally:
        if own:
            fh.close()
