"""Price series: CSV ingestion, settlement averaging and synthetic generators.

Synthetic generators (all deterministic):

``flat``
    every interval priced at ``level``.
``two_spike``
    ``low`` everywhere except intervals whose hour-of-day is in
    ``spike_hours``, which get ``high``.
``mean_reverting``
    discrete Ornstein-Uhlenbeck walk
    ``p[t+1] = p[t] + theta * (mean - p[t]) + sigma * z[t]``, ``z ~ N(0, 1)``
    from ``numpy.random.default_rng(seed)``, started at ``mean``.
``volatile``
    ``two_spike`` plus a zero-mean walk of the same form, floored at ``floor``
    so prices stay positive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_START = datetime(2015, 1, 1, tzinfo=timezone.utc)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive times are taken as UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(s)
    except ValueError:
        raise ValidationError(f"bad ISO-8601 timestamp {text!r}") from None
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class PriceSeries:
    """Uniformly spaced energy (and optionally reserve) prices in $/MWh."""

    timestamps: tuple[datetime, ...]
    energy: tuple[float, ...]
    reserve: tuple[float, ...] | None
    interval_minutes: int

    def __post_init__(self):
        n = len(self.timestamps)
        if n == 0:
            raise ValidationError("price series is empty")
        if len(self.energy) != n or (self.reserve is not None and len(self.reserve) != n):
            raise ValidationError("price columns differ in length")
        step = timedelta(minutes=self.interval_minutes)
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if b - a != step:
                raise ValidationError(f"non-uniform spacing between {format_timestamp(a)} and {format_timestamp(b)}")
        if any(not math.isfinite(p) for p in self.energy):
            raise ValidationError("energy prices must be finite")

    def __len__(self) -> int:
        return len(self.energy)

    @property
    def interval_hours(self) -> float:
        return self.interval_minutes / 60.0

    @property
    def energy_array(self) -> np.ndarray:
        return np.asarray(self.energy, dtype=float)

    @property
    def reserve_array(self) -> np.ndarray:
        if self.reserve is None:
            return np.zeros(len(self))
        return np.asarray(self.reserve, dtype=float)

    def window(self, start: int, stop: int) -> "PriceSeries":
        return PriceSeries(
            self.timestamps[start:stop],
            self.energy[start:stop],
            None if self.reserve is None else self.reserve[start:stop],
            self.interval_minutes,
        )

    @classmethod
    def from_arrays(
        cls,
        energy: Sequence[float],
        reserve: Sequence[float] | None = None,
        interval_minutes: int = 60,
        start: datetime = DEFAULT_START,
    ) -> "PriceSeries":
        step = timedelta(minutes=interval_minutes)
        stamps = tuple(start + i * step for i in range(len(energy)))
        return cls(
            stamps,
            tuple(float(p) for p in energy),
            None if reserve is None else tuple(float(p) for p in reserve),
            int(interval_minutes),
        )


def load_prices(path: str | Path) -> PriceSeries:
    """Load ``timestamp,energy_price[,reserve_price]`` rows.

    The native interval is the most common timestamp spacing; gaps are
    reported by listing the missing stamps.
    """
    stamps: list[datetime] = []
    energy: list[float] = []
    reserve: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if header[:2] != ["timestamp", "energy_price"] or header[2:] not in ([], ["reserve_price"]):
            raise ValidationError(f"{path}:1: header must be timestamp,energy_price[,reserve_price]")
        has_reserve = len(header) == 3
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[0])
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            try:
                e = float(row[1])
                r = float(row[2]) if has_reserve else 0.0
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric price") from None
            if not math.isfinite(e):
                raise ValidationError(f"{path}:{lineno}: missing energy price")
            stamps.append(ts)
            energy.append(e)
            reserve.append(r)
    if not stamps:
        raise ValidationError(f"{path}: no price rows")
    interval = _native_interval(stamps, path)
    return PriceSeries(tuple(stamps), tuple(energy), tuple(reserve) if has_reserve else None, interval)


def _native_interval(stamps: list[datetime], path) -> int:
    if len(stamps) == 1:
        return 60
    diffs = [(b - a).total_seconds() for a, b in zip(stamps, stamps[1:])]
    if any(d <= 0 for d in diffs):
        i = next(i for i, d in enumerate(diffs) if d <= 0)
        raise ValidationError(f"{path}: timestamps not strictly increasing at {format_timestamp(stamps[i + 1])}")
    values, counts = np.unique(diffs, return_counts=True)
    step = float(values[np.argmax(counts)])
    if step % 60 != 0:
        raise ValidationError(f"{path}: interval of {step} s is not a whole number of minutes")
    missing: list[str] = []
    for a, d in zip(stamps, diffs):
        if d == step:
            continue
        if d % step != 0:
            raise ValidationError(f"{path}: non-uniform spacing after {format_timestamp(a)}")
        for k in range(1, int(d // step)):
            missing.append(format_timestamp(a + timedelta(seconds=k * step)))
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise ValidationError(f"{path}: {len(missing)} missing timestamps: {shown}")
    return int(step // 60)


def save_prices(series: PriceSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "energy_price"] + (["reserve_price"] if series.reserve is not None else []))
        for i, ts in enumerate(series.timestamps):
            row = [format_timestamp(ts), repr(series.energy[i])]
            if series.reserve is not None:
                row.append(repr(series.reserve[i]))
            w.writerow(row)


def aggregate_settlement(series: PriceSeries, settlement_minutes: int) -> PriceSeries:
    """Average prices over settlement windows; stamps mark window starts."""
    if settlement_minutes <= 0 or settlement_minutes % series.interval_minutes != 0:
        raise ValidationError(
            f"settlement window {settlement_minutes} min is not a multiple of {series.interval_minutes} min"
        )
    k = settlement_minutes // series.interval_minutes
    if len(series) % k != 0:
        raise ValidationError(f"series of {len(series)} intervals does not split into windows of {k}")

    def avg(values):
        return tuple(math.fsum(values[i : i + k]) / k for i in range(0, len(values), k))

    return PriceSeries(
        series.timestamps[::k],
        avg(series.energy),
        None if series.reserve is None else avg(series.reserve),
        settlement_minutes,
    )


def synth_prices(
    kind: str,
    T: int,
    *,
    interval_minutes: int = 60,
    start: datetime = DEFAULT_START,
    level: float = 30.0,
    low: float = 10.0,
    high: float = 100.0,
    spike_hours: Sequence[int] = (8, 18),
    mean: float = 40.0,
    theta: float = 0.3,
    sigma: float = 8.0,
    seed: int = 0,
    floor: float = 1.0,
    reserve: Sequence[float] | None = None,
) -> PriceSeries:
    """Deterministic synthetic price series (see module docstring)."""
    if T < 1:
        raise ValidationError("T must be at least 1")
    if interval_minutes <= 0:
        raise ValidationError("interval must be positive")
    if kind == "flat":
        prices = np.full(T, float(level))
    elif kind == "two_spike":
        if high < low:
            raise ValidationError("two_spike needs high >= low")
        hours = set(int(h) for h in spike_hours)
        if any(h < 0 or h > 23 for h in hours):
            raise ValidationError("spike hours must lie in 0..23")
        step = timedelta(minutes=interval_minutes)
        prices = np.array([high if (start + i * step).hour in hours else low for i in range(T)], dtype=float)
    elif kind == "mean_reverting":
        prices = _ou_path(T, mean, theta, sigma, seed)
    elif kind == "volatile":
        spikes = synth_prices("two_spike", T, interval_minutes=interval_minutes, start=start,
                              low=low, high=high, spike_hours=spike_hours).energy_array
        prices = np.maximum(spikes + _ou_path(T, 0.0, theta, sigma, seed), floor)
    else:
        raise ValidationError(f"unknown synthetic price kind {kind!r}")
    return PriceSeries.from_arrays(prices, reserve, interval_minutes, start)


def _ou_path(T: int, mean: float, theta: float, sigma: float, seed: int) -> np.ndarray:
    if not 0 < theta <= 1 or sigma < 0:
        raise ValidationError("mean reversion needs 0 < theta <= 1 and sigma >= 0")
    z = np.random.default_rng(seed).standard_normal(T)
    out = np.empty(T)
    p = float(mean)
    for i in range(T):
        out[i] = p
        p = p + theta * (mean - p) + sigma * z[i]
    return out


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Keys are lower-cased."""
    cfg: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            cfg[key.strip().lower()] = value.strip()
    return cfg
