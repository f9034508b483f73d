"""Cycle-depth stress functions and their piecewise-linear marginal cost curves.

A stress function maps the depth of one charge/discharge cycle (fraction of
rated energy) to the fraction of battery life it consumes.  Splitting the
depth range into ``J`` equal segments and prorating the cell replacement cost
over each segment gives a convex, piecewise-constant marginal cost per MWh
discharged, which is what a market offer or a dispatch LP can consume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, NonConvexStressError, ValidationError

POWER_LAW = "power_law"
TABULATED = "tabulated"

_CONVEX_TOL = 1e-12


@dataclass(frozen=True)
class StressFunction:
    """Life loss per cycle as a function of cycle depth.

    Use :meth:`power_law` or :meth:`tabulated` rather than the raw constructor.
    """

    form: str
    k: float = 0.0
    alpha: float = 0.0
    depths: tuple[float, ...] = ()
    losses: tuple[float, ...] = ()
    convex: bool = field(default=True, compare=False)

    @classmethod
    def power_law(cls, k: float, alpha: float, *, require_convex: bool = True) -> "StressFunction":
        k = float(k)
        alpha = float(alpha)
        if not (k > 0 and math.isfinite(k)):
            raise ValidationError(f"power-law coefficient k must be positive, got {k}")
        if not (alpha > 0 and math.isfinite(alpha)):
            raise ValidationError(f"power-law exponent alpha must be positive, got {alpha}")
        convex = alpha >= 1.0
        if require_convex and not convex:
            raise NonConvexStressError(f"alpha={alpha} < 1 gives a concave stress function")
        return cls(POWER_LAW, k=k, alpha=alpha, convex=convex)

    @classmethod
    def tabulated(
        cls, breakpoints: Sequence[tuple[float, float]], *, require_convex: bool = True
    ) -> "StressFunction":
        """Piecewise-linear stress function through ``(depth, loss)`` breakpoints.

        The table must start at ``(0, 0)`` and end at depth 1.
        """
        if len(breakpoints) < 2:
            raise ValidationError("a tabulated stress function needs at least two breakpoints")
        depths = np.array([float(b[0]) for b in breakpoints])
        losses = np.array([float(b[1]) for b in breakpoints])
        if not (np.all(np.isfinite(depths)) and np.all(np.isfinite(losses))):
            raise ValidationError("breakpoints must be finite")
        if depths[0] != 0.0 or losses[0] != 0.0:
            raise ValidationError("first breakpoint must be (0, 0)")
        if depths[-1] != 1.0:
            raise ValidationError("last breakpoint must be at depth 1")
        if np.any(np.diff(depths) <= 0):
            raise ValidationError("breakpoint depths must be strictly increasing")
        if np.any(np.diff(losses) < 0):
            raise ValidationError("breakpoint losses must be non-decreasing")
        slopes = np.diff(losses) / np.diff(depths)
        scale = max(1.0, float(np.max(np.abs(slopes))))
        convex = bool(np.all(np.diff(slopes) >= -_CONVEX_TOL * scale))
        if require_convex and not convex:
            raise NonConvexStressError("breakpoint chord slopes decrease; stress function is not convex")
        return cls(TABULATED, depths=tuple(depths), losses=tuple(losses), convex=convex)

    def __call__(self, delta: float) -> float:
        return eval_stress(self, delta)


def eval_stress(phi: StressFunction, delta: float) -> float:
    """Life-loss fraction caused by one cycle of depth ``delta``."""
    delta = float(delta)
    if not (0.0 <= delta <= 1.0):
        raise DomainError(f"cycle depth must lie in [0, 1], got {delta}")
    if phi.form == POWER_LAW:
        return phi.k * delta**phi.alpha if delta > 0 else 0.0
    if phi.form == TABULATED:
        return float(np.interp(delta, phi.depths, phi.losses))
    raise ValidationError(f"unknown stress form {phi.form!r}")


@dataclass(frozen=True)
class SegmentCostCurve:
    """``J`` equal-width depth segments, each with a marginal cost in $/MWh discharged."""

    c: tuple[float, ...]
    e_bar: tuple[float, ...]
    R: float
    eta_dis: float
    E_rate: float

    @property
    def J(self) -> int:
        return len(self.c)

    @property
    def costs(self) -> np.ndarray:
        return np.asarray(self.c, dtype=float)

    @property
    def capacities(self) -> np.ndarray:
        return np.asarray(self.e_bar, dtype=float)

    @classmethod
    def zero_cost(cls, J: int, E_rate: float, eta_dis: float = 1.0) -> "SegmentCostCurve":
        """Curve with all marginal costs zero (dispatch that ignores aging)."""
        return cls(c=(0.0,) * J, e_bar=_segment_capacities(J, E_rate), R=0.0, eta_dis=eta_dis, E_rate=E_rate)


def _segment_capacities(J: int, E_rate: float) -> tuple[float, ...]:
    caps = [E_rate / J] * J
    # absorb rounding so the capacities sum to E_rate exactly
    caps[-1] = E_rate - math.fsum(caps[:-1])
    return tuple(caps)


def linearize(phi: StressFunction, J: int, R: float, eta_dis: float, E_rate: float) -> SegmentCostCurve:
    """Build the segment cost curve for ``phi`` with ``J`` equal depth segments.

    ``c_j = R / (eta_dis * E_rate) * J * (phi(j/J) - phi((j-1)/J))`` and every
    segment holds ``E_rate / J`` MWh.
    """
    if int(J) != J or J < 1:
        raise ValidationError(f"segment count must be a positive integer, got {J}")
    J = int(J)
    if not R > 0:
        raise ValidationError(f"replacement cost R must be positive, got {R}")
    if not 0 < eta_dis <= 1:
        raise ValidationError(f"discharge efficiency must lie in (0, 1], got {eta_dis}")
    if not E_rate > 0:
        raise ValidationError(f"energy rating must be positive, got {E_rate}")
    if not phi.convex:
        raise NonConvexStressError("cannot linearize a non-convex stress function")

    losses = [eval_stress(phi, j / J) for j in range(J + 1)]
    scale = R / (eta_dis * E_rate) * J
    c = [scale * (losses[j] - losses[j - 1]) for j in range(1, J + 1)]
    for j in range(1, J):
        if c[j] < c[j - 1] * (1 - 1e-12) - 1e-300:
            raise NonConvexStressError(f"segment costs decrease between segments {j} and {j + 1}")
    # remove rounding dips so the ordering holds exactly
    c = np.maximum.accumulate(c)
    return SegmentCostCurve(c=tuple(float(x) for x in c), e_bar=_segment_capacities(J, E_rate), R=float(R), eta_dis=float(eta_dis), E_rate=float(E_rate))


def marginal_cost_at_depth(curve: SegmentCostCurve, delta: float) -> float:
    """Marginal cost of the segment containing ``delta``.

    Segments are half-open ``[(j-1)/J, j/J)``; depth 1 belongs to the last one.
    """
    delta = float(delta)
    if not (0.0 <= delta <= 1.0):
        raise DomainError(f"cycle depth must lie in [0, 1], got {delta}")
    J = curve.J
    j = min(int(math.floor(delta * J)), J - 1)
    return curve.c[j]


def load_stress(path: str | Path) -> StressFunction:
    """Read a stress function from a key=value config or a two-column breakpoint CSV.

    Config form::

        form = power_law
        k = 5.24e-4
        alpha = 2.03

    ``form = tabulated`` with ``breakpoints = table.csv`` (relative to the config)
    is also accepted.  A file ending in ``.csv`` is read directly as breakpoints.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return StressFunction.tabulated(_read_breakpoints(path))
    from .market import read_config

    return stress_from_config(read_config(path), base_dir=path.parent)


def stress_from_config(cfg: dict[str, str], base_dir: Path | None = None) -> StressFunction:
    form = cfg.get("form", POWER_LAW).strip().lower()
    if form == POWER_LAW:
        try:
            return StressFunction.power_law(float(cfg["k"]), float(cfg["alpha"]))
        except KeyError as exc:
            raise ValidationError(f"power_law stress config is missing {exc.args[0]!r}") from None
    if form == TABULATED:
        if "breakpoints" not in cfg:
            raise ValidationError("tabulated stress config needs a 'breakpoints' CSV path")
        bp = Path(cfg["breakpoints"])
        if not bp.is_absolute() and base_dir is not None:
            bp = base_dir / bp
        return StressFunction.tabulated(_read_breakpoints(bp))
    raise ValidationError(f"unknown stress form {form!r}")


def _read_breakpoints(path: Path) -> list[tuple[float, float]]:
    rows: list[tuple[float, float]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise ValidationError(f"{path}:{lineno}: expected 'depth,loss'") from None
    return rows
