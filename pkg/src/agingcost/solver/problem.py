"""Problem and solution containers for the LP/MILP engine."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError

INF = float("inf")


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NODE_LIMIT = "node_limit"


@dataclass
class LpProblem:
    """``maximize c @ x`` subject to ``row_lo <= A @ x <= row_hi`` and ``lb <= x <= ub``.

    Equality rows have ``row_lo == row_hi``; one-sided rows use ``-inf`` / ``inf``.
    Variables flagged in ``binary`` must end up at 0 or 1.
    """

    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    var_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.row_lo = np.asarray(self.row_lo, dtype=float)
        self.row_hi = np.asarray(self.row_hi, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.binary = np.asarray(self.binary, dtype=bool)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.lb.shape != (n,) or self.ub.shape != (n,) or self.binary.shape != (n,):
            raise ValidationError("variable arrays do not match the constraint matrix width")
        if self.row_lo.shape != (m,) or self.row_hi.shape != (m,):
            raise ValidationError("row bounds do not match the constraint matrix height")
        if not np.all(np.isfinite(self.A.data)) or not np.all(np.isfinite(self.c)):
            raise ValidationError("constraint and objective coefficients must be finite")
        if np.any(self.lb > self.ub) or np.any(self.row_lo > self.row_hi):
            raise ValidationError("a lower bound exceeds its upper bound")
        if np.any(self.lb[self.binary] < 0) or np.any(self.ub[self.binary] > 1):
            raise ValidationError("binary variables must have bounds within [0, 1]")
        if not self.var_names:
            self.var_names = [f"x{i}" for i in range(n)]
        if not self.row_names:
            self.row_names = [f"r{i}" for i in range(m)]

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_binary(self) -> int:
        return int(self.binary.sum())

    def relaxed(self) -> "LpProblem":
        """Copy with every binary treated as continuous on its bounds."""
        return LpProblem(self.c, self.A, self.row_lo, self.row_hi, self.lb, self.ub,
                         np.zeros_like(self.binary), self.var_names, self.row_names)

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LpProblem":
        return LpProblem(self.c, self.A, self.row_lo, self.row_hi, lb, ub,
                         self.binary, self.var_names, self.row_names)

    def violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation at ``x``."""
        ax = self.A @ x
        parts = [
            np.max(self.lb - x, initial=0.0),
            np.max(x - self.ub, initial=0.0),
            np.max(self.row_lo - ax, initial=0.0),
            np.max(ax - self.row_hi, initial=0.0),
        ]
        return float(max(parts))


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0
    bound: float = float("nan")
    gap: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class ModelBuilder:
    """Incremental construction of an :class:`LpProblem` by name."""

    def __init__(self):
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._bin: list[bool] = []
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._rows_i: list[int] = []
        self._rows_j: list[int] = []
        self._rows_v: list[float] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._row_names: list[str] = []

    def var(self, name: str, lb: float = 0.0, ub: float = INF, obj: float = 0.0, binary: bool = False) -> int:
        if name in self._index:
            raise ValidationError(f"duplicate variable {name!r}")
        idx = len(self._c)
        self._index[name] = idx
        self._names.append(name)
        self._c.append(float(obj))
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._bin.append(bool(binary))
        return idx

    def __getitem__(self, name: str) -> int:
        return self._index[name]

    def add_obj(self, idx: int, coef: float) -> None:
        self._c[idx] += float(coef)

    def row(self, coeffs: dict[int, float], lo: float = -INF, hi: float = INF, name: str | None = None) -> int:
        r = len(self._lo)
        for j, v in coeffs.items():
            if v != 0.0:
                self._rows_i.append(r)
                self._rows_j.append(j)
                self._rows_v.append(float(v))
        self._lo.append(float(lo))
        self._hi.append(float(hi))
        self._row_names.append(name or f"r{r}")
        return r

    @property
    def n_rows(self) -> int:
        return len(self._lo)

    def build(self) -> LpProblem:
        m, n = len(self._lo), len(self._c)
        A = sp.csr_matrix((self._rows_v, (self._rows_i, self._rows_j)), shape=(m, n))
        A.sum_duplicates()
        return LpProblem(np.array(self._c), A, np.array(self._lo), np.array(self._hi),
                         np.array(self._lb), np.array(self._ub), np.array(self._bin, dtype=bool),
                         list(self._names), list(self._row_names))
