"""Fixed-format MPS export (and a matching reader for round trips).

Field layout (1-based columns): 2-3 type, 5-12 name, 15-22 name, 25-36 value,
40-47 name, 50-61 value.  Names are generated (``C0000001``, ``R0000001``) so
they always fit the 8-character fields; a comment block maps them back to the
model names.  The objective row is ``OBJ``.  Fixed MPS has no portable sense
marker, so the maximization is written as minimizing ``-c``; the reader also
accepts an ``OBJSENSE``/``MAX`` section.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError
from .problem import INF, LpProblem


def _num(v: float) -> str:
    for prec in range(12, 0, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    raise ValidationError(f"cannot fit {v} into a 12-character MPS field")


def _line(code: str, name1: str, name2: str = "", v1: float | None = None,
          name3: str = "", v2: float | None = None) -> str:
    buf = [" "] * 61
    for start, text in ((2, code), (5, name1), (15, name2), (40, name3)):
        buf[start - 1 : start - 1 + len(text)] = text
    for end, v in ((36, v1), (61, v2)):
        if v is not None:
            text = _num(v)
            buf[end - len(text) : end] = text
    return "".join(buf).rstrip()


def write_mps(problem: LpProblem, path: str | Path, name: str = "DISPATCH") -> None:
    """Write ``problem`` in fixed MPS format."""
    n, m = problem.n_vars, problem.n_rows
    cn = [f"C{j + 1:07d}" for j in range(n)]
    rn = [f"R{i + 1:07d}" for i in range(m)]
    lines: list[str] = []
    for j in range(n):
        lines.append(f"* {cn[j]} = {problem.var_names[j]}")
    for i in range(m):
        lines.append(f"* {rn[i]} = {problem.row_names[i]}")
    lines.append("* objective negated: minimize -c'x")
    lines.append(f"NAME          {name[:8]}")
    lines += ["ROWS", " N  OBJ"]

    kinds: list[str] = []
    rhs: list[float] = []
    ranges: list[float | None] = []
    for i in range(m):
        lo, hi = problem.row_lo[i], problem.row_hi[i]
        if lo == hi:
            kinds.append("E"); rhs.append(hi); ranges.append(None)
        elif np.isfinite(lo) and np.isfinite(hi):
            kinds.append("L"); rhs.append(hi); ranges.append(hi - lo)
        elif np.isfinite(hi):
            kinds.append("L"); rhs.append(hi); ranges.append(None)
        elif np.isfinite(lo):
            kinds.append("G"); rhs.append(lo); ranges.append(None)
        else:
            kinds.append("N"); rhs.append(0.0); ranges.append(None)
        lines.append(_line(kinds[i], rn[i]))

    lines.append("COLUMNS")
    A = sp.csc_matrix(problem.A)
    in_int = False
    marker = 0
    for j in range(n):
        if problem.binary[j] and not in_int:
            lines.append(_line("", f"M{marker:07d}", "'MARKER'", None, "'INTORG'"))
            marker += 1
            in_int = True
        elif not problem.binary[j] and in_int:
            lines.append(_line("", f"M{marker:07d}", "'MARKER'", None, "'INTEND'"))
            marker += 1
            in_int = False
        entries: list[tuple[str, float]] = []
        if problem.c[j] != 0:
            entries.append(("OBJ", -problem.c[j]))
        for p in range(A.indptr[j], A.indptr[j + 1]):
            entries.append((rn[A.indices[p]], A.data[p]))
        if not entries:
            entries.append(("OBJ", 0.0))
        for a in range(0, len(entries), 2):
            r1, v1 = entries[a]
            if a + 1 < len(entries):
                r2, v2 = entries[a + 1]
                lines.append(_line("", cn[j], r1, v1, r2, v2))
            else:
                lines.append(_line("", cn[j], r1, v1))
    if in_int:
        lines.append(_line("", f"M{marker:07d}", "'MARKER'", None, "'INTEND'"))

    lines.append("RHS")
    for i in range(m):
        if rhs[i] != 0 and kinds[i] != "N":
            lines.append(_line("", "RHS", rn[i], rhs[i]))
    if any(r is not None for r in ranges):
        lines.append("RANGES")
        for i in range(m):
            if ranges[i] is not None:
                lines.append(_line("", "RNG", rn[i], ranges[i]))

    lines.append("BOUNDS")
    for j in range(n):
        lo, hi = problem.lb[j], problem.ub[j]
        if problem.binary[j] and lo == 0 and hi == 1:
            lines.append(_line("BV", "BND", cn[j]))
            continue
        if lo == hi:
            lines.append(_line("FX", "BND", cn[j], lo))
            continue
        if lo == -INF and hi == INF:
            lines.append(_line("FR", "BND", cn[j]))
            continue
        if lo == -INF:
            lines.append(_line("MI", "BND", cn[j]))
        elif lo != 0:
            lines.append(_line("LO", "BND", cn[j], lo))
        if hi != INF:
            lines.append(_line("UP", "BND", cn[j], hi))
    lines.append("ENDATA")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mps(path: str | Path) -> LpProblem:
    """Read a fixed MPS file as written by :func:`write_mps`."""
    text = Path(path).read_text().splitlines()
    section = None
    sense_max = False
    row_kind: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    col_order: list[str] = []
    col_idx: dict[str, int] = {}
    entries: dict[tuple[str, str], float] = {}
    binary: dict[str, bool] = {}
    rhs: dict[str, float] = {}
    rng: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    integer = False

    def field(line: str, a: int, b: int) -> str:
        return line[a - 1 : b].strip()

    for line in text:
        if not line.strip() or line.startswith("*"):
            continue
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        if section == "OBJSENSE":
            sense_max = line.strip().upper() == "MAX"
        elif section == "ROWS":
            kind, name = field(line, 2, 3), field(line, 5, 12)
            if kind == "N" and obj_row is None:
                obj_row = name
            else:
                row_kind[name] = kind
                row_order.append(name)
        elif section == "COLUMNS":
            col = field(line, 5, 12)
            if field(line, 15, 22) == "'MARKER'":
                integer = field(line, 40, 47) == "'INTORG'"
                continue
            if col not in col_idx:
                col_idx[col] = len(col_order)
                col_order.append(col)
                binary[col] = integer
            for nf, vf in (((15, 22), (25, 36)), ((40, 47), (50, 61))):
                r = field(line, *nf)
                if r:
                    entries[(r, col)] = float(field(line, *vf))
        elif section == "RHS":
            for nf, vf in (((15, 22), (25, 36)), ((40, 47), (50, 61))):
                r = field(line, *nf)
                if r:
                    rhs[r] = float(field(line, *vf))
        elif section == "RANGES":
            for nf, vf in (((15, 22), (25, 36)), ((40, 47), (50, 61))):
                r = field(line, *nf)
                if r:
                    rng[r] = float(field(line, *vf))
        elif section == "BOUNDS":
            kind, col = field(line, 2, 3), field(line, 15, 22)
            val = field(line, 25, 36)
            b = bounds.setdefault(col, [0.0, INF])
            if kind == "UP":
                b[1] = float(val)
            elif kind == "LO":
                b[0] = float(val)
            elif kind == "FX":
                b[0] = b[1] = float(val)
            elif kind == "FR":
                b[0], b[1] = -INF, INF
            elif kind == "MI":
                b[0] = -INF
            elif kind == "BV":
                b[0], b[1] = 0.0, 1.0
                binary[col] = True

    n, m = len(col_order), len(row_order)
    rindex = {r: i for i, r in enumerate(row_order)}
    c = np.zeros(n)
    rows, cols, vals = [], [], []
    for (r, col), v in entries.items():
        if r == obj_row:
            c[col_idx[col]] = v
        else:
            rows.append(rindex[r]); cols.append(col_idx[col]); vals.append(v)
    if not sense_max:
        c = -c
    lo = np.full(m, -INF)
    hi = np.full(m, INF)
    for r, i in rindex.items():
        b = rhs.get(r, 0.0)
        k = row_kind[r]
        if k == "E":
            lo[i] = hi[i] = b
            if r in rng:
                if rng[r] >= 0:
                    hi[i] = b + rng[r]
                else:
                    lo[i] = b + rng[r]
        elif k == "L":
            hi[i] = b
            if r in rng:
                lo[i] = b - abs(rng[r])
        elif k == "G":
            lo[i] = b
            if r in rng:
                hi[i] = b + abs(rng[r])
    lb = np.zeros(n)
    ub = np.full(n, INF)
    is_bin = np.zeros(n, dtype=bool)
    for col, j in col_idx.items():
        if col in bounds:
            lb[j], ub[j] = bounds[col]
        if binary.get(col):
            is_bin[j] = True
            if col not in bounds:
                ub[j] = 1.0
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    return LpProblem(c, A, lo, hi, lb, ub, is_bin, list(col_order), list(row_order))
