"""Bounded-variable primal simplex.

Every row ``lo <= a @ x <= hi`` gets a logical variable ``r = a @ x`` carrying
the row bounds, so the working system is ``[A | -I] (x, r) = 0`` with bounds on
all columns and the all-logical basis as a free starting point.  Phase 1
minimizes the sum of bound violations of basic variables (costs are rebuilt
every iteration); phase 2 minimizes ``-c @ x``.

The basis inverse is kept dense and updated with rank-one eta steps, then
refactorized periodically.  Pricing is Dantzig's rule with a Harris two-pass
ratio test; after a run of degenerate pivots the solver switches to Bland's
rule until the objective moves again.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .problem import LpProblem, LpSolution, Status

FEAS_TOL = 1e-7
OPT_TOL = 1e-7

_AT_LOWER, _AT_UPPER, _FREE, _FIXED, _BASIC = 0, 1, 2, 3, -1

_PRICE_TOL = 1e-9
_BOUND_TOL = 1e-9
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 100
_STALL_LIMIT = 50


class _Simplex:
    def __init__(self, problem: LpProblem, max_iter: int | None):
        A = problem.A
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.A_csc = sp.csc_matrix(A)
        self.At = sp.csr_matrix(A.T)
        self.N = n + m
        self.lo = np.concatenate([problem.lb, problem.row_lo])
        self.hi = np.concatenate([problem.ub, problem.row_hi])
        self.cost2 = np.concatenate([-problem.c, np.zeros(m)])
        self.max_iter = max_iter if max_iter is not None else 50 * (n + m)

        self.state = np.empty(self.N, dtype=np.int8)
        self.x = np.zeros(self.N)
        for k in range(n):
            lo, hi = self.lo[k], self.hi[k]
            if lo == hi:
                self.state[k], self.x[k] = _FIXED, lo
            elif np.isfinite(lo):
                self.state[k], self.x[k] = _AT_LOWER, lo
            elif np.isfinite(hi):
                self.state[k], self.x[k] = _AT_UPPER, hi
            else:
                self.state[k], self.x[k] = _FREE, 0.0
        self.state[n:] = _BASIC
        self.basis = np.arange(n, n + m)
        self.Binv = -np.eye(m)
        self.x[n:] = A @ self.x[:n]
        self.iterations = 0

    # -- linear algebra ---------------------------------------------------
    def column_ftran(self, k: int) -> np.ndarray:
        if k < self.n:
            start, stop = self.A_csc.indptr[k], self.A_csc.indptr[k + 1]
            rows = self.A_csc.indices[start:stop]
            vals = self.A_csc.data[start:stop]
            return self.Binv[:, rows] @ vals
        return -self.Binv[:, k - self.n]

    def refactor(self):
        m, n = self.m, self.n
        B = np.zeros((m, m))
        struct = self.basis < n
        if struct.any():
            B[:, struct] = self.A_csc[:, self.basis[struct]].toarray()
        pos = np.flatnonzero(~struct)
        B[self.basis[pos] - n, pos] = -1.0
        self.Binv = scipy.linalg.inv(B, check_finite=False)
        xn = self.x.copy()
        xn[self.basis] = 0.0
        rhs = self.A_csc @ xn[:n] - xn[n:]
        self.x[self.basis] = -self.Binv @ rhs

    def reduced_costs(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = np.empty(self.N)
        d[: self.n] = cost[: self.n] - self.At @ y
        d[self.n :] = cost[self.n :] + y
        return d

    # -- main loop --------------------------------------------------------
    def infeasibility_costs(self) -> tuple[np.ndarray, float]:
        xb = self.x[self.basis]
        lo = self.lo[self.basis]
        hi = self.hi[self.basis]
        below = xb < lo - _BOUND_TOL
        above = xb > hi + _BOUND_TOL
        cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
        total = float(np.sum((lo - xb)[below]) + np.sum((xb - hi)[above]))
        return cb, total

    def run(self) -> Status:
        bland = False
        stall = 0
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                return Status.ITERATION_LIMIT
            cb, infeas = self.infeasibility_costs()
            phase1 = infeas > 0.0
            if phase1:
                cost = np.zeros(self.N)
                cost[self.basis] = cb
            else:
                cost = self.cost2
            y = cost[self.basis] @ self.Binv
            d = self.reduced_costs(cost, y)

            st = self.state
            inc = ((st == _AT_LOWER) | (st == _FREE)) & (d < -_PRICE_TOL)
            dec = ((st == _AT_UPPER) | (st == _FREE)) & (d > _PRICE_TOL)
            eligible = np.flatnonzero(inc | dec)
            if eligible.size == 0:
                if phase1:
                    return Status.INFEASIBLE
                self.y = y
                self.d = d
                return Status.OPTIMAL
            if bland:
                q = int(eligible[0])
            else:
                q = int(eligible[np.argmax(np.abs(d[eligible]))])
            sigma = 1.0 if d[q] < 0 else -1.0

            alpha = self.column_ftran(q)
            delta = -sigma * alpha
            r, theta = self.ratio_test(delta, bland)
            rng = self.hi[q] - self.lo[q]

            if r < 0 and not np.isfinite(rng):
                if phase1:
                    # cannot happen with a consistent basis; refactor and retry
                    self.refactor()
                    since_refactor = 0
                    self.iterations += 1
                    continue
                return Status.UNBOUNDED

            self.iterations += 1
            if r < 0 or rng <= theta:
                # bound flip of the entering variable
                step = rng
                self.x[self.basis] += delta * step
                if st[q] == _AT_LOWER:
                    self.x[q], st[q] = self.hi[q], _AT_UPPER
                else:
                    self.x[q], st[q] = self.lo[q], _AT_LOWER
            else:
                step = theta
                leave = int(self.basis[r])
                target = self._target_bound(r, delta[r])
                self.x[self.basis] += delta * step
                self.x[q] += sigma * step
                self.x[leave] = target
                if self.lo[leave] == self.hi[leave]:
                    st[leave] = _FIXED
                elif target == self.lo[leave]:
                    st[leave] = _AT_LOWER
                else:
                    st[leave] = _AT_UPPER
                st[q] = _BASIC
                self.basis[r] = q
                piv = alpha[r]
                row = self.Binv[r] / piv
                cols = np.flatnonzero(row)
                rows = np.flatnonzero(alpha)
                if cols.size * 4 < self.m:
                    self.Binv[np.ix_(rows, cols)] -= np.outer(alpha[rows], row[cols])
                else:
                    self.Binv[rows] -= np.outer(alpha[rows], row)
                self.Binv[r] = row
                since_refactor += 1
                if since_refactor >= _REFACTOR_EVERY:
                    self.refactor()
                    since_refactor = 0

            if step <= 1e-12:
                stall += 1
                if stall > _STALL_LIMIT:
                    bland = True
            else:
                stall = 0
                bland = False

    def _target_bound(self, r: int, delta_r: float) -> float:
        k = self.basis[r]
        xi, lo, hi = self.x[k], self.lo[k], self.hi[k]
        if delta_r < 0:
            return hi if xi > hi + _BOUND_TOL else lo
        return lo if xi < lo - _BOUND_TOL else hi

    def ratio_test(self, delta: np.ndarray, bland: bool) -> tuple[int, float]:
        """Return ``(position, step)``; position -1 means nothing blocks."""
        xb = self.x[self.basis]
        lo = self.lo[self.basis]
        hi = self.hi[self.basis]
        down = delta < -_PIVOT_TOL
        up = delta > _PIVOT_TOL

        below = xb < lo - _BOUND_TOL
        above = xb > hi + _BOUND_TOL
        # distance to the blocking bound along the move direction
        dist = np.full(self.m, np.inf)
        dn = down & ~below
        dist[dn] = np.where(above[dn], xb[dn] - hi[dn], xb[dn] - lo[dn])
        upm = up & ~above
        dist[upm] = np.where(below[upm], lo[upm] - xb[upm], hi[upm] - xb[upm])
        absd = np.abs(delta)
        cand = np.isfinite(dist)
        if not cand.any():
            return -1, np.inf
        idx = np.flatnonzero(cand)
        ratios = np.maximum(dist[idx], 0.0) / absd[idx]

        if bland:
            tmin = ratios.min()
            ties = idx[ratios <= tmin + 1e-12]
            r = int(ties[np.argmin(self.basis[ties])])
            return r, float(max(dist[r], 0.0) / absd[r])

        relaxed = (dist[idx] + _BOUND_TOL) / absd[idx]
        tmax = relaxed.min()
        ok = idx[ratios <= tmax]
        r = int(ok[np.argmax(absd[ok])])
        return r, float(max(dist[r], 0.0) / absd[r])


def solve_lp(problem: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve the continuous relaxation of ``problem`` (binaries kept on their bounds)."""
    if problem.n_rows == 0:
        return _solve_box(problem)
    s = _Simplex(problem, max_iter)
    status = s.run()
    if status is not Status.OPTIMAL:
        return LpSolution(status, iterations=s.iterations)
    s.refactor()
    x = s.x[: s.n].copy()
    # snap onto bounds broken by float noise
    x = np.minimum(np.maximum(x, problem.lb), problem.ub)
    if problem.violation(x) > FEAS_TOL:
        # one more pass from the refactored basis usually cleans up drift
        status = s.run()
        if status is not Status.OPTIMAL:
            return LpSolution(status, iterations=s.iterations)
        s.refactor()
        x = np.minimum(np.maximum(s.x[: s.n], problem.lb), problem.ub)
    y = s.cost2[s.basis] @ s.Binv
    d = s.reduced_costs(s.cost2, y)
    return LpSolution(
        Status.OPTIMAL,
        x=x,
        objective=float(problem.c @ x),
        duals=-y,
        reduced_costs=-d[: s.n],
        iterations=s.iterations,
    )


def _solve_box(problem: LpProblem) -> LpSolution:
    c, lb, ub = problem.c, problem.lb, problem.ub
    x = np.where(c > 0, ub, np.where(c < 0, lb, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))))
    if not np.all(np.isfinite(x)):
        return LpSolution(Status.UNBOUNDED)
    return LpSolution(Status.OPTIMAL, x=x, objective=float(c @ x), duals=np.zeros(0), reduced_costs=c.copy())
