"""Best-first branch and bound over binary variables."""

from __future__ import annotations

import heapq
import itertools
import logging

import numpy as np

from .problem import LpProblem, LpSolution, Status
from .simplex import solve_lp

log = logging.getLogger(__name__)

INT_TOL = 1e-6
MIP_GAP = 1e-6


def _normalized_gap(bound: float, incumbent: float) -> float:
    return (bound - incumbent) / max(1.0, abs(incumbent))


def solve_mip(
    problem: LpProblem,
    *,
    node_limit: int = 100_000,
    int_tol: float = INT_TOL,
    mip_gap: float = MIP_GAP,
    max_iter: int | None = None,
) -> LpSolution:
    """Maximize ``problem`` with its binaries enforced.

    Branches on the most fractional binary (lowest index on ties) and always
    expands the open node with the best LP bound, preferring deeper nodes when
    bounds tie.  ``nodes`` in the result counts LP solves after the root.  On
    hitting ``node_limit`` the best incumbent is returned with status
    ``node_limit``, the best open bound and the gap (``inf`` and ``x=None``
    when no integer point was found).
    """
    bin_idx = np.flatnonzero(problem.binary)
    root = solve_lp(problem, max_iter=max_iter)
    if root.status is not Status.OPTIMAL or bin_idx.size == 0:
        return _finish(root, problem, bin_idx, 0)

    counter = itertools.count()
    # ties on the bound (within float noise) go to the deepest, newest node
    quantum = 1e-9 * max(1.0, abs(root.objective))

    def key(obj: float, depth: int) -> tuple[float, int, int]:
        return (-round(obj / quantum) * quantum, -depth, -next(counter))

    heap: list[tuple[tuple[float, int, int], float, int, np.ndarray, np.ndarray, LpSolution]] = []
    heapq.heappush(heap, (key(root.objective, 0), root.objective, 0, problem.lb.copy(), problem.ub.copy(), root))
    incumbent: LpSolution | None = None
    nodes = 0
    total_iter = root.iterations

    while heap:
        _, bound, depth, lb, ub, sol = heapq.heappop(heap)
        if incumbent is not None and _normalized_gap(bound, incumbent.objective) <= mip_gap:
            heap.clear()
            break
        frac = np.abs(sol.x[bin_idx] - np.round(sol.x[bin_idx]))
        fractional = frac > int_tol
        if not fractional.any():
            if incumbent is None or sol.objective > incumbent.objective:
                incumbent = sol
            continue
        if nodes + 2 > node_limit:
            # keep the node open so its bound still counts
            heapq.heappush(heap, (key(bound, depth), bound, depth, lb, ub, sol))
            break
        # most fractional; argmax returns the lowest index on ties
        k = int(bin_idx[np.argmax(np.where(fractional, frac, -1.0))])
        for value in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[k] = cub[k] = value
            child = solve_lp(problem.with_bounds(clb, cub), max_iter=max_iter)
            nodes += 1
            total_iter += child.iterations
            if child.status is not Status.OPTIMAL:
                continue
            if incumbent is not None and _normalized_gap(child.objective, incumbent.objective) <= mip_gap:
                continue
            if np.all(np.abs(child.x[bin_idx] - np.round(child.x[bin_idx])) <= int_tol):
                incumbent = child
                continue
            heapq.heappush(heap, (key(child.objective, depth + 1), child.objective, depth + 1, clb, cub, child))

    if incumbent is None:
        if not heap:
            return LpSolution(Status.INFEASIBLE, nodes=nodes, iterations=total_iter)
        log.warning("node limit reached without an integer solution")
        return LpSolution(Status.NODE_LIMIT, nodes=nodes, iterations=total_iter,
                          bound=max(h[1] for h in heap), gap=np.inf)
    open_bound = max((h[1] for h in heap), default=incumbent.objective)
    bound = max(open_bound, incumbent.objective)
    status = Status.NODE_LIMIT if heap and _normalized_gap(bound, incumbent.objective) > mip_gap else Status.OPTIMAL
    out = _finish(incumbent, problem, bin_idx, nodes)
    out.status = status
    out.iterations = total_iter
    out.bound = bound
    out.gap = _normalized_gap(bound, incumbent.objective)
    if status is Status.NODE_LIMIT:
        log.warning("node limit reached with gap %.3g", out.gap)
    return out


def _finish(sol: LpSolution, problem: LpProblem, bin_idx: np.ndarray, nodes: int) -> LpSolution:
    sol.nodes = nodes
    if sol.status is Status.OPTIMAL:
        if bin_idx.size:
            sol.x = sol.x.copy()
            sol.x[bin_idx] = np.round(sol.x[bin_idx])
            sol.objective = float(problem.c @ sol.x)
        sol.bound = sol.objective
        sol.gap = 0.0
    return sol
