"""Branch-and-bound for mixed-binary conic programs.

Node relaxations are solved with the interior-point method; branching is
on the most fractional binary, node selection is best bound.  Everything
is deterministic for a fixed program (ties broken by variable index and
node creation order).
"""

from __future__ import annotations

import heapq

import numpy as np

from .program import ConicProgram
from .solver import SolveResult, SolverError, solve_continuous

_INT_TOL = 1e-6


def _fractional(x, binary_idx):
    frac = np.abs(x[binary_idx] - np.round(x[binary_idx]))
    return frac


def solve_mixed_binary(p: ConicProgram, rel_gap=1e-6, max_nodes=20000,
                       feastol=1e-8, reltol=1e-9) -> SolveResult:
    """Best-bound branch-and-bound; returns incumbent with proven gap.

    The returned result comes from a final continuous re-solve with all
    binaries fixed at the incumbent, so duals are well defined.  Status is
    "iteration-limit" when the node budget is exhausted (incumbent plus
    gap still reported), "infeasible" when no binary assignment admits a
    feasible relaxation.
    """
    if rel_gap <= 0:
        raise ValueError("rel_gap must be positive")
    binary_idx = np.flatnonzero(p.binary & (p.ub - p.lb > 0))
    relaxation = p.relaxed()
    if binary_idx.size == 0:
        res = solve_continuous(relaxation, feastol=feastol, reltol=reltol)
        res.mip_gap = 0.0
        res.nodes = 1
        return res

    root = solve_continuous(relaxation, feastol=feastol, reltol=reltol)
    if root.status == "infeasible":
        root.nodes = 1
        return root
    if root.status == "unbounded":
        raise SolverError("mixed-binary program has unbounded relaxation")

    counter = 0
    heap = []  # (bound, counter, fixed-dict, relaxation result)
    heapq.heappush(heap, (root.objective, counter, {}, root))
    incumbent = None
    incumbent_obj = np.inf
    nodes = 1

    def gap_ok(lb):
        if not np.isfinite(incumbent_obj):
            return False
        return (incumbent_obj - lb) <= rel_gap * max(1.0, abs(incumbent_obj))

    global_lb = root.objective
    while heap:
        bound, _, fixed, rel = heapq.heappop(heap)
        global_lb = bound
        if bound >= incumbent_obj - 1e-12 or gap_ok(bound):
            # best-bound order: everything left is at least as bad
            break
        frac = _fractional(rel.x, binary_idx)
        free = np.array([i not in fixed for i in binary_idx])
        frac_free = np.where(free, frac, 0.0)
        if np.max(frac_free, initial=0.0) <= _INT_TOL:
            # integral relaxation: candidate incumbent
            cand = {int(i): float(np.round(rel.x[i])) for i in binary_idx}
            if rel.objective < incumbent_obj - 1e-12:
                incumbent_obj = rel.objective
                incumbent = cand
            continue
        pick = binary_idx[int(np.argmax(frac_free))]
        for val in (0.0, 1.0):
            child_fixed = dict(fixed)
            child_fixed[int(pick)] = val
            child = relaxation.with_bounds(child_fixed)
            if nodes >= max_nodes:
                heap = []
                break
            nodes += 1
            res = solve_continuous(child, feastol=feastol, reltol=reltol)
            if res.status == "infeasible":
                continue
            if res.status not in ("optimal", "iteration-limit"):
                continue
            if res.objective >= incumbent_obj - 1e-12:
                continue
            frac_child = _fractional(res.x, binary_idx)
            if np.max(frac_child, initial=0.0) <= _INT_TOL:
                if res.objective < incumbent_obj - 1e-12:
                    incumbent_obj = res.objective
                    incumbent = {int(i): float(np.round(res.x[i])) for i in binary_idx}
            else:
                counter += 1
                heapq.heappush(heap, (res.objective, counter, child_fixed, res))
        if nodes >= max_nodes:
            break

    if incumbent is None:
        out = SolveResult(status="infeasible")
        out.nodes = nodes
        return out

    final = solve_continuous(relaxation.with_bounds(incumbent),
                             feastol=feastol, reltol=reltol)
    final.nodes = nodes
    lb = min(global_lb, incumbent_obj)
    if heap:
        lb = min(lb, min(entry[0] for entry in heap))
    final.mip_gap = max(0.0, (final.objective - lb) / max(1.0, abs(final.objective)))
    if nodes >= max_nodes and heap:
        final.status = "iteration-limit"
    return final
