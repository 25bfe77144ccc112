"""Exact MILP solving: bounded simplex plus branch and bound."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .bnb import (
    BranchAndBound,
    MilpSolution,
    ModelError,
    SolverConfig,
    SolveStatus,
    TIME_LIMIT_ENV,
    row_bounds,
)
from .simplex import Basis, BoundedSimplex, LpResult, LpStatus, solve_lp

__all__ = [
    "solve",
    "solve_relaxation",
    "branch_priority",
    "SolverConfig",
    "MilpSolution",
    "SolveStatus",
    "ModelError",
    "BranchAndBound",
    "BoundedSimplex",
    "LpResult",
    "LpStatus",
    "Basis",
    "solve_lp",
    "row_bounds",
    "TIME_LIMIT_ENV",
]


def branch_priority(problem) -> np.ndarray:
    """Assignment columns (``X``, ``S``) are branched on before ordering ones."""
    return np.array([1 if v.kind.value in ("X", "S") else 0 for v in problem.columns], dtype=int)


def solve(problem, config: SolverConfig | None = None, start=None) -> MilpSolution:
    """Solve a :class:`~hmrta.milp.MilpProblem` to proven optimality (or a limit).

    With ``config.valid_cuts`` the relaxation is tightened by
    :func:`hmrta.milp.valid_inequalities`; with ``config.primal_heuristic``
    node LP points are turned into schedules by
    :func:`hmrta.milp.constructive_solution`.  Neither changes the optimum.
    ``start`` is an optional solution vector used as the first incumbent
    (ignored unless feasible).
    """
    from ..milp import constructive_solution, valid_inequalities

    config = config or SolverConfig.from_env()
    A, sense, rhs = problem.A, problem.sense, problem.rhs
    n_cuts = 0
    if config.valid_cuts and problem.scenario is not None:
        A2, s2, r2, _ = valid_inequalities(problem)
        n_cuts = A2.shape[0]
        if n_cuts:
            A = sp.vstack([A, A2]).tocsr()
            sense = np.concatenate([sense, s2])
            rhs = np.concatenate([rhs, r2])
    heuristic = None
    if config.primal_heuristic and problem.scenario is not None:
        def heuristic(x):
            return constructive_solution(problem, x)
    bb = BranchAndBound(problem.c, A, sense, rhs, problem.lb, problem.ub,
                        problem.integer, branch_priority(problem), config, heuristic, n_cuts)
    return bb.run(start)


def solve_relaxation(problem, *, tol: float = 1e-9) -> LpResult:
    """LP relaxation of ``problem`` with integrality dropped."""
    rl, ru = row_bounds(problem.sense, problem.rhs)
    return solve_lp(problem.c, problem.A.toarray(), rl, ru, problem.lb, problem.ub, tol=tol)
