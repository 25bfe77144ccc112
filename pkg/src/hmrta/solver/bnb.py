"""LP-based branch and bound for binary MILPs.

Search order is best bound first; among nodes with the same bound the
deepest one is taken, then the oldest, which makes the run fully
reproducible.  Each node's children are solved right away from the parent
basis (only one bound differs), so a refactorisation is needed only when a
node is taken off the queue.

Before branching, a node tries to round its fractional binaries one at a
time, keeping every row satisfied.  Ordering binaries whose rows are slack
at the LP point round cleanly; when every fractional column rounds this
way the node yields an integral point of equal objective and needs no
further branching.  An optional caller-supplied heuristic may propose
further incumbents from the node's LP point.

Branching takes the highest priority class with a fractional column and,
within it, the best pseudocost product score (objective gain per unit of
rounding, averaged over the children solved so far).  Ties go to the lowest
column ordinal.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .simplex import Basis, BoundedSimplex, LpStatus

log = logging.getLogger(__name__)

TIME_LIMIT_ENV = "HMRTA_TIME_LIMIT"


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"


class ModelError(RuntimeError):
    """The relaxation is unbounded; every column is boxed, so the model is wrong."""


@dataclass(frozen=True)
class SolverConfig:
    integrality_tol: float = 1e-6
    lp_tol: float = 1e-9
    gap_tol: float = 1e-9
    time_limit: float | None = None
    node_limit: int | None = None
    lp_engine: str = "simplex"
    valid_cuts: bool = True
    primal_heuristic: bool = True
    branching: str = "pseudocost"

    def __post_init__(self):
        if not (self.integrality_tol > 0 and self.lp_tol > 0 and self.gap_tol >= 0):
            raise ValueError("tolerances must be positive")
        if self.lp_engine not in ("simplex", "highs"):
            raise ValueError(f"unknown lp_engine {self.lp_engine!r}")
        if self.branching not in ("pseudocost", "most_fractional"):
            raise ValueError(f"unknown branching rule {self.branching!r}")

    @classmethod
    def from_env(cls, **overrides) -> "SolverConfig":
        """Default config, with ``$HMRTA_TIME_LIMIT`` (seconds) as time limit."""
        env = os.environ.get(TIME_LIMIT_ENV)
        if env and "time_limit" not in overrides:
            overrides["time_limit"] = float(env)
        return cls(**overrides)


@dataclass
class MilpSolution:
    status: SolveStatus
    values: np.ndarray | None
    objective: float
    nodes_explored: int
    best_bound: float
    root_bound: float = np.nan
    lp_iterations: int = 0
    wall_time: float = 0.0

    @property
    def has_incumbent(self) -> bool:
        return self.values is not None

    @property
    def gap(self) -> float:
        if self.values is None:
            return np.inf
        return self.objective - self.best_bound


def row_bounds(sense, rhs):
    sense = np.asarray(sense)
    rhs = np.asarray(rhs, dtype=float)
    rl = np.where(sense == "<", -np.inf, rhs)
    ru = np.where(sense == ">", np.inf, rhs)
    return rl, ru


@dataclass
class _Reduced:
    """Problem after dropping fixed columns and rows redundant under the bounds."""

    cols: np.ndarray
    rows: np.ndarray
    A: np.ndarray
    c: np.ndarray
    c0: float
    rl: np.ndarray
    ru: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    priority: np.ndarray
    fixed_values: np.ndarray
    infeasible: bool = False

    def expand(self, x_red: np.ndarray) -> np.ndarray:
        full = self.fixed_values.copy()
        full[self.cols] = x_red
        return full


def presolve(c, A, rl, ru, lb, ub, integer, priority, tol=1e-9) -> _Reduced:
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    fixed = lb == ub
    cols = np.flatnonzero(~fixed)
    fixed_values = np.where(fixed, lb, 0.0)
    shift = A[:, fixed] @ lb[fixed]
    Ar = A[:, cols]
    rl_r = rl - shift
    ru_r = ru - shift
    lo_c, hi_c = lb[cols], ub[cols]
    pos = np.maximum(Ar, 0)
    neg = np.minimum(Ar, 0)
    act_min = pos @ lo_c + neg @ hi_c
    act_max = pos @ hi_c + neg @ lo_c
    scale = tol * (1 + np.abs(np.where(np.isfinite(rl_r), rl_r, 0)) + np.abs(np.where(np.isfinite(ru_r), ru_r, 0)))
    infeasible = bool(np.any(act_max < rl_r - scale) or np.any(act_min > ru_r + scale))
    redundant = (act_min >= rl_r - scale) & (act_max <= ru_r + scale)
    rows = np.flatnonzero(~redundant)
    return _Reduced(
        cols=cols,
        rows=rows,
        A=Ar[rows],
        c=np.asarray(c, dtype=float)[cols],
        c0=float(np.asarray(c, dtype=float)[fixed] @ lb[fixed]),
        rl=rl_r[rows],
        ru=ru_r[rows],
        lb=lo_c,
        ub=hi_c,
        integer=np.asarray(integer, dtype=bool)[cols],
        priority=np.asarray(priority)[cols],
        fixed_values=fixed_values,
        infeasible=infeasible,
    )


class _HighsLp:
    """Same call surface as ``BoundedSimplex`` backed by scipy's HiGHS."""

    def __init__(self, A, c, rl, ru, tol):
        import scipy.sparse as sp

        self.A = sp.csr_matrix(A)
        self.c = c
        self.rl, self.ru = rl, ru

    def solve(self, lb, ub, basis=None):
        from scipy.optimize import linprog
        from .simplex import LpResult

        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        eq = self.rl == self.ru
        fin_u = np.isfinite(self.ru) & ~eq
        fin_l = np.isfinite(self.rl) & ~eq
        import scipy.sparse as sp

        blocks = [self.A[fin_u], -self.A[fin_l]]
        res = linprog(
            self.c,
            A_ub=sp.vstack(blocks) if self.A.shape[0] else None,
            b_ub=np.concatenate([self.ru[fin_u], -self.rl[fin_l]]) if self.A.shape[0] else None,
            A_eq=self.A[eq] if eq.any() else None,
            b_eq=self.ru[eq] if eq.any() else None,
            bounds=np.column_stack([lb, ub]),
            method="highs-ds",
        )
        if res.status == 2:
            return LpResult(LpStatus.INFEASIBLE, None, np.inf)
        if res.status == 3:
            return LpResult(LpStatus.UNBOUNDED, None, -np.inf)
        if res.status != 0:
            return LpResult(LpStatus.ITERATION_LIMIT, None, np.inf)
        return LpResult(LpStatus.OPTIMAL, res.x, float(res.fun), None, int(res.nit))


@dataclass(order=True)
class _Node:
    key: tuple
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)
    bound: float = field(compare=False)
    depth: int = field(compare=False)
    basis: Basis | None = field(compare=False)


class BranchAndBound:
    """Search state for one MILP.

    ``heuristic``, when given, maps a full-length LP point to a candidate
    full-length integral point (or ``None``); candidates are checked
    against every row and bound before being accepted.

    The last ``n_cuts`` rows are valid inequalities: they tighten the
    relaxation, but integer points are only checked against the rows
    before them, since the cuts hold for those automatically.
    """

    def __init__(self, c, A, sense, rhs, lb, ub, integer, priority=None,
                 config: SolverConfig | None = None, heuristic=None, n_cuts: int = 0):
        self.config = config or SolverConfig()
        n = len(c)
        self.n = n
        self.c_full = np.asarray(c, dtype=float)
        if priority is None:
            priority = np.zeros(n, dtype=int)
        rl, ru = row_bounds(sense, rhs)
        n_model = len(rl) - n_cuts
        A = A.tocsr() if hasattr(A, "tocsr") else np.asarray(A, dtype=float)
        self.A_model = A[:n_model]
        self.rl_model, self.ru_model = rl[:n_model], ru[:n_model]
        self.lb_full = np.asarray(lb, dtype=float)
        self.ub_full = np.asarray(ub, dtype=float)
        self.integer_full = np.asarray(integer, dtype=bool)
        self.heuristic = heuristic
        self.red = presolve(c, A, rl, ru, lb, ub, integer, priority, tol=self.config.lp_tol)
        r = self.red
        self.model_rows = np.flatnonzero(r.rows < n_model)
        if self.config.lp_engine == "highs":
            self.lp = _HighsLp(r.A, r.c, r.rl, r.ru, self.config.lp_tol)
        else:
            self.lp = BoundedSimplex(r.A, r.c, r.rl, r.ru, tol=self.config.lp_tol)
        self.int_idx = np.flatnonzero(r.integer)
        model_A = r.A[self.model_rows]
        self.col_rows = [self.model_rows[np.flatnonzero(model_A[:, j])] for j in range(r.A.shape[1])]
        self.tol_red = self._row_tol(r.rl, r.ru)
        n_red = len(r.c)
        self.pc_sum = np.zeros((2, n_red))
        self.pc_cnt = np.zeros((2, n_red))
        self.lp_iterations = 0

    # ------------------------------------------------------------------
    def _lp(self, lb, ub, basis):
        res = self.lp.solve(lb, ub, basis=basis)
        self.lp_iterations += res.iterations
        if res.status is LpStatus.UNBOUNDED:
            raise ModelError("LP relaxation is unbounded; all columns should be boxed")
        if res.status is LpStatus.ITERATION_LIMIT:
            # retry cold; a stalled warm start is the usual cause
            res = self.lp.solve(lb, ub, basis=None)
            self.lp_iterations += res.iterations
            if res.status is not LpStatus.OPTIMAL and res.status is not LpStatus.INFEASIBLE:
                raise ModelError(f"LP solve failed with status {res.status}")
        return res

    def _fractional(self, x):
        xi = x[self.int_idx]
        frac = np.abs(xi - np.round(xi))
        return self.int_idx[frac > self.config.integrality_tol]

    def _row_tol(self, lo, hi):
        mag = np.abs(np.where(np.isfinite(lo), lo, 0)) + np.abs(np.where(np.isfinite(hi), hi, 0))
        return self.config.lp_tol * 10 * (1 + mag)

    def _rows_ok(self, act, rows):
        lo, hi = self.red.rl[rows], self.red.ru[rows]
        tol = self.tol_red[rows]
        a = act[rows]
        return bool(np.all(a >= lo - tol) and np.all(a <= hi + tol))

    def feasible(self, y: np.ndarray) -> bool:
        """Check a full-length point against the model rows, bounds and integrality."""
        tol = self.config.lp_tol * 10
        if np.any(y < self.lb_full - tol) or np.any(y > self.ub_full + tol):
            return False
        yi = y[self.integer_full]
        if np.any(np.abs(yi - np.round(yi)) > self.config.integrality_tol):
            return False
        act = self.A_model @ y
        rtol = self._row_tol(self.rl_model, self.ru_model)
        return bool(np.all(act >= self.rl_model - rtol) and np.all(act <= self.ru_model + rtol))

    def _round(self, x, lb, ub):
        """Try to round every fractional binary; return (x_int or None, failed columns)."""
        r = self.red
        y = x.copy()
        yi = y[self.int_idx]
        near = np.abs(yi - np.round(yi)) <= self.config.integrality_tol
        y[self.int_idx[near]] = np.round(yi[near])
        act = r.A @ y
        failed = []
        for j in self._fractional(x):
            rows = self.col_rows[j]
            first = float(np.round(x[j]))
            for v in (first, 1.0 - first):
                if v < lb[j] or v > ub[j]:
                    continue
                trial = act[rows] + r.A[rows, j] * (v - y[j])
                if self._trial_ok(trial, rows):
                    act[rows] = trial
                    y[j] = v
                    break
            else:
                failed.append(j)
        if failed:
            return None, failed
        if not self._rows_ok(act, self.model_rows):
            return None, []
        return y, []

    def _trial_ok(self, vals, rows):
        lo, hi = self.red.rl[rows], self.red.ru[rows]
        tol = self.tol_red[rows]
        return bool(np.all(vals >= lo - tol) and np.all(vals <= hi + tol))

    def _record(self, j, direction, frac, gain):
        unit = frac if direction == 0 else 1.0 - frac
        if unit > 1e-9:
            self.pc_sum[direction, j] += gain / unit
            self.pc_cnt[direction, j] += 1

    def _scores(self, cand, x):
        f = x[cand] - np.floor(x[cand])
        avg = [
            self.pc_sum[d].sum() / self.pc_cnt[d].sum() if self.pc_cnt[d].sum() else 1.0
            for d in (0, 1)
        ]
        down = np.where(self.pc_cnt[0, cand] > 0,
                        self.pc_sum[0, cand] / np.maximum(self.pc_cnt[0, cand], 1), avg[0])
        up = np.where(self.pc_cnt[1, cand] > 0,
                      self.pc_sum[1, cand] / np.maximum(self.pc_cnt[1, cand], 1), avg[1])
        return np.maximum(down * f, 1e-6) * np.maximum(up * (1 - f), 1e-6)

    def _branch_column(self, x):
        frac = self._fractional(x)
        prio = self.red.priority[frac]
        cand = frac[prio == prio.max()]
        if self.config.branching == "most_fractional":
            f = x[cand] - np.floor(x[cand])
            return int(cand[np.argmax(np.minimum(f, 1 - f))])
        return int(cand[np.argmax(self._scores(cand, x))])

    def _polish(self, y):
        """Re-solve the continuous part with the binaries of ``y`` fixed.

        Rounding a binary that the LP left at ``1e-7`` can leave a big-M row
        violated by ``1e-4``; this restores exact row feasibility and never
        worsens the objective.
        """
        lb, ub = self.red.lb.copy(), self.red.ub.copy()
        lb[self.int_idx] = ub[self.int_idx] = np.round(y[self.int_idx])
        res = self._lp(lb, ub, None)
        if res.status is LpStatus.OPTIMAL and res.objective <= float(self.red.c @ y) + 1e-9:
            z = res.x.copy()
            z[self.int_idx] = lb[self.int_idx]
            return z
        return y

    # ------------------------------------------------------------------
    def run(self, start: np.ndarray | None = None) -> MilpSolution:
        """Search the tree; ``start`` is an optional full-length starting incumbent."""
        cfg = self.config
        r = self.red
        t0 = time.perf_counter()
        if r.infeasible:
            return MilpSolution(SolveStatus.INFEASIBLE, None, np.inf, 0, np.inf, np.inf, 0, 0.0)

        incumbent_x = None
        incumbent = np.inf
        counter = itertools.count()
        nodes = 0
        heap: list[_Node] = []

        def consider(y):
            nonlocal incumbent, incumbent_x
            val = float(r.c @ y)
            if val < incumbent - 1e-12:
                incumbent, incumbent_x = val, y.copy()

        def try_heuristic(x):
            if self.heuristic is None:
                return
            y = self.heuristic(r.expand(x))
            if y is not None and self.feasible(y):
                consider(y[r.cols])

        def prunable(bound):
            return bound >= incumbent - cfg.gap_tol * (1 + abs(incumbent))

        if start is not None and self.feasible(np.asarray(start, dtype=float)):
            consider(np.asarray(start, dtype=float)[r.cols])

        root = self._lp(r.lb, r.ub, None)
        nodes += 1
        if root.status is LpStatus.INFEASIBLE:
            return MilpSolution(SolveStatus.INFEASIBLE, None, np.inf, nodes, np.inf, np.inf,
                                self.lp_iterations, time.perf_counter() - t0)
        root_bound = root.objective
        heapq.heappush(heap, _Node((root.objective, 0, next(counter)), r.lb.copy(), r.ub.copy(),
                                   root.x, root.objective, 0, root.basis))
        status = SolveStatus.OPTIMAL

        while heap:
            node = heapq.heappop(heap)
            if prunable(node.bound):
                continue
            if self._fractional(node.x).size == 0:
                y = node.x.copy()
                y[self.int_idx] = np.round(y[self.int_idx])
                consider(y)
                continue
            y, _ = self._round(node.x, node.lb, node.ub)
            if y is not None:
                consider(y)
            else:
                try_heuristic(node.x)
            if prunable(node.bound):
                continue
            if cfg.node_limit is not None and nodes >= cfg.node_limit:
                heapq.heappush(heap, node)
                status = SolveStatus.NODE_LIMIT
                break
            if cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit:
                heapq.heappush(heap, node)
                status = SolveStatus.TIME_LIMIT
                break
            j = self._branch_column(node.x)
            xj = node.x[j] - np.floor(node.x[j])
            for d, v in enumerate((0.0, 1.0)):
                lb, ub = node.lb.copy(), node.ub.copy()
                lb[j] = ub[j] = v
                res = self._lp(lb, ub, node.basis)
                nodes += 1
                if res.status is LpStatus.INFEASIBLE:
                    continue
                self._record(j, d, xj, max(res.objective - node.bound, 0.0))
                if prunable(res.objective):
                    continue
                if self._fractional(res.x).size == 0:
                    z = res.x.copy()
                    z[self.int_idx] = np.round(z[self.int_idx])
                    consider(z)
                    continue
                heapq.heappush(heap, _Node((res.objective, -(node.depth + 1), next(counter)), lb, ub,
                                           res.x, res.objective, node.depth + 1, res.basis))

        if status is SolveStatus.OPTIMAL:
            best_bound = incumbent
        else:
            best_bound = min([n.bound for n in heap] + [incumbent])
        wall = time.perf_counter() - t0
        if incumbent_x is None:
            final = SolveStatus.INFEASIBLE if status is SolveStatus.OPTIMAL else status
            return MilpSolution(final, None, np.inf, nodes, best_bound + r.c0, root_bound + r.c0,
                                self.lp_iterations, wall)
        full = r.expand(self._polish(incumbent_x))
        return MilpSolution(status, full, float(self.c_full @ full), nodes, best_bound + r.c0,
                            root_bound + r.c0, self.lp_iterations, wall)
