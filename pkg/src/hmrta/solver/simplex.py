"""Bounded-variable primal simplex.

Solves ``min c.x  s.t.  rl <= A x <= ru,  l <= x <= u`` with sparse ``A``.
Each row gets a logical variable ``s = A x`` carrying the row bounds, so the
working system is ``[A  -I] (x, s) = 0`` and every variable is boxed (one of
the two bounds may be infinite for logicals).

A supplied basis that is still dual feasible (the usual case after a bound
change in branch and bound) is first driven to optimality by the dual
simplex, which typically needs only a handful of pivots.  Otherwise, and as
a clean-up after the dual pass, the primal method runs: phase 1 minimises
the sum of bound infeasibilities of the basic variables starting from
whatever basis is at hand.  The basis is held as a sparse LU factorisation
(SuperLU) plus a product-form eta file, refactorised every ``REFACTOR`` pivots.  Pricing is
Dantzig's rule; after ``BLAND_AFTER`` pivots without progress it switches to
Bland's rule until the objective moves again.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

REFACTOR = 64
BLAND_AFTER = 50


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class Basis:
    """Warm-start information: basic variable per row, nonbasics at upper."""

    head: np.ndarray
    at_upper: np.ndarray
    factor: "_Factor | None" = field(default=None, repr=False, compare=False)


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    basis: Basis | None = None
    iterations: int = 0


class _Factor:
    """Sparse LU of a basis matrix with a product-form eta file on top."""

    def __init__(self, B: sp.csc_matrix):
        try:
            self.lu = spla.splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise np.linalg.LinAlgError(str(exc)) from None
        diag = np.abs(self.lu.U.diagonal())
        if diag.size and diag.min() < 1e-11 * max(1.0, diag.max()):
            raise np.linalg.LinAlgError("singular basis")
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        v = self.lu.solve(a)
        for r, alpha in self.etas:
            vr = v[r] / alpha[r]
            v -= alpha * vr
            v[r] = vr
        return v

    def btran(self, cb: np.ndarray) -> np.ndarray:
        u = cb.astype(float, copy=True)
        for r, alpha in reversed(self.etas):
            u[r] = (u[r] - (u @ alpha - u[r] * alpha[r])) / alpha[r]
        return self.lu.solve(u, trans="T")

    def push(self, r: int, alpha: np.ndarray):
        self.etas.append((r, alpha))

    def fork(self) -> "_Factor":
        """Copy sharing the LU arrays; later pushes do not affect the original."""
        other = object.__new__(_Factor)
        other.lu = self.lu
        other.etas = list(self.etas)
        return other


class BoundedSimplex:
    """Reusable simplex state for one constraint matrix.

    Bounds may change between calls to :meth:`solve`; passing the basis of a
    previous solve warm-starts the next one.
    """

    def __init__(self, A, c, rl, ru, *, tol: float = 1e-9):
        self.A = sp.csc_matrix(A, dtype=float)
        self.A.sort_indices()
        self.AT = self.A.T.tocsr()
        self.m, self.n = self.A.shape
        self.c = np.concatenate([np.asarray(c, dtype=float), np.zeros(self.m)])
        self.rl = np.asarray(rl, dtype=float)
        self.ru = np.asarray(ru, dtype=float)
        self.tol = tol
        self.dual_tol = tol
        self.pivot_tol = 1e-9

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        if j < self.n:
            lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        else:
            col[j - self.n] = -1.0
        return col

    def _basis_matrix(self, head: np.ndarray) -> sp.csc_matrix:
        struct = np.flatnonzero(head < self.n)
        logical = np.flatnonzero(head >= self.n)
        sub = self.A[:, head[struct]].tocoo()
        rows = np.concatenate([sub.row, head[logical] - self.n])
        cols = np.concatenate([struct[sub.col], logical])
        vals = np.concatenate([sub.data, -np.ones(len(logical))])
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.m, self.m))

    def _basic_values(self, factor: _Factor, x: np.ndarray, is_basic: np.ndarray):
        xs = np.where(is_basic[: self.n], 0.0, x[: self.n])
        xl = np.where(is_basic[self.n:], 0.0, x[self.n:])
        return factor.ftran(-(self.A @ xs) + xl)

    def solve(self, lb, ub, basis: Basis | None = None, max_iter: int | None = None) -> LpResult:
        m, n = self.m, self.n
        N = n + m
        lo = np.concatenate([np.asarray(lb, dtype=float), self.rl])
        hi = np.concatenate([np.asarray(ub, dtype=float), self.ru])
        if np.any(lo > hi + self.tol * (1 + np.abs(lo))):
            return LpResult(LpStatus.INFEASIBLE, None, np.inf)
        if max_iter is None:
            max_iter = 50 * (N + 10)
        ptol = self.tol * (1.0 + np.minimum(np.abs(lo), np.abs(hi)))
        ptol = np.where(np.isfinite(ptol), ptol, self.tol)

        factor = None
        warm = False
        if basis is not None:
            head = np.array(basis.head, dtype=int)
            at_upper = np.array(basis.at_upper, dtype=bool)
            if basis.factor is not None and len(basis.factor.etas) < REFACTOR:
                factor = basis.factor.fork()
            else:
                try:
                    factor = _Factor(self._basis_matrix(head))
                except (np.linalg.LinAlgError, ValueError):
                    factor = None
            warm = factor is not None
        if factor is None:
            head = np.arange(n, N)
            at_upper = np.zeros(N, dtype=bool)
            factor = _Factor(self._basis_matrix(head))
        is_basic = np.zeros(N, dtype=bool)
        is_basic[head] = True

        x = np.where(at_upper, hi, lo)
        # nonbasic at an infinite bound is not allowed; move to the finite one
        inf_lo = ~is_basic & ~np.isfinite(x)
        x[inf_lo] = np.where(np.isfinite(lo[inf_lo]), lo[inf_lo], hi[inf_lo])
        at_upper[inf_lo] = ~np.isfinite(lo[inf_lo])
        x[head] = self._basic_values(factor, x, is_basic)

        it = 0
        if warm:
            status, factor, it = self._dual(head, at_upper, is_basic, factor, x, lo, hi, ptol, max_iter)
            if status is not None:
                if status is LpStatus.INFEASIBLE:
                    return LpResult(LpStatus.INFEASIBLE, None, np.inf, Basis(head.copy(), at_upper.copy()), it)
        stall = 0
        bland = False
        best_obj = np.inf
        last_phase = 0
        while True:
            xb = x[head]
            below = xb < lo[head] - ptol[head]
            above = xb > hi[head] + ptol[head]
            phase = 1 if (below.any() or above.any()) else 2
            if phase != last_phase:
                best_obj, stall, bland, last_phase = np.inf, 0, False, phase
            if phase == 1:
                cb = above.astype(float) - below.astype(float)
                cost_n = np.zeros(N)
                obj = float(np.sum(np.where(below, lo[head] - xb, 0.0) + np.where(above, xb - hi[head], 0.0)))
            else:
                cb = self.c[head]
                cost_n = self.c
                obj = float(self.c @ x)
            if obj < best_obj - 1e-12 * (1 + abs(obj)):
                best_obj, stall = obj, 0
                bland = False
            else:
                stall += 1
                if stall >= BLAND_AFTER:
                    bland = True

            if it >= max_iter:
                return LpResult(LpStatus.ITERATION_LIMIT, x[:n].copy(), float(self.c[:n] @ x[:n]),
                                Basis(head.copy(), at_upper.copy()), it)

            y = factor.btran(cb)
            d = cost_n.copy()
            d[:n] -= self.AT @ y
            d[n:] += y
            movable = ~is_basic & (hi - lo > 0)
            inc = movable & ~at_upper & (d < -self.dual_tol)
            dec = movable & at_upper & (d > self.dual_tol)
            eligible = inc | dec
            if not eligible.any():
                if phase == 1:
                    return LpResult(LpStatus.INFEASIBLE, None, np.inf, Basis(head.copy(), at_upper.copy()), it)
                # clean up accumulated drift before declaring optimality
                resid = np.abs(self.A @ x[:n] - x[n:])
                if resid.max(initial=0.0) > self.tol * (1.0 + np.abs(x).max(initial=0.0)) * 1e-2:
                    factor = _Factor(self._basis_matrix(head))
                    x[head] = self._basic_values(factor, x, is_basic)
                xb = x[head]
                if np.any(xb < lo[head] - ptol[head]) or np.any(xb > hi[head] + ptol[head]):
                    last_phase = 0
                    it += 1
                    continue
                xs = x[:n].copy()
                return LpResult(LpStatus.OPTIMAL, xs, float(self.c[:n] @ xs),
                                Basis(head.copy(), at_upper.copy(), factor), it)
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            sigma = 1.0 if inc[q] else -1.0

            alpha = factor.ftran(self.column(q))
            rho = -sigma * alpha
            lob, hib = lo[head], hi[head]
            xb = x[head]
            dist = np.full(m, np.inf)
            big_rho = np.abs(rho) > self.pivot_tol
            dec_b = big_rho & (rho < 0)
            inc_b = big_rho & (rho > 0)
            # decreasing basics stop at their lower bound, or at the upper
            # bound when currently above it; symmetric for increasing ones
            if phase == 1:
                blo = below
                bab = above
            else:
                blo = np.zeros(m, dtype=bool)
                bab = np.zeros(m, dtype=bool)
            m1 = dec_b & bab
            dist[m1] = xb[m1] - hib[m1]
            m2 = dec_b & ~bab & ~blo
            dist[m2] = xb[m2] - lob[m2]
            m3 = inc_b & blo
            dist[m3] = lob[m3] - xb[m3]
            m4 = inc_b & ~blo & ~bab
            dist[m4] = hib[m4] - xb[m4]
            arho = np.abs(rho)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(np.isfinite(dist), dist / arho, np.inf)
                relaxed = np.where(np.isfinite(dist), (dist + ptol[head]) / arho, np.inf)
            theta_max = relaxed.min() if m else np.inf
            flip = hi[q] - lo[q]

            if not np.isfinite(theta_max) and not np.isfinite(flip):
                return LpResult(LpStatus.UNBOUNDED, None, -np.inf, Basis(head.copy(), at_upper.copy()), it)

            leave = -1
            if np.isfinite(theta_max):
                cand = np.flatnonzero(ratio <= theta_max)
                if bland:
                    leave = int(cand[np.argmin(head[cand])])
                else:
                    leave = int(cand[np.argmax(arho[cand])])
                theta = max(ratio[leave], 0.0)
            else:
                theta = np.inf

            it += 1
            if flip <= theta:
                # entering variable reaches its other bound first
                x[q] = hi[q] if sigma > 0 else lo[q]
                at_upper[q] = sigma > 0
                x[head] = xb + rho * flip
                continue

            x[head] = xb + rho * theta
            x[q] = x[q] + sigma * theta
            out = head[leave]
            if dec_b[leave]:
                target = hib[leave] if (phase == 1 and bab[leave]) else lob[leave]
                x[out] = target
                at_upper[out] = phase == 1 and bab[leave]
            else:
                target = lob[leave] if (phase == 1 and blo[leave]) else hib[leave]
                x[out] = target
                at_upper[out] = not (phase == 1 and blo[leave])
            is_basic[out] = False
            is_basic[q] = True
            at_upper[q] = False
            head[leave] = q
            factor.push(leave, alpha)
            if len(factor.etas) >= REFACTOR:
                try:
                    factor = _Factor(self._basis_matrix(head))
                except np.linalg.LinAlgError:
                    return LpResult(LpStatus.ITERATION_LIMIT, x[:n].copy(), float(self.c[:n] @ x[:n]),
                                    None, it)
                x[head] = self._basic_values(factor, x, is_basic)


    def _reduced_costs(self, factor, head):
        y = factor.btran(self.c[head])
        d = self.c.copy()
        d[: self.n] -= self.AT @ y
        d[self.n:] += y
        return d

    def _dual(self, head, at_upper, is_basic, factor, x, lo, hi, ptol, max_iter):
        """Dual simplex from a dual feasible basis; arrays are updated in place.

        Returns ``(status, factor, iterations)``.  Status ``OPTIMAL`` means
        primal feasible (the primal clean-up confirms optimality), ``None``
        means the basis was not dual feasible or the pass ran into numerical
        trouble; the arrays and ``factor`` then still describe a valid basis.
        """
        n, m = self.n, self.m
        dtol = self.dual_tol
        movable = hi - lo > 0
        d = self._reduced_costs(factor, head)
        nb = ~is_basic & movable
        if np.any(nb & ~at_upper & (d < -10 * dtol)) or np.any(nb & at_upper & (d > 10 * dtol)):
            return None, factor, 0
        it = 0
        while it < max_iter:
            xb = x[head]
            lob, hib = lo[head], hi[head]
            infeas = np.maximum(lob - xb, 0.0) + np.maximum(xb - hib, 0.0)
            viol = infeas > ptol[head]
            if not viol.any():
                return LpStatus.OPTIMAL, factor, it
            r = int(np.argmax(np.where(viol, infeas, -1.0)))
            above = xb[r] > hib[r]
            e = np.zeros(m)
            e[r] = 1.0
            rho = factor.btran(e)
            alpha_row = np.empty(n + m)
            alpha_row[:n] = self.AT @ rho
            alpha_row[n:] = -rho
            sgn = 1.0 if above else -1.0
            nb = ~is_basic & movable
            sa = sgn * alpha_row
            ptiv = 1e-7 * max(1.0, np.abs(alpha_row).max())
            cand = nb & ((~at_upper & (sa > ptiv)) | (at_upper & (sa < -ptiv)))
            if not cand.any():
                return LpStatus.INFEASIBLE, factor, it
            idx = np.flatnonzero(cand)
            dd = np.where(at_upper[idx], -d[idx], d[idx])
            aa = np.abs(alpha_row[idx])
            t_max = np.min((np.maximum(dd, 0.0) + dtol) / aa)
            ok = np.maximum(dd, 0.0) / aa <= t_max
            q = int(idx[ok][np.argmax(aa[ok])])

            alpha_q = factor.ftran(self.column(q))
            if abs(alpha_q[r]) < ptiv or abs(alpha_q[r] - alpha_row[q]) > 1e-7 * (1.0 + abs(alpha_row[q])):
                return None, factor, it
            target = hib[r] if above else lob[r]
            theta_p = (xb[r] - target) / alpha_q[r]
            theta_d = d[q] / alpha_row[q]
            x[head] = xb - theta_p * alpha_q
            x[q] += theta_p
            out = head[r]
            x[out] = target
            d[~is_basic] -= theta_d * alpha_row[~is_basic]
            d[q] = 0.0
            d[out] = -theta_d
            is_basic[out] = False
            is_basic[q] = True
            at_upper[out] = above
            at_upper[q] = False
            head[r] = q
            factor.push(r, alpha_q)
            it += 1
            if len(factor.etas) >= REFACTOR:
                try:
                    fresh = _Factor(self._basis_matrix(head))
                except np.linalg.LinAlgError:
                    return None, factor, it
                factor = fresh
                x[head] = self._basic_values(factor, x, is_basic)
                d = self._reduced_costs(factor, head)
        return None, factor, it


def solve_lp(c, A, rl, ru, lb, ub, *, tol: float = 1e-9, basis: Basis | None = None) -> LpResult:
    """One-shot bounded simplex (see :class:`BoundedSimplex`)."""
    if not sp.issparse(A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.size == 0:
            A = np.zeros((0, len(c)))
    return BoundedSimplex(A, c, rl, ru, tol=tol).solve(lb, ub, basis=basis)
