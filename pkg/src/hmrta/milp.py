"""Solver-agnostic MILP for the allocation problem.

Column layout (``m`` tasks, ``n_a`` agents, ``n_h`` humans, ``p = m(m-1)/2``
unordered task pairs ``i < k`` in lexicographic order)::

    X(i,j)    m * n_a    binary   agent j executes task i
    S(i,j)    m * n_h    binary   human j supervises task i
    V(i,k,j)  p * n_a    binary   ordering of i, k on agent j (1: i first)
    Z(i,k)    p          binary   ordering of spatially conflicting i, k
    ts(i)     m          [0, T]   start time, seconds
    te(i)     m          [0, T]   end time, seconds
    tmax      1          [0, T]   makespan

The objective is ``tmax / T_M + sum (w - q) X + sum (w_s - q_s) S``: the
makespan term is linearised with ``tmax >= te(i)`` rows.  Robots get no
supervision columns at all, and ``X(i,j)`` is fixed to zero whenever agent
``j`` has the sentinel duration for task ``i``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .model import Scenario, ParamMatrices, is_sentinel, validate_scenario

__all__ = [
    "VarKind",
    "VarRef",
    "MilpProblem",
    "build_milp",
    "formulate",
    "export_lp",
    "parse_lp",
    "ParsedLp",
    "expected_column_count",
    "valid_inequalities",
    "heads_and_tails",
    "list_schedule",
    "round_assignment",
    "constructive_solution",
    "solution_vector",
]


class VarKind(str, enum.Enum):
    X = "X"
    S = "S"
    V = "V"
    Z = "Z"
    TS = "ts"
    TE = "te"
    TMAX = "tmax"


@dataclass(frozen=True)
class VarRef:
    kind: VarKind
    key: tuple
    index: int

    @property
    def name(self) -> str:
        if self.kind is VarKind.TMAX:
            return "tmax"
        return "_".join([self.kind.value, *map(str, self.key)])

    @property
    def is_binary(self) -> bool:
        return self.kind in (VarKind.X, VarKind.S, VarKind.V, VarKind.Z)


@dataclass(eq=False)
class MilpProblem:
    """Sparse MILP ``min c.x  s.t.  A x (sense) rhs,  lb <= x <= ub``.

    ``sense`` holds one of ``'<'``, ``'>'``, ``'='`` per row.  ``task_ids``
    maps problem-local task positions back to scenario task ids (the identity
    unless the problem is a re-planning restriction).  ``horizon`` is the
    ``T_M`` used to normalise the makespan and ``big_m`` the constant used in
    the disjunctive rows.
    """

    columns: list[VarRef]
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    row_names: list[str]
    scenario: Scenario | None = None
    params: ParamMatrices | None = None
    task_ids: tuple[int, ...] = ()
    horizon: float = 1.0
    big_m: float = 1000.0
    now: float = 0.0
    release: dict = field(default_factory=dict)
    unavailable: frozenset = frozenset()
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._lookup:
            self._lookup = {(v.kind, v.key): v.index for v in self.columns}

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def col(self, kind: VarKind | str, *key) -> int:
        """Column ordinal of a variable; raises ``KeyError`` if absent."""
        if not isinstance(kind, VarKind):
            kind = VarKind(kind)
        return self._lookup[(kind, key)]

    def has(self, kind: VarKind | str, *key) -> bool:
        if not isinstance(kind, VarKind):
            kind = VarKind(kind)
        return (kind, key) in self._lookup

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float))

    def row_activity(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float)

    def max_violation(self, x) -> float:
        """Largest constraint or bound violation of ``x`` (0 if feasible)."""
        x = np.asarray(x, dtype=float)
        act = self.row_activity(x)
        viol = np.zeros_like(act)
        le, ge, eq = self.sense == "<", self.sense == ">", self.sense == "="
        viol[le] = np.maximum(act[le] - self.rhs[le], 0)
        viol[ge] = np.maximum(self.rhs[ge] - act[ge], 0)
        viol[eq] = np.abs(act[eq] - self.rhs[eq])
        bound = np.maximum(np.maximum(self.lb - x, x - self.ub), 0)
        return float(max(viol.max(initial=0.0), bound.max(initial=0.0)))


def expected_column_count(m: int, n_a: int, n_h: int) -> int:
    p = m * (m - 1) // 2
    return m * n_a + m * n_h + p * n_a + p + 2 * m + 1


class _RowBuffer:
    def __init__(self):
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.sense: list[str] = []
        self.rhs: list[float] = []
        self.names: list[str] = []

    def add(self, name: str, terms, sense: str, rhs: float):
        r = len(self.sense)
        for col, val in terms:
            if val != 0:
                self.rows.append(r)
                self.cols.append(col)
                self.vals.append(float(val))
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        self.names.append(name)

    def matrix(self, n_cols: int) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(len(self.sense), n_cols)
        )


def formulate(
    scenario: Scenario,
    params: ParamMatrices | None = None,
    task_ids=None,
    *,
    now: float = 0.0,
    release: dict[int, float] | None = None,
    earliest_start: dict[int, float] | None = None,
    unavailable=(),
) -> MilpProblem:
    """Build the allocation MILP over a subset of tasks.

    ``build_milp`` is this function with every default.  The keyword
    arguments describe a re-planning restriction: every start time is at
    least ``now``; ``release[j]`` is the time agent ``j`` becomes free (a
    task it executes or supervises cannot start earlier);
    ``earliest_start[i]`` bounds individual tasks, e.g. successors of work
    still in progress; agents in ``unavailable`` get no assignment.
    """
    s = validate_scenario(scenario)
    params = s.params if params is None else params
    ids = tuple(range(s.n_tasks)) if task_ids is None else tuple(sorted(task_ids))
    release = dict(release or {})
    earliest_start = dict(earliest_start or {})
    unavailable = set(unavailable)

    m, n_a = len(ids), s.n_agents
    humans = s.humans
    M = s.big_m
    T_M = float(s.horizon)
    dur = params.duration
    q, qs = params.exec_quality, params.sup_quality
    w, ws = params.exec_workload, params.sup_workload

    # time window: [0, T_M] unless a late start or longer estimates need more
    start_floor = max([now, *release.values(), *earliest_start.values()], default=now)
    work = sum(
        max(dur[i, j] for j in range(n_a) if not is_sentinel(dur[i, j], M)) for i in ids
    )
    t_ub = max(T_M, start_floor + work)
    big = M if M > t_ub else 2.0 * t_ub

    columns: list[VarRef] = []
    lb: list[float] = []
    ub: list[float] = []
    integer: list[bool] = []
    cost: list[float] = []

    def new(kind, key, lo, hi, is_int, c=0.0):
        columns.append(VarRef(kind, key, len(columns)))
        lb.append(lo)
        ub.append(hi)
        integer.append(is_int)
        cost.append(c)
        return len(columns) - 1

    X, S, V, Z = {}, {}, {}, {}
    for i in ids:
        for j in range(n_a):
            fixed = is_sentinel(dur[i, j], M) or j in unavailable
            X[i, j] = new(VarKind.X, (i, j), 0.0, 0.0 if fixed else 1.0, True, w[i, j] - q[i, j])
    for i in ids:
        for j in humans:
            fixed = j in unavailable
            S[i, j] = new(VarKind.S, (i, j), 0.0, 0.0 if fixed else 1.0, True, ws[i, j] - qs[i, j])
    pairs = list(combinations(ids, 2))
    for i, k in pairs:
        for j in range(n_a):
            V[i, k, j] = new(VarKind.V, (i, k, j), 0.0, 1.0, True)
    for i, k in pairs:
        Z[i, k] = new(VarKind.Z, (i, k), 0.0, 1.0, True)
    TS = {i: new(VarKind.TS, (i,), float(max(now, earliest_start.get(i, 0.0))), t_ub, False) for i in ids}
    TE = {i: new(VarKind.TE, (i,), float(now), t_ub, False) for i in ids}
    TMAX = new(VarKind.TMAX, (), 0.0, t_ub, False, 1.0 / T_M)

    rb = _RowBuffer()
    for i in ids:
        rb.add(f"tmax_{i}", [(TMAX, 1.0), (TE[i], -1.0)], ">", 0.0)
    for i in ids:
        rb.add(f"assign_{i}", [(X[i, j], 1.0) for j in range(n_a)], "=", 1 + int(s.tasks[i].collaborative))
    for i in ids:
        for j in humans:
            rb.add(f"excl_{i}_{j}", [(S[i, j], 1.0), (X[i, j], 1.0)], "<", 1.0)
    for i in ids:
        terms = [(X[i, j], q[i, j]) for j in range(n_a) if not is_sentinel(dur[i, j], M)]
        terms += [(S[i, j], qs[i, j]) for j in humans]
        rb.add(f"quality_{i}", terms, ">", s.min_quality)
    for i in ids:
        for j in range(n_a):
            if not is_sentinel(dur[i, j], M):
                rb.add(f"dur_{i}_{j}", [(TE[i], 1.0), (TS[i], -1.0), (X[i, j], -dur[i, j])], ">", 0.0)
    for i, k in zip(*np.nonzero(s.precedence)):
        if i in TS and k in TS:
            rb.add(f"prec_{i}_{k}", [(TS[k], 1.0), (TE[i], -1.0)], ">", 0.0)
    for i, k in pairs:
        for j in range(n_a):
            occ = [(X[i, j], -big), (X[k, j], -big)]
            if (i, j) in S:
                occ += [(S[i, j], -big), (S[k, j], -big)]
            rb.add(f"agent_a_{i}_{k}_{j}", [(TS[k], 1.0), (TE[i], -1.0), *occ, (V[i, k, j], -big)], ">", -3 * big)
            rb.add(f"agent_b_{i}_{k}_{j}", [(TS[i], 1.0), (TE[k], -1.0), *occ, (V[i, k, j], big)], ">", -2 * big)
    for i, k in pairs:
        if s.spatial[i, k] or s.spatial[k, i]:
            rb.add(f"spatial_a_{i}_{k}", [(TS[k], 1.0), (TE[i], -1.0), (Z[i, k], -big)], ">", -big)
            rb.add(f"spatial_b_{i}_{k}", [(TS[i], 1.0), (TE[k], -1.0), (Z[i, k], big)], ">", 0.0)
    for j, r in sorted(release.items()):
        if r <= now:
            continue
        for i in ids:
            rb.add(f"release_{i}_{j}", [(TS[i], 1.0), (X[i, j], -r)], ">", 0.0)
            if (i, j) in S:
                rb.add(f"release_s_{i}_{j}", [(TS[i], 1.0), (S[i, j], -r)], ">", 0.0)

    n = len(columns)
    return MilpProblem(
        columns=columns,
        lb=np.array(lb),
        ub=np.array(ub),
        integer=np.array(integer, dtype=bool),
        c=np.array(cost),
        A=rb.matrix(n),
        sense=np.array(rb.sense),
        rhs=np.array(rb.rhs),
        row_names=rb.names,
        scenario=s,
        params=params,
        task_ids=ids,
        horizon=T_M,
        big_m=big,
        now=float(now),
        release=release,
        unavailable=frozenset(unavailable),
    )


def build_milp(scenario: Scenario) -> MilpProblem:
    """The full allocation MILP of a scenario, over all tasks."""
    return formulate(scenario)


# --------------------------------------------------------------------------
# Solver aids: valid inequalities and a constructive incumbent


def _capable(problem: MilpProblem, i: int) -> list[int]:
    return [j for j in range(problem.scenario.n_agents) if problem.ub[problem.col(VarKind.X, i, j)] > 0]


def _min_duration(dur: np.ndarray, i: int, agents: list[int], n_exec: int) -> float:
    vals = sorted(dur[i, j] for j in agents)
    if len(vals) < n_exec:
        return 0.0
    return float(vals[n_exec - 1])


def heads_and_tails(problem: MilpProblem) -> tuple[dict, dict, dict]:
    """Earliest start, minimum remaining work after completion, minimum duration.

    All three use the shortest duration any capable (set of) executor(s)
    could achieve, so they bound every feasible schedule of ``problem``.
    """
    s = problem.scenario
    dur = problem.params.duration
    ids = problem.task_ids
    mind = {i: _min_duration(dur, i, _capable(problem, i), s.tasks[i].n_executors) for i in ids}
    preds = {k: [i for i in ids if s.precedence[i, k]] for k in ids}
    succs = {i: [k for k in ids if s.precedence[i, k]] for i in ids}
    order = _topological(ids, preds)
    head, tail = {}, {}
    for k in order:
        lo = problem.lb[problem.col(VarKind.TS, k)]
        head[k] = max([lo, *(head[i] + mind[i] for i in preds[k])])
    for i in reversed(order):
        tail[i] = max([0.0, *(tail[k] + mind[k] for k in succs[i])])
    return head, tail, mind


def _topological(ids, preds) -> list[int]:
    done, order = set(), []
    pending = list(ids)
    while pending:
        rest = []
        for k in pending:
            if all(i in done for i in preds[k]):
                done.add(k)
                order.append(k)
            else:
                rest.append(k)
        if len(rest) == len(pending):
            raise ValueError("precedence cycle")
        pending = rest
    return order


def valid_inequalities(problem: MilpProblem) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray, list[str]]:
    """Rows that every integer solution satisfies but the relaxation may not.

    These are supervision implications ``X(i,j) <= sum_h S(i,h)``, added
    whenever agent ``j`` cannot reach the quality floor on task ``i``
    without a supervisor, even with the best possible co-executor.  In the
    relaxation a supervisor can otherwise be bought fractionally (e.g.
    ``S = 0.1`` closes a 0.1 quality gap).  The integer feasible set is
    unchanged.
    """
    s = problem.scenario
    P = problem.params
    q, qs = P.exec_quality, P.sup_quality
    rb = _RowBuffer()

    for i in problem.task_ids:
        cap = _capable(problem, i)
        sups = [h for h in s.humans if problem.has(VarKind.S, i, h) and problem.ub[problem.col(VarKind.S, i, h)] > 0]
        for j in cap:
            partner = 0.0
            if s.tasks[i].collaborative:
                others = [q[i, k] for k in cap if k != j]
                partner = max(others, default=0.0)
            if q[i, j] + partner < s.min_quality:
                terms = [(problem.col(VarKind.X, i, j), 1.0)]
                terms += [(problem.col(VarKind.S, i, h), -1.0) for h in sups if h != j and qs[i, h] > 0]
                rb.add(f"needsup_{i}_{j}", terms, "<", 0.0)

    if not rb.names:
        return sp.csr_matrix((0, problem.n_cols)), np.array([], dtype="<U1"), np.zeros(0), []
    return rb.matrix(problem.n_cols), np.array(rb.sense), np.array(rb.rhs), rb.names


def solution_vector(problem: MilpProblem, executors: dict, supervisors: dict, start: dict, end: dict) -> np.ndarray:
    """Column vector of an allocation; ordering binaries follow the times."""
    x = np.zeros(problem.n_cols)
    for i in problem.task_ids:
        for j in executors[i]:
            x[problem.col(VarKind.X, i, j)] = 1.0
        for j in supervisors.get(i, ()):
            x[problem.col(VarKind.S, i, j)] = 1.0
        x[problem.col(VarKind.TS, i)] = start[i]
        x[problem.col(VarKind.TE, i)] = end[i]
    for i, k in combinations(problem.task_ids, 2):
        first = 1.0 if end[i] <= start[k] else 0.0
        for j in range(problem.scenario.n_agents):
            x[problem.col(VarKind.V, i, k, j)] = first
        x[problem.col(VarKind.Z, i, k)] = first
    x[problem.col(VarKind.TMAX)] = max(end.values(), default=0.0)
    x[problem.col(VarKind.TMAX)] = max(x[problem.col(VarKind.TMAX)], problem.lb[problem.col(VarKind.TMAX)])
    return x


def list_schedule(problem: MilpProblem, executors: dict, supervisors: dict, priority: dict):
    """Earliest-start schedule of a fixed assignment.

    Tasks are dispatched in ``priority`` order among those whose
    predecessors are already placed; each starts as soon as its
    predecessors, its agents and every placed spatially conflicting task
    are done.  Returns ``(start, end)`` dicts.
    """
    s = problem.scenario
    dur = problem.params.duration
    ids = problem.task_ids
    free = {j: problem.release.get(j, problem.now) for j in range(s.n_agents)}
    start, end = {}, {}
    pending = sorted(ids, key=lambda i: (priority[i], i))
    while pending:
        for pos, i in enumerate(pending):
            if all(p in end for p in ids if s.precedence[p, i]):
                break
        else:
            raise ValueError("precedence cycle")
        pending.pop(pos)
        agents = list(executors[i]) + list(supervisors.get(i, ()))
        t0 = max([problem.lb[problem.col(VarKind.TS, i)],
                  *(end[p] for p in ids if s.precedence[p, i] and p in end),
                  *(free[j] for j in agents),
                  *(end[k] for k in end if s.spatial[i, k] or s.spatial[k, i])])
        start[i] = float(t0)
        end[i] = float(t0 + max(dur[i, j] for j in executors[i]))
        for j in agents:
            free[j] = end[i]
    return start, end


def round_assignment(problem: MilpProblem, x: np.ndarray):
    """Integral executors and supervisors guided by a fractional point.

    Executors are the ``1 + C_i`` capable agents with the largest ``X``
    values; humans are then added as supervisors, largest ``S`` first,
    while the quality floor is unmet.  Returns ``None`` when the floor
    cannot be met this way.
    """
    s = problem.scenario
    P = problem.params
    executors, supervisors = {}, {}
    for i in problem.task_ids:
        cap = _capable(problem, i)
        need = s.tasks[i].n_executors
        if len(cap) < need:
            return None
        cap.sort(key=lambda j: (-round(x[problem.col(VarKind.X, i, j)], 9),
                                P.exec_workload[i, j] - P.exec_quality[i, j], j))
        ex = tuple(sorted(cap[:need]))
        quality = sum(P.exec_quality[i, j] for j in ex)
        sups = []
        cands = [h for h in s.humans if h not in ex and problem.ub[problem.col(VarKind.S, i, h)] > 0]
        cands.sort(key=lambda h: (-round(x[problem.col(VarKind.S, i, h)], 9), -P.sup_quality[i, h], h))
        for h in cands:
            if quality >= s.min_quality - 1e-12 and x[problem.col(VarKind.S, i, h)] < 0.5:
                break
            sups.append(h)
            quality += P.sup_quality[i, h]
        if quality < s.min_quality - 1e-12:
            return None
        executors[i] = ex
        supervisors[i] = tuple(sorted(sups))
    return executors, supervisors


def constructive_solution(problem: MilpProblem, x: np.ndarray | None = None) -> np.ndarray | None:
    """Feasible column vector built from a (possibly fractional) point.

    Rounds the assignment with :func:`round_assignment` and schedules it
    with :func:`list_schedule`, dispatching in order of the point's start
    times.  Without a point, the cheapest executors and a head-first order
    are used.
    """
    if x is None:
        x = np.zeros(problem.n_cols)
        for i in problem.task_ids:
            for j in _capable(problem, i):
                c = problem.col(VarKind.X, i, j)
                x[c] = -problem.c[c]
        head, _, _ = heads_and_tails(problem)
        prio = head
    else:
        prio = {i: round(float(x[problem.col(VarKind.TS, i)]), 9) for i in problem.task_ids}
    rounded = round_assignment(problem, x)
    if rounded is None:
        return None
    executors, supervisors = rounded
    start, end = list_schedule(problem, executors, supervisors, prio)
    y = solution_vector(problem, executors, supervisors, start, end)
    if np.any(y > problem.ub + 1e-9):
        return None
    return y


# --------------------------------------------------------------------------
# LP format


def _num(v: float) -> str:
    return repr(float(v))


def _linear(terms, names) -> list[str]:
    out = []
    for col, val in terms:
        sign = "-" if val < 0 else "+"
        mag = abs(val)
        coef = "" if mag == 1.0 else _num(mag) + " "
        out.append(f"{sign} {coef}{names[col]}")
    return out


def _wrap(head: str, parts: list[str], tail: str = "", width: int = 200) -> list[str]:
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > width:
            lines.append(cur)
            cur = "   "
        cur += " " + p
    lines.append(cur + tail)
    return lines


def export_lp(problem: MilpProblem) -> str:
    """Render ``problem`` in CPLEX LP text format.

    Variable names follow ``X_i_j``, ``S_i_j``, ``V_i_k_j``, ``Z_i_k``,
    ``ts_i``, ``te_i`` and ``tmax`` with scenario task ids.
    """
    names = [c.name for c in problem.columns]
    lines = ["\\ human multi-robot task allocation MILP"]
    if problem.scenario is not None and problem.scenario.name:
        lines.append(f"\\ scenario: {problem.scenario.name}")
    lines.append("Minimize")
    obj_terms = [(j, v) for j, v in enumerate(problem.c) if v != 0]
    lines += _wrap(" obj:", _linear(obj_terms, names) or ["0 tmax"])
    lines.append("Subject To")
    A = problem.A.tocsr()
    op = {"<": "<=", ">": ">=", "=": "="}
    for r in range(problem.n_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        terms = list(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()))
        lines += _wrap(f" {problem.row_names[r]}:", _linear(terms, names),
                       f" {op[problem.sense[r]]} {_num(problem.rhs[r])}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = problem.lb[j], problem.ub[j]
        if lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        else:
            lines.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    lines.append("Binaries")
    binaries = [names[j] for j in range(len(names)) if problem.integer[j]]
    for k in range(0, len(binaries), 8):
        lines.append(" " + " ".join(binaries[k:k + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


@dataclass
class ParsedLp:
    names: list[str]
    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray


_TERM = re.compile(r"([+-])\s*(?:([0-9.eE+-]+)\s+)?([A-Za-z_][A-Za-z0-9_]*)")


def parse_lp(text: str) -> ParsedLp:
    """Read back the LP subset written by :func:`export_lp`.

    Not a general LP-format reader; it exists for round-trip checks.
    """
    section = None
    statements: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": []}
    current: list[str] = []

    def flush():
        if current:
            statements[section].append(" ".join(current))
            current.clear()

    keys = {"minimize": "obj", "subject to": "st", "bounds": "bounds", "binaries": "bin", "end": None}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        if line.lower() in keys:
            if section is not None:
                flush()
            section = keys[line.lower()]
            continue
        if section in ("obj", "st"):
            if raw.startswith("    ") and current:
                current.append(line)
            else:
                flush()
                current.append(line)
        elif section == "bounds":
            statements["bounds"].append(line)
        elif section == "bin":
            statements["bin"].extend(line.split())
    if section is not None:
        flush()

    names: list[str] = []
    index: dict[str, int] = {}

    def idx(name):
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    def terms(expr):
        expr = expr.strip()
        if expr and expr[0] not in "+-":
            expr = "+ " + expr
        return [(idx(n), (-1.0 if sg == "-" else 1.0) * (float(v) if v else 1.0))
                for sg, v, n in _TERM.findall(expr)]

    obj = statements["obj"][0].split(":", 1)[1] if statements["obj"] else ""
    obj_terms = terms(obj)
    rows, cols, vals, senses, rhs = [], [], [], [], []
    for r, stmt in enumerate(statements["st"]):
        body = stmt.split(":", 1)[1]
        m = re.match(r"(.*?)(<=|>=|=)\s*([-+0-9.eE]+)\s*$", body)
        for col, val in terms(m.group(1)):
            rows.append(r)
            cols.append(col)
            vals.append(val)
        senses.append({"<=": "<", ">=": ">", "=": "="}[m.group(2)])
        rhs.append(float(m.group(3)))
    bounds = {}
    for b in statements["bounds"]:
        if "<=" in b:
            lo, name, hi = [p.strip() for p in b.split("<=")]
            bounds[idx(name)] = (float(lo), float(hi))
        else:
            name, val = [p.strip() for p in b.split("=")]
            bounds[idx(name)] = (float(val), float(val))
    binaries = {idx(n) for n in statements["bin"]}
    n = len(names)
    c = np.zeros(n)
    for col, val in obj_terms:
        c[col] += val
    lb, ub = np.zeros(n), np.full(n, np.inf)
    for col, (lo, hi) in bounds.items():
        lb[col], ub[col] = lo, hi
    integer = np.zeros(n, dtype=bool)
    integer[list(binaries)] = True
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(senses), n))
    return ParsedLp(names, c, A, np.array(senses), np.array(rhs), lb, ub, integer)
