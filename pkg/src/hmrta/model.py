"""Domain types for human multi-robot task allocation scenarios.

A :class:`Scenario` bundles the agents, the tasks, the per (task, agent)
parameter matrices and the pairwise constraint matrices.  Matrices are
``numpy`` arrays of shape ``(m, n_a)`` (tasks by agents) or ``(m, m)``.
Infeasible (task, agent) pairs are encoded with the big-M sentinel: any
duration or workload ``>= big_m`` means "this agent cannot do this task".

:func:`validate_scenario` is the gatekeeper used by every other module; it
derives the spatial conflict matrix from task positions when absent and
fills in the horizon ``T_M``.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "AgentKind",
    "Agent",
    "Task",
    "ParamMatrices",
    "Scenario",
    "Violation",
    "ScenarioError",
    "DimensionMismatch",
    "PrecedenceCycle",
    "AsymmetricSpatialMatrix",
    "QualityOutOfRange",
    "GroupInconsistency",
    "BigMTooSmall",
    "MissingPosition",
    "TaskInfeasibleForAllAgents",
    "InvalidIdentifiers",
    "InvalidParameter",
    "check_scenario",
    "validate_scenario",
    "derive_spatial_conflicts",
    "compute_horizon",
    "is_sentinel",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "random_scenario",
    "bundled_scenario",
    "BUNDLED_SCENARIO",
]

BUNDLED_SCENARIO = "assembly.json"


class AgentKind(str, enum.Enum):
    HUMAN = "human"
    ROBOT = "robot"


@dataclass(frozen=True)
class Agent:
    id: int
    kind: AgentKind
    label: str = ""

    @property
    def is_human(self) -> bool:
        return self.kind is AgentKind.HUMAN


@dataclass(frozen=True)
class Task:
    id: int
    group: int | str
    collaborative: bool = False
    position: tuple[float, float, float] | None = None

    @property
    def n_executors(self) -> int:
        return 2 if self.collaborative else 1


# --------------------------------------------------------------------------
# errors


@dataclass(frozen=True)
class Violation:
    """One broken invariant, with the offending indices."""

    error: type
    message: str
    indices: tuple = ()

    def __str__(self) -> str:
        return f"{self.error.__name__}: {self.message}"


class ScenarioError(ValueError):
    """Base class of scenario validation failures.

    ``violations`` holds every problem found, not only the first one.
    """

    def __init__(self, message: str, violations: Sequence[Violation] = ()):
        super().__init__(message)
        self.violations = list(violations)


class DimensionMismatch(ScenarioError):
    pass


class PrecedenceCycle(ScenarioError):
    pass


class AsymmetricSpatialMatrix(ScenarioError):
    pass


class QualityOutOfRange(ScenarioError):
    pass


class GroupInconsistency(ScenarioError):
    pass


class BigMTooSmall(ScenarioError):
    pass


class MissingPosition(ScenarioError):
    pass


class TaskInfeasibleForAllAgents(ScenarioError):
    pass


class InvalidIdentifiers(ScenarioError):
    pass


class InvalidParameter(ScenarioError):
    pass


# --------------------------------------------------------------------------
# parameter containers


_PARAM_FIELDS = ("duration", "exec_quality", "sup_quality", "exec_workload", "sup_workload")


@dataclass(frozen=True, eq=False)
class ParamMatrices:
    """The five ``(m, n_a)`` parameter matrices.

    ``duration`` is in seconds; qualities are unitless in ``[0, 1]``;
    workloads are unitless and non-negative.  The same container is used for
    nominal scenario values and for online estimates (see ``replan``).
    """

    duration: np.ndarray
    exec_quality: np.ndarray
    sup_quality: np.ndarray
    exec_workload: np.ndarray
    sup_workload: np.ndarray

    def __post_init__(self):
        for name in _PARAM_FIELDS:
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.duration.shape

    def copy(self, **changes) -> "ParamMatrices":
        values = {name: np.array(getattr(self, name)) for name in _PARAM_FIELDS}
        values.update(changes)
        return ParamMatrices(**values)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _PARAM_FIELDS}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamMatrices):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in _PARAM_FIELDS
        )


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete problem instance.

    ``precedence[i, k] == 1`` forces task ``i`` to end before task ``k``
    starts; ``spatial[i, k] == 1`` forbids ``i`` and ``k`` from overlapping in
    time.  ``spatial`` may be ``None`` before validation if every task has a
    position; ``horizon`` (``T_M``) may be ``None`` and is then computed.
    """

    agents: tuple[Agent, ...]
    tasks: tuple[Task, ...]
    params: ParamMatrices
    precedence: np.ndarray
    spatial: np.ndarray | None = None
    min_quality: float = 0.8
    big_m: float = 1000.0
    epsilon: float | None = None
    horizon: float | None = None
    name: str = ""
    notes: str = ""
    validated: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        prec = np.array(self.precedence, dtype=np.int8)
        prec.setflags(write=False)
        object.__setattr__(self, "precedence", prec)
        if self.spatial is not None:
            spat = np.array(self.spatial, dtype=np.int8)
            spat.setflags(write=False)
            object.__setattr__(self, "spatial", spat)

    # sizes and index sets
    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def humans(self) -> list[int]:
        return [a.id for a in self.agents if a.is_human]

    @property
    def robots(self) -> list[int]:
        return [a.id for a in self.agents if not a.is_human]

    @property
    def collaborative(self) -> np.ndarray:
        return np.array([t.collaborative for t in self.tasks], dtype=bool)

    @property
    def groups(self) -> list:
        return [t.group for t in self.tasks]

    def same_group(self, i: int) -> list[int]:
        """Task ids sharing the group of task ``i`` (``i`` included)."""
        g = self.tasks[i].group
        return [t.id for t in self.tasks if t.group == g]

    def capable(self, i: int, j: int) -> bool:
        """Whether agent ``j`` may execute task ``i`` (finite duration)."""
        return not is_sentinel(self.params.duration[i, j], self.big_m)

    def replace(self, **changes) -> "Scenario":
        changes.setdefault("validated", False)
        return dataclasses.replace(self, **changes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        same_spatial = (self.spatial is None and other.spatial is None) or (
            self.spatial is not None
            and other.spatial is not None
            and np.array_equal(self.spatial, other.spatial)
        )
        return (
            self.agents == other.agents
            and self.tasks == other.tasks
            and self.params == other.params
            and np.array_equal(self.precedence, other.precedence)
            and same_spatial
            and self.min_quality == other.min_quality
            and self.big_m == other.big_m
            and self.epsilon == other.epsilon
            and self.horizon == other.horizon
        )


def is_sentinel(value, big_m: float):
    """True where ``value`` encodes the big-M "not allowed" sentinel."""
    return np.asarray(value) >= big_m


# --------------------------------------------------------------------------
# derived quantities


def derive_spatial_conflicts(positions: Sequence, epsilon: float) -> np.ndarray:
    """Binary matrix of task pairs closer than ``epsilon`` (Euclidean, strict).

    >>> derive_spatial_conflicts([(0, 0, 0), (0, 0, 0.5)], 1.0)
    array([[0, 1],
           [1, 0]], dtype=int8)
    """
    if epsilon is None or not epsilon > 0:
        raise ValueError("epsilon must be a positive distance")
    missing = [i for i, p in enumerate(positions) if p is None]
    if missing:
        v = Violation(MissingPosition, f"tasks {missing} have no position", tuple(missing))
        raise MissingPosition(str(v), [v])
    pts = np.asarray(positions, dtype=float).reshape(len(positions), -1)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    conflicts = (dist < epsilon).astype(np.int8)
    np.fill_diagonal(conflicts, 0)
    return conflicts


def compute_horizon(duration, big_m: float) -> float:
    """Sum over tasks of the worst finite duration.

    Any schedule that runs tasks one after the other in a precedence order
    finishes within this bound, so it is a valid upper limit for every time
    variable.
    """
    duration = np.asarray(duration, dtype=float)
    finite = ~is_sentinel(duration, big_m)
    dead = np.flatnonzero(~finite.any(axis=1))
    if dead.size:
        v = Violation(
            TaskInfeasibleForAllAgents,
            f"tasks {dead.tolist()} have no agent with a finite duration",
            tuple(dead.tolist()),
        )
        raise TaskInfeasibleForAllAgents(str(v), [v])
    return float(np.where(finite, duration, -np.inf).max(axis=1).sum())


def _find_cycle(adj: np.ndarray) -> list[int] | None:
    """Return one directed cycle of ``adj`` as a node list, or None."""
    n = adj.shape[0]
    color = [0] * n  # 0 new, 1 on stack, 2 done
    parent = [-1] * n
    succ = [np.flatnonzero(adj[i]).tolist() for i in range(n)]
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
            elif color[nxt] == 0:
                color[nxt] = 1
                parent[nxt] = node
                stack.append((nxt, iter(succ[nxt])))
            elif color[nxt] == 1:
                cycle = [node]
                while cycle[-1] != nxt:
                    cycle.append(parent[cycle[-1]])
                return cycle[::-1]
    return None


# --------------------------------------------------------------------------
# validation


def check_scenario(s: Scenario) -> list[Violation]:
    """Collect every invariant violation of ``s`` without raising."""
    out: list[Violation] = []

    def bad(err, msg, idx=()):
        out.append(Violation(err, msg, tuple(idx)))

    n_a, m = len(s.agents), len(s.tasks)
    if n_a < 1:
        bad(InvalidIdentifiers, "a scenario needs at least one agent")
    if [a.id for a in s.agents] != list(range(n_a)):
        bad(InvalidIdentifiers, "agent ids must be 0..n_a-1 in order", [a.id for a in s.agents])
    if [t.id for t in s.tasks] != list(range(m)):
        bad(InvalidIdentifiers, "task ids must be 0..m-1 in order", [t.id for t in s.tasks])
    for a in s.agents:
        if not isinstance(a.kind, AgentKind):
            bad(InvalidIdentifiers, f"agent {a.id} has unknown kind {a.kind!r}", [a.id])

    for name, arr in s.params.as_dict().items():
        if arr.shape != (m, n_a):
            bad(DimensionMismatch, f"{name} has shape {arr.shape}, expected {(m, n_a)}")
    for name, arr in (("precedence", s.precedence), ("spatial", s.spatial)):
        if arr is not None and arr.shape != (m, m):
            bad(DimensionMismatch, f"{name} has shape {arr.shape}, expected {(m, m)}")
    if out:
        # shapes are broken; nothing else can be checked reliably
        return out

    M = s.big_m
    if not (np.isfinite(M) and M > 0):
        bad(BigMTooSmall, f"big_m must be a positive number, got {M}")
        return out
    if not (0 < s.min_quality <= 1):
        bad(QualityOutOfRange, f"min_quality {s.min_quality} not in (0, 1]")

    p = s.params
    dur_inf = is_sentinel(p.duration, M)
    for name in ("exec_quality", "sup_quality"):
        arr = getattr(p, name)
        allowed = (arr >= 0) & (arr <= 1)
        if name == "exec_quality":
            allowed |= dur_inf & is_sentinel(arr, M)
        for i, j in zip(*np.nonzero(~allowed)):
            bad(QualityOutOfRange, f"{name}[{i}][{j}] = {arr[i, j]} not in [0, 1]", (i, j))
    for j in s.robots:
        for i in np.flatnonzero(p.sup_quality[:, j] != 0):
            bad(QualityOutOfRange, f"robot {j} has supervision quality on task {i}", (i, j))
    for name in ("duration", "exec_workload", "sup_workload"):
        arr = getattr(p, name)
        for i, j in zip(*np.nonzero(~(arr >= 0) | ~np.isfinite(arr))):
            bad(InvalidParameter, f"{name}[{i}][{j}] = {arr[i, j]} must be finite and >= 0", (i, j))
    for i, j in zip(*np.nonzero(p.duration <= 0)):
        bad(InvalidParameter, f"duration[{i}][{j}] must be positive", (i, j))

    by_group: dict[Any, list[int]] = {}
    for t in s.tasks:
        by_group.setdefault(t.group, []).append(t.id)
    for g, members in by_group.items():
        first = members[0]
        for name in ("exec_quality", "sup_quality"):
            arr = getattr(p, name)
            for k in members[1:]:
                diff = np.flatnonzero(arr[k] != arr[first])
                for j in diff:
                    if name == "exec_quality" and (dur_inf[k, j] or dur_inf[first, j]):
                        continue
                    bad(GroupInconsistency,
                        f"{name} differs between tasks {first} and {k} of group {g!r} for agent {j}",
                        (first, k, j))

    prec = s.precedence
    if not np.isin(prec, (0, 1)).all():
        bad(PrecedenceCycle, "precedence matrix must be binary")
    for i in np.flatnonzero(np.diag(prec)):
        bad(PrecedenceCycle, f"task {i} precedes itself", (i, i))
    for i, k in zip(*np.nonzero(np.triu(prec & prec.T, 1))):
        bad(PrecedenceCycle, f"tasks {i} and {k} precede each other", (i, k))
    off_diag = prec.copy()
    np.fill_diagonal(off_diag, 0)
    off_diag = off_diag & ~(off_diag & off_diag.T)
    cycle = _find_cycle(off_diag)
    if cycle is not None:
        bad(PrecedenceCycle, "precedence cycle " + " -> ".join(map(str, cycle + cycle[:1])), cycle)

    spat = s.spatial
    if spat is None:
        if s.epsilon is None:
            bad(MissingPosition, "no spatial matrix and no epsilon to derive one")
        else:
            missing = [t.id for t in s.tasks if t.position is None]
            if missing:
                bad(MissingPosition, f"tasks {missing} have no position", missing)
    else:
        if not np.isin(spat, (0, 1)).all():
            bad(AsymmetricSpatialMatrix, "spatial matrix must be binary")
        for i, k in zip(*np.nonzero(np.triu(spat != spat.T, 1))):
            bad(AsymmetricSpatialMatrix, f"spatial[{i}][{k}] != spatial[{k}][{i}]", (i, k))

    if not dur_inf.all(axis=1).any():
        horizon = s.horizon if s.horizon is not None else compute_horizon(p.duration, M)
        if not horizon > 0:
            bad(BigMTooSmall, f"horizon must be positive, got {horizon}")
        elif not M > horizon:
            bad(BigMTooSmall, f"big_m {M} must exceed the horizon {horizon:.6g}")
    else:
        dead = np.flatnonzero(dur_inf.all(axis=1)).tolist()
        bad(TaskInfeasibleForAllAgents, f"tasks {dead} have no agent with a finite duration", dead)
    for i, t in enumerate(s.tasks):
        if t.collaborative and (~dur_inf[i]).sum() < 2:
            bad(TaskInfeasibleForAllAgents, f"collaborative task {i} has fewer than two capable agents", (i,))
    return out


def validate_scenario(s: Scenario) -> Scenario:
    """Check every invariant and return a completed, validated scenario.

    The returned scenario has ``spatial`` (with a zero diagonal) and
    ``horizon`` filled in.  On failure the exception class of the first
    violation is raised; its ``violations`` attribute lists all of them.
    Validating an already validated scenario returns it unchanged.
    """
    if s.validated:
        return s
    problems = check_scenario(s)
    if problems:
        raise problems[0].error("; ".join(str(v) for v in problems), problems)
    spatial = s.spatial
    if spatial is None:
        spatial = derive_spatial_conflicts([t.position for t in s.tasks], s.epsilon)
    else:
        spatial = np.array(spatial)
        np.fill_diagonal(spatial, 0)
    horizon = s.horizon if s.horizon is not None else compute_horizon(s.params.duration, s.big_m)
    return dataclasses.replace(s, spatial=spatial, horizon=float(horizon), validated=True)


# --------------------------------------------------------------------------
# JSON


def _matrix(raw, big_m: float) -> np.ndarray:
    return np.array(
        [[big_m if (isinstance(v, str) and v.strip().upper() == "M") else float(v) for v in row]
         for row in raw],
        dtype=float,
    )


def _pairs_to_matrix(pairs: Iterable, m: int, symmetric: bool = False) -> np.ndarray:
    mat = np.zeros((m, m), dtype=np.int8)
    for i, k in pairs:
        mat[i, k] = 1
        if symmetric:
            mat[k, i] = 1
    return mat


def scenario_from_dict(raw: dict) -> Scenario:
    """Build an unvalidated :class:`Scenario` from the JSON document layout."""
    big_m = float(raw.get("big_M", raw.get("big_m", 1000.0)))
    agents = tuple(
        Agent(int(a["id"]), AgentKind(a["kind"]), a.get("label", "")) for a in raw["agents"]
    )
    tasks = tuple(
        Task(
            int(t["id"]),
            t["group"],
            bool(t.get("collaborative", False)),
            tuple(float(x) for x in t["position"]) if t.get("position") is not None else None,
        )
        for t in raw["tasks"]
    )
    m = len(tasks)
    params = ParamMatrices(**{name: _matrix(raw[name], big_m) for name in _PARAM_FIELDS})
    spatial = None
    if raw.get("spatial") is not None:
        spatial = _pairs_to_matrix(raw["spatial"], m, symmetric=False)
    return Scenario(
        agents=agents,
        tasks=tasks,
        params=params,
        precedence=_pairs_to_matrix(raw.get("precedence", []), m),
        spatial=spatial,
        min_quality=float(raw.get("min_quality", 0.8)),
        big_m=big_m,
        epsilon=None if raw.get("epsilon") is None else float(raw["epsilon"]),
        horizon=None if raw.get("horizon") is None else float(raw["horizon"]),
        name=raw.get("name", ""),
        notes=raw.get("notes", ""),
    )


def load_scenario(path) -> Scenario:
    """Read a scenario JSON file (not validated)."""
    with open(Path(path), encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def bundled_scenario() -> Scenario:
    """The bundled 14-task assembly scenario (2 robots, 1 human), validated."""
    text = resources.files("hmrta.data").joinpath(BUNDLED_SCENARIO).read_text(encoding="utf-8")
    return validate_scenario(scenario_from_dict(json.loads(text)))


def scenario_to_dict(s: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict`; sentinels are written as ``"M"``."""

    def mat(arr):
        return [["M" if v >= s.big_m else float(v) for v in row] for row in arr]

    out = {
        "schema_version": 1,
        "name": s.name,
        "notes": s.notes,
        "agents": [{"id": a.id, "kind": a.kind.value, "label": a.label} for a in s.agents],
        "tasks": [
            {
                "id": t.id,
                "group": t.group,
                "collaborative": t.collaborative,
                **({"position": list(t.position)} if t.position is not None else {}),
            }
            for t in s.tasks
        ],
    }
    out.update({name: mat(arr) for name, arr in s.params.as_dict().items()})
    out["precedence"] = [[int(i), int(k)] for i, k in zip(*np.nonzero(s.precedence))]
    if s.spatial is not None:
        out["spatial"] = [[int(i), int(k)] for i, k in zip(*np.nonzero(s.spatial))]
    out["min_quality"] = s.min_quality
    out["big_M"] = s.big_m
    out["epsilon"] = s.epsilon
    if s.horizon is not None:
        out["horizon"] = s.horizon
    return out


# --------------------------------------------------------------------------
# random instances


def random_scenario(
    rng: np.random.Generator,
    n_tasks: int,
    n_robots: int = 1,
    n_humans: int = 1,
    *,
    n_groups: int = 2,
    p_precedence: float = 0.25,
    p_spatial: float = 0.2,
    p_collaborative: float = 0.2,
    p_unreachable: float = 0.2,
    duration_range: tuple[float, float] = (5.0, 30.0),
    min_quality: float = 0.8,
    big_m: float = 1000.0,
) -> Scenario:
    """A valid random scenario (not necessarily feasible as an MILP).

    Qualities and workloads are drawn per (group, agent) so group
    consistency holds.  Precedence only points from lower to higher task
    ids, which keeps it acyclic; spatial conflicts are symmetric.  Robots
    may be unable to reach a task (sentinel duration) as long as enough
    agents remain for the task's executor count.  Groups holding a
    collaborative task draw execution qualities in [0.3, 0.5], so the
    summed quality of any executing pair is itself a valid [0, 1] score.
    """
    agents = [Agent(j, AgentKind.ROBOT, f"robot {j + 1}") for j in range(n_robots)]
    agents += [Agent(n_robots + h, AgentKind.HUMAN, f"human {h + 1}") for h in range(n_humans)]
    n_a = len(agents)
    m = n_tasks
    groups = rng.integers(0, max(n_groups, 1), size=m)
    q_g = rng.uniform(0.3, 1.0, size=(max(n_groups, 1), n_a))
    qs_g = rng.uniform(0.3, 1.0, size=(max(n_groups, 1), n_a))
    w_g = rng.uniform(0.0, 1.0, size=(max(n_groups, 1), n_a))
    ws_g = rng.uniform(0.0, 1.0, size=(max(n_groups, 1), n_a))
    humans = [a.id for a in agents if a.is_human]
    robots = [a.id for a in agents if not a.is_human]
    qs_g[:, robots] = 0.0
    ws_g[:, robots] = 0.0

    duration = np.round(rng.uniform(*duration_range, size=(m, n_a)), 1)
    collab = np.zeros(m, dtype=bool)
    for i in range(m):
        collab[i] = n_a >= 2 and rng.random() < p_collaborative
        need = 2 if collab[i] else 1
        for j in robots:
            capable = int(np.sum(duration[i] < big_m))
            if capable > need and rng.random() < p_unreachable:
                duration[i, j] = big_m
    for g in np.unique(groups[collab]):
        q_g[g] = 0.3 + (q_g[g] - 0.3) * (0.2 / 0.7)
    exec_quality = np.where(duration >= big_m, big_m, q_g[groups])
    exec_quality = np.round(exec_quality, 3)
    params = ParamMatrices(
        duration=duration,
        exec_quality=exec_quality,
        sup_quality=np.round(qs_g[groups], 3),
        exec_workload=np.round(w_g[groups], 3),
        sup_workload=np.round(ws_g[groups], 3),
    )
    prec = np.triu(rng.random((m, m)) < p_precedence, 1).astype(np.int8)
    spat = np.triu(rng.random((m, m)) < p_spatial, 1)
    spat = (spat | spat.T).astype(np.int8)
    tasks = [Task(i, int(groups[i]), bool(collab[i])) for i in range(m)]
    return validate_scenario(
        Scenario(
            agents=tuple(agents),
            tasks=tuple(tasks),
            params=params,
            precedence=prec,
            spatial=spat,
            min_quality=min_quality,
            big_m=big_m,
            name=f"random-{m}x{n_a}",
        )
    )
