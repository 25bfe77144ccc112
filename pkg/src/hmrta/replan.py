"""Online monitoring, parameter updates and the re-allocation decision.

After each task completes, its measured quality, duration and workloads are
folded into a :class:`Belief` (:func:`update_parameters`).  The relative
change ``delta`` of the remaining plan's cost (:func:`compute_delta`) and a
feasibility re-check decide whether to re-plan (:func:`should_replan`); the
re-plan itself is a MILP over the tasks not yet started
(:func:`build_replan_problem`).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .milp import MilpProblem, formulate
from .model import ParamMatrices, Scenario, is_sentinel
from .schedule import Allocation, TaskAssignment, check_feasibility, evaluate_cost

__all__ = [
    "Belief",
    "TaskOutcome",
    "ReplanConfig",
    "ReplanReason",
    "ReplanEvent",
    "ReplanDecision",
    "UnknownTask",
    "AgentNotInvolved",
    "EmptyRemainingSet",
    "update_parameters",
    "shift_times",
    "remaining_cost",
    "compute_delta",
    "should_replan",
    "build_replan_problem",
    "dump_outcomes",
    "load_outcomes",
    "replay",
]


class UnknownTask(KeyError):
    """The outcome names a task that is not part of the allocation."""


class AgentNotInvolved(ValueError):
    """The outcome reports a measurement for an agent not assigned to the task."""


class EmptyRemainingSet(ValueError):
    """A re-plan was requested with no tasks left to allocate."""


@dataclass(frozen=True)
class Belief:
    """Current parameter estimates, plus the values they started from.

    ``current`` is what planning and cost evaluation use.  ``nominal`` keeps
    the scenario values for reference; proportional updates scale from the
    estimate held just before each update, which is the value the
    measurement is compared against.
    """

    current: ParamMatrices
    nominal: ParamMatrices

    @classmethod
    def from_params(cls, params: ParamMatrices) -> "Belief":
        return cls(params, params)

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "Belief":
        return cls.from_params(scenario.params)

    def with_current(self, params: ParamMatrices) -> "Belief":
        return Belief(params, self.nominal)


def _params(b) -> ParamMatrices:
    return b.current if isinstance(b, Belief) else b


@dataclass(frozen=True)
class TaskOutcome:
    """Measurements taken when a task completes.

    ``measured_workload`` maps each involved agent to its measured workload
    (execution workload for executors, supervision workload for
    supervisors).
    """

    task: int
    measured_quality: float
    measured_duration: float
    measured_workload: dict = field(default_factory=dict)
    supervised: bool = False
    intervened: bool = False

    def __post_init__(self):
        if self.intervened and not self.supervised:
            raise ValueError("an intervention needs a supervisor")
        if not self.measured_duration > 0:
            raise ValueError("measured duration must be positive")
        wl = {int(j): float(v) for j, v in sorted(dict(self.measured_workload).items())}
        object.__setattr__(self, "measured_workload", wl)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "measured_quality": self.measured_quality,
            "measured_duration": self.measured_duration,
            "measured_workload": {str(j): v for j, v in self.measured_workload.items()},
            "supervised": self.supervised,
            "intervened": self.intervened,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TaskOutcome":
        return cls(
            task=int(raw["task"]),
            measured_quality=float(raw["measured_quality"]),
            measured_duration=float(raw["measured_duration"]),
            measured_workload={int(j): float(v) for j, v in raw.get("measured_workload", {}).items()},
            supervised=bool(raw.get("supervised", False)),
            intervened=bool(raw.get("intervened", False)),
        )


@dataclass(frozen=True)
class ReplanConfig:
    delta_threshold: float = 0.15

    def __post_init__(self):
        if not self.delta_threshold > 0:
            raise ValueError("delta_threshold must be positive")


class ReplanReason(str, enum.Enum):
    FEASIBILITY_VIOLATED = "feasibility_violated"
    DELTA_EXCEEDED = "delta_exceeded"
    NEW_BATCH = "new_batch"
    RESOURCE_CHANGE = "resource_change"


class ReplanEvent(str, enum.Enum):
    NEW_BATCH = "new_batch"
    RESOURCE_CHANGE = "resource_change"


@dataclass(frozen=True)
class ReplanDecision:
    reasons: tuple[ReplanReason, ...] = ()

    @property
    def replan(self) -> bool:
        return bool(self.reasons)

    def __bool__(self) -> bool:
        return self.replan


# --------------------------------------------------------------------------
# parameter update


def _group_cells(scenario: Scenario, i: int, j: int) -> list[int]:
    """Tasks of ``i``'s group that agent ``j`` can execute."""
    return [k for k in scenario.same_group(i) if scenario.capable(k, j)]


def _scale(arr: np.ndarray, cells: list[int], j: int, i: int, measured: float, big_m: float):
    """Set ``arr[i, j]`` to ``measured`` and scale ``arr[cells, j]`` by the same ratio."""
    before = arr[i, j]
    if before > 0 and not is_sentinel(before, big_m):
        ratio = measured / before
        for k in cells:
            if k != i and not is_sentinel(arr[k, j], big_m):
                arr[k, j] *= ratio
    arr[i, j] = measured


def update_parameters(belief: Belief, outcome: TaskOutcome, allocation: Allocation, scenario: Scenario) -> Belief:
    """Fold one task's measurements into the belief.

    Quality: without intervention the measured quality becomes the
    execution quality of the executors (split equally over two executors)
    for every task of the group; with intervention it becomes the
    supervisors' supervision quality for the group instead.  Durations and
    workloads of the involved agents are set to the measured values on this
    task and scaled by the same ratio on the group's other tasks.  Nothing
    else changes.
    """
    if outcome.task not in allocation:
        raise UnknownTask(outcome.task)
    a: TaskAssignment = allocation[outcome.task]
    i, M = a.task, scenario.big_m
    stray = set(outcome.measured_workload) - set(a.agents)
    if stray:
        raise AgentNotInvolved(f"agents {sorted(stray)} are not assigned to task {i}")
    if outcome.supervised and not a.supervisors:
        raise AgentNotInvolved(f"task {i} has no planned supervisor")

    p = belief.current
    q, qs = np.array(p.exec_quality), np.array(p.sup_quality)
    w, ws = np.array(p.exec_workload), np.array(p.sup_workload)
    dur = np.array(p.duration)
    measured_q = float(np.clip(outcome.measured_quality, 0.0, 1.0))

    if outcome.intervened:
        for h in a.supervisors:
            qs[scenario.same_group(i), h] = measured_q
    else:
        share = measured_q / len(a.executors)
        for j in a.executors:
            q[_group_cells(scenario, i, j), j] = share

    planned = max(dur[i, j] for j in a.executors)
    ratio = outcome.measured_duration / planned
    for j in a.executors:
        for k in _group_cells(scenario, i, j):
            dur[k, j] *= ratio

    for j, value in outcome.measured_workload.items():
        value = max(float(value), 0.0)
        if j in a.executors:
            _scale(w, _group_cells(scenario, i, j), j, i, value, M)
        else:
            _scale(ws, scenario.same_group(i), j, i, value, M)

    return belief.with_current(ParamMatrices(dur, q, qs, w, ws))


# --------------------------------------------------------------------------
# cost of the remaining plan


def _conflict(a: TaskAssignment, b: TaskAssignment, scenario: Scenario | None) -> bool:
    if a.agents & b.agents:
        return True
    if scenario is None:
        return False
    i, k = a.task, b.task
    return bool(scenario.precedence[i, k] or scenario.precedence[k, i]
                or scenario.spatial[i, k] or scenario.spatial[k, i])


def shift_times(allocation: Allocation, tasks: Iterable[int], params: ParamMatrices,
                scenario: Scenario | None = None) -> Allocation:
    """Re-time ``tasks`` with the durations in ``params``.

    Tasks are visited in planned start order.  Each listed task keeps its
    planned start unless an earlier conflicting task (sharing an agent, or,
    when ``scenario`` is given, linked by precedence or a spatial conflict)
    now ends later, in which case it is pushed forward.  Other tasks keep
    their times.
    """
    tasks = set(tasks)
    order = sorted(allocation, key=lambda a: (a.start, a.task))
    placed: list[TaskAssignment] = []
    for a in order:
        if a.task in tasks:
            length = max(float(params.duration[a.task, j]) for j in a.executors)
            start = max([a.start, *(b.end for b in placed if _conflict(a, b, scenario))])
            a = TaskAssignment(a.task, a.executors, a.supervisors, start, start + length)
        placed.append(a)
    return Allocation(tuple(placed), allocation.plan_cost)


def remaining_cost(allocation: Allocation, remaining: Iterable[int], params: ParamMatrices, horizon: float) -> float:
    """Plan cost restricted to ``remaining`` (0 when it is empty)."""
    sub = Allocation(tuple(allocation[i] for i in sorted(set(remaining))))
    return evaluate_cost(sub, params, horizon).total


def compute_delta(belief_at_planning, belief_updated, allocation: Allocation, remaining: Iterable[int],
                  horizon: float, scenario: Scenario | None = None) -> float:
    """Relative change of the remaining plan's cost, ``|C_hat - C| / |C_hat|``.

    ``C_hat`` uses the estimates the plan was made with and its planned
    times; ``C`` uses the updated estimates, with the remaining tasks
    re-timed by :func:`shift_times`.  Returns 0 for an empty remainder and
    ``inf`` when ``C_hat`` is 0 but ``C`` is not.
    """
    remaining = sorted(set(remaining))
    if not remaining:
        return 0.0
    planned = remaining_cost(allocation, remaining, _params(belief_at_planning), horizon)
    p_upd = _params(belief_updated)
    updated = remaining_cost(shift_times(allocation, remaining, p_upd, scenario), remaining, p_upd, horizon)
    diff = abs(planned - updated)
    if planned == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / abs(planned)


def should_replan(belief_updated, allocation: Allocation, remaining: Iterable[int], delta: float,
                  config: ReplanConfig, events: Iterable = (), *, scenario: Scenario) -> ReplanDecision:
    """Which re-allocation triggers fire; feasibility is listed first.

    The remaining plan is re-timed with the updated durations and then
    checked against every constraint with the updated estimates.
    """
    remaining = sorted(set(remaining))
    reasons = []
    if remaining:
        p = _params(belief_updated)
        shifted = shift_times(allocation, remaining, p, scenario)
        sub = Allocation(tuple(shifted[i] for i in remaining))
        if check_feasibility(sub, scenario, p):
            reasons.append(ReplanReason.FEASIBILITY_VIOLATED)
    if delta > config.delta_threshold:
        reasons.append(ReplanReason.DELTA_EXCEEDED)
    events = {ReplanEvent(e) for e in events}
    if ReplanEvent.NEW_BATCH in events:
        reasons.append(ReplanReason.NEW_BATCH)
    if ReplanEvent.RESOURCE_CHANGE in events:
        reasons.append(ReplanReason.RESOURCE_CHANGE)
    return ReplanDecision(tuple(reasons))


# --------------------------------------------------------------------------
# re-planning problem


def build_replan_problem(scenario: Scenario, belief_updated, remaining: Iterable[int],
                         agent_release_times: dict[int, float] | None = None, now: float = 0.0, *,
                         earliest_start: dict[int, float] | None = None, unavailable=()) -> MilpProblem:
    """MILP over the remaining tasks with the updated estimates.

    Every start is at least ``now``; a task cannot start on an agent before
    that agent's release time; ``earliest_start`` carries bounds from
    in-progress work (a running predecessor or spatial neighbour).
    Precedence with completed tasks is dropped, and the makespan is still
    normalised by the scenario's ``T_M``.
    """
    remaining = sorted(set(remaining))
    if not remaining:
        raise EmptyRemainingSet("no tasks left to re-plan")
    return formulate(
        scenario,
        _params(belief_updated),
        remaining,
        now=now,
        release=agent_release_times,
        earliest_start=earliest_start,
        unavailable=unavailable,
    )


# --------------------------------------------------------------------------
# replay log


def dump_outcomes(outcomes: Iterable[TaskOutcome], fp) -> None:
    """Write outcomes as newline-delimited JSON."""
    for o in outcomes:
        fp.write(json.dumps(o.to_dict(), sort_keys=True) + "\n")


def load_outcomes(fp) -> list[TaskOutcome]:
    return [TaskOutcome.from_dict(json.loads(line)) for line in fp if line.strip()]


def replay(belief: Belief, outcomes: Iterable[TaskOutcome], allocation: Allocation, scenario: Scenario,
           horizon: float | None = None) -> list[tuple[Belief, float]]:
    """Re-run the update and delta pipeline over a fixed plan.

    Returns the belief and ``delta`` after each outcome, with the remaining
    set being the plan's tasks not yet reported.
    """
    horizon = scenario.horizon if horizon is None else horizon
    planning = belief
    done: set[int] = set()
    out = []
    for o in outcomes:
        belief = update_parameters(belief, o, allocation, scenario)
        done.add(o.task)
        rest = [i for i in allocation.task_ids if i not in done]
        out.append((belief, compute_delta(planning, belief, allocation, rest, horizon, scenario)))
    return out
