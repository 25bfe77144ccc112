"""Seeded stochastic execution of plans and paired-policy campaigns.

A trial randomises the initial quality estimates, solves the initial plan
and executes it as a discrete-event simulation: a task starts once every
earlier conflicting task (shared agent, precedence or spatial conflict) has
finished, never before its planned start, and its measurements perturb the
current estimates.  After each completion the belief is updated, ``delta``
is recorded and, under the re-planning policy, the tasks not yet started
are re-allocated when a trigger fires.

Every random draw comes from a stream keyed by ``(seed, task, purpose)``,
so both policies see the same noise for the same task, and results do not
depend on the order in which streams are consumed.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import time
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from .milp import MilpProblem, formulate, list_schedule, solution_vector
from .model import ParamMatrices, Scenario, validate_scenario
from .replan import (
    Belief,
    ReplanConfig,
    TaskOutcome,
    build_replan_problem,
    compute_delta,
    should_replan,
    update_parameters,
)
from .schedule import (
    Allocation,
    CostBreakdown,
    TaskAssignment,
    check_feasibility,
    decode_solution,
    evaluate_cost,
)
from .solver import SolverConfig, solve

__all__ = [
    "SCHEMA_VERSION",
    "NoiseConfig",
    "Policy",
    "ReplanRecord",
    "ExecutionTrace",
    "PolicySummary",
    "CampaignReport",
    "TrialSetup",
    "randomize_initial_quality",
    "sample_duration",
    "sample_outcome",
    "prepare_trial",
    "run_execution",
    "run_campaign",
    "DEFAULT_NODE_LIMIT",
]

SCHEMA_VERSION = 1
DEFAULT_NODE_LIMIT = 100

_INIT, _DURATION, _OUTCOME = 0, 1, 2


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


@dataclass(frozen=True)
class NoiseConfig:
    """Noise levels of a trial.

    Sigmas are standard deviations.  ``duration_sigma`` is relative: the
    measured duration is the estimate times ``1 + N(0, sigma)``, floored at
    ``duration_floor``.  ``initial_quality_sigma`` draws the initial quality
    estimates around the quality floor; ``None`` keeps the scenario values.
    ``measurement_base`` selects what measurements perturb: the estimates
    the plan in force was computed with (``"planning"``) or the latest
    estimates (``"current"``, the default: a random walk).
    """

    quality_sigma: float = 0.1
    duration_sigma: float = 0.02
    workload_sigma: float = 0.1
    initial_quality_sigma: float | None = 0.2
    intervention_probability: float = 0.5
    feasibility_guard: bool = True
    max_redraws: int = 50
    duration_floor: float = 0.05
    measurement_base: str = "current"

    def __post_init__(self):
        sigmas = [self.quality_sigma, self.duration_sigma, self.workload_sigma]
        if self.initial_quality_sigma is not None:
            sigmas.append(self.initial_quality_sigma)
        if any(not (s >= 0) for s in sigmas):
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.intervention_probability <= 1.0:
            raise ValueError("intervention_probability must be in [0, 1]")
        if self.max_redraws < 0 or not 0 < self.duration_floor <= 1:
            raise ValueError("max_redraws must be >= 0 and duration_floor in (0, 1]")
        if self.measurement_base not in ("planning", "current"):
            raise ValueError("measurement_base must be 'planning' or 'current'")

    @classmethod
    def zero(cls) -> "NoiseConfig":
        """No noise at all: execution follows the plan exactly."""
        return cls(0.0, 0.0, 0.0, None, 0.0, True)


class Policy(str, enum.Enum):
    REPLAN = "replan"
    STATIC = "static"


@dataclass(frozen=True)
class ReplanRecord:
    time: float
    after_task: int
    step: int
    reasons: tuple[str, ...]
    status: str
    objective: float
    nodes: int
    changed: bool


@dataclass
class ExecutionTrace:
    """Everything that happened in one trial under one policy."""

    seed: int
    policy: Policy
    initial: Allocation
    outcomes: list[TaskOutcome] = field(default_factory=list)
    deltas: list[float] = field(default_factory=list)
    replans: list[ReplanRecord] = field(default_factory=list)
    executed: Allocation | None = None
    realized_params: ParamMatrices | None = None
    realized: CostBreakdown | None = None
    violations: list = field(default_factory=list)
    terminated: str | None = None
    solver_seconds: float = 0.0

    @property
    def completed(self) -> list[int]:
        return [o.task for o in self.outcomes]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "policy": self.policy.value,
            "initial": self.initial.to_dict(),
            "outcomes": [o.to_dict() for o in self.outcomes],
            "deltas": self.deltas,
            "replans": [asdict(r) for r in self.replans],
            "executed": self.executed.to_dict() if self.executed is not None else None,
            "realized_cost": None if self.realized is None else {
                "makespan_term": self.realized.makespan_term,
                "quality_sum": self.realized.quality_sum,
                "workload_sum": self.realized.workload_sum,
                "total": self.realized.total,
            },
            "violations": [str(v) for v in self.violations],
            "terminated": self.terminated,
        }


# --------------------------------------------------------------------------
# sampling


def randomize_initial_quality(scenario: Scenario, sigma: float, rng: np.random.Generator,
                              max_tries: int = 100) -> ParamMatrices:
    """Initial quality estimates drawn around the quality floor.

    One value per (group, agent) keeps group consistency: execution quality
    for every agent, supervision quality for humans, each ``clip(q_min +
    N(0, sigma), 0, 1)``.  Draws leaving some task with no assignment that
    meets the floor are repeated; after ``max_tries`` the scenario values
    are kept.
    """
    s = validate_scenario(scenario)
    p = s.params
    groups = sorted({t.group for t in s.tasks}, key=str)
    for _ in range(max_tries):
        q, qs = np.array(p.exec_quality), np.array(p.sup_quality)
        for g in groups:
            rows = [t.id for t in s.tasks if t.group == g]
            draw = np.clip(s.min_quality + sigma * rng.standard_normal(s.n_agents), 0.0, 1.0)
            draw_s = np.clip(s.min_quality + sigma * rng.standard_normal(s.n_agents), 0.0, 1.0)
            for j in range(s.n_agents):
                cap = [i for i in rows if s.capable(i, j)]
                q[cap, j] = draw[j]
                if s.agents[j].is_human:
                    qs[rows, j] = draw_s[j]
        params = p.copy(exec_quality=q, sup_quality=qs)
        if _quality_feasible(s, params):
            return params
    return p


def _quality_feasible(s: Scenario, p: ParamMatrices) -> bool:
    """Whether every task has an executor set that, with every other human supervising, meets the floor."""
    for t in s.tasks:
        i = t.id
        cap = [j for j in range(s.n_agents) if s.capable(i, j)]
        best = -np.inf
        for ex in combinations(cap, t.n_executors):
            val = sum(p.exec_quality[i, j] for j in ex)
            val += sum(p.sup_quality[i, h] for h in s.humans if h not in ex)
            best = max(best, val)
        if best < s.min_quality - 1e-12:
            return False
    return True


def sample_duration(assignment: TaskAssignment, params: ParamMatrices, noise: NoiseConfig,
                    rng: np.random.Generator) -> float:
    """Measured duration: current estimate times ``1 + N(0, duration_sigma)``."""
    planned = max(float(params.duration[assignment.task, j]) for j in assignment.executors)
    factor = 1.0 + noise.duration_sigma * rng.standard_normal()
    return planned * max(factor, noise.duration_floor)


def sample_outcome(assignment: TaskAssignment, params: ParamMatrices, noise: NoiseConfig,
                   rng: np.random.Generator, *, measured_duration: float | None = None,
                   accept=None) -> TaskOutcome:
    """Draw the measurements of one completed task.

    The quality base is the estimate the measurement will replace: the
    executors' summed quality, or the supervisors' mean supervision
    quality when a supervisor intervenes.  Draw order is fixed (duration if
    not given, intervention, workloads, quality) so a stream always yields
    the same values.  ``accept``, when given, is the feasibility guard: a
    predicate on candidate outcomes.  Rejected qualities are re-drawn up
    to ``max_redraws`` times, then raised to the smallest accepted value.
    """
    i = assignment.task
    n_a = params.shape[1]
    eps_d = rng.standard_normal()
    if measured_duration is None:
        planned = max(float(params.duration[i, j]) for j in assignment.executors)
        measured_duration = planned * max(1.0 + noise.duration_sigma * eps_d, noise.duration_floor)
    u = rng.random()
    supervised = assignment.supervised
    intervened = supervised and u < noise.intervention_probability
    z_w = rng.standard_normal(n_a)
    workload = {}
    for j in assignment.executors:
        workload[j] = max(float(params.exec_workload[i, j]) + noise.workload_sigma * z_w[j], 0.0)
    for h in assignment.supervisors:
        workload[h] = max(float(params.sup_workload[i, h]) + noise.workload_sigma * z_w[h], 0.0)
    if intervened:
        base = float(np.mean([params.sup_quality[i, h] for h in assignment.supervisors]))
    else:
        base = float(sum(params.exec_quality[i, j] for j in assignment.executors))

    def make(q):
        return TaskOutcome(i, float(np.clip(q, 0.0, 1.0)), float(measured_duration), workload,
                           supervised, intervened)

    outcome = make(base + noise.quality_sigma * rng.standard_normal())
    if accept is None or accept(outcome):
        return outcome
    for _ in range(noise.max_redraws):
        outcome = make(base + noise.quality_sigma * rng.standard_normal())
        if accept(outcome):
            return outcome
    if not accept(make(1.0)):
        return outcome
    lo, hi = outcome.measured_quality, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if accept(make(mid)):
            hi = mid
        else:
            lo = mid
    return make(hi)


# --------------------------------------------------------------------------
# one trial


@dataclass(frozen=True)
class TrialSetup:
    """Initial estimates and plan shared by both policies of a trial."""

    seed: int
    params: ParamMatrices
    problem: MilpProblem
    plan: Allocation
    status: str


def prepare_trial(scenario: Scenario, noise: NoiseConfig, seed: int,
                  solver_config: SolverConfig | None = None) -> TrialSetup:
    """Randomise the initial estimates and solve the initial plan."""
    s = validate_scenario(scenario)
    if noise.initial_quality_sigma is None:
        params = s.params
    else:
        params = randomize_initial_quality(s, noise.initial_quality_sigma, _stream(seed, _INIT))
    problem = formulate(s, params)
    sol = solve(problem, solver_config or SolverConfig(node_limit=DEFAULT_NODE_LIMIT))
    if not sol.has_incumbent:
        raise RuntimeError(f"initial plan not found (status {sol.status.value})")
    return TrialSetup(seed, params, problem, decode_solution(sol, problem), sol.status.value)


def _conflicts(s: Scenario, a: TaskAssignment, b: TaskAssignment) -> bool:
    i, k = a.task, b.task
    return bool(a.agents & b.agents or s.precedence[i, k] or s.precedence[k, i]
                or s.spatial[i, k] or s.spatial[k, i])


def _keep_vector(problem: MilpProblem, plan: Allocation) -> np.ndarray | None:
    """The current plan of the remaining tasks as a solution of the re-plan MILP."""
    ids = problem.task_ids
    ex = {i: plan[i].executors for i in ids}
    sup = {i: plan[i].supervisors for i in ids}
    try:
        start, end = list_schedule(problem, ex, sup, {i: (plan[i].start, i) for i in ids})
        return solution_vector(problem, ex, sup, start, end)
    except (KeyError, ValueError):
        return None


def run_execution(scenario: Scenario, noise: NoiseConfig, seed: int, policy: Policy | str = Policy.REPLAN, *,
                  replan_config: ReplanConfig | None = None, solver_config: SolverConfig | None = None,
                  setup: TrialSetup | None = None) -> ExecutionTrace:
    """Execute one trial under ``policy``.

    ``setup`` lets paired runs share the initial plan; otherwise it is
    computed from ``seed``.  Re-plans start from the current plan of the
    remaining tasks, so a re-plan never looks worse than keeping it.
    """
    s = validate_scenario(scenario)
    policy = Policy(policy)
    replan_config = replan_config or ReplanConfig()
    solver_config = solver_config or SolverConfig(node_limit=DEFAULT_NODE_LIMIT)
    setup = setup or prepare_trial(s, noise, seed, solver_config)
    T = float(s.horizon)

    belief = Belief(setup.params, s.params)
    planning = belief
    plan = setup.plan
    trace = ExecutionTrace(seed, policy, setup.plan)
    pending = set(plan.task_ids)
    running: dict[int, TaskAssignment] = {}
    done: dict[int, TaskAssignment] = {}
    realized = {name: np.array(v) for name, v in belief.current.as_dict().items()}
    now = 0.0

    while pending or running:
        committed = {**done, **running}
        order = sorted(pending, key=lambda i: (plan[i].start, i))
        ready = []
        for pos, i in enumerate(order):
            a = plan[i]
            if any(_conflicts(s, a, plan[k]) for k in order[:pos]):
                continue
            t0 = max([a.start, now, *(c.end for c in committed.values() if _conflicts(s, a, c))])
            ready.append((t0, pos, i))
        next_end = min(((a.end, i) for i, a in running.items()), default=None)
        next_start = min(ready, default=None)
        if next_start is None and next_end is None:
            trace.terminated = "deadlock"
            break

        if next_end is not None and (next_start is None or next_end[0] <= next_start[0]):
            now, i = next_end
            a = running.pop(i)
            rest = sorted(pending | set(running))

            def accept(o, a=a, rest=rest):
                b = update_parameters(belief, o, plan.replace(a), s)
                view = Allocation(tuple([a, *(plan[k] for k in rest)]))
                return not any(v.family == "quality" for v in check_feasibility(view, s, b.current))

            base = planning.current if noise.measurement_base == "planning" else belief.current
            outcome = sample_outcome(a, base, noise, _stream(seed, i, _OUTCOME),
                                     measured_duration=a.end - a.start,
                                     accept=accept if noise.feasibility_guard else None)
            belief = update_parameters(belief, outcome, plan.replace(a), s)
            for name, arr in belief.current.as_dict().items():
                realized[name][i] = arr[i]
            done[i] = a
            trace.outcomes.append(outcome)
            delta = compute_delta(planning, belief, plan, rest, T, s)
            trace.deltas.append(delta)

            if policy is Policy.REPLAN and pending:
                decision = should_replan(belief, plan, rest, delta, replan_config, scenario=s)
                if decision:
                    ok = _replan(s, belief, plan, pending, running, now, solver_config, trace, decision, i)
                    if ok is None:
                        trace.terminated = "infeasible"
                        break
                    plan = ok
                    planning = belief
        else:
            t0, _, i = next_start
            a = plan[i]
            base = planning.current if noise.measurement_base == "planning" else belief.current
            d = sample_duration(a, base, noise, _stream(seed, i, _DURATION))
            running[i] = TaskAssignment(i, a.executors, a.supervisors, t0, t0 + d)
            pending.discard(i)
            now = t0

    executed = Allocation(tuple(done.values()), np.nan)
    trace.executed = executed
    trace.realized_params = ParamMatrices(**realized)
    trace.realized = evaluate_cost(executed, trace.realized_params, T)
    trace.violations = check_feasibility(executed, s, trace.realized_params)
    return trace


def _replan(s, belief, plan, pending, running, now, solver_config, trace, decision, after_task):
    """Re-allocate the pending tasks; returns the new plan or ``None`` if infeasible."""
    p = belief.current
    release: dict[int, float] = {}
    earliest: dict[int, float] = {}
    for k, a in running.items():
        expected = max(now, a.start + max(float(p.duration[k, j]) for j in a.executors))
        for j in a.agents:
            release[j] = max(release.get(j, now), expected)
        for i in pending:
            if s.precedence[k, i] or s.spatial[k, i] or s.spatial[i, k]:
                earliest[i] = max(earliest.get(i, now), expected)
    problem = build_replan_problem(s, belief, sorted(pending), release, now, earliest_start=earliest)
    t0 = time.perf_counter()
    sol = solve(problem, solver_config, start=_keep_vector(problem, plan))
    trace.solver_seconds += time.perf_counter() - t0
    step = len(trace.outcomes)
    reasons = tuple(r.value for r in decision.reasons)
    if not sol.has_incumbent:
        trace.replans.append(ReplanRecord(now, after_task, step, reasons, sol.status.value, np.inf,
                                          sol.nodes_explored, False))
        return None
    new = decode_solution(sol, problem)
    changed = any(new[i].executors != plan[i].executors or new[i].supervisors != plan[i].supervisors
                  for i in new.task_ids)
    trace.replans.append(ReplanRecord(now, after_task, step, reasons, sol.status.value,
                                      float(sol.objective), sol.nodes_explored, changed))
    return plan.replace(*new.assignments)


# --------------------------------------------------------------------------
# campaign


@dataclass
class PolicySummary:
    """Aggregates of one policy over all trials."""

    delta_mean_by_step: list[float]
    delta_std_by_step: list[float]
    delta_mean: float
    cost_mean: float
    cost_std: float
    replans_mean: float
    costs: list[float]
    deltas: list[list[float]]
    replans: list[int]
    makespans: list[float]
    violations: int
    terminated: int

    @classmethod
    def from_traces(cls, traces: list[ExecutionTrace]) -> "PolicySummary":
        width = max(len(t.deltas) for t in traces)
        grid = np.full((len(traces), width), np.nan)
        for r, t in enumerate(traces):
            grid[r, : len(t.deltas)] = t.deltas
        finite = np.where(np.isfinite(grid), grid, np.nan)
        costs = [t.realized.total for t in traces]
        return cls(
            delta_mean_by_step=[float(v) for v in np.nanmean(finite, axis=0)],
            delta_std_by_step=[float(v) for v in np.nanstd(finite, axis=0)],
            delta_mean=float(np.nanmean(finite)),
            cost_mean=float(np.mean(costs)),
            cost_std=float(np.std(costs)),
            replans_mean=float(np.mean([len(t.replans) for t in traces])),
            costs=[float(c) for c in costs],
            deltas=[[float(d) for d in t.deltas] for t in traces],
            replans=[len(t.replans) for t in traces],
            makespans=[float(t.executed.makespan) for t in traces],
            violations=sum(len(t.violations) for t in traces),
            terminated=sum(t.terminated is not None for t in traces),
        )


@dataclass
class CampaignReport:
    """Paired comparison of the re-planning and static policies.

    Standard deviations are population ones (``ddof=0``).  Infinite
    ``delta`` values (zero planned cost) are left out of the means.
    """

    scenario: str
    trials: int
    seed_base: int
    noise: NoiseConfig
    delta_threshold: float
    node_limit: int | None
    replan: PolicySummary
    static: PolicySummary

    @property
    def cost_improvement(self) -> float:
        """Relative reduction of the mean realized cost by re-planning."""
        base = self.static.cost_mean
        return (base - self.replan.cost_mean) / abs(base) if base else 0.0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "trials": self.trials,
            "seed_base": self.seed_base,
            "noise": asdict(self.noise),
            "delta_threshold": self.delta_threshold,
            "node_limit": self.node_limit,
            "cost_improvement": self.cost_improvement,
            "policies": {"replan": asdict(self.replan), "static": asdict(self.static)},
        }

    def to_json(self) -> str:
        return json.dumps(_finite(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """One row per (trial, policy) for external plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "trial", "seed", "policy", "cost", "makespan", "replans", "delta_mean"])
        for name, summ in (("replan", self.replan), ("static", self.static)):
            for t in range(self.trials):
                d = [v for v in summ.deltas[t] if np.isfinite(v)]
                w.writerow([SCHEMA_VERSION, t, self.seed_base + t, name, repr(summ.costs[t]),
                            repr(summ.makespans[t]), summ.replans[t], repr(float(np.mean(d)) if d else 0.0)])
        return buf.getvalue()


def _finite(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else "-inf" if obj < 0 else "nan"
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def run_campaign(scenario: Scenario, noise: NoiseConfig | None = None, trials: int = 50, seed_base: int = 0, *,
                 replan_config: ReplanConfig | None = None, node_limit: int | None = DEFAULT_NODE_LIMIT,
                 progress=None) -> CampaignReport:
    """Run both policies on trials seeded ``seed_base + t``.

    Each trial's initial plan is solved once and shared by the two
    policies.  Every solve is capped at ``node_limit`` branch-and-bound
    nodes (``None``: solve to optimality), which keeps runs reproducible
    where a time limit would not.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    s = validate_scenario(scenario)
    noise = noise or NoiseConfig()
    replan_config = replan_config or ReplanConfig()
    solver_config = SolverConfig(node_limit=node_limit)
    by_policy = {Policy.REPLAN: [], Policy.STATIC: []}
    for t in range(trials):
        seed = seed_base + t
        setup = prepare_trial(s, noise, seed, solver_config)
        for policy in (Policy.REPLAN, Policy.STATIC):
            trace = run_execution(s, noise, seed, policy, replan_config=replan_config,
                                  solver_config=solver_config, setup=setup)
            by_policy[policy].append(trace)
        if progress is not None:
            progress(t, by_policy[Policy.REPLAN][-1], by_policy[Policy.STATIC][-1])
    return CampaignReport(
        scenario=s.name,
        trials=trials,
        seed_base=seed_base,
        noise=noise,
        delta_threshold=replan_config.delta_threshold,
        node_limit=node_limit,
        replan=PolicySummary.from_traces(by_policy[Policy.REPLAN]),
        static=PolicySummary.from_traces(by_policy[Policy.STATIC]),
    )
