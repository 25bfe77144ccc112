"""Allocations: decoding, independent validation, cost and Gantt charts.

:func:`check_feasibility` re-implements every constraint family from the
scenario data alone, without touching the MILP rows, so a bug in the
builder shows up as a violation here rather than as a silently wrong plan.
Intervals are half-open, ``[start, end)``: back-to-back tasks are legal.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from xml.sax.saxutils import escape

import numpy as np

from .milp import MilpProblem, VarKind
from .model import ParamMatrices, Scenario, is_sentinel, validate_scenario
from .solver import MilpSolution

__all__ = [
    "TaskAssignment",
    "Allocation",
    "CostBreakdown",
    "ScheduleViolation",
    "NonIntegralSolution",
    "FAMILIES",
    "decode_solution",
    "check_feasibility",
    "evaluate_cost",
    "render_gantt",
    "task_label",
]

FAMILIES = (
    "agent_count",
    "exclusivity",
    "robot_supervision",
    "quality",
    "duration",
    "precedence",
    "agent_overlap",
    "spatial_overlap",
)


class NonIntegralSolution(ValueError):
    """A binary of the solution vector is not within tolerance of 0 or 1."""


@dataclass(frozen=True)
class TaskAssignment:
    """Who does task ``task`` and when (seconds)."""

    task: int
    executors: tuple[int, ...]
    supervisors: tuple[int, ...] = ()
    start: float = 0.0
    end: float = 0.0

    @property
    def agents(self) -> frozenset[int]:
        """Every agent occupied by the task, executing or supervising."""
        return frozenset(self.executors) | frozenset(self.supervisors)

    @property
    def supervised(self) -> bool:
        return bool(self.supervisors)


@dataclass(frozen=True)
class Allocation:
    """A plan over a set of tasks, ordered by task id."""

    assignments: tuple[TaskAssignment, ...]
    plan_cost: float = float("nan")

    def __post_init__(self):
        ordered = tuple(sorted(self.assignments, key=lambda a: a.task))
        object.__setattr__(self, "assignments", ordered)
        object.__setattr__(self, "_by_task", {a.task: a for a in ordered})

    def __getitem__(self, task: int) -> TaskAssignment:
        return self._by_task[task]

    def __contains__(self, task: int) -> bool:
        return task in self._by_task

    def __iter__(self):
        return iter(self.assignments)

    def __len__(self) -> int:
        return len(self.assignments)

    @property
    def task_ids(self) -> tuple[int, ...]:
        return tuple(a.task for a in self.assignments)

    @property
    def makespan(self) -> float:
        return max((a.end for a in self.assignments), default=0.0)

    def agent_intervals(self, j: int) -> list[tuple[float, float, int, str]]:
        """``(start, end, task, role)`` of agent ``j``, sorted by start."""
        out = [(a.start, a.end, a.task, "exec") for a in self.assignments if j in a.executors]
        out += [(a.start, a.end, a.task, "sup") for a in self.assignments if j in a.supervisors]
        return sorted(out)

    def replace(self, *assignments: TaskAssignment, plan_cost: float | None = None) -> "Allocation":
        """A copy with the given task entries swapped in (or added)."""
        merged = dict(self._by_task)
        merged.update({a.task: a for a in assignments})
        cost = self.plan_cost if plan_cost is None else plan_cost
        return Allocation(tuple(merged.values()), cost)

    def to_dict(self) -> dict:
        return {
            "plan_cost": self.plan_cost,
            "makespan": self.makespan,
            "tasks": [
                {
                    "task": a.task,
                    "executors": list(a.executors),
                    "supervisors": list(a.supervisors),
                    "start": a.start,
                    "end": a.end,
                }
                for a in self.assignments
            ],
        }


@dataclass(frozen=True)
class CostBreakdown:
    """The three terms of the plan cost; ``total = makespan_term - quality_sum + workload_sum``."""

    makespan_term: float
    quality_sum: float
    workload_sum: float

    @property
    def total(self) -> float:
        return self.makespan_term - self.quality_sum + self.workload_sum

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.makespan_term, self.quality_sum, self.workload_sum)


@dataclass(frozen=True)
class ScheduleViolation:
    """One broken constraint: its family, the indices involved and by how much."""

    family: str
    indices: tuple
    magnitude: float
    message: str = ""

    def __str__(self) -> str:
        return f"{self.family}{self.indices}: {self.message} (by {self.magnitude:.6g})"


# --------------------------------------------------------------------------
# decoding


def decode_solution(solution: MilpSolution, problem: MilpProblem, integrality_tol: float = 1e-6) -> Allocation:
    """Read the allocation out of a solution vector.

    Binaries are rounded at 0.5 after checking they are within
    ``integrality_tol`` of 0 or 1.  The end time of each task is tightened
    to ``start + max executor duration``: the MILP only bounds it from
    below, and slack there carries no meaning.
    """
    if not solution.has_incumbent:
        raise ValueError(f"solution has no incumbent (status {solution.status.value})")
    x = np.asarray(solution.values, dtype=float)
    b = problem.integer
    off = np.abs(x[b] - np.round(x[b]))
    if off.size and off.max() > integrality_tol:
        k = int(np.flatnonzero(b)[np.argmax(off)])
        raise NonIntegralSolution(f"{problem.columns[k].name} = {x[k]:.6g} is not binary")
    s = problem.scenario
    dur = problem.params.duration
    out = []
    for i in problem.task_ids:
        ex = tuple(j for j in range(s.n_agents) if x[problem.col(VarKind.X, i, j)] > 0.5)
        sup = tuple(j for j in s.humans if x[problem.col(VarKind.S, i, j)] > 0.5)
        start = float(x[problem.col(VarKind.TS, i)])
        length = max((float(dur[i, j]) for j in ex), default=0.0)
        out.append(TaskAssignment(i, ex, sup, start, start + length))
    return Allocation(tuple(out), float(solution.objective))


# --------------------------------------------------------------------------
# validation


def check_feasibility(
    allocation: Allocation,
    scenario: Scenario,
    params: ParamMatrices | None = None,
    tol: float = 1e-6,
) -> list[ScheduleViolation]:
    """Every constraint violated by ``allocation``; empty means feasible.

    ``params`` are the parameter values the plan is judged against
    (defaults to the scenario's nominal ones).  Precedence is only checked
    between tasks both present in the allocation.
    """
    s = validate_scenario(scenario)
    p = s.params if params is None else params
    M = s.big_m
    humans = set(s.humans)
    out: list[ScheduleViolation] = []

    def bad(family, indices, magnitude, message):
        out.append(ScheduleViolation(family, tuple(int(v) for v in indices), float(magnitude), message))

    for a in allocation:
        i = a.task
        need = s.tasks[i].n_executors
        if len(set(a.executors)) != need or len(a.executors) != need:
            bad("agent_count", (i,), abs(len(a.executors) - need), f"{len(a.executors)} executors, needs {need}")
        for j in a.executors:
            if is_sentinel(p.duration[i, j], M):
                bad("agent_count", (i, j), 1.0, "executor cannot perform the task")
        for j in set(a.executors) & set(a.supervisors):
            bad("exclusivity", (i, j), 1.0, "agent both executes and supervises")
        for j in a.supervisors:
            if j not in humans:
                bad("robot_supervision", (i, j), 1.0, "supervisor is not human")
        quality = sum(p.exec_quality[i, j] for j in a.executors if not is_sentinel(p.duration[i, j], M))
        quality += sum(p.sup_quality[i, j] for j in a.supervisors if j in humans)
        if quality < s.min_quality - tol:
            bad("quality", (i,), s.min_quality - quality, f"quality {quality:.6g} below {s.min_quality:.6g}")
        need_len = max((p.duration[i, j] for j in a.executors), default=0.0)
        if a.end - a.start < need_len - tol:
            bad("duration", (i,), need_len - (a.end - a.start), f"lasts {a.end - a.start:.6g} s, needs {need_len:.6g} s")

    for a, b in combinations(allocation.assignments, 2):
        i, k = a.task, b.task
        for first, second in ((a, b), (b, a)):
            if s.precedence[first.task, second.task] and second.start < first.end - tol:
                bad("precedence", (first.task, second.task), first.end - second.start,
                    "successor starts before predecessor ends")
        overlap = min(a.end, b.end) - max(a.start, b.start)
        if overlap <= tol:
            continue
        for j in sorted(a.agents & b.agents):
            bad("agent_overlap", (i, k, j), overlap, "agent busy on both tasks at once")
        if s.spatial[i, k] or s.spatial[k, i]:
            bad("spatial_overlap", (i, k), overlap, "spatially conflicting tasks overlap")
    return out


# --------------------------------------------------------------------------
# cost


def evaluate_cost(allocation: Allocation, params: ParamMatrices, horizon: float) -> CostBreakdown:
    """Plan cost terms recomputed from an allocation and parameter values."""
    quality = workload = 0.0
    for a in allocation:
        i = a.task
        quality += sum(float(params.exec_quality[i, j]) for j in a.executors)
        quality += sum(float(params.sup_quality[i, j]) for j in a.supervisors)
        workload += sum(float(params.exec_workload[i, j]) for j in a.executors)
        workload += sum(float(params.sup_workload[i, j]) for j in a.supervisors)
    return CostBreakdown(allocation.makespan / float(horizon) if len(allocation) else 0.0, quality, workload)


# --------------------------------------------------------------------------
# Gantt charts


_SYMBOLS = "123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
    "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)


def task_label(i: int) -> str:
    """Display name of task ``i`` (one-based, as in task lists)."""
    return f"T{i + 1}"


def _agent_name(scenario: Scenario, j: int) -> str:
    a = scenario.agents[j]
    return a.label or f"{a.kind.value} {j + 1}"


def _lanes(allocation: Allocation, scenario: Scenario):
    """``(name, role, bars)`` per lane: one per agent, plus a supervision lane per human."""
    lanes = []
    for agent in scenario.agents:
        j = agent.id
        bars = [(s, e, t) for s, e, t, r in allocation.agent_intervals(j) if r == "exec"]
        lanes.append((_agent_name(scenario, j), "exec", bars))
        if agent.is_human:
            bars = [(s, e, t) for s, e, t, r in allocation.agent_intervals(j) if r == "sup"]
            lanes.append((_agent_name(scenario, j) + " (sup)", "sup", bars))
    return lanes


def _gantt_text(allocation: Allocation, scenario: Scenario, width: int) -> str:
    span = allocation.makespan
    scale = width / span if span > 0 else 0.0
    lanes = _lanes(allocation, scenario)
    pad = max((len(name) for name, _, _ in lanes), default=0)
    end_label = f"{span:.1f} s"
    lines = [f"{'':{pad}}  0 s{'':{max(width - 3 - len(end_label), 1)}}{end_label}"]
    for name, role, bars in lanes:
        row = [" "] * width
        for start, end, t in bars:
            sym = _SYMBOLS[t] if t < len(_SYMBOLS) else "#"
            lo = int(round(start * scale))
            hi = max(int(round(end * scale)), lo + 1)
            for c in range(lo, min(hi, width)):
                row[c] = sym if role == "exec" else sym.lower() if sym.isalpha() else sym
            if role == "sup":
                for c in range(lo, min(hi, width), 2):
                    row[c] = "~"
        lines.append(f"{name:<{pad}} |{''.join(row)}|")
    lines.append("")
    for a in allocation:
        sym = _SYMBOLS[a.task] if a.task < len(_SYMBOLS) else "#"
        who = ", ".join(_agent_name(scenario, j) for j in a.executors)
        sup = ", ".join(_agent_name(scenario, j) for j in a.supervisors) or "-"
        lines.append(f"{sym} {task_label(a.task):>4}  [{a.start:8.2f}, {a.end:8.2f})  exec: {who}  sup: {sup}")
    return "\n".join(lines) + "\n"


def _gantt_svg(allocation: Allocation, scenario: Scenario, width: int) -> str:
    lanes = _lanes(allocation, scenario)
    left, top, row_h, plot_w = 130, 30, 28, max(width, 200)
    span = allocation.makespan or 1.0
    height = top + row_h * len(lanes) + 40
    sx = plot_w / span

    def fmt(v):
        return f"{v:.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + plot_w + 20}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        "<defs>",
        '<pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6" patternTransform="rotate(45)">'
        '<line x1="0" y1="0" x2="0" y2="6" stroke="#555" stroke-width="1.5"/></pattern>',
        "</defs>",
        f'<text x="{left}" y="16">{escape(scenario.name or "schedule")}: makespan {span:.2f} s</text>',
    ]
    for r, (name, role, bars) in enumerate(lanes):
        y = top + r * row_h
        out.append(f'<text x="4" y="{fmt(y + row_h * 0.65)}">{escape(name)}</text>')
        out.append(f'<line x1="{left}" y1="{y + row_h}" x2="{left + plot_w}" y2="{y + row_h}" stroke="#ddd"/>')
        for start, end, t in bars:
            color = _PALETTE[t % len(_PALETTE)]
            x0, w = left + start * sx, max((end - start) * sx, 1.0)
            if role == "exec":
                style = f'fill="{color}" stroke="#333"'
            else:
                style = f'fill="url(#hatch)" stroke="{color}" stroke-width="2" stroke-dasharray="5,3"'
            out.append(f'<rect data-task="{task_label(t)}" data-role="{role}" x="{fmt(x0)}" y="{y + 4}" '
                       f'width="{fmt(w)}" height="{row_h - 8}" {style}/>')
            out.append(f'<text x="{fmt(x0 + 3)}" y="{fmt(y + row_h * 0.65)}">{task_label(t)}</text>')
    axis_y = top + row_h * len(lanes)
    for k in range(6):
        t = span * k / 5
        x = left + t * sx
        out.append(f'<line x1="{fmt(x)}" y1="{axis_y}" x2="{fmt(x)}" y2="{axis_y + 5}" stroke="#333"/>')
        out.append(f'<text x="{fmt(x)}" y="{axis_y + 18}" text-anchor="middle">{t:.0f}</text>')
    out.append(f'<text x="{left + plot_w}" y="{axis_y + 32}" text-anchor="end">time (s)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_gantt(allocation: Allocation, scenario: Scenario, format: str = "text", width: int | None = None) -> str:
    """Gantt chart as fixed-width text or as an SVG document.

    One lane per agent; humans get a second lane for supervision, drawn
    dashed and hatched in SVG and as ``~``-interleaved lowercase bars in
    text.  The output depends only on the inputs.
    """
    if format == "text":
        return _gantt_text(allocation, scenario, width or 72)
    if format == "svg":
        return _gantt_svg(allocation, scenario, width or 800)
    raise ValueError(f"unknown gantt format {format!r}")
