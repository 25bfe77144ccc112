"""Command-line interface: ``hmrta {validate,solve,simulate,campaign,gantt}``.

Exit codes: 0 success, 1 domain failure (invalid scenario, infeasible
problem), 2 usage or parse error.  JSON outputs carry a
``schema_version`` field and are written with sorted keys, so identical
inputs and seeds give byte-identical files.  ``SCENARIO`` may be a path
or ``bundled`` for the packaged assembly scenario.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .milp import build_milp, export_lp
from .model import ScenarioError, bundled_scenario, check_scenario, load_scenario, validate_scenario
from .replan import ReplanConfig, dump_outcomes
from .schedule import Allocation, TaskAssignment, check_feasibility, decode_solution, evaluate_cost, render_gantt
from .sim import DEFAULT_NODE_LIMIT, SCHEMA_VERSION, NoiseConfig, Policy, run_campaign, run_execution
from .solver import TIME_LIMIT_ENV, SolverConfig, solve

__all__ = ["main", "build_parser"]

OK, DOMAIN_FAILURE, USAGE_ERROR = 0, 1, 2


class UsageError(Exception):
    """Bad input file or flag value; maps to exit code 2."""


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load(path: str, args=None):
    """Load (unvalidated) and apply the ``--min-quality`` / ``--big-m`` overrides."""
    try:
        s = bundled_scenario() if path == "bundled" else load_scenario(path)
    except ScenarioError:
        raise
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise UsageError(f"cannot read scenario {path!r}: {exc}") from exc
    changes = {}
    if args is not None and getattr(args, "min_quality", None) is not None:
        changes["min_quality"] = args.min_quality
    if args is not None and getattr(args, "big_m", None) is not None:
        changes["big_m"] = args.big_m
        changes["horizon"] = None
    return s.replace(**changes) if changes else s


def _solver_config(args) -> SolverConfig:
    overrides = {}
    if getattr(args, "time_limit", None) is not None:
        overrides["time_limit"] = args.time_limit
    if getattr(args, "node_limit", None) is not None:
        overrides["node_limit"] = args.node_limit
    return SolverConfig.from_env(**overrides)


def _noise(args) -> NoiseConfig:
    init = args.initial_quality_sigma
    try:
        return NoiseConfig(
            quality_sigma=args.quality_sigma,
            duration_sigma=args.duration_sigma,
            workload_sigma=args.workload_sigma,
            initial_quality_sigma=None if init < 0 else init,
            intervention_probability=args.intervention_probability,
            feasibility_guard=not args.no_guard,
            measurement_base=args.measurement_base,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _replan_config(args) -> ReplanConfig:
    try:
        return ReplanConfig(args.delta_threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    s = _load(args.scenario, args)
    violations = check_scenario(s)
    if violations:
        for v in violations:
            print(f"invalid: {v}")
        return DOMAIN_FAILURE
    s = validate_scenario(s)
    print(f"ok: {s.name or args.scenario}: {s.n_tasks} tasks, {s.n_agents} agents "
          f"({len(s.humans)} human), T_M = {s.horizon:g} s")
    return OK


def _allocation_json(s, problem, sol) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "scenario": s.name,
        "status": sol.status.value,
        "solver": {
            "nodes": sol.nodes_explored,
            "lp_iterations": sol.lp_iterations,
            "best_bound": sol.best_bound,
            "root_bound": sol.root_bound,
        },
    }
    if not sol.has_incumbent:
        return out
    alloc = decode_solution(sol, problem)
    cost = evaluate_cost(alloc, problem.params, problem.horizon)
    out.update({
        "objective": sol.objective,
        "makespan": alloc.makespan,
        "horizon": problem.horizon,
        "cost": {
            "makespan_term": cost.makespan_term,
            "quality_sum": cost.quality_sum,
            "workload_sum": cost.workload_sum,
            "total": cost.total,
        },
        "assignments": {str(a.task): list(a.executors) for a in alloc},
        "supervisions": {str(a.task): list(a.supervisors) for a in alloc if a.supervisors},
        "times": {str(a.task): [a.start, a.end] for a in alloc},
        "violations": [str(v) for v in check_feasibility(alloc, s, problem.params)],
    })
    return out


def cmd_solve(args) -> int:
    s = validate_scenario(_load(args.scenario, args))
    problem = build_milp(s)
    if args.export_lp:
        _write(export_lp(problem), args.export_lp)
        return OK
    sol = solve(problem, _solver_config(args))
    out = _allocation_json(s, problem, sol)
    _write(_dumps(out), args.out)
    if not sol.has_incumbent:
        print(f"no allocation: {sol.status.value}", file=sys.stderr)
        return DOMAIN_FAILURE
    if args.gantt:
        text = render_gantt(decode_solution(sol, problem), s, args.gantt)
        _write(text, args.gantt_out or ("-" if args.out else None))
    return OK


def _allocation_from_json(raw: dict) -> Allocation:
    if raw.get("status") not in (None, "optimal", "node_limit", "time_limit") or "times" not in raw:
        raise UsageError("allocation file has no solution")
    sups = raw.get("supervisions", {})
    return Allocation(tuple(
        TaskAssignment(int(i), tuple(ex), tuple(sups.get(i, ())), *map(float, raw["times"][i]))
        for i, ex in raw["assignments"].items()
    ), float(raw.get("objective", "nan")))


def cmd_gantt(args) -> int:
    s = validate_scenario(_load(args.scenario, args))
    if args.allocation:
        try:
            raw = json.loads(Path(args.allocation).read_text(encoding="utf-8"))
            alloc = _allocation_from_json(raw)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read allocation: {exc}") from exc
    else:
        problem = build_milp(s)
        sol = solve(problem, _solver_config(args))
        if not sol.has_incumbent:
            print(f"no allocation: {sol.status.value}", file=sys.stderr)
            return DOMAIN_FAILURE
        alloc = decode_solution(sol, problem)
    _write(render_gantt(alloc, s, args.format, args.width), args.out)
    return OK


def cmd_simulate(args) -> int:
    s = validate_scenario(_load(args.scenario, args))
    trace = run_execution(s, _noise(args), args.seed, Policy(args.policy),
                          replan_config=_replan_config(args),
                          solver_config=SolverConfig(node_limit=args.node_limit))
    out = {"schema_version": SCHEMA_VERSION, "scenario": s.name, **trace.to_dict()}
    _write(_dumps(out), args.out)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            dump_outcomes(trace.outcomes, fh)
    return DOMAIN_FAILURE if trace.terminated else OK


def cmd_campaign(args) -> int:
    s = validate_scenario(_load(args.scenario, args))
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    progress = None
    if args.verbose:
        def progress(t, r, st):
            print(f"trial {t}: cost replan {r.realized.total:.4f} static {st.realized.total:.4f}, "
                  f"{len(r.replans)} replans", file=sys.stderr)
    report = run_campaign(s, _noise(args), args.trials, args.seed, replan_config=_replan_config(args),
                          node_limit=args.node_limit, progress=progress)
    _write(report.to_json(), args.out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return OK


# --------------------------------------------------------------------------
# parser


def _scenario_args(p):
    p.add_argument("scenario", help="scenario JSON path, or 'bundled'")
    p.add_argument("--min-quality", type=float, help="override the quality floor")
    p.add_argument("--big-m", type=float, help="override the big-M constant")


def _noise_args(p):
    d = NoiseConfig()
    p.add_argument("--quality-sigma", type=float, default=d.quality_sigma)
    p.add_argument("--duration-sigma", type=float, default=d.duration_sigma, help="relative")
    p.add_argument("--workload-sigma", type=float, default=d.workload_sigma)
    p.add_argument("--initial-quality-sigma", type=float, default=d.initial_quality_sigma,
                   help="spread of initial qualities around the floor; negative keeps scenario values")
    p.add_argument("--intervention-probability", type=float, default=d.intervention_probability)
    p.add_argument("--no-guard", action="store_true", help="disable the feasibility guard")
    p.add_argument("--measurement-base", choices=["current", "planning"], default=d.measurement_base,
                   help="estimates that measurements perturb")
    p.add_argument("--delta-threshold", type=float, default=ReplanConfig().delta_threshold)
    p.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT,
                   help="branch-and-bound node cap per solve")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmrta", description="Human multi-robot task allocation: MILP planning and re-allocation.",
        epilog=f"${TIME_LIMIT_ENV} sets a default solver time limit in seconds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    _scenario_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve the allocation MILP")
    _scenario_args(p)
    p.add_argument("-o", "--out", help="allocation JSON output (default stdout)")
    p.add_argument("--gantt", choices=["text", "svg"], help="also render a Gantt chart")
    p.add_argument("--gantt-out", help="Gantt output path")
    p.add_argument("--export-lp", metavar="PATH", help="write the LP file instead of solving")
    p.add_argument("--time-limit", type=float)
    p.add_argument("--node-limit", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="execute one seeded trial")
    _scenario_args(p)
    _noise_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=[x.value for x in Policy], default=Policy.REPLAN.value)
    p.add_argument("-o", "--out", help="trace JSON output (default stdout)")
    p.add_argument("--log", help="newline-delimited JSON replay log of task outcomes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("campaign", help="paired re-planning vs static campaign")
    _scenario_args(p)
    _noise_args(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="seed of trial 0; trial t uses seed + t")
    p.add_argument("-o", "--out", help="report JSON output (default stdout)")
    p.add_argument("--csv", help="per-trial CSV output")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("gantt", help="render a Gantt chart")
    _scenario_args(p)
    p.add_argument("--allocation", help="allocation JSON from 'solve' (solves if omitted)")
    p.add_argument("--format", choices=["text", "svg"], default="text")
    p.add_argument("--width", type=int)
    p.add_argument("-o", "--out")
    p.add_argument("--time-limit", type=float)
    p.add_argument("--node-limit", type=int)
    p.set_defaults(func=cmd_gantt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code else OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return DOMAIN_FAILURE
