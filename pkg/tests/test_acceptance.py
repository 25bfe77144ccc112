"""Acceptance checks; each criterion prints one pass/fail line in the run summary."""

import json
import time

import numpy as np
import pytest

from hmrta.cli import main
from hmrta.milp import build_milp
from hmrta.model import AgentKind, random_scenario, scenario_from_dict, scenario_to_dict, validate_scenario
from hmrta.replan import Belief, TaskOutcome, update_parameters
from hmrta.schedule import FAMILIES, Allocation, TaskAssignment, check_feasibility, decode_solution, evaluate_cost
from hmrta.sim import NoiseConfig, run_campaign
from hmrta.solver import SolveStatus, solve

from helpers import M, corpus, make_scenario
from oracles import brute_force


@pytest.fixture
def criterion(record_property):
    """Label the running test with its criterion; returns a setter for the detail text."""

    def label(n, title):
        record_property("criterion", n)
        record_property("title", title)
        return lambda text: record_property("detail", text)

    return label


def _mixed_instances(n_feasible, seed):
    """Random instances with m <= 4 and 2-3 agents, at least one robot and one human."""
    rng = np.random.default_rng(seed)
    feasible, infeasible = [], []
    while len(feasible) < n_feasible:
        m = int(rng.integers(1, 5))
        n_r = int(rng.integers(1, 3))
        n_h = int(rng.integers(1, 4 - n_r))
        s = random_scenario(rng, m, n_r, n_h)
        (infeasible if np.isinf(brute_force(s)[0]) else feasible).append(s)
    return feasible, infeasible


def test_oracle_equivalence(criterion):
    detail = criterion(1, "oracle equivalence")
    t0 = time.perf_counter()
    feasible, infeasible = _mixed_instances(50, seed=2024)
    worst, wrong_status = 0.0, 0
    for s in feasible:
        ref = brute_force(s)[0]
        sol = solve(build_milp(s))
        if sol.status is not SolveStatus.OPTIMAL:
            wrong_status += 1
            continue
        worst = max(worst, abs(sol.objective - ref))
    for s in infeasible:
        wrong_status += solve(build_milp(s)).status is not SolveStatus.INFEASIBLE
    elapsed = time.perf_counter() - t0
    detail(f"{len(feasible)} feasible + {len(infeasible)} infeasible instances, max |diff| {worst:.2e}, "
           f"{wrong_status} status mismatches, {elapsed:.1f} s")
    assert wrong_status == 0 and worst <= 1e-6
    assert elapsed < 120


def test_formulation_fidelity(criterion, bundled_solved, bundled):
    detail = criterion(2, "formulation fidelity")
    instances = [(s, *(lambda p: (p, solve(p)))(build_milp(s))) for s in corpus(20)]
    instances.append((bundled, *bundled_solved))
    violations, worst = 0, 0.0
    for s, problem, sol in instances:
        assert sol.status is SolveStatus.OPTIMAL
        alloc = decode_solution(sol, problem)
        report = check_feasibility(alloc, s)
        assert {v.family for v in report} <= set(FAMILIES)
        violations += len(report)
        worst = max(worst, abs(evaluate_cost(alloc, s.params, s.horizon).total - sol.objective))
    detail(f"{len(instances)} solved instances, {violations} violations over {len(FAMILIES)} families, "
           f"max cost gap {worst:.2e}")
    assert violations == 0 and worst <= 1e-6


def test_paper_instance_structure(criterion, bundled):
    detail = criterion(3, "assembly instance structure")
    s, p = bundled, bundled.params
    robots, (human,) = s.robots, s.humans
    group = {t.id: t.group for t in s.tasks}
    assert s.min_quality == 0.8 and s.big_m == 1000
    for i in range(s.n_tasks):
        capable = [j for j in robots if s.capable(i, j)]
        expected = {1: (0.8, 0.7), 2: (0.4, 0.4), 3: (0.5, 0.5)}[group[i]]
        assert all(p.exec_quality[i, j] == expected[j] for j in capable)
        assert p.exec_quality[i, human] == 1 and p.sup_quality[i, human] == 1
    assert p.exec_workload[4, human] == p.exec_workload[9, human] == M

    t0 = time.perf_counter()
    problem = build_milp(s)
    sol = solve(problem)
    elapsed = time.perf_counter() - t0
    alloc = decode_solution(sol, problem)
    weak = 1  # the 0.7-quality robot
    quality = {a.task: sum(p.exec_quality[a.task, j] for j in a.executors)
               + sum(p.sup_quality[a.task, h] for h in a.supervisors) for a in alloc}
    collab_ok = all(sorted(alloc[i].executors) == sorted(robots) for i in (4, 9))
    weak_solo = [a for a in alloc if group[a.task] == 1 and a.executors == (weak,)]
    supervised_ok = all(a.supervisors == (human,) for a in weak_solo)
    detail(f"status {sol.status.value}, objective {sol.objective:.6f}, min task quality "
           f"{min(quality.values()):.2f}, {len(weak_solo)} weak-robot tasks all supervised: {supervised_ok}, "
           f"{elapsed:.1f} s")
    assert sol.status is SolveStatus.OPTIMAL
    assert collab_ok
    assert min(quality.values()) >= 0.8 - 1e-9
    assert supervised_ok
    assert all(s.agents[j].kind is AgentKind.ROBOT for i in (4, 9) for j in alloc[i].executors)
    assert elapsed < 60


@pytest.fixture(scope="module")
def paper_campaign(bundled):
    t0 = time.perf_counter()
    report = run_campaign(bundled, NoiseConfig(), trials=50, seed_base=0)
    return report, time.perf_counter() - t0


@pytest.mark.slow
def test_reallocation_benefit(criterion, paper_campaign):
    detail = criterion(4, "re-allocation benefit")
    report, elapsed = paper_campaign
    r, st = report.replan, report.static
    diff = np.array(st.costs) - np.array(r.costs)
    se = diff.std(ddof=1) / np.sqrt(len(diff)) / abs(st.cost_mean)
    detail(f"mean delta {r.delta_mean:.3f} vs {st.delta_mean:.3f}, cost {r.cost_mean:.3f} +- {r.cost_std:.3f} "
           f"vs {st.cost_mean:.3f} +- {st.cost_std:.3f}, improvement {report.cost_improvement:.1%} "
           f"(paired s.e. {se:.1%}, required >= 20%), {elapsed:.0f} s")
    assert report.trials == 50
    assert r.terminated == st.terminated == 0
    assert r.delta_mean < st.delta_mean
    assert report.cost_improvement > 0
    assert elapsed < 300
    assert report.cost_improvement >= 0.20


@pytest.mark.slow
def test_delta_boundaries(criterion, paper_campaign):
    detail = criterion(5, "delta boundary behaviour")
    report, _ = paper_campaign
    first_equal = all(a[0] == b[0] for a, b in zip(report.replan.deltas, report.static.deltas))
    last_zero = all(d[-1] == 0 for d in report.replan.deltas + report.static.deltas)
    by_step_equal = (report.replan.delta_mean_by_step[0] == report.static.delta_mean_by_step[0]
                     and report.replan.delta_std_by_step[0] == report.static.delta_std_by_step[0])
    detail(f"first-task delta identical in all trials: {first_equal}, final delta 0 in all trials: {last_zero}")
    assert first_equal and by_step_equal and last_zero


def _with_big_m(s, big_m):
    raw = scenario_to_dict(s)
    raw["big_M"] = big_m
    raw["horizon"] = None
    return validate_scenario(scenario_from_dict(raw))


def test_big_m_insensitivity(criterion):
    detail = criterion(6, "big-M insensitivity")
    worst = 0.0
    instances = corpus(20, seed=606)
    for s in instances:
        a = solve(build_milp(s))
        b = solve(build_milp(_with_big_m(s, 2000.0)))
        assert a.status is b.status is SolveStatus.OPTIMAL
        worst = max(worst, abs(a.objective - b.objective))
    detail(f"{len(instances)} instances, max objective change {worst:.2e}")
    assert worst <= 1e-6


def test_determinism(criterion, tmp_path, small_corpus):
    detail = criterion(7, "determinism")
    small = tmp_path / "small.json"
    small.write_text(json.dumps(scenario_to_dict(small_corpus[0])))
    runs = {
        "solve": ["solve", "bundled"],
        "campaign": ["campaign", "bundled", "--trials", "2", "--seed", "7"],
        "campaign-small": ["campaign", str(small), "--trials", "5", "--seed", "3"],
    }
    same = {}
    for name, args in runs.items():
        outs = []
        for k in range(2):
            path = tmp_path / f"{name}-{k}.json"
            assert main([*args, "-o", str(path)]) == 0
            outs.append(path.read_bytes())
        same[name] = outs[0] == outs[1]
    detail(", ".join(f"{k} byte-identical: {v}" for k, v in same.items()))
    assert all(same.values())


def _update_fixture():
    """Robots 0 and 1, human 2; tasks 0 and 1 share a group, task 2 is collaborative in another."""
    return make_scenario(
        duration=[[10, 14, 15], [20, 16, 25], [30, 30, 30]],
        exec_quality=[[0.9, 0.7, 1.0], [0.9, 0.7, 1.0], [0.4, 0.4, 1.0]],
        sup_quality=[[0, 0, 0.3], [0, 0, 0.3], [0, 0, 0.2]],
        exec_workload=[[0.2, 0.3, 0.6], [0.4, 0.3, 0.6], [0.5, 0.5, 0.5]],
        sup_workload=[[0, 0, 0.2], [0, 0, 0.2], [0, 0, 0.3]],
        kinds="rrh",
        groups=["a", "a", "b"],
        collaborative=[2],
    )


def test_update_rules(criterion):
    detail = criterion(8, "update-rule suite")
    s = _update_fixture()
    b0 = Belief.from_scenario(s)
    plan = Allocation((
        TaskAssignment(0, (0,), (), 0, 10),
        TaskAssignment(1, (1,), (2,), 10, 26),
        TaskAssignment(2, (0, 1), (), 26, 56),
    ))
    checks = {}

    # unsupervised solo: measured quality becomes the executor's quality for the group
    b = update_parameters(b0, TaskOutcome(0, 0.6, 10.0), plan, s).current
    checks["solo"] = (b.exec_quality[0, 0] == b.exec_quality[1, 0] == 0.6
                      and np.array_equal(b.exec_quality[:, 1:], s.params.exec_quality[:, 1:])
                      and b.exec_quality[2, 0] == 0.4)

    # collaborative: split equally between the two executors
    b = update_parameters(b0, TaskOutcome(2, 0.8, 30.0), plan, s).current
    checks["collaborative"] = b.exec_quality[2, 0] == b.exec_quality[2, 1] == 0.4 and \
        update_parameters(b0, TaskOutcome(2, 0.6, 30.0), plan, s).current.exec_quality[2, 0] == 0.3

    # supervised, no intervention: executor updated, supervisor untouched
    b = update_parameters(b0, TaskOutcome(1, 0.75, 16.0, supervised=True), plan, s).current
    checks["supervised"] = (b.exec_quality[0, 1] == b.exec_quality[1, 1] == 0.75
                            and np.array_equal(b.sup_quality, s.params.sup_quality))

    # supervised with intervention: measured quality becomes the supervision quality
    b = update_parameters(b0, TaskOutcome(1, 0.9, 16.0, supervised=True, intervened=True), plan, s).current
    checks["intervention"] = (b.sup_quality[0, 2] == b.sup_quality[1, 2] == 0.9 and b.sup_quality[2, 2] == 0.2
                              and np.array_equal(b.exec_quality, s.params.exec_quality))

    # 10% longer than planned: the agent's other same-group estimates grow by 10%
    b = update_parameters(b0, TaskOutcome(0, 0.9, 11.0, {0: 0.22}), plan, s).current
    checks["proportional"] = (np.isclose(b.duration[0, 0], 11.0) and np.isclose(b.duration[1, 0], 22.0)
                              and np.isclose(b.exec_workload[0, 0], 0.22)
                              and np.isclose(b.exec_workload[1, 0], 0.44)
                              and b.duration[2, 0] == 30 and b.duration[1, 1] == 16)

    detail(", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert all(checks.values())
