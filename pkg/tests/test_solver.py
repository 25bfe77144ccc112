import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmrta.milp import build_milp
from hmrta.model import random_scenario, validate_scenario
from hmrta.schedule import check_feasibility, decode_solution
from hmrta.solver import LpStatus, SolverConfig, SolveStatus, solve, solve_lp, solve_relaxation

from helpers import make_scenario, single_task, small_random
from oracles import brute_force, tableau_simplex


def test_lp_bound_attained():
    res = solve_lp(np.array([-1.0]), np.zeros((0, 1)), [], [], [0.0], [1.0])
    assert res.status is LpStatus.OPTIMAL
    assert res.x[0] == pytest.approx(1) and res.objective == pytest.approx(-1)


def test_lp_tight_row():
    res = solve_lp(np.array([1.0, 1.0]), [[1.0, 1.0]], [2.0], [np.inf], [0, 0], [3, 3])
    assert res.objective == pytest.approx(2)


def test_lp_infeasible():
    res = solve_lp(np.array([1.0]), [[1.0]], [5.0], [np.inf], [0], [1])
    assert res.status is LpStatus.INFEASIBLE


@pytest.mark.parametrize("seed", range(20))
def test_lp_matches_tableau_oracle(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 2, (10, 10))
    b = rng.uniform(1, 10, 10)
    c = rng.uniform(-2, 1, 10)
    # a box large enough to never bind, plus explicit rows keeping it bounded
    A = np.vstack([A, np.ones((1, 10))])
    b = np.append(b, 50.0)
    status, _, ref = tableau_simplex(c, A, b)
    assert status == "optimal"
    res = solve_lp(c, A, np.full(len(b), -np.inf), b, np.zeros(10), np.full(10, 1e3))
    assert res.objective == pytest.approx(ref, abs=1e-7)


def test_single_task_optimum():
    p = build_milp(single_task())
    sol = solve(p)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(0.6)
    x = sol.values
    assert x[p.col("X", 0, 0)] == pytest.approx(1)
    assert x[p.col("ts", 0)] == pytest.approx(0) and x[p.col("te", 0)] == pytest.approx(10)


def test_unreachable_floor_infeasible():
    s = make_scenario([[10.0]], [[0.5]])
    sol = solve(build_milp(s))
    assert sol.status is SolveStatus.INFEASIBLE and not sol.has_incumbent


def test_supervision_rescues_floor():
    s = make_scenario([[10.0, 12.0]], [[0.5, 0.6]], sup_quality=[[0, 0.4]], sup_workload=[[0, 0.1]],
                      kinds="rh")
    p = build_milp(s)
    alloc = decode_solution(solve(p), p)
    assert alloc[0].executors == (0,) and alloc[0].supervisors == (1,)


def _oracle_instances(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        m = int(rng.integers(1, 5))
        n_r = int(rng.integers(1, 3))
        n_h = int(rng.integers(1, 4 - n_r)) if n_r < 3 else 0
        out.append(random_scenario(rng, m, n_r, n_h))
    return out


@pytest.mark.parametrize("branching", ["pseudocost", "most_fractional"])
def test_matches_brute_force(branching):
    config = SolverConfig(branching=branching, valid_cuts=branching == "pseudocost",
                          primal_heuristic=branching == "pseudocost")
    for s in _oracle_instances(25, 77):
        ref, _ = brute_force(s)
        sol = solve(build_milp(s), config)
        if np.isinf(ref):
            assert sol.status is SolveStatus.INFEASIBLE
        else:
            assert sol.status is SolveStatus.OPTIMAL
            assert sol.objective == pytest.approx(ref, abs=1e-6)


def test_highs_engine_agrees():
    for seed in range(5):
        p = build_milp(small_random(seed))
        a, b = solve(p), solve(p, SolverConfig(lp_engine="highs"))
        assert a.status == b.status
        if a.has_incumbent:
            assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_deterministic():
    p = build_milp(small_random(3, max_tasks=5))
    runs = [solve(p) for _ in range(2)]
    assert runs[0].objective == runs[1].objective
    assert runs[0].status == runs[1].status
    assert runs[0].nodes_explored == runs[1].nodes_explored
    np.testing.assert_array_equal(runs[0].values, runs[1].values)


def test_node_limit_keeps_incumbent(bundled):
    sol = solve(build_milp(bundled), SolverConfig(node_limit=5))
    assert sol.status is SolveStatus.NODE_LIMIT and sol.has_incumbent
    assert sol.best_bound <= sol.objective + 1e-9


def test_start_incumbent_is_used():
    s = small_random(11, max_tasks=4)
    p = build_milp(s)
    opt = solve(p)
    if not opt.has_incumbent:
        pytest.skip("infeasible instance")
    sol = solve(p, SolverConfig(node_limit=0, primal_heuristic=False), start=opt.values)
    assert sol.objective <= opt.objective + 1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(branching="random")
    with pytest.raises(ValueError):
        SolverConfig(lp_engine="cplex")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimal_solutions_are_feasible(seed):
    s = small_random(seed, max_tasks=4)
    p = build_milp(s)
    sol = solve(p)
    if sol.status is SolveStatus.OPTIMAL:
        assert check_feasibility(decode_solution(sol, p), s) == []


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relaxation_sound(seed):
    p = build_milp(small_random(seed, max_tasks=4))
    sol = solve(p)
    if sol.status is SolveStatus.OPTIMAL:
        assert solve_relaxation(p).objective <= sol.objective + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.data())
def test_adding_precedence_never_improves(seed, data):
    s = small_random(seed, max_tasks=4)
    if s.n_tasks < 2:
        return
    base = solve(build_milp(s))
    if base.status is not SolveStatus.OPTIMAL:
        return
    i = data.draw(st.integers(0, s.n_tasks - 2))
    k = data.draw(st.integers(i + 1, s.n_tasks - 1))
    prec = s.precedence.copy()
    prec[i, k] = 1
    # generated precedence is upper triangular, so i < k keeps it acyclic
    tighter = validate_scenario(dataclasses.replace(s, precedence=prec, validated=False))
    sol = solve(build_milp(tighter))
    if sol.status is SolveStatus.OPTIMAL:
        assert sol.objective >= base.objective - 1e-9
    else:
        assert sol.status is SolveStatus.INFEASIBLE
