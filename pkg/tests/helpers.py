"""Small scenario builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from hmrta.model import Agent, AgentKind, ParamMatrices, Scenario, Task, random_scenario, validate_scenario

from oracles import task_options

M = 1000.0


def make_scenario(duration, exec_quality, *, kinds=None, sup_quality=None, exec_workload=None,
                  sup_workload=None, groups=None, collaborative=(), precedence=(), spatial=(),
                  min_quality=0.8, big_m=M, horizon=None, validate=True, name="test"):
    """A scenario from row-major lists; ``kinds`` is a string like ``"rrh"``."""
    duration = np.array(duration, dtype=float)
    m, n_a = duration.shape
    kinds = kinds or "r" * n_a
    agents = [Agent(j, AgentKind.HUMAN if k == "h" else AgentKind.ROBOT) for j, k in enumerate(kinds)]
    groups = groups if groups is not None else list(range(m))
    tasks = [Task(i, groups[i], i in collaborative) for i in range(m)]
    zeros = np.zeros((m, n_a))
    params = ParamMatrices(
        duration=duration,
        exec_quality=np.array(exec_quality, dtype=float),
        sup_quality=zeros if sup_quality is None else np.array(sup_quality, dtype=float),
        exec_workload=zeros if exec_workload is None else np.array(exec_workload, dtype=float),
        sup_workload=zeros if sup_workload is None else np.array(sup_workload, dtype=float),
    )
    prec = np.zeros((m, m), dtype=int)
    for i, k in precedence:
        prec[i, k] = 1
    spat = np.zeros((m, m), dtype=int)
    for i, k in spatial:
        spat[i, k] = spat[k, i] = 1
    s = Scenario(tuple(agents), tuple(tasks), params, prec, spat, min_quality=min_quality,
                 big_m=big_m, horizon=horizon, name=name)
    return validate_scenario(s) if validate else s


def single_task():
    """1 task, 1 robot: q = 0.9, duration 10 s, workload 0.5, T_M = 10."""
    return make_scenario([[10.0]], [[0.9]], exec_workload=[[0.5]])


def small_random(seed: int, max_tasks: int = 4, max_agents: int = 3):
    """A random scenario with at least one robot and one human, at most ``max_agents`` agents."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, max_tasks + 1))
    n_a = int(rng.integers(2, max_agents + 1))
    n_h = int(rng.integers(1, n_a))
    return random_scenario(rng, m, n_a - n_h, n_h)


def corpus(n: int = 20, seed: int = 1234, sizes=(3, 6)):
    """Deterministic set of feasible random scenarios with ``sizes`` tasks and 2-3 agents.

    Sequencing is always possible, so a scenario is feasible exactly when
    every task has an assignment meeting the quality floor.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        m = int(rng.integers(sizes[0], sizes[1] + 1))
        n_r = int(rng.integers(1, 3))
        s = random_scenario(rng, m, n_r, 1, p_collaborative=0.15)
        if all(task_options(s, i) for i in range(m)):
            out.append(s)
    return out
