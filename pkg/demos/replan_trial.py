"""One noisy execution of the assembly plan under both policies.

Shows the per-task ``delta`` trace, when re-plans fire and the realized
cost of each policy.  Run with ``python demos/replan_trial.py [seed]``.
"""

import sys

from hmrta.model import bundled_scenario
from hmrta.sim import NoiseConfig, Policy, prepare_trial, run_execution
from hmrta.solver import SolverConfig


def main(seed=0):
    s = bundled_scenario()
    noise = NoiseConfig()
    config = SolverConfig(node_limit=100)
    setup = prepare_trial(s, noise, seed, config)
    for policy in Policy:
        trace = run_execution(s, noise, seed, policy, solver_config=config, setup=setup)
        print(f"{policy.value}: realized cost {trace.realized.total:.3f}, makespan {trace.executed.makespan:.1f} s")
        for o, d in zip(trace.outcomes, trace.deltas):
            fired = [r for r in trace.replans if r.after_task == o.task]
            mark = f"  re-plan ({', '.join(fired[0].reasons)})" if fired else ""
            print(f"  T{o.task + 1:<3} q {o.measured_quality:.2f}  delta {d:6.3f}{mark}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
