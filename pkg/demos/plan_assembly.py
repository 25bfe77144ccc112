"""Plan the bundled assembly scenario and print the schedule.

Run with ``python demos/plan_assembly.py [out.svg]``.
"""

import sys

from hmrta.milp import build_milp
from hmrta.model import bundled_scenario
from hmrta.schedule import check_feasibility, decode_solution, evaluate_cost, render_gantt
from hmrta.solver import solve


def main(svg_path=None):
    s = bundled_scenario()
    problem = build_milp(s)
    sol = solve(problem)
    alloc = decode_solution(sol, problem)
    cost = evaluate_cost(alloc, s.params, s.horizon)
    print(f"{sol.status.value}: objective {sol.objective:.4f} after {sol.nodes_explored} nodes")
    print(f"makespan {alloc.makespan:.1f} s of T_M {s.horizon:.1f} s; quality {cost.quality_sum:.2f}, "
          f"workload {cost.workload_sum:.2f}")
    print(f"violations: {len(check_feasibility(alloc, s))}\n")
    print(render_gantt(alloc, s, width=90))
    if svg_path:
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(render_gantt(alloc, s, "svg"))


if __name__ == "__main__":
    main(*sys.argv[1:2])
