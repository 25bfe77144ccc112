import numpy as np
import pytest

from hmrta.milp import VarKind, build_milp, expected_column_count, export_lp, parse_lp
from hmrta.solver import solve

from helpers import make_scenario, single_task, small_random


def test_column_count_small():
    s = make_scenario([[3, 4], [5, 6]], [[0.9, 0.9], [0.9, 0.9]], kinds="rh")
    p = build_milp(s)
    assert p.n_cols == 14
    kinds = [c.kind for c in p.columns]
    counts = {k: kinds.count(k) for k in VarKind}
    assert counts[VarKind.X] == 4 and counts[VarKind.S] == 2
    assert counts[VarKind.V] == 2 and counts[VarKind.Z] == 1


def test_column_count_bundled(bundled):
    p = build_milp(bundled)
    assert p.n_cols == 449 == expected_column_count(14, 3, 1)


def test_no_robot_supervision_columns(bundled):
    p = build_milp(bundled)
    for c in p.columns:
        if c.kind is VarKind.S:
            assert c.key[1] in bundled.humans


def test_collaborative_assignment_row():
    s = make_scenario([[5, 6]], [[0.5, 0.5]], collaborative=[0])
    p = build_milp(s)
    row = p.row_names.index("assign_0")
    a = p.A.toarray()[row]
    assert a[p.col("X", 0, 0)] == a[p.col("X", 0, 1)] == 1
    assert p.sense[row] == "=" and p.rhs[row] == 2


def test_sentinel_fixes_assignment_to_zero():
    s = make_scenario([[5, 1000]], [[0.9, 1000]])
    p = build_milp(s)
    assert p.ub[p.col("X", 0, 1)] == 0


def test_objective_coefficients():
    p = build_milp(single_task())
    assert p.c[p.col("X", 0, 0)] == pytest.approx(-(0.9 - 0.5))
    assert p.c[p.col("tmax")] == pytest.approx(1 / 10)


def test_lp_export_names_and_binaries():
    text = export_lp(build_milp(single_task()))
    binaries = text.split("Binaries")[1]
    assert "X_0_0" in binaries
    for token in ("Minimize", "Subject To", "Bounds", "ts_0", "te_0", "tmax", "End"):
        assert token in text


def test_lp_export_variable_names(bundled):
    text = export_lp(build_milp(bundled))
    for name in ("X_4_1", "S_0_2", "V_0_1_2", "Z_6_7", "ts_13", "te_13"):
        assert name in text


@pytest.mark.parametrize("seed", range(10))
def test_lp_round_trip(seed):
    p = build_milp(small_random(seed))
    back = parse_lp(export_lp(p))
    assert len(back.names) == p.n_cols
    order = [back.names.index(c.name) for c in p.columns]
    np.testing.assert_allclose(back.c[order], p.c)
    np.testing.assert_allclose(back.lb[order], p.lb)
    np.testing.assert_allclose(back.ub[order], p.ub)
    np.testing.assert_array_equal(back.integer[order], p.integer)
    np.testing.assert_allclose(back.A.toarray()[:, order], p.A.toarray())
    np.testing.assert_allclose(back.rhs, p.rhs)


def _external_objective(text, tmp_path):
    highspy = pytest.importorskip("highspy")
    path = tmp_path / "model.lp"
    path.write_text(text)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.readModel(str(path))
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
    return h.getInfo().objective_function_value


def test_external_solver_agrees_on_bundled(bundled_solved, tmp_path):
    problem, sol = bundled_solved
    assert _external_objective(export_lp(problem), tmp_path) == pytest.approx(sol.objective, abs=1e-6)


@pytest.mark.parametrize("index", range(5))
def test_external_solver_agrees_on_random(index, small_corpus, tmp_path):
    p = build_milp(small_corpus[index])
    sol = solve(p)
    assert _external_objective(export_lp(p), tmp_path) == pytest.approx(sol.objective, abs=1e-6)
