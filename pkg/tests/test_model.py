import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmrta.model import (
    AgentKind,
    AsymmetricSpatialMatrix,
    BigMTooSmall,
    DimensionMismatch,
    GroupInconsistency,
    MissingPosition,
    PrecedenceCycle,
    QualityOutOfRange,
    TaskInfeasibleForAllAgents,
    bundled_scenario,
    check_scenario,
    compute_horizon,
    derive_spatial_conflicts,
    load_scenario,
    random_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)

from helpers import M, make_scenario


def test_bundled_skeleton():
    s = bundled_scenario()
    assert s.n_tasks == 14 and s.n_agents == 3
    assert [a.kind for a in s.agents].count(AgentKind.HUMAN) == 1
    assert [t.id for t in s.tasks if t.collaborative] == [4, 9]
    assert s.spatial[6, 7] == s.spatial[7, 6] == 1
    assert s.spatial[12, 13] == s.spatial[13, 12] == 1
    assert len({t.group for t in s.tasks}) == 3
    assert s.min_quality == 0.8 and s.big_m == 1000
    assert s.horizon < s.big_m


def test_robot_supervision_quality_is_zero():
    s = bundled_scenario()
    assert np.all(s.params.sup_quality[:, s.robots] == 0)


def test_precedence_two_cycle():
    s = make_scenario([[1], [1]], [[0.9], [0.9]], precedence=[(0, 1), (1, 0)], validate=False)
    with pytest.raises(PrecedenceCycle):
        validate_scenario(s)


def test_precedence_long_cycle_is_named():
    s = make_scenario([[1]] * 3, [[0.9]] * 3, precedence=[(0, 1), (1, 2), (2, 0)], validate=False)
    with pytest.raises(PrecedenceCycle) as info:
        validate_scenario(s)
    assert "0 -> 1 -> 2 -> 0" in str(info.value)


def test_asymmetric_spatial():
    s = make_scenario([[1], [1]], [[0.9], [0.9]], validate=False)
    spatial = np.zeros((2, 2), dtype=int)
    spatial[0, 1] = 1
    with pytest.raises(AsymmetricSpatialMatrix):
        validate_scenario(dataclasses.replace(s, spatial=spatial))


def test_dimension_mismatch():
    s = make_scenario([[1, 1]], [[0.9, 0.9]], validate=False)
    bad = dataclasses.replace(s.params, exec_quality=np.array([[0.9]]))
    with pytest.raises(DimensionMismatch):
        validate_scenario(dataclasses.replace(s, params=bad))


def test_quality_out_of_range():
    s = make_scenario([[1]], [[1.2]], validate=False)
    with pytest.raises(QualityOutOfRange):
        validate_scenario(s)


def test_robot_with_supervision_quality_rejected():
    s = make_scenario([[1, 1]], [[0.9, 0.9]], sup_quality=[[0.3, 0]], kinds="rh", validate=False)
    with pytest.raises(QualityOutOfRange):
        validate_scenario(s)


def test_group_inconsistency():
    s = make_scenario([[1], [1]], [[0.9], [0.8]], groups=[0, 0], validate=False)
    with pytest.raises(GroupInconsistency):
        validate_scenario(s)


def test_big_m_must_exceed_horizon():
    s = make_scenario([[600], [600]], [[0.9], [0.9]], validate=False)
    with pytest.raises(BigMTooSmall):
        validate_scenario(s)


def test_all_violations_reported():
    s = make_scenario([[1], [1]], [[1.5], [0.9]], precedence=[(0, 1), (1, 0)], validate=False)
    kinds = {v.error for v in check_scenario(s)}
    assert {PrecedenceCycle, QualityOutOfRange} <= kinds


def test_spatial_derivation_examples():
    d = derive_spatial_conflicts([(0, 0, 0), (0, 0, 0.5)], 1.0)
    assert d[0, 1] == d[1, 0] == 1
    assert derive_spatial_conflicts([(0, 0, 0), (1, 0, 0)], 1.0)[0, 1] == 0
    d = derive_spatial_conflicts([(0, 0, 0), (0.6, 0, 0), (1.2, 0, 0)], 1.0)
    np.testing.assert_array_equal(d, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])


def test_spatial_derivation_needs_positions():
    with pytest.raises(MissingPosition):
        derive_spatial_conflicts([(0, 0, 0), None], 1.0)


def test_spatial_derived_during_validation():
    raw = scenario_to_dict(make_scenario([[1], [1]], [[0.9], [0.9]]))
    raw.pop("spatial")
    raw["epsilon"] = 1.0
    raw["tasks"][0]["position"] = [0, 0, 0]
    raw["tasks"][1]["position"] = [0, 0, 0.5]
    s = validate_scenario(scenario_from_dict(raw))
    assert s.spatial[0, 1] == 1


def test_horizon_examples():
    assert compute_horizon([[3, 5]], M) == 5
    assert compute_horizon([[3, M], [M, 4]], M) == 7
    with pytest.raises(TaskInfeasibleForAllAgents):
        compute_horizon([[M, M]], M)


def test_horizon_random_with_sentinels():
    rng = np.random.default_rng(5)
    d = rng.uniform(1, 50, (5, 3))
    d[rng.random((5, 3)) < 0.3] = M
    d[:, 0] = rng.uniform(1, 50, 5)
    expected = sum(max(v for v in row if v < M) for row in d)
    assert compute_horizon(d, M) == pytest.approx(expected)


def test_horizon_override_honoured():
    s = make_scenario([[10.0]], [[0.9]], horizon=668.37)
    assert s.horizon == 668.37


def test_validate_idempotent():
    s = bundled_scenario()
    assert validate_scenario(s) is s


def test_json_round_trip(tmp_path):
    s = bundled_scenario()
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario_to_dict(s)))
    back = validate_scenario(load_scenario(path))
    assert back == s


def test_random_scenario_valid():
    rng = np.random.default_rng(0)
    for _ in range(30):
        s = random_scenario(rng, int(rng.integers(1, 7)), int(rng.integers(1, 3)), int(rng.integers(0, 2)))
        assert s.validated and not check_scenario(s)


positions = st.lists(
    st.tuples(*[st.floats(-5, 5, allow_nan=False)] * 3), min_size=1, max_size=8)


@given(positions, st.floats(0.01, 5))
def test_spatial_symmetric_zero_diagonal(points, eps):
    d = derive_spatial_conflicts(points, eps)
    assert np.array_equal(d, d.T)
    assert not np.diag(d).any()


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 20))
def test_horizon_monotone(seed, bump):
    rng = np.random.default_rng(seed)
    d = rng.uniform(1, 50, (4, 3))
    d[rng.random((4, 3)) < 0.3] = M
    d[:, int(rng.integers(3))] = rng.uniform(1, 50, 4)
    finite = np.argwhere(d < M)
    i, j = finite[int(rng.integers(len(finite)))]
    bigger = d.copy()
    bigger[i, j] += bump
    assert compute_horizon(bigger, M) >= compute_horizon(d, M)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_validate_idempotent_random(seed):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, int(rng.integers(1, 6)), 2, 1)
    again = validate_scenario(dataclasses.replace(s, validated=False))
    assert again == s
    assert validate_scenario(again) is again
