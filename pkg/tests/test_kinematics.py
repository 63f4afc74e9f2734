import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from planecal.errors import InvalidInputError
from planecal.kinematics import (NOMINAL_DH_DEG, REFERENCE_CALIBRATED_DH_DEG, DhRow, DhTable, chain,
                                 forward_kinematics, link_transform, nominal_table, tool_position)

# 50-digit reference values from an independent arbitrary-precision evaluation
GOLDEN_Q0 = np.array([1280.22537, 0.0, 1353.42737449])
GOLDEN_Q1 = np.array([986.27857897246294, 30.059334425080027, 1281.4788853805421])
GOLDEN_Q1_Z6 = np.array([-0.52082240946328133, -0.39571917468632927, -0.7564062087175333])
Q1 = np.array([0.1, -0.2, 0.3, -0.4, 0.5, -0.6])

angles = arrays(float, 6, elements=st.floats(-np.pi, np.pi))
tables = arrays(float, (6, 4), elements=st.floats(-1000, 1000))


def test_golden_positions(nominal):
    np.testing.assert_allclose(tool_position(nominal, np.zeros(6)), GOLDEN_Q0, atol=1e-9)
    T = forward_kinematics(nominal, Q1)
    np.testing.assert_allclose(T[:3, 3], GOLDEN_Q1, atol=1e-9)
    np.testing.assert_allclose(T[:3, 2], GOLDEN_Q1_Z6, atol=1e-12)


def test_zero_table_is_origin():
    assert np.array_equal(tool_position(DhTable(np.zeros((6, 4))), np.zeros(6)), np.zeros(3))


def test_link_transform_matrix():
    T = link_transform(DhRow(np.pi / 2, 2.0, 3.0, 0.0), np.pi / 2)
    expected = np.array([[0, 0, 1, 0], [1, 0, 0, 2], [0, 1, 0, 3], [0, 0, 0, 1.0]])
    np.testing.assert_allclose(T, expected, atol=1e-15)


def test_degree_round_trip():
    t = DhTable.from_degrees(REFERENCE_CALIBRATED_DH_DEG)
    np.testing.assert_allclose(t.to_degrees(), REFERENCE_CALIBRATED_DH_DEG, rtol=0, atol=1e-12)
    assert nominal_table() == DhTable.from_degrees(NOMINAL_DH_DEG)
    assert DhTable.from_rows(t.rows) == t


def test_tables_stored_verbatim():
    assert NOMINAL_DH_DEG[2][1] == -0.20614449
    assert REFERENCE_CALIBRATED_DH_DEG[2][1] == -210.7932


def test_batched_matches_single(nominal):
    qs = np.random.default_rng(0).uniform(-np.pi, np.pi, (5, 6))
    batch = forward_kinematics(nominal, qs)
    for q, T in zip(qs, batch):
        assert np.array_equal(forward_kinematics(nominal, q), T)


@pytest.mark.parametrize("q", [np.zeros(5), [0, 0, 0, 0, 0, np.nan], [np.inf] + [0] * 5])
def test_bad_joint_vectors(nominal, q):
    with pytest.raises(InvalidInputError):
        forward_kinematics(nominal, q)


def test_bad_tables():
    with pytest.raises(InvalidInputError):
        DhTable(np.zeros((5, 4)))
    with pytest.raises(InvalidInputError):
        DhTable(np.full((6, 4), np.nan))
    with pytest.raises(InvalidInputError):
        DhRow(0.0, np.inf, 0.0, 0.0)
    with pytest.raises(InvalidInputError):
        link_transform(DhRow(0, 0, 0, 0), np.nan)


@settings(max_examples=60, deadline=None)
@given(tables, angles)
def test_composition_is_left_fold(p, q):
    table = DhTable(p)
    T = np.eye(4)
    for row, qi in zip(table.rows, q):
        T = T @ link_transform(row, qi)
    np.testing.assert_allclose(forward_kinematics(table, q), T, rtol=1e-12, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(tables, angles, arrays(float, 3, elements=st.floats(-1e3, 1e3)))
def test_rotation_is_rigid(p, q, v):
    R = forward_kinematics(DhTable(p), q)[:3, :3]
    assert abs(np.linalg.norm(R @ v) - np.linalg.norm(v)) <= 1e-9
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.array_equal(forward_kinematics(DhTable(p), q)[3], [0, 0, 0, 1])


@settings(max_examples=60, deadline=None)
@given(tables, angles, st.floats(-10, 10))
def test_d6_translates_along_frame5_z(p, q, delta):
    table = DhTable(p)
    T5 = np.eye(4)
    for row, qi in zip(table.rows[:5], q[:5]):
        T5 = T5 @ link_transform(row, qi)
    moved = tool_position(table.with_d6(table.d[5] + delta), q)
    np.testing.assert_allclose(moved - tool_position(table, q), delta * T5[:3, 2], atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(tables, angles, st.floats(-10, 10))
def test_d6_translates_along_tool_z_without_twist(p, q, delta):
    p = p.copy()
    p[5, 0] = 0.0
    table = DhTable(p)
    T = forward_kinematics(table, q)
    moved = tool_position(table.with_d6(table.d[5] + delta), q)
    np.testing.assert_allclose(moved - T[:3, 3], delta * T[:3, 2], atol=1e-9)


def test_chain_broadcasts_parameter_batches(nominal):
    params = np.stack([nominal.params, nominal.params * 1.01])
    T = chain(params, np.zeros(6))
    assert T.shape == (2, 4, 4)
    assert np.array_equal(T[0], forward_kinematics(nominal, np.zeros(6)))
