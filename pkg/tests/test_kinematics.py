import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from reachbench import kinematics
from reachbench.kinematics import KinematicChain, KinematicsError, TableGeometry
from reachbench.selfcheck import fk_oracle

angles = st.lists(st.floats(-math.pi, math.pi, allow_nan=False), min_size=6, max_size=6)


def scipy_fk(chain, q):
    R = chain.base_pose[:3, :3].copy()
    p = chain.base_pose[:3, 3].copy()
    for axis, t, angle in zip(chain.axes, chain.translations, q):
        R = R @ Rotation.from_rotvec(axis * angle).as_matrix()
        p = p + R @ t
    return p + R @ chain.ee_offset


def test_fk_matches_homogeneous_oracle(chain):
    q = np.random.default_rng(0).uniform(-math.pi, math.pi, size=(1000, 6))
    fast = kinematics.forward_kinematics(chain, q)
    for i in range(len(q)):
        assert np.max(np.abs(fast[i] - fk_oracle(chain, q[i]))) <= 1e-9


def test_fk_matches_scipy_rotations(chain):
    q = np.random.default_rng(1).uniform(-math.pi, math.pi, size=(200, 6))
    fast = kinematics.forward_kinematics(chain, q)
    for i in range(len(q)):
        np.testing.assert_allclose(fast[i], scipy_fk(chain, q[i]), atol=1e-12)


def test_upright_pose_stacks_the_links(chain):
    ee = kinematics.forward_kinematics(chain, np.zeros(6))
    np.testing.assert_allclose(ee, [0.0, 0.0, 1.23], atol=1e-15)


def test_single_and_batch_agree(chain):
    q = np.random.default_rng(2).uniform(-1, 1, size=(5, 6))
    batch = kinematics.frame_points(chain, q)
    assert batch.shape == (5, 8, 3)
    for i in range(5):
        np.testing.assert_array_equal(batch[i], kinematics.frame_points(chain, q[i]))


def test_frame_points_end_at_ee(chain):
    q = np.array([0.3, -0.4, 1.0, 0.2, -0.1, 0.5])
    pts = kinematics.frame_points(chain, q)
    np.testing.assert_array_equal(pts[-1], kinematics.forward_kinematics(chain, q))
    np.testing.assert_array_equal(pts[0], chain.base_pose[:3, 3])


@settings(max_examples=300, deadline=None)
@given(angles, st.lists(st.floats(-1e-3, 1e-3), min_size=6, max_size=6))
def test_fk_lipschitz_in_chain_length(q, delta):
    chain = kinematics.default_chain()
    q, delta = np.array(q), np.array(delta)
    step = np.linalg.norm(kinematics.forward_kinematics(chain, q + delta)
                          - kinematics.forward_kinematics(chain, q))
    # each joint moves everything downstream by at most L * |delta_j|
    assert step <= chain.total_length * np.sum(np.abs(delta)) + 1e-12


@settings(max_examples=200, deadline=None)
@given(angles)
def test_reach_bounded_by_chain_length(q):
    chain = kinematics.default_chain()
    ee = kinematics.forward_kinematics(chain, np.array(q))
    assert np.linalg.norm(ee - chain.base_pose[:3, 3]) <= chain.total_length + 1e-12


def test_rejects_wrong_shape_and_nan(chain):
    with pytest.raises(KinematicsError):
        kinematics.forward_kinematics(chain, np.zeros(5))
    with pytest.raises(KinematicsError):
        kinematics.forward_kinematics(chain, [0, 0, math.nan, 0, 0, 0])


def test_chain_validation():
    axes = [[0, 0, 1]] * 6
    trans = [[0, 0, 0.1]] * 6
    KinematicChain(axes, trans, np.eye(4), [0, 0, 0])
    with pytest.raises(KinematicsError):
        KinematicChain(axes[:5], trans[:5], np.eye(4), [0, 0, 0])
    with pytest.raises(KinematicsError):
        KinematicChain([[0, 0, 2]] + axes[1:], trans, np.eye(4), [0, 0, 0])
    bad_base = np.eye(4)
    bad_base[0, 0] = 2.0
    with pytest.raises(KinematicsError):
        KinematicChain(axes, trans, bad_base, [0, 0, 0])


def test_geometry_round_trip(chain, table, tmp_path):
    path = tmp_path / "geo.json"
    path.write_text(json.dumps({"version": 1, "chain": chain.to_dict(), "table": table.to_dict()}))
    c2, t2 = kinematics.load_geometry(str(path))
    np.testing.assert_array_equal(c2.base_pose, chain.base_pose)
    np.testing.assert_array_equal(c2.axes, chain.axes)
    assert t2 == table


def test_geometry_version_checked(chain, table, tmp_path):
    path = tmp_path / "geo.json"
    path.write_text(json.dumps({"version": 2, "chain": chain.to_dict(), "table": table.to_dict()}))
    with pytest.raises(KinematicsError):
        kinematics.load_geometry(str(path))


def test_table_validation():
    with pytest.raises(KinematicsError):
        TableGeometry(0.0, (0.5, -0.5), (0.1, 0.8), 0.2, 0.1)


def test_target_sampling_respects_table(table):
    rng = np.random.default_rng(7)
    pts = np.array([kinematics.sample_target(table, rng) for _ in range(100_000)])
    (x0, x1), (y0, y1) = table.x_range, table.y_range
    assert np.all((pts[:, 0] >= x0) & (pts[:, 0] <= x1))
    assert np.all((pts[:, 1] >= y0) & (pts[:, 1] <= y1))
    assert np.all(np.hypot(pts[:, 0], pts[:, 1]) >= table.base_exclusion_radius)
    assert np.all(pts[:, 2] == table.target_z)


def test_target_sampling_is_uniform_on_free_area(table):
    rng = np.random.default_rng(8)
    pts = np.array([kinematics.sample_target(table, rng) for _ in range(40_000)])
    # the left and right halves of the table have equal free area
    left = np.mean(pts[:, 0] < 0)
    assert abs(left - 0.5) < 4 * math.sqrt(0.25 / len(pts))


def test_target_sampling_deterministic(table):
    a = [kinematics.sample_target(table, np.random.default_rng(3)) for _ in range(3)]
    b = [kinematics.sample_target(table, np.random.default_rng(3)) for _ in range(3)]
    np.testing.assert_array_equal(a, b)
