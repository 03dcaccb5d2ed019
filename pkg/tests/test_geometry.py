import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navbench.geometry import (CameraIntrinsics, NonPositiveDepth, Pose3, RobotState, as_cloud, backproject,
                               backproject_many, project, wrap_angle)

K = CameraIntrinsics(300.0, 310.0, 159.5, 119.5, 320, 240)


def random_pose(seed):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    r = np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                  [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                  [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])
    return Pose3(r, rng.normal(scale=5.0, size=3))


def test_optical_axis_projects_to_principal_point():
    u, v, z = project([0.0, 0.0, 2.0], Pose3.identity(), K)
    assert (u, v, z) == (K.cx, K.cy, 2.0)


def test_point_behind_camera_is_out_of_view():
    assert project([0.0, 0.0, -1.0], Pose3.identity(), K) is None
    assert project([0.0, 0.0, 0.0], Pose3.identity(), K) is None


def test_point_outside_image_is_out_of_view():
    assert project([100.0, 0.0, 1.0], Pose3.identity(), K) is None


def test_backproject_principal_point():
    np.testing.assert_array_equal(backproject(K.cx, K.cy, 1.0, Pose3.identity(), K), [0.0, 0.0, 1.0])


@pytest.mark.parametrize("z", [0.0, -1.0])
def test_backproject_rejects_non_positive_depth(z):
    with pytest.raises(NonPositiveDepth):
        backproject(10.0, 10.0, z, Pose3.identity(), K)


def test_pixel_grid_round_trip():
    pose = random_pose(3)
    rng = np.random.default_rng(0)
    us = rng.uniform(0, K.width - 1, 100)
    vs = rng.uniform(0, K.height - 1, 100)
    zs = rng.uniform(0.2, 50.0, 100)
    for u, v, z in zip(us, vs, zs):
        got = project(backproject(u, v, z, pose, K), pose, K)
        np.testing.assert_allclose(got, (u, v, z), rtol=0, atol=1e-9)


def test_project_then_backproject_recovers_point():
    pose = random_pose(8)
    rng = np.random.default_rng(1)
    hits = 0
    for _ in range(500):
        p = pose.apply([rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(1, 10)])
        uvz = project(p, pose, K)
        if uvz is None:
            continue
        hits += 1
        np.testing.assert_allclose(backproject(*uvz, pose, K), p, atol=1e-9)
    assert hits > 100


def test_backproject_many_matches_scalar():
    pose = random_pose(2)
    u, v, z = np.array([3.0, 100.0]), np.array([7.0, 200.0]), np.array([1.5, 9.0])
    many = backproject_many(u, v, z, pose, K)
    for i in range(2):
        np.testing.assert_allclose(many[i], backproject(u[i], v[i], z[i], pose, K), atol=1e-12)


@given(u=st.floats(0, K.width - 1), v=st.floats(0, K.height - 1), z=st.floats(1e-3, 1e3), seed=st.integers(0, 50))
def test_round_trip_property(u, v, z, seed):
    pose = random_pose(seed)
    got = project(backproject(u, v, z, pose, K), pose, K)
    assert got is not None
    assert abs(got[0] - u) < 1e-9 * max(1.0, z) and abs(got[1] - v) < 1e-9 * max(1.0, z)
    assert abs(got[2] - z) < 1e-9 * max(1.0, z)


@given(a=st.integers(0, 200), b=st.integers(0, 200), c=st.integers(0, 200))
def test_compose_is_associative(a, b, c):
    p, q, r = random_pose(a), random_pose(b), random_pose(c)
    left, right = p.compose(q).compose(r), p.compose(q.compose(r))
    np.testing.assert_allclose(left.rotation, right.rotation, atol=1e-9)
    np.testing.assert_allclose(left.translation, right.translation, atol=1e-9)


@given(seed=st.integers(0, 500))
def test_pose_times_inverse_is_identity(seed):
    p = random_pose(seed)
    e = p.compose(p.inverse())
    np.testing.assert_allclose(e.rotation, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(e.translation, 0.0, atol=1e-9)


def test_camera_pose_convention():
    # heading +x, no pitch: camera z is world +x, camera y points down
    pose = Pose3.camera((0.0, 0.0, 1.0), 0.0)
    np.testing.assert_allclose(pose.rotation[:, 2], [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(pose.rotation[:, 1], [0, 0, -1], atol=1e-15)
    np.testing.assert_allclose(pose.rotation[:, 0], [0, -1, 0], atol=1e-15)


def test_invalid_rotation_rejected():
    with pytest.raises(ValueError):
        Pose3(np.diag([1.0, 1.0, 2.0]), np.zeros(3))
    with pytest.raises(ValueError):
        Pose3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 1.0, 1.0, 10, 10)
    with pytest.raises(ValueError):
        CameraIntrinsics(1.0, 1.0, 10.0, 1.0, 10, 10)


@given(st.floats(-1e4, 1e4))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angle_keeps_pi():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


def test_robot_state_normalises_heading():
    assert RobotState(0, 0, 3 * math.pi / 2).theta == pytest.approx(-math.pi / 2)


def test_cloud_rejects_non_finite():
    with pytest.raises(ValueError):
        as_cloud([[0.0, np.nan, 1.0]])
    assert as_cloud([1, 2, 3]).shape == (1, 3)
