import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isotraj.errors import DegenerateIntervalError
from isotraj.frames import (
    FramePose,
    RotationMatrix,
    frame_velocity,
    inverse_transform,
    rotation_from_yaw,
    trajectory_velocities,
    transform_point,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
angles = st.floats(-20.0, 20.0, allow_nan=False)


def test_yaw_zero_is_identity():
    np.testing.assert_array_equal(rotation_from_yaw(0.0).a, np.eye(3))


def test_quarter_turn_maps_x_to_y():
    out = rotation_from_yaw(math.pi / 2) @ np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(out, [0.0, 1.0, 0.0], atol=1e-15)


def test_yaw_orthonormal():
    a = rotation_from_yaw(0.3).a
    assert np.max(np.abs(a @ a.T - np.eye(3))) < 1e-12


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_yaw_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        rotation_from_yaw(bad)


def test_rotation_rejects_reflection():
    with pytest.raises(ValueError):
        RotationMatrix(np.diag([1.0, 1.0, -1.0]))


@pytest.mark.parametrize(
    "origin, yaw, local, expected",
    [
        ((0, 0, 0), 0.0, (1, 2, 3), (1, 2, 3)),
        ((5, 0, 0), 0.0, (1, 0, 0), (6, 0, 0)),
        ((0, 0, 0), math.pi / 2, (1, 0, 0), (0, 1, 0)),
    ],
)
def test_transform_point(origin, yaw, local, expected):
    pose = FramePose(np.array(origin, float), rotation_from_yaw(yaw))
    np.testing.assert_allclose(transform_point(pose, local), expected, atol=1e-15)


def test_pose_timestamp_must_be_on_period():
    with pytest.raises(ValueError):
        FramePose(np.zeros(3), timestamp=30)


def test_stationary_velocity_is_exactly_zero():
    a = FramePose(np.array([1.0, 2.0, 0.0]), rotation_from_yaw(0.4), 0)
    b = FramePose(np.array([1.0, 2.0, 0.0]), rotation_from_yaw(0.4), 20)
    v = frame_velocity(a, b, np.array([0.3, -0.2, 0.1]))
    assert np.array_equal(v, np.zeros(3))


def test_constant_translation_velocity():
    a = FramePose(np.zeros(3), timestamp=0)
    b = FramePose(np.array([0.02, 0.0, 0.0]), timestamp=20)
    np.testing.assert_allclose(frame_velocity(a, b, np.zeros(3)), [1.0, 0.0, 0.0], atol=1e-12)


def test_zero_gap_rejected():
    a = FramePose(np.zeros(3), timestamp=20)
    with pytest.raises(DegenerateIntervalError):
        frame_velocity(a, a, np.zeros(3))


def test_rotating_frame_matches_numeric_derivative():
    # Rigid motion: origin drifts at (3, 1, 0) m/s while yawing at 0.2 rad/s.
    omega, vel = 0.2, np.array([3.0, 1.0, 0.0])
    local = np.array([0.0, 1.0, 0.5])

    def pose_at(t, stamp=0):
        return FramePose(vel * t, rotation_from_yaw(omega * t), stamp)

    t0, t1 = 0.10, 0.12
    v = frame_velocity(pose_at(t0, 100), pose_at(t1, 120), local)
    # Oracle: central difference of the continuous motion at the interval midpoint.
    tm, h = 0.5 * (t0 + t1), 1e-6
    oracle = (transform_point(pose_at(tm + h), local) - transform_point(pose_at(tm - h), local)) / (2 * h)
    np.testing.assert_allclose(v, oracle, atol=1e-6)


def test_trajectory_velocities_forward_then_central():
    poses = [FramePose(np.array([0.02 * k * k, 0.0, 0.0]), timestamp=20 * k) for k in range(4)]
    v = trajectory_velocities(poses, np.zeros(3))
    assert v[0, 0] == pytest.approx(1.0)  # (0.02 - 0) / 0.02
    assert v[1, 0] == pytest.approx(2.0)  # (0.08 - 0) / 0.04, exact for a quadratic
    assert v[2, 0] == pytest.approx(4.0)


@pytest.mark.property
@given(angles)
def test_rotation_invariants(yaw):
    a = rotation_from_yaw(yaw).a
    assert np.max(np.abs(a @ a.T - np.eye(3))) < 1e-9
    assert abs(np.linalg.det(a) - 1.0) < 1e-9


@pytest.mark.property
@given(st.tuples(finite, finite, finite), angles, st.tuples(finite, finite, finite))
def test_inverse_transform_round_trip(origin, yaw, p):
    pose = FramePose(np.array(origin), rotation_from_yaw(yaw))
    back = transform_point(pose, inverse_transform(pose, np.array(p)))
    np.testing.assert_allclose(back, p, atol=1e-9)
