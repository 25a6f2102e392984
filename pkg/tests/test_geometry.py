"""Quaternion and rigid-pose algebra."""

import numpy as np
import pytest

from quadriclens.geometry import (
    Pose,
    quat_conjugate,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
)


def random_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def test_normalize_unit_is_bit_exact():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    out = quat_normalize(q)
    assert out.tobytes() == q.tobytes()
    # A quaternion normalized once passes through a second call unchanged.
    r = quat_normalize(np.array([1.0, 2.0, 3.0, 4.0]))
    assert quat_normalize(r).tobytes() == r.tobytes()


def test_normalize_zero_rejected():
    with pytest.raises(ValueError):
        quat_normalize(np.zeros(4))


def test_normalize_scales_to_unit(rng):
    for _ in range(100):
        q = rng.normal(size=4) * rng.uniform(0.1, 10)
        n = quat_normalize(q)
        assert abs(float(np.dot(n, n)) - 1.0) < 1e-12


def test_quat_rotation_matches_matrix(rng):
    for _ in range(200):
        q = random_quat(rng)
        v = rng.normal(size=3)
        assert np.allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-12)


def test_quat_multiply_composes_rotations(rng):
    for _ in range(200):
        a, b = random_quat(rng), random_quat(rng)
        v = rng.normal(size=3)
        lhs = quat_rotate(quat_multiply(a, b), v)
        rhs = quat_rotate(a, quat_rotate(b, v))
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_quat_conjugate_inverts(rng):
    for _ in range(100):
        q = random_quat(rng)
        back = quat_multiply(q, quat_conjugate(q))
        assert np.allclose(back, [1, 0, 0, 0], atol=1e-12)


def test_axis_angle_quarter_turn():
    q = quat_from_axis_angle((0, 0, 1), np.pi / 2)
    assert np.allclose(quat_rotate(q, (1, 0, 0)), (0, 1, 0), atol=1e-12)
    with pytest.raises(ValueError):
        quat_from_axis_angle((0, 0, 0), 1.0)


def test_rotation_matrix_orthonormal(rng):
    for _ in range(200):
        r = quat_to_matrix(random_quat(rng))
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) > 0


def test_pose_roundtrip_point(rng):
    for _ in range(200):
        pose = Pose(rng.normal(size=3), random_quat(rng))
        p = rng.normal(size=3)
        assert np.allclose(pose.local_point(pose.transform_point(p)), p, atol=1e-10)
        assert np.allclose(pose.transform_point(pose.local_point(p)), p, atol=1e-10)


def test_pose_inverse_is_inverse(rng):
    for _ in range(100):
        pose = Pose(rng.normal(size=3), random_quat(rng))
        inv = pose.inverse()
        p = rng.normal(size=3)
        assert np.allclose(inv.transform_point(pose.transform_point(p)), p, atol=1e-10)
        both = pose.compose(inv)
        assert np.allclose(both.position, 0, atol=1e-10)
        assert np.allclose(both.rotation, np.eye(3), atol=1e-10)


def test_compose_applies_other_first(rng):
    for _ in range(100):
        a = Pose(rng.normal(size=3), random_quat(rng))
        b = Pose(rng.normal(size=3), random_quat(rng))
        p = rng.normal(size=3)
        assert np.allclose(
            a.compose(b).transform_point(p),
            a.transform_point(b.transform_point(p)),
            atol=1e-10,
        )


def test_local_vector_ignores_translation(rng):
    pose = Pose(np.array([5.0, -3.0, 2.0]), random_quat(rng))
    v = rng.normal(size=3)
    assert np.allclose(pose.local_vector(v), pose.rotation.T @ v, atol=1e-12)


def test_pose_identity():
    e = Pose.identity()
    assert np.allclose(e.transform_point((1, 2, 3)), (1, 2, 3))


def test_pose_arrays_frozen():
    pose = Pose(np.zeros(3), np.array([1.0, 0, 0, 0]))
    with pytest.raises(ValueError):
        pose.position[0] = 1.0
    with pytest.raises(ValueError):
        pose.orientation[0] = 0.0
