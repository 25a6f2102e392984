"""Rigid transforms for lens poses and controller input.

Rotations are kept as unit quaternions (w, x, y, z) so that scene files and
event logs round-trip without re-orthonormalization noise; rotation matrices
are derived on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    nsq = float(np.dot(q, q))
    if nsq == 0.0:
        raise ValueError("zero quaternion has no orientation")
    # Idempotent: quaternions already unit to rounding pass through bit-exact
    # so serialized poses survive a load/save cycle unchanged.
    if abs(nsq - 1.0) <= 1e-12:
        return q
    return q / np.sqrt(nsq)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        dtype=np.float64,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]], dtype=np.float64)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_to_matrix(q) @ np.asarray(v, dtype=np.float64)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = float(np.linalg.norm(axis))
    if n == 0.0:
        raise ValueError("zero rotation axis")
    half = 0.5 * angle
    s = np.sin(half) / n
    return np.array([np.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotate by ``orientation`` then translate by ``position``."""

    position: np.ndarray
    orientation: np.ndarray  # unit quaternion (w, x, y, z)

    def __post_init__(self):
        pos = np.array(self.position, dtype=np.float64).reshape(3)
        quat = quat_normalize(self.orientation)
        pos.flags.writeable = False
        quat.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def transform_point(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=np.float64) + self.position

    def rotate_vector(self, v) -> np.ndarray:
        return self.rotation @ np.asarray(v, dtype=np.float64)

    def inverse(self) -> "Pose":
        qc = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(qc, self.position), qc)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return Pose(
            self.transform_point(other.position),
            quat_multiply(self.orientation, other.orientation),
        )

    def local_point(self, p) -> np.ndarray:
        """World point expressed in this pose's local frame."""
        return self.rotation.T @ (np.asarray(p, dtype=np.float64) - self.position)

    def local_vector(self, v) -> np.ndarray:
        return self.rotation.T @ np.asarray(v, dtype=np.float64)
