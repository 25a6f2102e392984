"""Deformable quadric lens patches.

A lens is the graph of z = (k1*x^2 + k2*y^2) / 2 over the parameter square
[-l/2, l/2]^2 in its local frame, placed in the normalized volume frame by a
rigid pose. Five control points (origin plus the four rim midpoints on the
principal-curvature axes) act as manipulation handles; mirrored handles share
a curvature value, so the patch stays axially symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Pose

K_MAX = 10.0
LENGTH_MIN = 0.02
LENGTH_MAX = 1.0
DEFAULT_TESSELLATION = 65
UV_EPS = 1e-9

HANDLE_KINDS = ("origin", "k1_pos", "k1_neg", "k2_pos", "k2_neg")

CLASS_PLANE = "plane"
CLASS_PARABOLIC_CYLINDER = "parabolic_cylinder"
CLASS_ELLIPTIC = "elliptic_paraboloid"
CLASS_ROTATIONAL = "rotational_paraboloid"
CLASS_HYPERBOLIC = "hyperbolic_paraboloid"


class LockedLensError(RuntimeError):
    """Mutation attempted on a locked lens."""


@dataclass(frozen=True, eq=False)
class QuadricLens:
    id: int
    pose: Pose
    length: float = 0.25
    k1: float = 0.0
    k2: float = 0.0
    locked: bool = False
    attribute_override: str | None = None

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"lens length must be > 0, got {self.length}")
        if abs(self.k1) > K_MAX or abs(self.k2) > K_MAX:
            raise ValueError(f"|curvature| must be <= {K_MAX}, got ({self.k1}, {self.k2})")
        if self.attribute_override not in (None, "scalar", "gradient_magnitude"):
            raise ValueError(f"bad attribute override {self.attribute_override!r}")


@dataclass(frozen=True, eq=False)
class ControlPointHandle:
    lens_id: int
    kind: str
    world_position: np.ndarray

    def __post_init__(self):
        pos = np.array(self.world_position, dtype=np.float64).reshape(3)
        pos.flags.writeable = False
        object.__setattr__(self, "world_position", pos)


@dataclass(frozen=True, eq=False)
class SurfaceHit:
    t: float
    uv: tuple[float, float]
    world_point: np.ndarray
    world_normal: np.ndarray


@dataclass(frozen=True, eq=False)
class Mesh:
    positions: np.ndarray  # (N, 3)
    normals: np.ndarray  # (N, 3)
    uv: np.ndarray  # (N, 2) local (x, y)
    triangles: np.ndarray  # (M, 3) int

    @property
    def area(self) -> float:
        a = self.positions[self.triangles[:, 0]]
        b = self.positions[self.triangles[:, 1]]
        c = self.positions[self.triangles[:, 2]]
        cross = np.cross(b - a, c - a)
        return float(0.5 * np.linalg.norm(cross, axis=1).sum())


def quadric_height(k1: float, k2: float, x: float, y: float) -> float:
    return 0.5 * (k1 * x * x + k2 * y * y)


def classify(k1: float, k2: float, eps: float = 1e-9) -> str:
    """Shape class from the curvature signs; |k| <= eps counts as zero."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    z1 = abs(k1) <= eps
    z2 = abs(k2) <= eps
    if z1 and z2:
        return CLASS_PLANE
    if z1 or z2:
        return CLASS_PARABOLIC_CYLINDER
    if k1 * k2 < 0:
        return CLASS_HYPERBOLIC
    if abs(k1 - k2) <= eps:
        return CLASS_ROTATIONAL
    return CLASS_ELLIPTIC


def surface_normal(k1: float, k2: float, x: float, y: float) -> np.ndarray:
    """Unit local-frame normal: normalized (-k1*x, -k2*y, 1)."""
    nx = -k1 * x
    ny = -k2 * y
    inv = 1.0 / math.sqrt(nx * nx + ny * ny + 1.0)
    return np.array([nx * inv, ny * inv, inv])


def control_points(lens: QuadricLens) -> list[ControlPointHandle]:
    """The five handles, in tie-break order: origin, k1+, k1-, k2+, k2-."""
    half = lens.length / 2.0
    zk1 = 0.5 * lens.k1 * half * half
    zk2 = 0.5 * lens.k2 * half * half
    local = (
        ("origin", (0.0, 0.0, 0.0)),
        ("k1_pos", (half, 0.0, zk1)),
        ("k1_neg", (-half, 0.0, zk1)),
        ("k2_pos", (0.0, half, zk2)),
        ("k2_neg", (0.0, -half, zk2)),
    )
    return [
        ControlPointHandle(lens.id, kind, lens.pose.transform_point(p))
        for kind, p in local
    ]


def tessellate(lens: QuadricLens, resolution: int = DEFAULT_TESSELLATION) -> Mesh:
    """Uniform (x, y) grid of resolution^2 vertices with analytic normals.

    Triangles wind counter-clockwise seen from local +z.
    """
    if resolution < 2:
        raise ValueError(f"tessellation resolution must be >= 2, got {resolution}")
    half = lens.length / 2.0
    coords = np.linspace(-half, half, resolution)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    x = xx.ravel()
    y = yy.ravel()
    z = 0.5 * (lens.k1 * x * x + lens.k2 * y * y)

    local = np.stack([x, y, z], axis=1)
    rot = lens.pose.rotation
    positions = local @ rot.T + lens.pose.position

    n = np.stack([-lens.k1 * x, -lens.k2 * y, np.ones_like(x)], axis=1)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    normals = n @ rot.T

    tris = []
    for j in range(resolution - 1):
        for i in range(resolution - 1):
            v00 = j * resolution + i
            v10 = v00 + 1
            v01 = v00 + resolution
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return Mesh(
        positions=positions,
        normals=normals,
        uv=np.stack([x, y], axis=1),
        triangles=np.asarray(tris, dtype=np.int64),
    )


def ray_intersect(lens: QuadricLens, origin, direction) -> list[SurfaceHit]:
    """All ray hits on the patch, ascending in t.

    The ray is moved to the lens frame where the surface is
    z = (k1 x^2 + k2 y^2)/2; substitution gives a quadratic in t solved with
    the cancellation-safe root form. Roots need t >= 0 and |x|, |y| within
    the parameter square (plus a 1e-9 slack so boundary-exact hits survive).
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    dn = float(np.linalg.norm(direction))
    if dn == 0.0:
        raise ValueError("ray direction must be nonzero")
    direction = direction / dn

    o = lens.pose.local_point(origin)
    d = lens.pose.local_vector(direction)
    k1, k2 = lens.k1, lens.k2

    a = 0.5 * (k1 * d[0] * d[0] + k2 * d[1] * d[1])
    b = k1 * o[0] * d[0] + k2 * o[1] * d[1] - d[2]
    c = 0.5 * (k1 * o[0] * o[0] + k2 * o[1] * o[1]) - o[2]

    roots: list[float] = []
    if abs(a) <= 1e-12:
        if abs(b) > 1e-12:
            roots.append(-c / b)
        # a = b = 0: ray parallel to (or inside) the surface; no isolated hit
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            sq = math.sqrt(disc)
            q = -0.5 * (b + math.copysign(sq, b))
            if q != 0.0:
                r0 = q / a
                r1 = c / q
                roots.extend((r0, r1) if r0 != r1 else (r0,))
            else:  # b = 0 and disc = 0: double root at t = 0
                roots.append(0.0)

    half = lens.length / 2.0
    hits = []
    for t in sorted(roots):
        if t < 0.0:
            continue
        u = o[0] + t * d[0]
        v = o[1] + t * d[1]
        if abs(u) > half + UV_EPS or abs(v) > half + UV_EPS:
            continue
        hits.append(
            SurfaceHit(
                t=float(t),
                uv=(float(u), float(v)),
                world_point=origin + t * direction,
                world_normal=lens.pose.rotate_vector(surface_normal(k1, k2, u, v)),
            )
        )
    return hits


def nearest_control_point(lenses, p) -> tuple[ControlPointHandle, float] | None:
    """Closest handle over all unlocked lenses, or None.

    Ties break deterministically by (lens id, handle kind order).
    """
    p = np.asarray(p, dtype=np.float64)
    best: tuple[ControlPointHandle, float] | None = None
    for lens in sorted(lenses, key=lambda ln: ln.id):
        if lens.locked:
            continue
        for handle in control_points(lens):
            dist = float(np.linalg.norm(handle.world_position - p))
            if best is None or dist < best[1]:
                best = (handle, dist)
    return best


def set_curvature(
    lens: QuadricLens, handle_kind: str, delta_z: float, sensitivity: float = 1.0
) -> QuadricLens:
    """k <- clamp(k + sensitivity * delta_z) on the curvature owning the handle.

    The mirrored handle follows automatically since both share the curvature.
    Passing the origin handle returns the lens unchanged (identity marks the
    no-op); locked lenses raise.
    """
    if lens.locked:
        raise LockedLensError(f"lens {lens.id} is locked")
    if handle_kind == "origin":
        return lens
    if handle_kind not in HANDLE_KINDS:
        raise ValueError(f"unknown handle kind {handle_kind!r}")
    delta = sensitivity * delta_z
    if handle_kind in ("k1_pos", "k1_neg"):
        return replace(lens, k1=_clamp_k(lens.k1 + delta))
    return replace(lens, k2=_clamp_k(lens.k2 + delta))


def _clamp_k(k: float) -> float:
    return -K_MAX if k < -K_MAX else K_MAX if k > K_MAX else k
