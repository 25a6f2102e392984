"""Literal per-ray reference renderer for the acceptance suite.

Everything ray-related is reimplemented here as plain loops that read like
the rendering rules themselves: camera basis, slab entry/exit, transfer
function lookup, per-mode sample culling, opacity correction, front-to-back
accumulation, focus compositing, background. Only the point primitives
(sample_trilinear, ray_intersect, focus_fragment) are shared with the
package; each of those is pinned by its own closed-form or brute-force
oracle elsewhere in the suite, so this module stays an independent route
through the frame semantics.

reference_pixel additionally reports, for every marched sample position,
whether the active mode's cull rule discarded it. Those per-ray decision
lists back the subset and measure assertions that the image comparison
alone would not expose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from quadriclens import focus_fragment, ray_intersect, sample_trilinear

EARLY_EXIT = 0.99


@dataclass
class RayRecord:
    """Cull bookkeeping for one pixel's ray."""

    depths: list[float]
    marched: list[float]  # every sample position in the marching grid
    kept: list[float]  # positions the cull rule kept (termination ignored)
    discarded: list[float]  # positions the cull rule discarded


def _normalize(v):
    n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    return (v[0] / n, v[1] / n, v[2] / n)


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def pixel_ray(camera, px, py):
    eye = camera.eye
    fwd = _normalize(
        (
            camera.look_at[0] - eye[0],
            camera.look_at[1] - eye[1],
            camera.look_at[2] - eye[2],
        )
    )
    right = _normalize(_cross(fwd, camera.up))
    up = _cross(right, fwd)
    half_h = math.tan(camera.vertical_fov / 2.0)
    half_w = half_h * camera.width / camera.height
    sx = (2.0 * (px + 0.5) / camera.width - 1.0) * half_w
    sy = (1.0 - 2.0 * (py + 0.5) / camera.height) * half_h
    d = _normalize(
        (
            fwd[0] + sx * right[0] + sy * up[0],
            fwd[1] + sx * right[1] + sy * up[1],
            fwd[2] + sx * right[2] + sy * up[2],
        )
    )
    return eye, d


def cube_span(origin, direction):
    """[t_enter, t_exit) of the unit cube, entry clamped to 0; None on miss."""
    tmin, tmax = -1e30, 1e30
    for axis in range(3):
        o, d = origin[axis], direction[axis]
        if d == 0.0:
            if o < 0.0 or o > 1.0:
                return None
        else:
            ta = (0.0 - o) / d
            tb = (1.0 - o) / d
            if ta > tb:
                ta, tb = tb, ta
            tmin = max(tmin, ta)
            tmax = min(tmax, tb)
    t_enter = max(tmin, 0.0)
    if t_enter >= tmax:
        return None
    return t_enter, tmax


def tf_lookup(tf, value):
    nodes = tf.nodes
    if value <= nodes[0][0]:
        return nodes[0][1:]
    if value >= nodes[-1][0]:
        return nodes[-1][1:]
    for (p0, r0, g0, b0, a0), (p1, r1, g1, b1, a1) in zip(nodes, nodes[1:]):
        if p0 <= value < p1:
            f = (value - p0) / (p1 - p0)
            return (
                r0 + (r1 - r0) * f,
                g0 + (g1 - g0) * f,
                b0 + (b1 - b0) * f,
                a0 + (a1 - a0) * f,
            )
    return nodes[-1][1:]


def discards(mode, t, depths, delta_z):
    """The culling rules, stated literally."""
    if mode == "standard":
        return False
    if mode == "depth_cull":
        return len(depths) > 0 and t < max(depths)
    if mode == "neighbor_cull":
        return any(abs(t - d) <= delta_z for d in depths)
    raise ValueError(mode)


def reference_pixel(grid, lenses, camera, px, py, focus_settings, ctx, background):
    """One pixel through the literal pipeline.

    Returns (rgba, RayRecord). rgba is the finished pixel (alpha 1, over the
    background); the record carries every marched sample position and its
    cull outcome with early termination ignored, which is what the subset
    and measure properties quantify over.
    """
    origin, direction = pixel_ray(camera, px, py)

    depths = []
    nearest_t = None
    nearest_lens = None
    nearest_uv = None
    for lens in lenses:
        for hit in ray_intersect(lens, origin, direction):
            depths.append(hit.t)
            if nearest_t is None or hit.t < nearest_t:
                nearest_t = hit.t
                nearest_lens = lens
                nearest_uv = hit.uv
    depths.sort()

    record = RayRecord(depths=depths, marched=[], kept=[], discarded=[])

    span = cube_span(origin, direction)
    cr = cg = cb = acc = 0.0
    if span is not None:
        t_enter, t_exit = span
        t_limit = t_exit if nearest_t is None else min(t_exit, nearest_t)
        step = ctx.ray_step if ctx.ray_step is not None else 1.0 / (2.0 * max(grid.dims))
        ratio = step * max(grid.dims)
        terminated = False
        j = 0
        while True:
            t = t_enter + (j + 0.5) * step
            if t >= t_limit:
                break
            j += 1
            record.marched.append(t)
            out = discards(ctx.mode, t, depths, ctx.delta_z)
            (record.discarded if out else record.kept).append(t)
            if out or terminated:
                continue
            p = (
                origin[0] + t * direction[0],
                origin[1] + t * direction[1],
                origin[2] + t * direction[2],
            )
            r, g, b, a = tf_lookup(ctx.transfer_function, sample_trilinear(grid, p))
            a0 = a * ctx.global_alpha
            ac = 1.0 - (1.0 - a0) ** ratio
            w = (1.0 - acc) * ac
            cr += w * r
            cg += w * g
            cb += w * b
            acc += w
            if acc >= EARLY_EXIT:
                terminated = True

    if nearest_t is not None:
        fr, fg, fb, _ = focus_fragment(grid, nearest_lens, nearest_uv, focus_settings)
        w = 1.0 - acc
        cr += w * fr
        cg += w * fg
        cb += w * fb
        acc = 1.0

    w = 1.0 - acc
    return (
        cr + w * background[0],
        cg + w * background[1],
        cb + w * background[2],
        1.0,
    ), record


def reference_render(grid, lenses, camera, focus_settings, ctx, background=(0.0, 0.0, 0.0)):
    """Full-frame literal render; returns (pixel rows, records by (py, px))."""
    image = []
    records = {}
    for py in range(camera.height):
        row = []
        for px in range(camera.width):
            rgba, record = reference_pixel(
                grid, lenses, camera, px, py, focus_settings, ctx, background
            )
            row.append(rgba)
            records[(py, px)] = record
        image.append(row)
    return image, records
