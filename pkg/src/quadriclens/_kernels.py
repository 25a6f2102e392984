"""Compiled full-frame renderer.

Single-threaded numba kernels that mirror the pure-Python per-ray semantics
in context.py / focus.py / lens.py / volume.py expression for expression;
the math runs in float64 throughout so the two paths agree to rounding
noise. Keep any change here in lockstep with the Python reference ops.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .context import Camera, ContextSettings, EARLY_TERMINATION_ALPHA, reference_step, resolve_ray_step
from .focus import COOL_WARM_HIGH, COOL_WARM_LOW, COOL_WARM_MID, FocusSettings, focus_step

_CW_LO = np.asarray(COOL_WARM_LOW, dtype=np.float64)
_CW_MID = np.asarray(COOL_WARM_MID, dtype=np.float64)
_CW_HI = np.asarray(COOL_WARM_HIGH, dtype=np.float64)


@njit(cache=True)
def _tri(vals, dx, dy, dz, px, py, pz):
    ux = px * dx - 0.5
    uy = py * dy - 0.5
    uz = pz * dz - 0.5
    if ux < 0.0:
        ux = 0.0
    elif ux > dx - 1.0:
        ux = dx - 1.0
    if uy < 0.0:
        uy = 0.0
    elif uy > dy - 1.0:
        uy = dy - 1.0
    if uz < 0.0:
        uz = 0.0
    elif uz > dz - 1.0:
        uz = dz - 1.0
    ix = int(ux)
    iy = int(uy)
    iz = int(uz)
    if ix > dx - 2:
        ix = dx - 2
    if iy > dy - 2:
        iy = dy - 2
    if iz > dz - 2:
        iz = dz - 2
    fx = ux - ix
    fy = uy - iy
    fz = uz - iz
    v000 = np.float64(vals[iz, iy, ix])
    v100 = np.float64(vals[iz, iy, ix + 1])
    v010 = np.float64(vals[iz, iy + 1, ix])
    v110 = np.float64(vals[iz, iy + 1, ix + 1])
    v001 = np.float64(vals[iz + 1, iy, ix])
    v101 = np.float64(vals[iz + 1, iy, ix + 1])
    v011 = np.float64(vals[iz + 1, iy + 1, ix])
    v111 = np.float64(vals[iz + 1, iy + 1, ix + 1])
    c00 = v000 + (v100 - v000) * fx
    c10 = v010 + (v110 - v010) * fx
    c01 = v001 + (v101 - v001) * fx
    c11 = v011 + (v111 - v011) * fx
    c0 = c00 + (c10 - c00) * fy
    c1 = c01 + (c11 - c01) * fy
    return c0 + (c1 - c0) * fz


@njit(cache=True)
def _gradmag(vals, dx, dy, dz, px, py, pz):
    total = 0.0
    for axis in range(3):
        if axis == 0:
            h = 1.0 / dx
            c = px
        elif axis == 1:
            h = 1.0 / dy
            c = py
        else:
            h = 1.0 / dz
            c = pz
        if c + h > 1.0:
            hi = c
            lo = c - h
            denom = h
        elif c - h < 0.0:
            hi = c + h
            lo = c
            denom = h
        else:
            hi = c + h
            lo = c - h
            denom = 2.0 * h
        if axis == 0:
            f_hi = _tri(vals, dx, dy, dz, hi, py, pz)
            f_lo = _tri(vals, dx, dy, dz, lo, py, pz)
        elif axis == 1:
            f_hi = _tri(vals, dx, dy, dz, px, hi, pz)
            f_lo = _tri(vals, dx, dy, dz, px, lo, pz)
        else:
            f_hi = _tri(vals, dx, dy, dz, px, py, hi)
            f_lo = _tri(vals, dx, dy, dz, px, py, lo)
        g = (f_hi - f_lo) / denom
        total += g * g
    return math.sqrt(total)


@njit(cache=True)
def _tf_eval(tf_pos, tf_rgb, tf_a, v):
    k = tf_pos.shape[0]
    if v <= tf_pos[0]:
        return tf_rgb[0, 0], tf_rgb[0, 1], tf_rgb[0, 2], tf_a[0]
    if v >= tf_pos[k - 1]:
        return tf_rgb[k - 1, 0], tf_rgb[k - 1, 1], tf_rgb[k - 1, 2], tf_a[k - 1]
    i = 0
    while v >= tf_pos[i + 1]:
        i += 1
    f = (v - tf_pos[i]) / (tf_pos[i + 1] - tf_pos[i])
    r = tf_rgb[i, 0] + (tf_rgb[i + 1, 0] - tf_rgb[i, 0]) * f
    g = tf_rgb[i, 1] + (tf_rgb[i + 1, 1] - tf_rgb[i, 1]) * f
    b = tf_rgb[i, 2] + (tf_rgb[i + 1, 2] - tf_rgb[i, 2]) * f
    a = tf_a[i] + (tf_a[i + 1] - tf_a[i]) * f
    return r, g, b, a


@njit(cache=True)
def _colormap(v, cmap, cw_lo, cw_mid, cw_hi):
    if v < 0.0:
        v = 0.0
    elif v > 1.0:
        v = 1.0
    if cmap == 1:  # grayscale
        return v, v, v
    if v <= 0.5:
        f = 2.0 * v
        r = cw_lo[0] + (cw_mid[0] - cw_lo[0]) * f
        g = cw_lo[1] + (cw_mid[1] - cw_lo[1]) * f
        b = cw_lo[2] + (cw_mid[2] - cw_lo[2]) * f
    else:
        f = 2.0 * v - 1.0
        r = cw_mid[0] + (cw_hi[0] - cw_mid[0]) * f
        g = cw_mid[1] + (cw_hi[1] - cw_mid[1]) * f
        b = cw_mid[2] + (cw_hi[2] - cw_mid[2]) * f
    return r, g, b


@njit(cache=True)
def _render_kernel(
    vals, dx, dy, dz, grad_scale,
    eye, fwd, right, upv, half_w, half_h, width, height,
    rot, lpos, llen, lk1, lk2, lattr,
    tf_pos, tf_rgb, tf_a,
    mode, global_alpha, delta_z, ray_step, step_ratio,
    n_samples, fstep, ambient, diffuse, light, cmap,
    bg, out,
):
    n_lenses = rot.shape[0]
    hit_t = np.empty(2 * n_lenses + 1, dtype=np.float64)
    hit_u = np.empty(2 * n_lenses + 1, dtype=np.float64)
    hit_v = np.empty(2 * n_lenses + 1, dtype=np.float64)
    hit_lens = np.empty(2 * n_lenses + 1, dtype=np.int64)
    total_samples = 0

    for py in range(height):
        for px in range(width):
            sx = (2.0 * (px + 0.5) / width - 1.0) * half_w
            sy = (1.0 - 2.0 * (py + 0.5) / height) * half_h
            rdx = fwd[0] + sx * right[0] + sy * upv[0]
            rdy = fwd[1] + sx * right[1] + sy * upv[1]
            rdz = fwd[2] + sx * right[2] + sy * upv[2]
            rnorm = math.sqrt(rdx * rdx + rdy * rdy + rdz * rdz)
            rdx = rdx / rnorm
            rdy = rdy / rnorm
            rdz = rdz / rnorm
            ox = eye[0]
            oy = eye[1]
            oz = eye[2]

            # All quadric hits along this ray.
            nhits = 0
            near_i = -1
            near_t = 1e300
            for li in range(n_lenses):
                wx = ox - lpos[li, 0]
                wy = oy - lpos[li, 1]
                wz = oz - lpos[li, 2]
                o0 = rot[li, 0, 0] * wx + rot[li, 1, 0] * wy + rot[li, 2, 0] * wz
                o1 = rot[li, 0, 1] * wx + rot[li, 1, 1] * wy + rot[li, 2, 1] * wz
                o2 = rot[li, 0, 2] * wx + rot[li, 1, 2] * wy + rot[li, 2, 2] * wz
                d0 = rot[li, 0, 0] * rdx + rot[li, 1, 0] * rdy + rot[li, 2, 0] * rdz
                d1 = rot[li, 0, 1] * rdx + rot[li, 1, 1] * rdy + rot[li, 2, 1] * rdz
                d2 = rot[li, 0, 2] * rdx + rot[li, 1, 2] * rdy + rot[li, 2, 2] * rdz
                k1 = lk1[li]
                k2 = lk2[li]

                a = 0.5 * (k1 * d0 * d0 + k2 * d1 * d1)
                b = k1 * o0 * d0 + k2 * o1 * d1 - d2
                c = 0.5 * (k1 * o0 * o0 + k2 * o1 * o1) - o2

                r0 = np.nan
                r1 = np.nan
                if abs(a) <= 1e-12:
                    if abs(b) > 1e-12:
                        r0 = -c / b
                else:
                    disc = b * b - 4.0 * a * c
                    if disc >= 0.0:
                        sq = math.sqrt(disc)
                        q = -0.5 * (b + math.copysign(sq, b))
                        if q != 0.0:
                            r0 = q / a
                            r1 = c / q
                            if r0 == r1:
                                r1 = np.nan
                        else:
                            r0 = 0.0

                half = llen[li] / 2.0
                for ri in range(2):
                    t = r0 if ri == 0 else r1
                    if math.isnan(t) or t < 0.0:
                        continue
                    u = o0 + t * d0
                    v = o1 + t * d1
                    if abs(u) > half + 1e-9 or abs(v) > half + 1e-9:
                        continue
                    hit_t[nhits] = t
                    hit_u[nhits] = u
                    hit_v[nhits] = v
                    hit_lens[nhits] = li
                    if t < near_t:
                        near_t = t
                        near_i = nhits
                    nhits += 1

            # Context marching up to the cube exit or the nearest focus hit.
            tmin = -1e30
            tmax = 1e30
            missed = False
            for axis in range(3):
                if axis == 0:
                    o = ox
                    d = rdx
                elif axis == 1:
                    o = oy
                    d = rdy
                else:
                    o = oz
                    d = rdz
                if d == 0.0:
                    if o < 0.0 or o > 1.0:
                        missed = True
                        break
                else:
                    inv = 1.0 / d
                    ta = (0.0 - o) * inv
                    tb = (1.0 - o) * inv
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > tmin:
                        tmin = ta
                    if tb < tmax:
                        tmax = tb

            cr = 0.0
            cg = 0.0
            cb = 0.0
            acc = 0.0
            if not missed:
                t_enter = tmin if tmin > 0.0 else 0.0
                if t_enter < tmax:
                    t_limit = tmax
                    if near_i >= 0 and near_t < t_limit:
                        t_limit = near_t
                    dmax = 0.0
                    if mode == 1 and nhits > 0:
                        dmax = hit_t[0]
                        for hi in range(1, nhits):
                            if hit_t[hi] > dmax:
                                dmax = hit_t[hi]
                    j = 0
                    while True:
                        t = t_enter + (j + 0.5) * ray_step
                        if t >= t_limit:
                            break
                        j += 1
                        if mode == 1:
                            if nhits > 0 and t < dmax:
                                continue
                        elif mode == 2:
                            discard = False
                            for hi in range(nhits):
                                if abs(t - hit_t[hi]) <= delta_z:
                                    discard = True
                                    break
                            if discard:
                                continue
                        qx = ox + t * rdx
                        qy = oy + t * rdy
                        qz = oz + t * rdz
                        value = _tri(vals, dx, dy, dz, qx, qy, qz)
                        r, g, b, a = _tf_eval(tf_pos, tf_rgb, tf_a, value)
                        a0 = a * global_alpha
                        ac = 1.0 - (1.0 - a0) ** step_ratio
                        w = (1.0 - acc) * ac
                        cr += w * r
                        cg += w * g
                        cb += w * b
                        acc += w
                        total_samples += 1
                        if acc >= EARLY_TERMINATION_ALPHA:
                            break

            # Opaque focus fragment underneath the context in front of it.
            if near_i >= 0:
                li = hit_lens[near_i]
                u = hit_u[near_i]
                v = hit_v[near_i]
                k1 = lk1[li]
                k2 = lk2[li]
                zloc = 0.5 * (k1 * u * u + k2 * v * v)
                pwx = rot[li, 0, 0] * u + rot[li, 0, 1] * v + rot[li, 0, 2] * zloc + lpos[li, 0]
                pwy = rot[li, 1, 0] * u + rot[li, 1, 1] * v + rot[li, 1, 2] * zloc + lpos[li, 1]
                pwz = rot[li, 2, 0] * u + rot[li, 2, 1] * v + rot[li, 2, 2] * zloc + lpos[li, 2]
                nx = -k1 * u
                ny = -k2 * v
                nz = 1.0
                nn = math.sqrt(nx * nx + ny * ny + nz * nz)
                nx = nx / nn
                ny = ny / nn
                nz = nz / nn
                nwx = rot[li, 0, 0] * nx + rot[li, 0, 1] * ny + rot[li, 0, 2] * nz
                nwy = rot[li, 1, 0] * nx + rot[li, 1, 1] * ny + rot[li, 1, 2] * nz
                nwz = rot[li, 2, 0] * nx + rot[li, 2, 1] * ny + rot[li, 2, 2] * nz

                attr = lattr[li]
                center = (n_samples - 1) / 2.0
                sacc = 0.0
                for sj in range(n_samples):
                    m = (sj - center) * fstep
                    qx = pwx + m * nwx
                    qy = pwy + m * nwy
                    qz = pwz + m * nwz
                    if attr == 1:
                        gm = _gradmag(vals, dx, dy, dz, qx, qy, qz)
                        sacc += gm / grad_scale if grad_scale > 0.0 else 0.0
                    else:
                        sacc += _tri(vals, dx, dy, dz, qx, qy, qz)
                value = sacc / n_samples
                fr, fg, fb = _colormap(value, cmap, _CW_LO, _CW_MID, _CW_HI)
                lamb = abs(nwx * light[0] + nwy * light[1] + nwz * light[2])
                gain = ambient + diffuse * lamb
                fr = min(1.0, max(0.0, fr * gain))
                fg = min(1.0, max(0.0, fg * gain))
                fb = min(1.0, max(0.0, fb * gain))
                w = 1.0 - acc
                cr += w * fr
                cg += w * fg
                cb += w * fb
                acc = 1.0

            out[py, px, 0] = cr + (1.0 - acc) * bg[0]
            out[py, px, 1] = cg + (1.0 - acc) * bg[1]
            out[py, px, 2] = cb + (1.0 - acc) * bg[2]
            out[py, px, 3] = 1.0
    return total_samples


_ATTR_IDS = {"scalar": 0, "gradient_magnitude": 1}
_MODE_IDS = {"standard": 0, "depth_cull": 1, "neighbor_cull": 2}
_CMAP_IDS = {"cool_to_warm": 0, "grayscale": 1}


def render(grid, lenses, camera: Camera, focus_settings: FocusSettings,
           context_settings: ContextSettings, background=(0.0, 0.0, 0.0)):
    """Pack scene data into arrays and run the frame kernel.

    Returns (image (H, W, 4) float64, composited context sample count).
    """
    lenses = [ln for ln in lenses]
    n = len(lenses)
    rot = np.empty((n, 3, 3), dtype=np.float64)
    lpos = np.empty((n, 3), dtype=np.float64)
    llen = np.empty(n, dtype=np.float64)
    lk1 = np.empty(n, dtype=np.float64)
    lk2 = np.empty(n, dtype=np.float64)
    lattr = np.empty(n, dtype=np.int64)
    need_gradient = focus_settings.attribute == "gradient_magnitude"
    for i, lens in enumerate(lenses):
        rot[i] = lens.pose.rotation
        lpos[i] = lens.pose.position
        llen[i] = lens.length
        lk1[i] = lens.k1
        lk2[i] = lens.k2
        attr = lens.attribute_override if lens.attribute_override is not None else focus_settings.attribute
        lattr[i] = _ATTR_IDS[attr]
        need_gradient = need_gradient or lattr[i] == 1

    tf_pos, tf_rgb, tf_a = context_settings.transfer_function.as_arrays()
    fwd, right, upv, half_w, half_h = camera.basis()
    eye = np.asarray(camera.eye, dtype=np.float64)

    dx, dy, dz = grid.dims
    ray_step = resolve_ray_step(grid.dims, context_settings)
    step_ratio = ray_step / reference_step(grid.dims)
    grad_scale = grid.gradient_scale if need_gradient else 1.0

    out = np.empty((camera.height, camera.width, 4), dtype=np.float64)
    samples = _render_kernel(
        grid.values, dx, dy, dz, float(grad_scale),
        eye, fwd, right, upv, float(half_w), float(half_h),
        camera.width, camera.height,
        rot, lpos, llen, lk1, lk2, lattr,
        tf_pos, tf_rgb, tf_a,
        _MODE_IDS[context_settings.mode],
        float(context_settings.global_alpha),
        float(context_settings.delta_z),
        float(ray_step), float(step_ratio),
        int(focus_settings.n_samples),
        float(focus_step(grid.dims, focus_settings)),
        float(focus_settings.ambient), float(focus_settings.diffuse),
        np.asarray(focus_settings.light_direction, dtype=np.float64),
        _CMAP_IDS[focus_settings.colormap],
        np.asarray(background, dtype=np.float64),
        out,
    )
    return out, samples


def warmup():
    """Force kernel compilation with a tiny scene (first call only)."""
    from .lens import QuadricLens
    from .volume import SyntheticSpec, generate_synthetic_volume

    grid = generate_synthetic_volume(SyntheticSpec(kind="constant", value=0.5), (2, 2, 2))
    cam = Camera(width=2, height=2)
    render(grid, [QuadricLens(id=1)], cam, FocusSettings(), ContextSettings())
