"""Context rendering: volume raycasting composited with focus surfaces.

Three context modes control which volume samples survive along each ray:

  standard      keep everything (the plain DVR baseline)
  depth_cull    discard samples closer than the farthest lens surface
  neighbor_cull discard samples within delta_z of any lens surface depth

Per-ray work: march the unit-cube intersection at a uniform step, map each
scalar through the transfer function, correct opacity for step size, and
composite front to back. Focus surfaces are opaque: context in front of the
nearest hit composites over the focus color, context behind contributes
nothing. Finished pixels are composited over an opaque background.

The full-frame path runs through compiled kernels; the per-ray operations
here are the reference semantics and must stay in lockstep with them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .focus import FocusSettings, focus_fragment, focus_step
from .lens import ray_intersect
from .volume import VolumeGrid, sample_trilinear

CONTEXT_MODES = ("standard", "depth_cull", "neighbor_cull")
MODE_ALIASES = {"vis1": "standard", "vis2": "depth_cull", "vis3": "neighbor_cull"}
EARLY_TERMINATION_ALPHA = 0.99
MAX_TF_NODES = 16


class RenderError(RuntimeError):
    """Scene cannot be rendered (typically: no volume loaded)."""


def canonical_mode(name: str) -> str:
    mode = MODE_ALIASES.get(name.lower(), name)
    if mode not in CONTEXT_MODES:
        raise ValueError(f"unknown context mode {name!r}")
    return mode


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear scalar -> (RGB, opacity) map with at most 16 nodes.

    Node positions are strictly increasing in [0,1]; values outside the node
    range take the nearest end node.
    """

    nodes: tuple[tuple[float, float, float, float, float], ...]

    def __post_init__(self):
        nodes = tuple(
            (float(n[0]), float(n[1]), float(n[2]), float(n[3]), float(n[4]))
            for n in self.nodes
        )
        if not 1 <= len(nodes) <= MAX_TF_NODES:
            raise ValueError(f"transfer function needs 1..{MAX_TF_NODES} nodes")
        for pos, r, g, b, a in nodes:
            if not 0.0 <= pos <= 1.0:
                raise ValueError(f"node position {pos} outside [0,1]")
            for ch in (r, g, b, a):
                if not 0.0 <= ch <= 1.0:
                    raise ValueError(f"node channel {ch} outside [0,1]")
        for (p0, *_), (p1, *_) in zip(nodes, nodes[1:]):
            if not p0 < p1:
                raise ValueError("node positions must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    def evaluate(self, value: float) -> tuple[float, float, float, float]:
        nodes = self.nodes
        v = float(value)
        if v <= nodes[0][0]:
            return nodes[0][1:]
        if v >= nodes[-1][0]:
            return nodes[-1][1:]
        i = 0
        while v >= nodes[i + 1][0]:
            i += 1
        lo = nodes[i]
        hi = nodes[i + 1]
        f = (v - lo[0]) / (hi[0] - lo[0])
        return tuple(lo[c] + (hi[c] - lo[c]) * f for c in range(1, 5))

    def as_arrays(self):
        arr = np.asarray(self.nodes, dtype=np.float64)
        return (
            np.ascontiguousarray(arr[:, 0]),
            np.ascontiguousarray(arr[:, 1:4]),
            np.ascontiguousarray(arr[:, 4]),
        )


# Neutral default: grayscale ramp, opacity 0 -> 0.05 across the value range.
DEFAULT_TRANSFER_FUNCTION = TransferFunction(
    nodes=(
        (0.0, 0.0, 0.0, 0.0, 0.0),
        (1.0, 1.0, 1.0, 1.0, 0.05),
    )
)


@dataclass(frozen=True)
class ContextSettings:
    mode: str = "standard"
    global_alpha: float = 1.0
    delta_z: float = 0.01
    ray_step: float | None = None  # None: half a voxel of the finest axis
    transfer_function: TransferFunction = DEFAULT_TRANSFER_FUNCTION

    def __post_init__(self):
        object.__setattr__(self, "mode", canonical_mode(self.mode))
        if not 0.0 <= self.global_alpha <= 1.0:
            raise ValueError(f"global_alpha must lie in [0,1], got {self.global_alpha}")
        if not self.delta_z > 0.0:
            raise ValueError(f"delta_z must be > 0, got {self.delta_z}")
        if self.ray_step is not None and not self.ray_step > 0.0:
            raise ValueError(f"ray_step must be > 0, got {self.ray_step}")


@dataclass(frozen=True)
class Camera:
    eye: tuple[float, float, float] = (0.5, 0.5, 2.2)
    look_at: tuple[float, float, float] = (0.5, 0.5, 0.5)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    vertical_fov: float = 0.9  # radians
    width: int = 256
    height: int = 256

    def __post_init__(self):
        eye = tuple(float(c) for c in self.eye)
        look = tuple(float(c) for c in self.look_at)
        up = tuple(float(c) for c in self.up)
        object.__setattr__(self, "eye", eye)
        object.__setattr__(self, "look_at", look)
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "vertical_fov", float(self.vertical_fov))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not 0.0 < self.vertical_fov < math.pi:
            raise ValueError(f"vertical_fov must lie in (0, pi), got {self.vertical_fov}")
        fwd = np.asarray(look, dtype=np.float64) - np.asarray(eye, dtype=np.float64)
        if float(np.linalg.norm(fwd)) == 0.0:
            raise ValueError("eye and look_at must differ")
        upv = np.asarray(up, dtype=np.float64)
        if float(np.linalg.norm(upv)) == 0.0:
            raise ValueError("up must be nonzero")
        cross = np.cross(fwd / np.linalg.norm(fwd), upv / np.linalg.norm(upv))
        if float(np.linalg.norm(cross)) < 1e-9:
            raise ValueError("up must not be parallel to the view direction")

    def basis(self):
        """Right-handed view basis (forward, right, up) plus half-extents of
        the image plane at unit distance."""
        eye = np.asarray(self.eye, dtype=np.float64)
        fwd = np.asarray(self.look_at, dtype=np.float64) - eye
        fwd = fwd / float(np.linalg.norm(fwd))
        right = np.cross(fwd, np.asarray(self.up, dtype=np.float64))
        right = right / float(np.linalg.norm(right))
        true_up = np.cross(right, fwd)
        half_h = math.tan(self.vertical_fov / 2.0)
        half_w = half_h * (self.width / self.height)
        return fwd, right, true_up, half_w, half_h


def camera_ray(camera: Camera, px: int, py: int):
    """Primary ray through the center of pixel (px, py); py=0 is the top row."""
    fwd, right, true_up, half_w, half_h = camera.basis()
    sx = (2.0 * (px + 0.5) / camera.width - 1.0) * half_w
    sy = (1.0 - 2.0 * (py + 0.5) / camera.height) * half_h
    d = fwd + sx * right + sy * true_up
    d = d / float(np.linalg.norm(d))
    return np.asarray(camera.eye, dtype=np.float64), d


@dataclass(frozen=True)
class SurfaceDepthSet:
    """Ascending quadric hit depths along one ray, tagged with lens ids."""

    entries: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        entries = tuple((float(t), int(i)) for t, i in self.entries)
        for (t0, _), (t1, _) in zip(entries, entries[1:]):
            if t0 > t1:
                raise ValueError("depth entries must be ascending")
        if entries and entries[0][0] < 0.0:
            raise ValueError("depths must be >= 0")
        object.__setattr__(self, "entries", entries)

    @property
    def depths(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def surface_depth_set(lenses, origin, direction) -> SurfaceDepthSet:
    """Merged sorted hit depths of all lenses along one ray."""
    entries = []
    for lens in lenses:
        for hit in ray_intersect(lens, origin, direction):
            entries.append((hit.t, lens.id))
    entries.sort()
    return SurfaceDepthSet(entries=tuple(entries))


def cull_test(t_sample: float, depths, mode: str, delta_z: float) -> bool:
    """True when the sample at ray depth t_sample must be discarded."""
    if mode == "standard":
        return False
    ds = depths.depths if isinstance(depths, SurfaceDepthSet) else tuple(depths)
    if mode == "depth_cull":
        return bool(ds) and t_sample < max(ds)
    if mode == "neighbor_cull":
        return any(abs(t_sample - d) <= delta_z for d in ds)
    raise ValueError(f"unknown context mode {mode!r}")


def composite_front_to_back(samples, early_exit_alpha: float = EARLY_TERMINATION_ALPHA):
    """Accumulate near-to-far (color, opacity) samples.

    Returns premultiplied (r, g, b, accumulated alpha). Pass an
    early_exit_alpha above 1 to disable early termination.
    """
    cr = cg = cb = 0.0
    acc = 0.0
    for color, alpha in samples:
        w = (1.0 - acc) * float(alpha)
        cr += w * float(color[0])
        cg += w * float(color[1])
        cb += w * float(color[2])
        acc += w
        if acc >= early_exit_alpha:
            break
    return (cr, cg, cb, acc)


def ray_cube_span(origin, direction):
    """Parametric [t_enter, t_exit) of the ray inside the unit cube, or None.

    t_enter is clamped to 0 so rays starting inside march from the origin.
    """
    tmin = -1e30
    tmax = 1e30
    for axis in range(3):
        o = float(origin[axis])
        d = float(direction[axis])
        if d == 0.0:
            if o < 0.0 or o > 1.0:
                return None
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
    t_enter = tmin if tmin > 0.0 else 0.0
    if t_enter >= tmax:
        return None
    return t_enter, tmax


def resolve_ray_step(dims, settings: ContextSettings) -> float:
    if settings.ray_step is not None:
        return settings.ray_step
    return 1.0 / (2.0 * max(dims))


def reference_step(dims) -> float:
    """Step the transfer-function opacities are calibrated against (one voxel
    of the finest axis)."""
    return 1.0 / max(dims)


def _cast_counted(grid, origin, direction, settings, depths, t_stop=None):
    span = ray_cube_span(origin, direction)
    if span is None:
        return (0.0, 0.0, 0.0, 0.0), 0
    t_enter, t_exit = span
    t_limit = t_exit if t_stop is None else min(t_exit, t_stop)

    step = resolve_ray_step(grid.dims, settings)
    ratio = step / reference_step(grid.dims)
    tf = settings.transfer_function
    mode = settings.mode
    delta_z = settings.delta_z
    galpha = settings.global_alpha

    cr = cg = cb = 0.0
    acc = 0.0
    count = 0
    j = 0
    while True:
        t = t_enter + (j + 0.5) * step
        if t >= t_limit:
            break
        j += 1
        if cull_test(t, depths, mode, delta_z):
            continue
        p = (
            float(origin[0]) + t * float(direction[0]),
            float(origin[1]) + t * float(direction[1]),
            float(origin[2]) + t * float(direction[2]),
        )
        value = sample_trilinear(grid, p)
        r, g, b, a = tf.evaluate(value)
        a0 = a * galpha
        ac = 1.0 - (1.0 - a0) ** ratio
        w = (1.0 - acc) * ac
        cr += w * r
        cg += w * g
        cb += w * b
        acc += w
        count += 1
        if acc >= EARLY_TERMINATION_ALPHA:
            break
    return (cr, cg, cb, acc), count


def cast_context_ray(grid: VolumeGrid, origin, direction, settings: ContextSettings,
                     depths, t_stop: float | None = None):
    """Context contribution of one ray as premultiplied RGBA.

    Marches the unit-cube span (cut short at t_stop, the nearest focus hit,
    when given), culls per mode, corrects opacity for step size, composites
    front to back. Rays missing the cube return transparent black.
    """
    rgba, _ = _cast_counted(grid, origin, direction, settings, depths, t_stop)
    return rgba


def render_frame(grid: VolumeGrid, lenses, camera: Camera,
                 focus_settings: FocusSettings | None = None,
                 context_settings: ContextSettings | None = None,
                 background=(0.0, 0.0, 0.0)):
    """Render one frame; returns (image, stats).

    image is float64 (height, width, 4) with RGB already composited over the
    opaque background and alpha 1. stats carries pixels/rays/samples counts
    and wall_ms. Deterministic: same inputs give bit-identical images.
    """
    if grid is None:
        raise RenderError("no volume loaded")
    focus_settings = focus_settings if focus_settings is not None else FocusSettings()
    context_settings = context_settings if context_settings is not None else ContextSettings()

    from . import _kernels

    t0 = time.perf_counter()
    image, samples = _kernels.render(
        grid, tuple(lenses), camera, focus_settings, context_settings, background
    )
    wall_ms = (time.perf_counter() - t0) * 1000.0
    stats = {
        "pixels": camera.width * camera.height,
        "rays": camera.width * camera.height,
        "samples": int(samples),
        "wall_ms": wall_ms,
    }
    return image, stats


def render_pixel(grid: VolumeGrid, lenses, camera: Camera, px: int, py: int,
                 focus_settings: FocusSettings | None = None,
                 context_settings: ContextSettings | None = None,
                 background=(0.0, 0.0, 0.0)):
    """Single-pixel render through the pure-Python path (slow; test-grade).

    Same semantics as render_frame: nearest focus hit is opaque, context in
    front composites over it, everything lands on the background.
    """
    focus_settings = focus_settings if focus_settings is not None else FocusSettings()
    context_settings = context_settings if context_settings is not None else ContextSettings()
    origin, direction = camera_ray(camera, px, py)

    nearest = None
    nearest_lens = None
    entries = []
    for lens in lenses:
        for hit in ray_intersect(lens, origin, direction):
            entries.append((hit.t, lens.id))
            if nearest is None or hit.t < nearest.t:
                nearest = hit
                nearest_lens = lens
    entries.sort()
    depths = SurfaceDepthSet(entries=tuple(entries))

    t_stop = nearest.t if nearest is not None else None
    (cr, cg, cb, acc), count = _cast_counted(
        grid, origin, direction, context_settings, depths, t_stop
    )
    if nearest is not None:
        fr, fg, fb, _ = focus_fragment(grid, nearest_lens, nearest.uv, focus_settings)
        w = 1.0 - acc
        cr += w * fr
        cg += w * fg
        cb += w * fb
        acc = 1.0
    out = (
        cr + (1.0 - acc) * float(background[0]),
        cg + (1.0 - acc) * float(background[1]),
        cb + (1.0 - acc) * float(background[2]),
        1.0,
    )
    return out, count


def image_to_u8(image: np.ndarray) -> np.ndarray:
    """Quantize a float image in [0,1] to uint8 with round-half-even."""
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path, image: np.ndarray) -> None:
    """Write an (H, W, 4) float image as PPM (P6) or PNG by extension."""
    path = str(path)
    u8 = image_to_u8(image)
    rgb = u8[:, :, :3]
    if path.lower().endswith(".ppm"):
        h, w = rgb.shape[:2]
        with open(path, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            fh.write(np.ascontiguousarray(rgb).tobytes())
    elif path.lower().endswith(".png"):
        from PIL import Image

        Image.fromarray(np.ascontiguousarray(rgb), mode="RGB").save(path)
    else:
        raise ValueError(f"unsupported image extension on {path!r} (use .ppm or .png)")
