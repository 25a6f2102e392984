"""Focus coloring of lens surfaces.

Each surface point is colored by sampling the volume at n points spread
symmetrically along the surface normal, averaging, mapping through a
colormap, and applying ambient+diffuse lighting. Averaging across the
normal smooths intensity transitions and forgives imprecise placement of
the patch relative to a feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .lens import QuadricLens, quadric_height, surface_normal
from .volume import VolumeGrid, gradient_magnitude, sample_trilinear

FOCUS_ATTRIBUTES = ("scalar", "gradient_magnitude")
COLORMAPS = ("cool_to_warm", "grayscale")

# Diverging cool-to-warm anchors (low / mid / high), piecewise-linear in RGB.
COOL_WARM_LOW = (0.230, 0.299, 0.754)
COOL_WARM_MID = (0.865, 0.865, 0.865)
COOL_WARM_HIGH = (0.706, 0.016, 0.150)


@dataclass(frozen=True)
class FocusSettings:
    n_samples: int = 5
    step: float | None = None  # None: sqrt(3)/max(D); else explicit step
    attribute: str = "scalar"
    colormap: str = "cool_to_warm"
    ambient: float = 0.4
    diffuse: float = 0.6
    light_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.n_samples < 1 or self.n_samples % 2 == 0:
            raise ValueError(f"n_samples must be odd and >= 1, got {self.n_samples}")
        if self.step is not None and not self.step > 0:
            raise ValueError(f"explicit step must be > 0, got {self.step}")
        if self.attribute not in FOCUS_ATTRIBUTES:
            raise ValueError(f"unknown focus attribute {self.attribute!r}")
        if self.colormap not in COLORMAPS:
            raise ValueError(f"unknown colormap {self.colormap!r}")
        if not 0.0 <= self.ambient <= 1.0 or not 0.0 <= self.diffuse <= 1.0:
            raise ValueError("ambient and diffuse must lie in [0,1]")
        if self.ambient + self.diffuse > 1.5:
            raise ValueError("ambient + diffuse must not exceed 1.5")
        ld = np.asarray(self.light_direction, dtype=np.float64)
        nsq = float(np.dot(ld, ld))
        if nsq == 0.0:
            raise ValueError("light_direction must be nonzero")
        # Idempotent normalization keeps serialized settings bit-stable.
        if abs(nsq - 1.0) > 1e-12:
            ld = ld / np.sqrt(nsq)
        object.__setattr__(self, "light_direction", tuple(float(c) for c in ld))


def focus_step(dims, settings: FocusSettings) -> float:
    """Normal-sampling step: sqrt(3)/max(D) in auto mode (one fine-axis voxel
    diagonal in normalized units), or the explicit setting."""
    if settings.step is not None:
        return settings.step
    return math.sqrt(3.0) / max(dims)


def sample_along_normal(grid: VolumeGrid, p, n_hat, settings: FocusSettings) -> list[float]:
    """n attribute samples at p + (j - (n-1)/2) * s * n_hat, j = 0..n-1.

    Gradient-magnitude samples are normalized by the grid's 99th-percentile
    gradient so they share the colormap domain with scalars.
    """
    p = np.asarray(p, dtype=np.float64)
    n_hat = np.asarray(n_hat, dtype=np.float64)
    s = focus_step(grid.dims, settings)
    n = settings.n_samples
    center = (n - 1) / 2.0
    use_gradient = settings.attribute == "gradient_magnitude"
    scale = grid.gradient_scale if use_gradient else 1.0
    out = []
    for j in range(n):
        q = p + (j - center) * s * n_hat
        if use_gradient:
            g = gradient_magnitude(grid, q)
            out.append(g / scale if scale > 0.0 else 0.0)
        else:
            out.append(sample_trilinear(grid, q))
    return out


def blend_samples(values) -> float:
    """Arithmetic mean; the blend happens on scalars before colormapping."""
    values = list(values)
    if not values:
        raise ValueError("cannot blend an empty sample list")
    return float(sum(values) / len(values))


def apply_colormap(value: float, colormap: str = "cool_to_warm") -> tuple[float, float, float]:
    v = 0.0 if value < 0.0 else 1.0 if value > 1.0 else float(value)
    if colormap == "grayscale":
        return (v, v, v)
    if colormap != "cool_to_warm":
        raise ValueError(f"unknown colormap {colormap!r}")
    if v <= 0.5:
        f = 2.0 * v
        lo, hi = COOL_WARM_LOW, COOL_WARM_MID
    else:
        f = 2.0 * v - 1.0
        lo, hi = COOL_WARM_MID, COOL_WARM_HIGH
    return tuple(lo[i] + (hi[i] - lo[i]) * f for i in range(3))


def shade(base, normal, settings: FocusSettings) -> tuple[float, float, float]:
    """Two-sided ambient+diffuse: base * (ambient + diffuse * |n . light|).

    Lens patches are open sheets viewable from either side, hence |dot|.
    """
    n = np.asarray(normal, dtype=np.float64)
    lamb = abs(float(np.dot(n, settings.light_direction)))
    gain = settings.ambient + settings.diffuse * lamb
    return tuple(min(1.0, max(0.0, ch * gain)) for ch in base)


def focus_fragment(
    grid: VolumeGrid, lens: QuadricLens, uv, settings: FocusSettings
) -> tuple[float, float, float, float]:
    """Full focus pipeline for one surface point; focus surfaces are opaque."""
    u, v = float(uv[0]), float(uv[1])
    p_world = lens.pose.transform_point((u, v, quadric_height(lens.k1, lens.k2, u, v)))
    n_world = lens.pose.rotate_vector(surface_normal(lens.k1, lens.k2, u, v))
    eff = settings
    if lens.attribute_override is not None and lens.attribute_override != settings.attribute:
        eff = replace(settings, attribute=lens.attribute_override)
    value = blend_samples(sample_along_normal(grid, p_world, n_world, eff))
    rgb = apply_colormap(value, settings.colormap)
    r, g, b = shade(rgb, n_world, settings)
    return (r, g, b, 1.0)
