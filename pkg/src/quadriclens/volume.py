"""Regular scalar volume grids: QVOL file I/O, synthetic fields, sampling.

All engine-side positions are normalized to the unit cube [0,1]^3. Voxel
(i, j, k) covers [i/Dx, (i+1)/Dx) x ... and its center sits at
((i+0.5)/Dx, (j+0.5)/Dy, (k+0.5)/Dz). Values are stored float32 in a
(Dz, Dy, Dx) array so the flat layout is row-major x-fastest.

QVOL format: one ASCII header line

    qvol1 <Dx> <Dy> <Dz> <dtype> <sx> <sy> <sz>\n

with dtype in {u8, u16le, f32le}, followed immediately by the raw
little-endian payload, x-fastest. Round trips are bit-exact for f32le
payloads whose values already lie in [0,1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SYNTHETIC_KINDS = ("constant", "axis_linear", "sphere_shell", "radial_pulse")
QVOL_MAGIC = "qvol1"

_DTYPES = {
    "u8": np.dtype("u1"),
    "u16le": np.dtype("<u2"),
    "f32le": np.dtype("<f4"),
}
_INT_SCALE = {"u8": 255.0, "u16le": 65535.0}


class VolumeFormatError(ValueError):
    """Malformed volume file (bad header, payload size mismatch, non-finite data)."""


class UnsupportedEncodingError(VolumeFormatError):
    """Scalar encoding not one of u8 / u16le / f32le."""


@dataclass(frozen=True)
class QvolHeader:
    dims: tuple[int, int, int]
    dtype: str = "f32le"
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.dtype not in _DTYPES:
            raise UnsupportedEncodingError(f"unsupported scalar encoding {self.dtype!r}")
        _check_dims(self.dims)


@dataclass(eq=False)
class VolumeGrid:
    """Immutable regular scalar grid with values normalized to [0,1]."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    values: np.ndarray  # float32, shape (Dz, Dy, Dx)
    value_range: tuple[float, float]
    raw_range: tuple[float, float]
    _gradient_scale: float | None = field(default=None, init=False, repr=False)

    @classmethod
    def from_values(cls, values, dims, spacing=(1.0, 1.0, 1.0), raw_range=None) -> "VolumeGrid":
        dims = _check_dims(dims)
        dx, dy, dz = dims
        values = np.asarray(values, dtype=np.float32)
        if values.size != dx * dy * dz:
            raise VolumeFormatError(
                f"value count {values.size} does not match dims {dx}x{dy}x{dz}"
            )
        values = values.reshape(dz, dy, dx)
        values.flags.writeable = False
        vmin = float(values.min())
        vmax = float(values.max())
        return cls(
            dims=dims,
            spacing=(float(spacing[0]), float(spacing[1]), float(spacing[2])),
            values=values,
            value_range=(vmin, vmax),
            raw_range=raw_range if raw_range is not None else (vmin, vmax),
        )

    @property
    def gradient_scale(self) -> float:
        """99th-percentile gradient magnitude over the voxel lattice.

        Used to normalize gradient-magnitude focus display; computed lazily
        and cached.
        """
        if self._gradient_scale is None:
            dx, dy, dz = self.dims
            vals = self.values.astype(np.float64)
            gz, gy, gx = np.gradient(vals, 1.0 / dz, 1.0 / dy, 1.0 / dx)
            mag = np.sqrt(gx * gx + gy * gy + gz * gz)
            object.__setattr__(self, "_gradient_scale", float(np.percentile(mag, 99.0)))
        return self._gradient_scale


@dataclass(frozen=True)
class SyntheticSpec:
    """Analytic test field evaluated at voxel centers in normalized coordinates."""

    kind: str
    value: float = 0.5  # constant level
    axis: str = "x"  # axis_linear direction
    center: tuple[float, float, float] = (0.5, 0.5, 0.5)
    radius: float = 0.3
    width: float = 0.05
    amplitude: float = 1.0
    background: float = 0.0

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        if self.kind == "axis_linear" and self.axis not in ("x", "y", "z"):
            raise ValueError(f"axis must be x, y or z, got {self.axis!r}")
        if self.kind in ("sphere_shell", "radial_pulse"):
            if not self.width > 0:
                raise ValueError("shell width must be > 0")
            if not 0.0 < self.radius < 1.0:
                raise ValueError("radius must lie in (0, 1)")


def _check_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 2 for d in dims):
        raise ValueError(f"dims must be three integers >= 2, got {dims}")
    return dims


def generate_synthetic_volume(spec: SyntheticSpec, dims, spacing=(1.0, 1.0, 1.0)) -> VolumeGrid:
    """Evaluate ``spec`` at voxel centers; values are clipped into [0,1].

    Clipping keeps generated grids inside the engine's normalized value
    domain so a save/load cycle is bit-exact.
    """
    dims = _check_dims(dims)
    dx, dy, dz = dims
    cx = (np.arange(dx, dtype=np.float64) + 0.5) / dx
    cy = (np.arange(dy, dtype=np.float64) + 0.5) / dy
    cz = (np.arange(dz, dtype=np.float64) + 0.5) / dz
    zz, yy, xx = np.meshgrid(cz, cy, cx, indexing="ij")

    if spec.kind == "constant":
        fld = np.full((dz, dy, dx), spec.value, dtype=np.float64)
    elif spec.kind == "axis_linear":
        fld = {"x": xx, "y": yy, "z": zz}[spec.axis]
    else:
        ox, oy, oz = spec.center
        r = np.sqrt((xx - ox) ** 2 + (yy - oy) ** 2 + (zz - oz) ** 2)
        u = (r - spec.radius) / spec.width
        bump = np.exp(-u * u)
        if spec.kind == "sphere_shell":
            fld = spec.background + spec.amplitude * bump
        else:  # radial_pulse: Gaussian-windowed wavefront with side lobes
            fld = spec.background + spec.amplitude * bump * np.cos(math.pi * u)

    values = np.clip(fld, 0.0, 1.0).astype(np.float32)
    return VolumeGrid.from_values(values, dims, spacing)


# ---------------------------------------------------------------------------
# QVOL I/O
# ---------------------------------------------------------------------------

def format_qvol_header(header: QvolHeader) -> bytes:
    dx, dy, dz = header.dims
    sx, sy, sz = header.spacing
    return (
        f"{QVOL_MAGIC} {dx} {dy} {dz} {header.dtype} "
        f"{sx!r} {sy!r} {sz!r}\n".encode("ascii")
    )


def parse_qvol_header(line: bytes) -> QvolHeader:
    try:
        parts = line.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise VolumeFormatError("header line is not ASCII") from exc
    if len(parts) != 8 or parts[0] != QVOL_MAGIC:
        raise VolumeFormatError(
            f"expected header '{QVOL_MAGIC} Dx Dy Dz dtype sx sy sz', got {line!r}"
        )
    try:
        dims = (int(parts[1]), int(parts[2]), int(parts[3]))
        spacing = (float(parts[5]), float(parts[6]), float(parts[7]))
    except ValueError as exc:
        raise VolumeFormatError(f"bad numeric field in header {line!r}") from exc
    if parts[4] not in _DTYPES:
        raise UnsupportedEncodingError(f"unsupported scalar encoding {parts[4]!r}")
    return QvolHeader(dims=dims, dtype=parts[4], spacing=spacing)


def save_qvol(grid: VolumeGrid, path, dtype: str = "f32le") -> None:
    if dtype not in _DTYPES:
        raise UnsupportedEncodingError(f"unsupported scalar encoding {dtype!r}")
    header = QvolHeader(dims=grid.dims, dtype=dtype, spacing=grid.spacing)
    if dtype == "f32le":
        payload = np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    else:
        scale = _INT_SCALE[dtype]
        quantized = np.rint(np.clip(grid.values, 0.0, 1.0) * scale)
        payload = quantized.astype(_DTYPES[dtype]).tobytes()
    with open(path, "wb") as fh:
        fh.write(format_qvol_header(header))
        fh.write(payload)


def load_raw_volume(path, header: QvolHeader | None = None) -> VolumeGrid:
    """Load a QVOL file, or a bare raw payload when ``header`` is given.

    Values are normalized to [0,1]: integer encodings divide by their
    full-scale value; f32le payloads already inside [0,1] are taken verbatim
    (bit-exact round trip), anything else is min-max rescaled.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if header is None:
        nl = blob.find(b"\n")
        if nl < 0:
            raise VolumeFormatError("missing header line terminator")
        header = parse_qvol_header(blob[:nl])
        payload = blob[nl + 1:]
    else:
        payload = blob

    dx, dy, dz = header.dims
    dt = _DTYPES[header.dtype]
    expected = dx * dy * dz * dt.itemsize
    if len(payload) != expected:
        raise VolumeFormatError(
            f"payload size mismatch for dims {dx}x{dy}x{dz} {header.dtype}: "
            f"expected {expected} bytes, got {len(payload)}"
        )

    raw = np.frombuffer(payload, dtype=dt)
    if header.dtype == "f32le":
        if not np.all(np.isfinite(raw)):
            raise VolumeFormatError("f32le payload contains non-finite values")
        rmin = float(raw.min())
        rmax = float(raw.max())
        if 0.0 <= rmin and rmax <= 1.0:
            values = raw.astype(np.float32, copy=False)
        elif rmax > rmin:
            values = ((raw.astype(np.float64) - rmin) / (rmax - rmin)).astype(np.float32)
        else:
            values = np.clip(raw, 0.0, 1.0).astype(np.float32)
    else:
        rmin = float(raw.min())
        rmax = float(raw.max())
        values = (raw.astype(np.float32) / _INT_SCALE[header.dtype]).astype(np.float32)
    return VolumeGrid.from_values(values, header.dims, header.spacing, raw_range=(rmin, rmax))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def voxel_index(p, dims) -> tuple[int, int, int]:
    """Componentwise floor(p * D), clamped to valid voxel indices.

    Total function: out-of-range positions clamp to the nearest boundary
    voxel instead of erroring, so lens surfaces poking out of the volume
    still sample something sensible.
    """
    out = []
    for c, d in zip(p, dims):
        i = int(math.floor(float(c) * d))
        out.append(min(max(i, 0), d - 1))
    return (out[0], out[1], out[2])


def sample_trilinear(grid: VolumeGrid, p) -> float:
    """Trilinear interpolation over the 8 surrounding voxel centers.

    Positions outside [0,1]^3 clamp to the boundary (constant extension).
    Reproduces stored values exactly at voxel centers.
    """
    dx, dy, dz = grid.dims
    ux = _clamp(float(p[0]) * dx - 0.5, 0.0, dx - 1.0)
    uy = _clamp(float(p[1]) * dy - 0.5, 0.0, dy - 1.0)
    uz = _clamp(float(p[2]) * dz - 0.5, 0.0, dz - 1.0)
    ix = min(int(ux), dx - 2)
    iy = min(int(uy), dy - 2)
    iz = min(int(uz), dz - 2)
    fx = ux - ix
    fy = uy - iy
    fz = uz - iz
    v = grid.values
    # Fetches widened to float64 up front so interpolation runs entirely in
    # double precision (matches the compiled render path bit for bit).
    v000 = float(v[iz, iy, ix])
    v100 = float(v[iz, iy, ix + 1])
    v010 = float(v[iz, iy + 1, ix])
    v110 = float(v[iz, iy + 1, ix + 1])
    v001 = float(v[iz + 1, iy, ix])
    v101 = float(v[iz + 1, iy, ix + 1])
    v011 = float(v[iz + 1, iy + 1, ix])
    v111 = float(v[iz + 1, iy + 1, ix + 1])
    c00 = v000 + (v100 - v000) * fx
    c10 = v010 + (v110 - v010) * fx
    c01 = v001 + (v101 - v001) * fx
    c11 = v011 + (v111 - v011) * fx
    c0 = c00 + (c10 - c00) * fy
    c1 = c01 + (c11 - c01) * fy
    return float(c0 + (c1 - c0) * fz)


def gradient_magnitude(grid: VolumeGrid, p) -> float:
    """||grad f|| of the trilinear reconstruction by central differences.

    Per-axis step is one voxel (1/D_axis); falls back to one-sided
    differences where a central stencil would leave [0,1].
    """
    p = (float(p[0]), float(p[1]), float(p[2]))
    total = 0.0
    for axis in range(3):
        h = 1.0 / grid.dims[axis]
        lo = list(p)
        hi = list(p)
        if p[axis] + h > 1.0:
            hi[axis] = p[axis]
            lo[axis] = p[axis] - h
            denom = h
        elif p[axis] - h < 0.0:
            hi[axis] = p[axis] + h
            lo[axis] = p[axis]
            denom = h
        else:
            hi[axis] = p[axis] + h
            lo[axis] = p[axis] - h
            denom = 2.0 * h
        g = (sample_trilinear(grid, hi) - sample_trilinear(grid, lo)) / denom
        total += g * g
    return math.sqrt(total)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x
