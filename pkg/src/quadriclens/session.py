"""Scene state and the deterministic interaction state machine.

Events are absolute 6-DOF controller poses plus edge-triggered buttons.
Applying the same event sequence to the same initial state always produces
the same final state, which makes logged sessions replayable headlessly.

Interaction grammar:

  grip_pressed       instantiate a new flat lens at the controller pose
  trigger_pressed    near an origin handle: grab (rigid attach);
                     near a curvature handle: start a constrained drag that
                     maps controller motion along the lens z-axis to k;
                     on the other device while a lens is grabbed: start a
                     two-handed scale of that lens
  trigger_released   end this device's active drag
  toggle_lock        flip the lock of the grabbed/hovered/nearest lens
  toggle_attribute   flip the focus attribute (scalar vs gradient magnitude)
  cycle_mode         advance the context mode standard -> depth_cull ->
                     neighbor_cull -> standard

Scene files are versioned nested key-value text; event logs are one event
per comma-separated line. Both round-trip exactly (floats via repr).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .context import (
    CONTEXT_MODES,
    Camera,
    ContextSettings,
    TransferFunction,
    render_frame,
)
from .focus import COLORMAPS, FOCUS_ATTRIBUTES, FocusSettings
from .geometry import Pose
from .lens import (
    K_MAX,
    LENGTH_MAX,
    LENGTH_MIN,
    ControlPointHandle,
    QuadricLens,
    control_points,
    nearest_control_point,
    set_curvature,
)
from .volume import VolumeGrid, load_raw_volume

SCENE_MAGIC = "qscene"
SCENE_VERSION = 1

DEVICES = ("primary", "secondary")
# Order fixes the wire bitmask (bit i) and the canonical log column order.
BUTTON_FLAGS = (
    "grip_pressed",
    "trigger_pressed",
    "trigger_released",
    "toggle_attribute",
    "cycle_mode",
    "toggle_lock",
)

LENGTH_REF = 0.2  # controller travel that doubles/halves the side length
DEFAULT_LENS_LENGTH = 0.25
_QUAT_TOLERANCE = 1e-3


class EventError(ValueError):
    """Event rejected (unknown device/flag or malformed pose)."""


class SceneParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EventLogError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class InteractionEvent:
    timestamp: int  # monotonic milliseconds per device
    device: str
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]  # (w, x, y, z)
    buttons: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.device not in DEVICES:
            raise EventError(f"unknown device {self.device!r}")
        unknown = set(self.buttons) - set(BUTTON_FLAGS)
        if unknown:
            raise EventError(f"unknown button flags {sorted(unknown)}")
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "orientation", tuple(float(c) for c in self.orientation))
        object.__setattr__(self, "buttons", frozenset(self.buttons))


@dataclass(frozen=True)
class RenderSettings:
    focus: FocusSettings = FocusSettings()
    context: ContextSettings = ContextSettings()
    curvature_sensitivity: float = 1.0
    grab_radius: float = 0.05
    curvature_exact_tracking: bool = False

    def __post_init__(self):
        if not self.grab_radius > 0.0:
            raise ValueError(f"grab_radius must be > 0, got {self.grab_radius}")


@dataclass(frozen=True)
class GrabState:
    device: str
    lens_id: int
    offset: Pose  # lens pose expressed in the controller frame


@dataclass(frozen=True)
class ScaleState:
    device: str
    lens_id: int
    anchor: tuple[float, float, float]  # grabbed lens origin at scale start
    initial_secondary: tuple[float, float, float]
    initial_length: float


@dataclass(frozen=True)
class CurvatureDragState:
    device: str
    lens_id: int
    handle_kind: str
    initial_z: float  # controller z in the lens frame at press
    initial_k: float
    sensitivity: float


@dataclass(frozen=True)
class SessionState:
    lenses: tuple[QuadricLens, ...] = ()
    next_lens_id: int = 1
    settings: RenderSettings = RenderSettings()
    camera: Camera = Camera()
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    volume_path: str | None = None
    grid: VolumeGrid | None = field(default=None, compare=False, repr=False)
    # Transient interaction state (never serialized).
    grabbed: GrabState | None = None
    scaling: ScaleState | None = None
    curvature_drag: CurvatureDragState | None = None
    hover: ControlPointHandle | None = None
    selected: int | None = None
    notice: str | None = field(default=None, compare=False)

    def lens_by_id(self, lens_id: int) -> QuadricLens | None:
        for lens in self.lenses:
            if lens.id == lens_id:
                return lens
        return None


def new_session(grid: VolumeGrid | None = None, volume_path: str | None = None,
                camera: Camera | None = None,
                settings: RenderSettings | None = None) -> SessionState:
    return SessionState(
        grid=grid,
        volume_path=volume_path,
        camera=camera if camera is not None else Camera(),
        settings=settings if settings is not None else RenderSettings(),
    )


def _event_pose(event: InteractionEvent) -> Pose:
    vals = event.position + event.orientation
    if not all(math.isfinite(v) for v in vals):
        raise EventError("pose contains non-finite values")
    q = np.asarray(event.orientation, dtype=np.float64)
    nsq = float(np.dot(q, q))
    if abs(nsq - 1.0) > _QUAT_TOLERANCE:
        raise EventError(
            f"pose orientation is not orthonormal (|q|^2 = {nsq:.6f})"
        )
    return Pose(np.asarray(event.position, dtype=np.float64), q)


def _replace_lens(lenses: tuple[QuadricLens, ...], updated: QuadricLens):
    return tuple(updated if ln.id == updated.id else ln for ln in lenses)


def _drop_drags_on(state_kwargs: dict, lens_id: int) -> None:
    if state_kwargs["grabbed"] is not None and state_kwargs["grabbed"].lens_id == lens_id:
        state_kwargs["grabbed"] = None
        state_kwargs["scaling"] = None
    if state_kwargs["scaling"] is not None and state_kwargs["scaling"].lens_id == lens_id:
        state_kwargs["scaling"] = None
    if (
        state_kwargs["curvature_drag"] is not None
        and state_kwargs["curvature_drag"].lens_id == lens_id
    ):
        state_kwargs["curvature_drag"] = None


def _device_busy(s: dict, device: str) -> bool:
    return any(
        drag is not None and drag.device == device
        for drag in (s["grabbed"], s["scaling"], s["curvature_drag"])
    )


def _nearest_any_lens(lenses, p) -> tuple[int, float] | None:
    """Nearest handle over all lenses including locked ones (lock toggling
    and locked notices need to see them)."""
    best: tuple[int, float] | None = None
    for lens in sorted(lenses, key=lambda ln: ln.id):
        for handle in control_points(lens):
            d = float(np.linalg.norm(handle.world_position - np.asarray(p)))
            if best is None or d < best[1]:
                best = (lens.id, d)
    return best


def apply_event(state: SessionState, event: InteractionEvent) -> SessionState:
    """One deterministic state transition.

    Per event, in order: continuous drag motion for the event's device,
    trigger release, grip (instantiate), trigger press (grab / scale /
    curvature), lock toggle, attribute toggle, mode cycle, hover update.
    """
    pose = _event_pose(event)
    pos = pose.position
    device = event.device
    buttons = event.buttons

    s = {
        "lenses": state.lenses,
        "next_lens_id": state.next_lens_id,
        "settings": state.settings,
        "grabbed": state.grabbed,
        "scaling": state.scaling,
        "curvature_drag": state.curvature_drag,
        "hover": state.hover,
        "selected": state.selected,
        "notice": None,
    }

    # Continuous motion of this device's active drag.
    grabbed = s["grabbed"]
    if grabbed is not None and grabbed.device == device:
        lens = state.lens_by_id(grabbed.lens_id)
        if lens is not None and not lens.locked:
            s["lenses"] = _replace_lens(s["lenses"], replace(lens, pose=pose.compose(grabbed.offset)))
    scaling = s["scaling"]
    if scaling is not None and scaling.device == device:
        lens = None
        for ln in s["lenses"]:
            if ln.id == scaling.lens_id:
                lens = ln
        if lens is not None and not lens.locked:
            anchor = np.asarray(scaling.anchor, dtype=np.float64)
            init = np.asarray(scaling.initial_secondary, dtype=np.float64)
            stretch = float(np.linalg.norm(pos - anchor)) - float(np.linalg.norm(init - anchor))
            length = scaling.initial_length * (1.0 + stretch / LENGTH_REF)
            length = min(max(length, LENGTH_MIN), LENGTH_MAX)
            s["lenses"] = _replace_lens(s["lenses"], replace(lens, length=length))
    drag = s["curvature_drag"]
    if drag is not None and drag.device == device:
        lens = None
        for ln in s["lenses"]:
            if ln.id == drag.lens_id:
                lens = ln
        if lens is not None and not lens.locked:
            z_local = float(lens.pose.local_point(pos)[2])
            delta_z = z_local - drag.initial_z
            target_k = drag.initial_k + drag.sensitivity * delta_z
            target_k = min(max(target_k, -K_MAX), K_MAX)
            if drag.handle_kind in ("k1_pos", "k1_neg"):
                s["lenses"] = _replace_lens(s["lenses"], replace(lens, k1=target_k))
            else:
                s["lenses"] = _replace_lens(s["lenses"], replace(lens, k2=target_k))

    if "trigger_released" in buttons:
        if s["grabbed"] is not None and s["grabbed"].device == device:
            s["grabbed"] = None
            s["scaling"] = None  # two-handed scale ends with the grab
        if s["scaling"] is not None and s["scaling"].device == device:
            s["scaling"] = None
        if s["curvature_drag"] is not None and s["curvature_drag"].device == device:
            s["curvature_drag"] = None

    if "grip_pressed" in buttons:
        lens = QuadricLens(id=s["next_lens_id"], pose=pose, length=DEFAULT_LENS_LENGTH)
        s["lenses"] = s["lenses"] + (lens,)
        s["selected"] = lens.id
        s["next_lens_id"] += 1

    if "trigger_pressed" in buttons and not _device_busy(s, device):
        grabbed = s["grabbed"]
        if grabbed is not None and grabbed.device != device and s["scaling"] is None:
            # Second hand while a lens is held: start the two-handed scale.
            lens = None
            for ln in s["lenses"]:
                if ln.id == grabbed.lens_id:
                    lens = ln
            if lens is not None:
                s["scaling"] = ScaleState(
                    device=device,
                    lens_id=lens.id,
                    anchor=tuple(float(c) for c in lens.pose.position),
                    initial_secondary=tuple(float(c) for c in pos),
                    initial_length=lens.length,
                )
        else:
            found = nearest_control_point(s["lenses"], pos)
            if found is not None and found[1] <= state.settings.grab_radius:
                handle, _ = found
                lens = None
                for ln in s["lenses"]:
                    if ln.id == handle.lens_id:
                        lens = ln
                if handle.kind == "origin":
                    s["grabbed"] = GrabState(
                        device=device,
                        lens_id=lens.id,
                        offset=pose.inverse().compose(lens.pose),
                    )
                    s["selected"] = lens.id
                else:
                    if state.settings.curvature_exact_tracking:
                        sensitivity = 1.0 / ((lens.length / 2.0) ** 2 / 2.0)
                    else:
                        sensitivity = state.settings.curvature_sensitivity
                    initial_k = lens.k1 if handle.kind in ("k1_pos", "k1_neg") else lens.k2
                    s["curvature_drag"] = CurvatureDragState(
                        device=device,
                        lens_id=lens.id,
                        handle_kind=handle.kind,
                        initial_z=float(lens.pose.local_point(pos)[2]),
                        initial_k=initial_k,
                        sensitivity=sensitivity,
                    )
                    s["selected"] = lens.id
            else:
                near_any = _nearest_any_lens(s["lenses"], pos)
                if near_any is not None and near_any[1] <= state.settings.grab_radius:
                    s["notice"] = f"lens {near_any[0]} is locked"

    if "toggle_lock" in buttons:
        target_id = None
        if s["grabbed"] is not None:
            target_id = s["grabbed"].lens_id
        else:
            unlocked = nearest_control_point(s["lenses"], pos)
            if unlocked is not None and unlocked[1] <= state.settings.grab_radius:
                target_id = unlocked[0].lens_id
            else:
                near_any = _nearest_any_lens(s["lenses"], pos)
                if near_any is not None and near_any[1] <= state.settings.grab_radius:
                    target_id = near_any[0]
        if target_id is not None:
            for ln in s["lenses"]:
                if ln.id == target_id:
                    flipped = replace(ln, locked=not ln.locked)
                    s["lenses"] = _replace_lens(s["lenses"], flipped)
                    if flipped.locked:
                        _drop_drags_on(s, target_id)

    if "toggle_attribute" in buttons:
        focus = s["settings"].focus
        other = "gradient_magnitude" if focus.attribute == "scalar" else "scalar"
        s["settings"] = replace(s["settings"], focus=replace(focus, attribute=other))

    if "cycle_mode" in buttons:
        ctx = s["settings"].context
        idx = CONTEXT_MODES.index(ctx.mode)
        nxt = CONTEXT_MODES[(idx + 1) % len(CONTEXT_MODES)]
        s["settings"] = replace(s["settings"], context=replace(ctx, mode=nxt))

    hover = nearest_control_point(s["lenses"], pos)
    s["hover"] = hover[0] if hover is not None and hover[1] <= state.settings.grab_radius else None

    return replace(
        state,
        lenses=s["lenses"],
        next_lens_id=s["next_lens_id"],
        settings=s["settings"],
        grabbed=s["grabbed"],
        scaling=s["scaling"],
        curvature_drag=s["curvature_drag"],
        hover=s["hover"],
        selected=s["selected"],
        notice=s["notice"],
    )


def replay_events(state: SessionState, events) -> SessionState:
    for event in events:
        state = apply_event(state, event)
    return state


def render_scene(state: SessionState):
    """Render the session's current frame; see context.render_frame."""
    return render_frame(
        state.grid,
        state.lenses,
        state.camera,
        state.settings.focus,
        state.settings.context,
        state.background,
    )


# ---------------------------------------------------------------------------
# Scene serialization
# ---------------------------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def serialize_scene(state: SessionState) -> str:
    """Persistent fields only; transient drag state is deliberately absent."""
    lines = [f"{SCENE_MAGIC} {SCENE_VERSION}"]
    if state.volume_path is not None:
        lines.append(f"volume {state.volume_path}")
    bg = state.background
    lines.append(f"background {_f(bg[0])} {_f(bg[1])} {_f(bg[2])}")
    cam = state.camera
    lines.extend(
        [
            "camera {",
            f"  eye {_f(cam.eye[0])} {_f(cam.eye[1])} {_f(cam.eye[2])}",
            f"  look_at {_f(cam.look_at[0])} {_f(cam.look_at[1])} {_f(cam.look_at[2])}",
            f"  up {_f(cam.up[0])} {_f(cam.up[1])} {_f(cam.up[2])}",
            f"  vertical_fov {_f(cam.vertical_fov)}",
            f"  width {cam.width}",
            f"  height {cam.height}",
            "}",
        ]
    )
    st = state.settings
    ctx = st.context
    foc = st.focus
    ld = foc.light_direction
    lines.extend(
        [
            "settings {",
            f"  mode {ctx.mode}",
            f"  global_alpha {_f(ctx.global_alpha)}",
            f"  delta_z {_f(ctx.delta_z)}",
            f"  ray_step {'auto' if ctx.ray_step is None else _f(ctx.ray_step)}",
            f"  focus_samples {foc.n_samples}",
            f"  focus_step {'auto' if foc.step is None else _f(foc.step)}",
            f"  focus_attribute {foc.attribute}",
            f"  colormap {foc.colormap}",
            f"  ambient {_f(foc.ambient)}",
            f"  diffuse {_f(foc.diffuse)}",
            f"  light_direction {_f(ld[0])} {_f(ld[1])} {_f(ld[2])}",
            f"  curvature_sensitivity {_f(st.curvature_sensitivity)}",
            f"  curvature_exact_tracking {'true' if st.curvature_exact_tracking else 'false'}",
            f"  grab_radius {_f(st.grab_radius)}",
            "  transfer_function {",
        ]
    )
    for pos, r, g, b, a in ctx.transfer_function.nodes:
        lines.append(f"    node {_f(pos)} {_f(r)} {_f(g)} {_f(b)} {_f(a)}")
    lines.append("  }")
    lines.append("}")
    for lens in state.lenses:
        p = lens.pose.position
        q = lens.pose.orientation
        lines.extend(
            [
                "lens {",
                f"  id {lens.id}",
                f"  position {_f(p[0])} {_f(p[1])} {_f(p[2])}",
                f"  orientation {_f(q[0])} {_f(q[1])} {_f(q[2])} {_f(q[3])}",
                f"  length {_f(lens.length)}",
                f"  k1 {_f(lens.k1)}",
                f"  k2 {_f(lens.k2)}",
                f"  locked {'true' if lens.locked else 'false'}",
                f"  attribute {lens.attribute_override if lens.attribute_override else 'none'}",
                "}",
            ]
        )
    return "\n".join(lines) + "\n"


def _parse_floats(parts, n, line):
    if len(parts) != n:
        raise SceneParseError(f"expected {n} numeric fields, got {len(parts)}", line)
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise SceneParseError(f"bad numeric value in {parts}", line) from exc


def _parse_bool(token, line):
    if token == "true":
        return True
    if token == "false":
        return False
    raise SceneParseError(f"expected true/false, got {token!r}", line)


def _tokenize_scene(text: str):
    """Yield (line_number, key, rest, kind) with kind in open/close/pair."""
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped == "}":
            yield ln, "", [], "close"
            continue
        parts = stripped.split()
        if parts[-1] == "{":
            yield ln, parts[0], parts[1:-1], "open"
        else:
            yield ln, parts[0], parts[1:], "pair"


def deserialize_scene(text: str) -> SessionState:
    """Parse a scene document into a session (volume data not yet loaded).

    Raises SceneParseError with the offending line number on malformed input
    or out-of-range values.
    """
    tokens = list(_tokenize_scene(text))
    if not tokens:
        raise SceneParseError("empty scene document", 1)
    ln, key, rest, kind = tokens[0]
    if kind != "pair" or key != SCENE_MAGIC or rest != [str(SCENE_VERSION)]:
        raise SceneParseError(
            f"expected version header '{SCENE_MAGIC} {SCENE_VERSION}'", ln
        )

    volume_path = None
    background = (0.0, 0.0, 0.0)
    camera_kv: dict[str, tuple[list[str], int]] = {}
    settings_kv: dict[str, tuple[list[str], int]] = {}
    tf_nodes: list[tuple[float, ...]] = []
    lens_blocks: list[tuple[dict[str, tuple[list[str], int]], int]] = []

    i = 1
    stack: list[str] = []
    current_lens: dict[str, tuple[list[str], int]] | None = None
    lens_line = 0
    while i < len(tokens):
        ln, key, rest, kind = tokens[i]
        i += 1
        if kind == "open":
            stack.append(key)
            if stack == ["lens"]:
                current_lens = {}
                lens_line = ln
            elif stack not in (["camera"], ["settings"], ["settings", "transfer_function"]):
                raise SceneParseError(f"unknown block {'.'.join(stack)!r}", ln)
            continue
        if kind == "close":
            if not stack:
                raise SceneParseError("unmatched closing brace", ln)
            closed = stack.pop()
            if closed == "lens":
                lens_blocks.append((current_lens, lens_line))
                current_lens = None
            continue
        # key-value pair
        if not stack:
            if key == "volume":
                if not rest:
                    raise SceneParseError("volume needs a path", ln)
                volume_path = " ".join(rest)
            elif key == "background":
                background = tuple(_parse_floats(rest, 3, ln))
            else:
                raise SceneParseError(f"unknown top-level key {key!r}", ln)
        elif stack == ["camera"]:
            camera_kv[key] = (rest, ln)
        elif stack == ["settings"]:
            settings_kv[key] = (rest, ln)
        elif stack == ["settings", "transfer_function"]:
            if key != "node":
                raise SceneParseError(f"unknown transfer_function key {key!r}", ln)
            tf_nodes.append(tuple(_parse_floats(rest, 5, ln)))
        elif stack == ["lens"]:
            current_lens[key] = (rest, ln)
        else:
            raise SceneParseError(f"key {key!r} in unknown block", ln)
    if stack:
        raise SceneParseError(f"unclosed block {stack[-1]!r}", tokens[-1][0])

    camera = _build_camera(camera_kv)
    settings = _build_settings(settings_kv, tf_nodes)
    lenses = tuple(_build_lens(kv, ln) for kv, ln in lens_blocks)
    ids = [lens.id for lens in lenses]
    if len(set(ids)) != len(ids):
        raise SceneParseError("duplicate lens ids", lens_blocks[-1][1] if lens_blocks else 1)

    return SessionState(
        lenses=lenses,
        next_lens_id=max(ids, default=0) + 1,
        settings=settings,
        camera=camera,
        background=background,
        volume_path=volume_path,
    )


def _build_camera(kv) -> Camera:
    kwargs = {}
    for key, (rest, ln) in kv.items():
        try:
            if key in ("eye", "look_at", "up"):
                kwargs[key] = tuple(_parse_floats(rest, 3, ln))
            elif key == "vertical_fov":
                kwargs[key] = _parse_floats(rest, 1, ln)[0]
            elif key in ("width", "height"):
                kwargs[key] = int(rest[0])
            else:
                raise SceneParseError(f"unknown camera key {key!r}", ln)
        except (ValueError, IndexError) as exc:
            if isinstance(exc, SceneParseError):
                raise
            raise SceneParseError(f"bad camera field {key}: {exc}", ln) from exc
    try:
        return Camera(**kwargs)
    except ValueError as exc:
        line = min(ln for _, ln in kv.values()) if kv else 1
        raise SceneParseError(str(exc), line) from exc


def _build_settings(kv, tf_nodes) -> RenderSettings:
    ctx_kwargs = {}
    foc_kwargs = {}
    top_kwargs = {}
    for key, (rest, ln) in kv.items():
        try:
            if key == "mode":
                ctx_kwargs["mode"] = rest[0]
            elif key == "global_alpha":
                ctx_kwargs["global_alpha"] = _parse_floats(rest, 1, ln)[0]
            elif key == "delta_z":
                ctx_kwargs["delta_z"] = _parse_floats(rest, 1, ln)[0]
            elif key == "ray_step":
                ctx_kwargs["ray_step"] = None if rest[0] == "auto" else _parse_floats(rest, 1, ln)[0]
            elif key == "focus_samples":
                foc_kwargs["n_samples"] = int(rest[0])
            elif key == "focus_step":
                foc_kwargs["step"] = None if rest[0] == "auto" else _parse_floats(rest, 1, ln)[0]
            elif key == "focus_attribute":
                if rest[0] not in FOCUS_ATTRIBUTES:
                    raise SceneParseError(f"unknown focus attribute {rest[0]!r}", ln)
                foc_kwargs["attribute"] = rest[0]
            elif key == "colormap":
                if rest[0] not in COLORMAPS:
                    raise SceneParseError(f"unknown colormap {rest[0]!r}", ln)
                foc_kwargs["colormap"] = rest[0]
            elif key == "ambient":
                foc_kwargs["ambient"] = _parse_floats(rest, 1, ln)[0]
            elif key == "diffuse":
                foc_kwargs["diffuse"] = _parse_floats(rest, 1, ln)[0]
            elif key == "light_direction":
                foc_kwargs["light_direction"] = tuple(_parse_floats(rest, 3, ln))
            elif key == "curvature_sensitivity":
                top_kwargs["curvature_sensitivity"] = _parse_floats(rest, 1, ln)[0]
            elif key == "curvature_exact_tracking":
                top_kwargs["curvature_exact_tracking"] = _parse_bool(rest[0], ln)
            elif key == "grab_radius":
                top_kwargs["grab_radius"] = _parse_floats(rest, 1, ln)[0]
            else:
                raise SceneParseError(f"unknown settings key {key!r}", ln)
        except (ValueError, IndexError) as exc:
            if isinstance(exc, SceneParseError):
                raise
            raise SceneParseError(f"bad settings field {key}: {exc}", ln) from exc
    first_line = min((ln for _, ln in kv.values()), default=1)
    try:
        if tf_nodes:
            ctx_kwargs["transfer_function"] = TransferFunction(nodes=tuple(tf_nodes))
        return RenderSettings(
            focus=FocusSettings(**foc_kwargs),
            context=ContextSettings(**ctx_kwargs),
            **top_kwargs,
        )
    except ValueError as exc:
        raise SceneParseError(str(exc), first_line) from exc


def _build_lens(kv, block_line) -> QuadricLens:
    required = ("id", "position", "orientation", "length", "k1", "k2")
    for name in required:
        if name not in kv:
            raise SceneParseError(f"lens block missing key {name!r}", block_line)
    try:
        lens_id = int(kv["id"][0][0])
        position = _parse_floats(kv["position"][0], 3, kv["position"][1])
        orientation = _parse_floats(kv["orientation"][0], 4, kv["orientation"][1])
        length = _parse_floats(kv["length"][0], 1, kv["length"][1])[0]
        k1 = _parse_floats(kv["k1"][0], 1, kv["k1"][1])[0]
        k2 = _parse_floats(kv["k2"][0], 1, kv["k2"][1])[0]
        locked = _parse_bool(kv["locked"][0][0], kv["locked"][1]) if "locked" in kv else False
        attribute = None
        if "attribute" in kv and kv["attribute"][0][0] != "none":
            attribute = kv["attribute"][0][0]
            if attribute not in FOCUS_ATTRIBUTES:
                raise SceneParseError(
                    f"unknown focus attribute {attribute!r}", kv["attribute"][1]
                )
        return QuadricLens(
            id=lens_id,
            pose=Pose(np.asarray(position), np.asarray(orientation)),
            length=length,
            k1=k1,
            k2=k2,
            locked=locked,
            attribute_override=attribute,
        )
    except SceneParseError:
        raise
    except ValueError as exc:
        raise SceneParseError(str(exc), block_line) from exc


def save_scene(state: SessionState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_scene(state))


def load_scene(path, load_volume: bool = True) -> SessionState:
    """Parse a scene file; volume paths resolve relative to the scene file."""
    with open(path, "r", encoding="utf-8") as fh:
        state = deserialize_scene(fh.read())
    if load_volume and state.volume_path is not None:
        vol = state.volume_path
        if not os.path.isabs(vol):
            vol = os.path.join(os.path.dirname(os.path.abspath(path)), vol)
        state = replace(state, grid=load_raw_volume(vol))
    return state


# ---------------------------------------------------------------------------
# Event log serialization
# ---------------------------------------------------------------------------

def format_event(event: InteractionEvent) -> str:
    fields = [str(event.timestamp), event.device]
    fields.extend(_f(c) for c in event.position)
    fields.extend(_f(c) for c in event.orientation)
    fields.extend(flag for flag in BUTTON_FLAGS if flag in event.buttons)
    return ",".join(fields)


def serialize_event_log(events) -> str:
    return "".join(format_event(e) + "\n" for e in events)


def parse_event_log(text: str) -> list[InteractionEvent]:
    """One event per line: timestamp,device,px,py,pz,qw,qx,qy,qz[,flag...].

    Timestamps must be non-decreasing per device; errors carry line numbers.
    """
    events: list[InteractionEvent] = []
    last_ts: dict[str, int] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 9:
            raise EventLogError(f"expected at least 9 fields, got {len(parts)}", ln)
        try:
            ts = int(parts[0])
            reals = [float(p) for p in parts[2:9]]
        except ValueError as exc:
            raise EventLogError(f"bad numeric field: {exc}", ln) from exc
        device = parts[1]
        flags = [p for p in parts[9:] if p]
        try:
            event = InteractionEvent(
                timestamp=ts,
                device=device,
                position=tuple(reals[0:3]),
                orientation=tuple(reals[3:7]),
                buttons=frozenset(flags),
            )
        except EventError as exc:
            raise EventLogError(str(exc), ln) from exc
        if device in last_ts and ts < last_ts[device]:
            raise EventLogError(
                f"timestamp {ts} decreases for device {device}", ln
            )
        last_ts[device] = ts
        events.append(event)
    return events
