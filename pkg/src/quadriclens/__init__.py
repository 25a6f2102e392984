"""Focus+context volume rendering around deformable quadric lens surfaces.

Place second-order parametric patches inside a scalar volume, color them by
sampling the field along their normals (the focus), and raycast the
surrounding volume (the context) under three culling modes. Scenes are
scriptable through a deterministic event state machine and a small CLI.
"""

from .context import (
    CONTEXT_MODES,
    Camera,
    ContextSettings,
    DEFAULT_TRANSFER_FUNCTION,
    MODE_ALIASES,
    RenderError,
    SurfaceDepthSet,
    TransferFunction,
    camera_ray,
    canonical_mode,
    cast_context_ray,
    composite_front_to_back,
    cull_test,
    render_frame,
    surface_depth_set,
    write_image,
)
from .focus import (
    COLORMAPS,
    FOCUS_ATTRIBUTES,
    FocusSettings,
    apply_colormap,
    blend_samples,
    focus_fragment,
    focus_step,
    sample_along_normal,
    shade,
)
from .geometry import Pose, quat_from_axis_angle
from .lens import (
    HANDLE_KINDS,
    K_MAX,
    LENGTH_MAX,
    LENGTH_MIN,
    ControlPointHandle,
    LockedLensError,
    QuadricLens,
    SurfaceHit,
    classify,
    control_points,
    nearest_control_point,
    quadric_height,
    ray_intersect,
    set_curvature,
    surface_normal,
    tessellate,
)
from .session import (
    BUTTON_FLAGS,
    DEVICES,
    EventError,
    EventLogError,
    InteractionEvent,
    RenderSettings,
    SceneParseError,
    SessionState,
    apply_event,
    deserialize_scene,
    load_scene,
    new_session,
    parse_event_log,
    render_scene,
    replay_events,
    save_scene,
    serialize_event_log,
    serialize_scene,
)
from .volume import (
    QvolHeader,
    SyntheticSpec,
    UnsupportedEncodingError,
    VolumeFormatError,
    VolumeGrid,
    generate_synthetic_volume,
    gradient_magnitude,
    load_raw_volume,
    sample_trilinear,
    save_qvol,
    voxel_index,
)

__version__ = "1.0.0"
