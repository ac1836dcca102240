"""People detection and tracking for equirectangular panoramic video.

The package splits into:

* ``geometry``: the equirectangular camera model and wrap-aware image math
* ``detect``: viewport strategies (tiles / roi) and duplicate fusion
* ``tracker``: wrap-corrected UKF tracking with global-nearest-neighbour
  association and target maintenance
* ``sim``: synthetic scenarios acting as detector and ground-truth oracle
* ``metrics``: target-tracking evaluation and error-vs-distance curves
* ``pipeline`` / ``cli``: streaming runs and the command-line interface
"""

from .detect import (
    BoundingBox,
    DetectionResult,
    DetectorPort,
    RoiConfig,
    Skeleton,
    TileLayout,
    Viewport,
    build_tiles,
    fuse_duplicates,
    merge_score,
    run_roi,
    run_tiles,
    select_target,
    skeleton,
    torso_bbox,
)
from .exceptions import (
    AboveHorizonError,
    ConfigError,
    DegenerateSkeletonError,
    FilterDivergenceError,
    GeometryError,
    InputError,
    NoTargetError,
    PanotrackError,
)
from .geometry import (
    CameraModel,
    ImagePoint,
    PolarDirection,
    WorldPoint,
    estimate_height,
    ground_range,
    image_to_polar,
    localization_sensitivity,
    localize,
    signed_wrap_diff,
    world_to_image,
    wrap_distance,
)
from .metrics import EvalReport, FrameMatch, evaluate, match_frames
from .sim import (
    Agent,
    Body,
    CircleTrajectory,
    DetectabilityConfig,
    NoiseModel,
    Scenario,
    SyntheticDetector,
    WaypointTrajectory,
    load_scenario,
    run_scenario,
)
from .tracker import (
    FullBodyMeasurement,
    NeckOnlyMeasurement,
    PanoTracker,
    Track,
    TrackerConfig,
    TrackState,
    TrackStatus,
    UkfParams,
    associate,
    predict,
    project_to_image,
    update,
    wrap_correct,
)

__version__ = "0.1.0"
