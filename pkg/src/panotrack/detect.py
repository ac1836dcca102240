"""Viewport planning and detection fusion for panoramic frames.

Two strategies reduce the cost of running a skeleton detector on a
large panorama:

* tiles: split the image into n equal, slightly overlapping vertical
  tiles (the last and first tile overlap across the seam) and run the
  detector once per tile, fusing duplicates found in overlap zones.
* roi: run one pass on a downscaled full frame plus one full-resolution
  pass on a crop centered on the tracked target, again fusing
  duplicates. Without a target prediction only the downscaled pass
  runs.

Duplicates are identified by the containment score of the torso
bounding boxes: intersection area over the smaller box area. Boxes of
the same person seen from two viewports contain each other almost
exactly, while different people at different ranges produce boxes of
very different size and placement.

The detector itself is injected through the ``DetectorPort`` protocol.
Frames are opaque handles interpreted only by the port; skeleton
coordinates returned by the port are viewport-local at the processed
scale and are de-referenced to full-image coordinates here.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .exceptions import ConfigError, DegenerateSkeletonError, NoTargetError
from .geometry import CameraModel, ImagePoint, cyclic_interval_overlap

JOINT_NAMES = (
    "neck",
    "left_ankle",
    "right_ankle",
    "left_shoulder",
    "right_shoulder",
    "left_hip",
    "right_hip",
)

TORSO_JOINTS = ("neck", "left_shoulder", "right_shoulder", "left_hip", "right_hip")

DEFAULT_TILE_OVERLAP = 150  # px at 1920 width; scaled for other widths
DEFAULT_MERGE_THRESHOLD = 0.9
DEFAULT_TILE_FOV_BAND = 60.0  # tiles keep rows with |elevation| <= this


class Joint(tuple):
    """(ImagePoint, confidence) pair."""

    __slots__ = ()

    def __new__(cls, point: ImagePoint, confidence: float):
        if not 0.0 <= confidence <= 1.0:
            raise ConfigError(f"confidence must be in [0, 1], got {confidence}")
        return super().__new__(cls, (ImagePoint(*point), float(confidence)))

    @property
    def point(self) -> ImagePoint:
        return self[0]

    @property
    def confidence(self) -> float:
        return self[1]


@dataclass(frozen=True)
class Skeleton:
    """Named joints with pixel coordinates and confidences.

    Coordinates are in the full-image frame once de-referenced from a
    viewport; detector ports produce them viewport-local first.
    """

    joints: dict[str, Joint]

    def __post_init__(self) -> None:
        if not self.joints:
            raise DegenerateSkeletonError("skeleton has no joints")
        unknown = set(self.joints) - set(JOINT_NAMES)
        if unknown:
            raise ConfigError(f"unknown joint names: {sorted(unknown)}")

    def joint_point(self, name: str) -> Optional[ImagePoint]:
        j = self.joints.get(name)
        return j.point if j is not None else None

    @property
    def neck(self) -> Optional[ImagePoint]:
        return self.joint_point("neck")

    def ankle_midpoint(self, image_width: float) -> Optional[ImagePoint]:
        """Wrap-aware midpoint of the present ankle joints."""
        ankles = [
            self.joints[n].point
            for n in ("left_ankle", "right_ankle")
            if n in self.joints
        ]
        if not ankles:
            return None
        if len(ankles) == 1:
            return ankles[0]
        a, b = ankles
        dx = abs(a.x - b.x)
        bx = b.x + image_width if dx > image_width / 2 and b.x < a.x else b.x
        ax = a.x + image_width if dx > image_width / 2 and a.x < b.x else a.x
        return ImagePoint(((ax + bx) / 2.0) % image_width, (a.y + b.y) / 2.0)

    def joint_count(self) -> int:
        return len(self.joints)

    def mean_confidence(self) -> float:
        return sum(j.confidence for j in self.joints.values()) / len(self.joints)

    def reference_x(self) -> float:
        """Deterministic horizontal anchor: the neck column if present,
        otherwise the smallest joint column."""
        neck = self.neck
        if neck is not None:
            return neck.x
        return min(j.point.x for j in self.joints.values())


# A detection is a skeleton in full-image coordinates.
Detection = Skeleton


def skeleton(joints: dict[str, tuple[float, float] | tuple[float, float, float]]) -> Skeleton:
    """Convenience constructor: {name: (x, y)} or {name: (x, y, conf)}."""
    built = {}
    for name, value in joints.items():
        if len(value) == 2:
            x, y = value
            conf = 1.0
        else:
            x, y, conf = value
        built[name] = Joint(ImagePoint(x, y), conf)
    return Skeleton(built)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in full-image coordinates; x is cyclic."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ConfigError(f"box sides must be positive, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Viewport:
    """Sub-rectangle of the panorama processed at a given scale.

    origin_x is cyclic; a viewport whose x-range extends past the image
    width wraps around the seam. ``scale`` is the factor between full
    resolution and the resolution actually fed to the detector, so the
    processed viewport measures (width * scale) x (height * scale).
    """

    origin_x: float
    origin_y: float
    width: float
    height: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("viewport sides must be positive")
        if not 0.0 < self.scale <= 1.0:
            raise ConfigError(f"scale must be in (0, 1], got {self.scale}")

    def contains_column(self, x: float, image_width: float) -> bool:
        offset = (x - self.origin_x) % image_width
        return offset < self.width


@dataclass(frozen=True)
class TileLayout:
    """Ordered viewports covering the panorama; cyclically adjacent
    viewports share ``overlap`` pixels in x."""

    viewports: tuple[Viewport, ...]
    overlap: float
    n_tiles: int


class DetectorPort(Protocol):
    """Injected skeleton detector.

    ``detect`` receives an opaque frame handle plus the viewport to
    process and returns skeletons in viewport-local coordinates at the
    processed scale. Implementations must be deterministic for a fixed
    (frame, viewport, seed) and tolerate concurrent calls on the same
    frame.
    """

    def detect(self, frame, viewport: Viewport) -> list[Skeleton]: ...


@dataclass
class DetectionResult:
    """Fused detections plus any per-viewport detector failures."""

    detections: list[Detection]
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.errors)

    def __iter__(self):
        return iter(self.detections)

    def __len__(self) -> int:
        return len(self.detections)


def default_row_range(cam: CameraModel, fov_band: float = DEFAULT_TILE_FOV_BAND) -> tuple[float, float]:
    """Row interval keeping elevations within +-fov_band degrees."""
    top = (90.0 - fov_band) / cam.deg_per_px_y
    bottom = (90.0 + fov_band) / cam.deg_per_px_y
    return (top, min(bottom, float(cam.image_height)))


def build_tiles(
    cam: CameraModel,
    n_tiles: int = 3,
    overlap: Optional[float] = None,
    row_range: Optional[tuple[float, float]] = None,
) -> TileLayout:
    """Plan n equal vertical tiles with cyclic pairwise overlap.

    Tile i spans columns [i * W/n, (i + 1) * W/n + overlap); the last
    tile wraps past the seam so that the (last, first) pair overlaps by
    the same amount as interior pairs. Rows are clipped to row_range
    (default: the +-60 degree elevation band, where people can appear).
    """
    if n_tiles < 2:
        raise ConfigError(f"need at least 2 tiles, got {n_tiles}")
    if overlap is None:
        overlap = DEFAULT_TILE_OVERLAP * cam.image_width / 1920.0
    if overlap < 0 or overlap >= cam.image_width / n_tiles:
        raise ConfigError(
            f"overlap {overlap} invalid for width {cam.image_width} and "
            f"{n_tiles} tiles"
        )
    if row_range is None:
        row_range = default_row_range(cam)
    y0, y1 = row_range
    if not 0 <= y0 < y1 <= cam.image_height:
        raise ConfigError(f"row range {row_range} outside image")
    step = cam.image_width / n_tiles
    viewports = tuple(
        Viewport(
            origin_x=(i * step) % cam.image_width,
            origin_y=y0,
            width=step + overlap,
            height=y1 - y0,
            scale=1.0,
        )
        for i in range(n_tiles)
    )
    return TileLayout(viewports=viewports, overlap=overlap, n_tiles=n_tiles)


def torso_bbox(sk: Skeleton, image_width: float) -> BoundingBox:
    """Tight wrap-aware box over the present neck/shoulder/hip joints.

    Requires the neck plus at least one shoulder or hip. When the joint
    columns straddle the seam (x-spread over half the width), columns
    left of the midline are unwrapped by +width before taking min/max.
    Degenerate extents are clamped to 1 px.
    """
    pts = [sk.joints[n].point for n in TORSO_JOINTS if n in sk.joints]
    if "neck" not in sk.joints or len(pts) < 2:
        raise DegenerateSkeletonError(
            "torso box needs the neck and at least one shoulder or hip"
        )
    xs = [p.x % image_width for p in pts]
    if max(xs) - min(xs) > image_width / 2:
        xs = [x + image_width if x < image_width / 2 else x for x in xs]
    ys = [p.y for p in pts]
    w = max(max(xs) - min(xs), 1.0)
    h = max(max(ys) - min(ys), 1.0)
    return BoundingBox(x=min(xs) % image_width, y=min(ys), w=w, h=h)


def merge_score(b1: BoundingBox, b2: BoundingBox, image_width: float) -> float:
    """Containment score: intersection area over the smaller box area.

    1.0 whenever one box contains the other; 0.0 for disjoint boxes.
    Horizontal extents intersect cyclically.
    """
    ix = cyclic_interval_overlap(b1.x, b1.w, b2.x, b2.w, image_width)
    iy = max(0.0, min(b1.y + b1.h, b2.y + b2.h) - max(b1.y, b2.y))
    inter = ix * iy
    return inter / min(b1.area, b2.area)


def _adjacent_pairs(n: int) -> set[frozenset[int]]:
    return {frozenset((i, (i + 1) % n)) for i in range(n)} - {frozenset((0,))}


def fuse_duplicates(
    dets: Sequence[tuple[Skeleton, int]],
    layout: TileLayout,
    sigma1: float = DEFAULT_MERGE_THRESHOLD,
    image_width: Optional[float] = None,
) -> list[Skeleton]:
    """Collapse duplicate detections from cyclically adjacent viewports.

    Args:
        dets: (skeleton, source viewport index) pairs with skeletons
            already in full-image coordinates.
        layout: the viewport layout the detections came from; only the
            cyclic adjacency of its viewports is used.
        sigma1: containment-score threshold at or above which two boxes
            are considered the same person.
        image_width: panorama width; defaults to the extent covered by
            the layout (first viewport origin + per-tile step), and must
            be supplied when the layout does not span the panorama.

    Skeleton pairs whose torso boxes score >= sigma1 are grouped
    transitively (union-find) and each group keeps its most complete
    skeleton: most present joints, ties broken by higher mean
    confidence, then by (viewport index, anchor column) for
    determinism. Output is ordered by (viewport index, anchor column).
    """
    if image_width is None:
        vp = layout.viewports[0]
        image_width = (vp.width - layout.overlap) * layout.n_tiles
    items = list(dets)
    boxes: list[Optional[BoundingBox]] = []
    for sk, _ in items:
        try:
            boxes.append(torso_bbox(sk, image_width))
        except DegenerateSkeletonError:
            boxes.append(None)

    parent = list(range(len(items)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    allowed = _adjacent_pairs(len(layout.viewports))
    for i in range(len(items)):
        if boxes[i] is None:
            continue
        for j in range(i + 1, len(items)):
            if boxes[j] is None:
                continue
            vi, vj = items[i][1], items[j][1]
            if vi == vj or frozenset((vi, vj)) not in allowed:
                continue
            if merge_score(boxes[i], boxes[j], image_width) >= sigma1:
                union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(len(items)):
        groups.setdefault(find(i), []).append(i)

    def quality(i: int):
        sk, vp_idx = items[i]
        return (sk.joint_count(), sk.mean_confidence(), -vp_idx, -sk.reference_x())

    survivors = [max(g, key=quality) for g in groups.values()]
    survivors.sort(key=lambda i: (items[i][1], items[i][0].reference_x()))
    return [items[i][0] for i in survivors]


def dereference(sk: Skeleton, viewport: Viewport, image_width: float) -> Skeleton:
    """Convert viewport-local joint coordinates (at the processed
    scale) to full-image coordinates."""
    joints = {}
    for name, j in sk.joints.items():
        x = (viewport.origin_x + j.point.x / viewport.scale) % image_width
        y = viewport.origin_y + j.point.y / viewport.scale
        joints[name] = Joint(ImagePoint(x, y), j.confidence)
    return Skeleton(joints)


def run_tiles(
    frame,
    detector: DetectorPort,
    layout: TileLayout,
    cam: CameraModel,
    sigma1: float = DEFAULT_MERGE_THRESHOLD,
    parallel: bool = True,
) -> DetectionResult:
    """Run the detector once per tile and fuse overlap duplicates.

    Tiles are dispatched concurrently when ``parallel`` is set; results
    are always collected in tile order, so the output is independent of
    completion order. A failing tile is reported in ``errors`` while the
    remaining tiles' detections are still fused and returned.
    """
    n = len(layout.viewports)
    results: list[list[Skeleton]] = [[] for _ in range(n)]
    errors: dict[int, str] = {}

    def work(idx: int) -> list[Skeleton]:
        return detector.detect(frame, layout.viewports[idx])

    if parallel and n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            futures = [pool.submit(work, i) for i in range(n)]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except Exception as exc:  # noqa: BLE001 - surfaced per tile
                errors[i] = f"{type(exc).__name__}: {exc}"
    else:
        for i in range(n):
            try:
                results[i] = work(i)
            except Exception as exc:  # noqa: BLE001
                errors[i] = f"{type(exc).__name__}: {exc}"

    tagged = [
        (dereference(sk, layout.viewports[i], cam.image_width), i)
        for i in range(n)
        for sk in results[i]
    ]
    fused = fuse_duplicates(tagged, layout, sigma1, image_width=cam.image_width)
    return DetectionResult(detections=fused, errors=errors)


@dataclass(frozen=True)
class RoiConfig:
    """Sizes for the roi strategy: the full-resolution crop and the
    processed size of the downscaled full-frame pass."""

    roi_width: int = 576
    roi_height: int = 192
    full_width: int = 640
    full_height: int = 320
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD

    def __post_init__(self) -> None:
        if min(self.roi_width, self.roi_height, self.full_width, self.full_height) <= 0:
            raise ConfigError("roi/full sizes must be positive")
        if not 0.0 < self.merge_threshold <= 1.0:
            raise ConfigError("merge threshold must be in (0, 1]")


def fullframe_viewport(cam: CameraModel, cfg: RoiConfig) -> Viewport:
    scale = cfg.full_width / cam.image_width
    if scale > 1.0:
        raise ConfigError("processed full-frame size exceeds the native size")
    return Viewport(
        origin_x=0.0,
        origin_y=0.0,
        width=float(cam.image_width),
        height=float(cam.image_height),
        scale=scale,
    )


def roi_viewport(center: ImagePoint, cam: CameraModel, cfg: RoiConfig) -> Viewport:
    """Full-resolution crop centered (wrap-aware in x, clamped in y) on
    the predicted target position."""
    ox = (center.x - cfg.roi_width / 2.0) % cam.image_width
    oy = min(max(center.y - cfg.roi_height / 2.0, 0.0), cam.image_height - cfg.roi_height)
    return Viewport(
        origin_x=ox,
        origin_y=oy,
        width=float(cfg.roi_width),
        height=float(cfg.roi_height),
        scale=1.0,
    )


def run_roi(
    frame,
    detector: DetectorPort,
    target_prediction: Optional[ImagePoint],
    cam: CameraModel,
    cfg: RoiConfig = RoiConfig(),
) -> DetectionResult:
    """Downscaled full-frame pass plus a full-resolution crop on the
    predicted target, with duplicate fusion between the two.

    Without a target prediction (first frame, or target lost) only the
    downscaled pass runs.
    """
    full_vp = fullframe_viewport(cam, cfg)
    viewports = [full_vp]
    if target_prediction is not None:
        viewports.append(roi_viewport(target_prediction, cam, cfg))

    results: list[list[Skeleton]] = [[] for _ in viewports]
    errors: dict[int, str] = {}
    for i, vp in enumerate(viewports):
        try:
            results[i] = detector.detect(frame, vp)
        except Exception as exc:  # noqa: BLE001
            errors[i] = f"{type(exc).__name__}: {exc}"

    tagged = [
        (dereference(sk, viewports[i], cam.image_width), i)
        for i in range(len(viewports))
        for sk in results[i]
    ]
    if len(viewports) == 1:
        return DetectionResult(detections=[sk for sk, _ in tagged], errors=errors)
    pseudo = TileLayout(viewports=tuple(viewports), overlap=0.0, n_tiles=len(viewports))
    fused = fuse_duplicates(
        tagged, pseudo, cfg.merge_threshold, image_width=cam.image_width
    )
    return DetectionResult(detections=fused, errors=errors)


def select_target(dets: Sequence[Detection], image_width: float) -> Detection:
    """Pick the detection with the largest torso box (the nearest,
    most prominent person); ties go to the smallest anchor column.
    Detections without a valid torso box rank last (area 0)."""
    if not dets:
        raise NoTargetError("no detections to promote")

    def key(sk: Skeleton):
        try:
            area = torso_bbox(sk, image_width).area
        except DegenerateSkeletonError:
            area = 0.0
        return (-area, sk.reference_x())

    return min(dets, key=key)
