"""Frame-by-frame wiring of a viewport strategy and the tracker.

The pipeline streams: each frame is simulated (or read), run through
the chosen detection strategy, and fed to the tracker; one detections
record and one tracks record are emitted per frame. Memory use is
independent of the stream length.

Strategies:
    tiles      overlapping vertical tiles, concurrent dispatch, fusion
    roi        downscaled full frame + full-resolution crop on the target
    fullframe  downscaled full frame only (the naive baseline)
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .detect import (
    DetectionResult,
    DetectorPort,
    RoiConfig,
    TileLayout,
    build_tiles,
    run_roi,
    run_tiles,
)
from .exceptions import ConfigError
from .geometry import CameraModel, ImagePoint
from .io import detections_record, tracks_record
from .sim import Scenario, SyntheticDetector, run_scenario
from .tracker import PanoTracker, TrackerConfig, TrackStatus, project_to_image

logger = logging.getLogger(__name__)

STRATEGIES = ("tiles", "roi", "fullframe")


@dataclass(frozen=True)
class TilesConfig:
    n_tiles: int = 3
    overlap: Optional[float] = None  # None: 150 px scaled to the image width
    merge_threshold: float = 0.9
    row_range: Optional[tuple[float, float]] = None
    parallel: bool = True


@dataclass
class FrameOutput:
    frame: int
    t: float
    detections: dict
    tracks: dict
    latency_s: float
    partial: bool


class StrategyRunner:
    """Applies one detection strategy per frame and tracks the target
    prediction the roi strategy needs."""

    def __init__(
        self,
        strategy: str,
        cam: CameraModel,
        detector: DetectorPort,
        tiles_cfg: TilesConfig = TilesConfig(),
        roi_cfg: RoiConfig = RoiConfig(),
    ) -> None:
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        self.strategy = strategy
        self.cam = cam
        self.detector = detector
        self.tiles_cfg = tiles_cfg
        self.roi_cfg = roi_cfg
        self.layout: Optional[TileLayout] = None
        if strategy == "tiles":
            self.layout = build_tiles(
                cam,
                n_tiles=tiles_cfg.n_tiles,
                overlap=tiles_cfg.overlap,
                row_range=tiles_cfg.row_range,
            )

    def detect(self, frame, target_prediction: Optional[ImagePoint]) -> DetectionResult:
        if self.strategy == "tiles":
            return run_tiles(
                frame,
                self.detector,
                self.layout,
                self.cam,
                sigma1=self.tiles_cfg.merge_threshold,
                parallel=self.tiles_cfg.parallel,
            )
        if self.strategy == "roi":
            return run_roi(frame, self.detector, target_prediction, self.cam, self.roi_cfg)
        return run_roi(frame, self.detector, None, self.cam, self.roi_cfg)


def target_prediction(tracker: PanoTracker, cam: CameraModel) -> Optional[ImagePoint]:
    """Image position at which the roi strategy should center its crop:
    the current target track's projected neck."""
    for track in tracker.tracks:
        if track.is_target and track.status != TrackStatus.LOST:
            return project_to_image(track.state, cam).neck
    return None


def run_simulated(
    scenario: Scenario,
    strategy: str,
    tracker_cfg: TrackerConfig = TrackerConfig(),
    tiles_cfg: TilesConfig = TilesConfig(),
    roi_cfg: RoiConfig = RoiConfig(),
    seed: Optional[int] = None,
) -> Iterator[tuple[FrameOutput, Optional[dict]]]:
    """Run strategy + tracker over a scenario, yielding per-frame
    outputs paired with the ground-truth record (None off-schedule)."""
    if seed is not None and seed != scenario.seed:
        scenario = dataclass_replace_seed(scenario, seed)
    cam = scenario.cam
    detector = SyntheticDetector.for_scenario(scenario)
    runner = StrategyRunner(strategy, cam, detector, tiles_cfg, roi_cfg)
    tracker = PanoTracker(cam, tracker_cfg)
    dt = 1.0 / scenario.fps
    prediction = None
    for snapshot, gt in run_scenario(scenario):
        start = time.perf_counter()
        result = runner.detect(snapshot, prediction)
        tracks = tracker.step(result.detections, dt)
        latency = time.perf_counter() - start
        prediction = target_prediction(tracker, cam)
        yield (
            FrameOutput(
                frame=snapshot.index,
                t=snapshot.t,
                detections=detections_record(snapshot.index, snapshot.t, result.detections),
                tracks=tracks_record(snapshot.index, snapshot.t, tracks, cam),
                latency_s=latency,
                partial=result.partial,
            ),
            gt,
        )


def run_offline(
    detection_records: Iterator[dict],
    cam: CameraModel,
    tracker_cfg: TrackerConfig = TrackerConfig(),
    fallback_fps: float = 30.0,
) -> Iterator[FrameOutput]:
    """Track over an externally produced detections JSONL stream."""
    from .io import detections_from_record

    tracker = PanoTracker(cam, tracker_cfg)
    prev_t: Optional[float] = None
    for record in detection_records:
        frame = int(record["frame"])
        t = float(record["t"])
        dt = (t - prev_t) if prev_t is not None and t > prev_t else 1.0 / fallback_fps
        prev_t = t
        start = time.perf_counter()
        dets = detections_from_record(record)
        tracks = tracker.step(dets, dt)
        latency = time.perf_counter() - start
        yield FrameOutput(
            frame=frame,
            t=t,
            detections=detections_record(frame, t, dets),
            tracks=tracks_record(frame, t, tracks, cam),
            latency_s=latency,
            partial=False,
        )


def dataclass_replace_seed(scenario: Scenario, seed: int) -> Scenario:
    import dataclasses

    return dataclasses.replace(scenario, seed=seed)


def log_latency_percentiles(latencies_s: Sequence[float]) -> None:
    if not latencies_s:
        return
    import numpy as np

    ms = np.asarray(latencies_s) * 1000.0
    logger.info(
        "per-frame latency ms: p50=%.3f p90=%.3f p99=%.3f",
        float(np.percentile(ms, 50)),
        float(np.percentile(ms, 90)),
        float(np.percentile(ms, 99)),
    )
