"""Target-tracking evaluation: time-tracked ratio, id persistence,
localization error, and distance-binned error curves.

All metrics are computed over the annotated frames of a ground-truth
stream. A frame counts as matched when a target-flagged track lies
within a world-distance radius of the annotated target position; the
0.5 m default reflects the accuracy a guiding robot needs to keep a
person alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .exceptions import ConfigError, InputError
from .geometry import WorldPoint

DEFAULT_MATCH_RADIUS = 0.5  # meters


@dataclass(frozen=True)
class FrameMatch:
    frame: int
    matched: bool
    gt_pos: WorldPoint
    track_id: Optional[int] = None
    est_pos: Optional[WorldPoint] = None

    def __post_init__(self) -> None:
        if self.matched and (self.track_id is None or self.est_pos is None):
            raise ConfigError("matched frames need a track id and an estimate")

    @property
    def gt_range(self) -> float:
        return math.hypot(self.gt_pos.x, self.gt_pos.y)

    @property
    def error(self) -> Optional[float]:
        if not self.matched:
            return None
        return math.hypot(
            self.est_pos.x - self.gt_pos.x, self.est_pos.y - self.gt_pos.y
        )


@dataclass(frozen=True)
class ErrorBin:
    center: float  # meters
    mean_error: Optional[float]  # None when the bin has no matched frames
    count: int  # matched frames in the bin
    miss_rate: float  # unmatched fraction over all annotated frames in the bin


@dataclass
class EvalReport:
    m1: float
    m2: float
    m3: Optional[float]
    fragments: int
    matched_frames: int
    total_frames: int
    matches: list[FrameMatch] = field(repr=False, default_factory=list)
    error_vs_distance: list[ErrorBin] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "m1": self.m1,
            "m2": self.m2,
            "m3": self.m3,
            "fragments": self.fragments,
            "matched_frames": self.matched_frames,
            "total_frames": self.total_frames,
            "error_vs_distance": [
                {
                    "bin_center_m": b.center,
                    "mean_error_m": b.mean_error,
                    "count": b.count,
                    "miss_rate": b.miss_rate,
                }
                for b in self.error_vs_distance
            ],
        }


def _target_gt(record: dict) -> Optional[dict]:
    for agent in record.get("agents", []):
        if agent.get("is_target"):
            return agent
    return None


def match_frames(
    gt_records: Sequence[dict],
    track_records: Sequence[dict],
    match_radius: float = DEFAULT_MATCH_RADIUS,
) -> list[FrameMatch]:
    """Match each annotated ground-truth frame against the track stream.

    A frame is matched when a target-flagged track's (x, y) lies within
    match_radius of the annotated target; the nearest such track wins.
    Ground truth may be sparse, but every annotated frame must exist in
    the track stream.
    """
    if match_radius <= 0:
        raise ConfigError("match radius must be positive")
    tracks_by_frame = {int(r["frame"]): r for r in track_records}
    matches = []
    for record in gt_records:
        frame = int(record["frame"])
        if frame not in tracks_by_frame:
            raise InputError(f"annotated frame {frame} missing from track stream")
        target = _target_gt(record)
        if target is None:
            continue
        gt_pos = WorldPoint(float(target["x"]), float(target["y"]), 0.0)
        best = None
        for tr in tracks_by_frame[frame].get("tracks", []):
            if not tr.get("is_target"):
                continue
            d = math.hypot(tr["x"] - gt_pos.x, tr["y"] - gt_pos.y)
            if d <= match_radius and (best is None or d < best[0]):
                best = (d, tr)
        if best is None:
            matches.append(FrameMatch(frame=frame, matched=False, gt_pos=gt_pos))
        else:
            tr = best[1]
            matches.append(
                FrameMatch(
                    frame=frame,
                    matched=True,
                    gt_pos=gt_pos,
                    track_id=int(tr["id"]),
                    est_pos=WorldPoint(float(tr["x"]), float(tr["y"]), float(tr.get("h", 0.0))),
                )
            )
    return matches


def time_tracked_ratio(matches: Sequence[FrameMatch]) -> float:
    """Fraction of annotated frames on which the target is tracked."""
    if not matches:
        raise InputError("no annotated frames")
    return sum(1 for m in matches if m.matched) / len(matches)


def count_fragments(matches: Sequence[FrameMatch]) -> int:
    """Number of id runs over matched frames: 1 for an unbroken id,
    +1 for every change (re-acquisitions under a fresh id each count)."""
    ids = [m.track_id for m in matches if m.matched]
    if not ids:
        return 0
    return 1 + sum(1 for a, b in zip(ids, ids[1:]) if a != b)


def id_persistence(matches: Sequence[FrameMatch]) -> float:
    """1 / fragments; 0 when the target is never matched (the metric's
    ideal-case value is 1: a single id covering every matched frame)."""
    if not matches:
        raise InputError("no annotated frames")
    fragments = count_fragments(matches)
    return 1.0 / fragments if fragments else 0.0


def mean_position_error(matches: Sequence[FrameMatch]) -> float:
    """Mean ground-plane distance between estimate and annotation over
    matched frames."""
    errors = [m.error for m in matches if m.matched]
    if not errors:
        raise InputError("no matched frames; localization error undefined")
    return sum(errors) / len(errors)


def error_vs_distance(
    matches: Sequence[FrameMatch], bin_width: float = 1.0
) -> list[ErrorBin]:
    """Per-range-bin mean error, matched count, and miss rate."""
    if bin_width <= 0:
        raise ConfigError("bin width must be positive")
    bins: dict[int, list[FrameMatch]] = {}
    for m in matches:
        bins.setdefault(int(m.gt_range // bin_width), []).append(m)
    out = []
    for idx in sorted(bins):
        group = bins[idx]
        errors = [m.error for m in group if m.matched]
        out.append(
            ErrorBin(
                center=(idx + 0.5) * bin_width,
                mean_error=sum(errors) / len(errors) if errors else None,
                count=len(errors),
                miss_rate=1.0 - len(errors) / len(group),
            )
        )
    return out


def evaluate(
    gt_records: Sequence[dict],
    track_records: Sequence[dict],
    match_radius: float = DEFAULT_MATCH_RADIUS,
    bin_width: float = 1.0,
) -> EvalReport:
    """Full report over a ground-truth/track stream pair."""
    matches = match_frames(gt_records, track_records, match_radius)
    if not matches:
        raise InputError("ground truth contains no annotated target frames")
    matched = [m for m in matches if m.matched]
    return EvalReport(
        m1=time_tracked_ratio(matches),
        m2=id_persistence(matches),
        m3=mean_position_error(matches) if matched else None,
        fragments=count_fragments(matches),
        matched_frames=len(matched),
        total_frames=len(matches),
        matches=matches,
        error_vs_distance=error_vs_distance(matches, bin_width),
    )
