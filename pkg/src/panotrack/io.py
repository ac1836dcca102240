"""File formats: detections / tracks / ground-truth JSONL, report JSON,
and CSV curves.

Detections JSONL is the plug-in boundary for a real skeleton detector:
one object per frame, `{"frame": int, "t": seconds, "detections":
[{"joints": {name: [x, y, conf]}}]}` with coordinates in the full-image
frame. Tracks JSONL mirrors the tracker output: `{"frame", "t",
"tracks": [{"id", "x", "y", "h", "img_x", "img_y", "status",
"is_target"}]}`.
"""

from __future__ import annotations

import json
from typing import Iterable, Iterator, Sequence

from .detect import Skeleton, skeleton
from .exceptions import InputError
from .geometry import CameraModel
from .metrics import ErrorBin, EvalReport
from .tracker import Track, project_to_image


def read_jsonl(path: str) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc


def write_jsonl(path: str, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def detections_record(frame: int, t: float, dets: Sequence[Skeleton]) -> dict:
    return {
        "frame": frame,
        "t": t,
        "detections": [
            {
                "joints": {
                    name: [j.point.x, j.point.y, j.confidence]
                    for name, j in sorted(sk.joints.items())
                }
            }
            for sk in dets
        ],
    }


def detections_from_record(record: dict) -> list[Skeleton]:
    try:
        return [
            skeleton({name: tuple(v) for name, v in d["joints"].items()})
            for d in record["detections"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed detection record: {exc}") from exc


def tracks_record(frame: int, t: float, tracks: Sequence[Track], cam: CameraModel) -> dict:
    out = []
    for tr in tracks:
        img = project_to_image(tr.state, cam).neck
        out.append(
            {
                "id": tr.id,
                "x": tr.mean[0],
                "y": tr.mean[1],
                "h": tr.mean[4],
                "img_x": img.x,
                "img_y": img.y,
                "status": tr.status.value,
                "is_target": tr.is_target,
            }
        )
    return {"frame": frame, "t": t, "tracks": out}


def write_report(path: str, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def write_error_curve_csv(path: str, bins: Sequence[ErrorBin]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_center_m,mean_error_m,count,miss_rate\n")
        for b in bins:
            mean = "" if b.mean_error is None else repr(b.mean_error)
            fh.write(f"{b.center},{mean},{b.count},{b.miss_rate}\n")


def write_sensitivity_csv(
    path: str, rows: Sequence[tuple[float, float, float]]
) -> None:
    """rows: (distance_m, pixel_error_px, localization_error_m)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("distance_m,pixel_error_px,error_m\n")
        for d, px, err in rows:
            fh.write(f"{d},{px},{err}\n")
