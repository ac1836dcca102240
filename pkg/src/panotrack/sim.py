"""Synthetic scenes: scripted agents projected through the camera model
into noisy skeleton detections, with ground truth for evaluation.

The simulator plays the role of both the recorded video and the neural
skeleton detector. A frame is a world snapshot, not a rasterized image:
the synthetic detector projects the agents visible in a viewport into
skeletons, applies a resolution-dependent detectability cutoff (people
whose projected body height at the processed scale is too small are
missed, reproducing the way small far-away people disappear from
downscaled passes), optionally occludes agents hidden behind nearer
ones, and perturbs joints with Gaussian pixel noise.

Randomness is drawn from a substream keyed by (seed, frame index,
viewport), so concurrent tile dispatch cannot reorder it.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

from .detect import Joint, Skeleton, Viewport
from .exceptions import ConfigError, GeometryError, InputError
from .geometry import (
    CameraModel,
    ImagePoint,
    WorldPoint,
    cyclic_interval_overlap,
    world_to_image,
)

MIN_AGENT_RANGE = 0.3  # m; agents closer to the camera axis are degenerate


@dataclass(frozen=True)
class CircleTrajectory:
    """Constant-speed circular path around ``center``."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 2.0
    angular_speed: float = 30.0  # deg/s, positive = counterclockwise
    start_angle: float = 0.0  # deg

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ConfigError("circle radius must be positive")

    def pose(self, t: float) -> tuple[float, float, float]:
        ang = math.radians(self.start_angle + self.angular_speed * t)
        x = self.center[0] + self.radius * math.cos(ang)
        y = self.center[1] + self.radius * math.sin(ang)
        heading = math.degrees(ang) + math.copysign(90.0, self.angular_speed)
        return x, y, heading


@dataclass(frozen=True)
class WaypointTrajectory:
    """Constant-speed polyline; the agent holds the last waypoint after
    reaching it. A single waypoint is a stationary agent."""

    points: tuple[tuple[float, float], ...]
    speed: float = 1.0  # m/s

    def __post_init__(self) -> None:
        if not self.points:
            raise ConfigError("waypoint trajectory needs at least one point")
        if self.speed <= 0:
            raise ConfigError("speed must be positive")

    def pose(self, t: float) -> tuple[float, float, float]:
        pts = self.points
        if len(pts) == 1:
            return pts[0][0], pts[0][1], 0.0
        remaining = self.speed * t
        heading = 0.0
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            seg = math.hypot(x1 - x0, y1 - y0)
            if seg > 0:
                heading = math.degrees(math.atan2(y1 - y0, x1 - x0))
            if remaining <= seg or seg == 0:
                frac = remaining / seg if seg > 0 else 0.0
                return x0 + frac * (x1 - x0), y0 + frac * (y1 - y0), heading
            remaining -= seg
        return pts[-1][0], pts[-1][1], heading


Trajectory = Union[CircleTrajectory, WaypointTrajectory]


@dataclass(frozen=True)
class Body:
    """Simplified body dimensions used for joint placement."""

    height: float = 1.7
    ankle_height: float = 0.1
    shoulder_half_width: float = 0.2
    hip_half_width: float = 0.15
    neck_drop: float = 0.25  # m below the top of the head

    def __post_init__(self) -> None:
        if not 1.4 <= self.height <= 2.1:
            raise ConfigError(f"height must be in [1.4, 2.1] m, got {self.height}")
        if min(self.ankle_height, self.shoulder_half_width, self.hip_half_width, self.neck_drop) < 0:
            raise ConfigError("body dimensions must be non-negative")


@dataclass(frozen=True)
class Agent:
    id: int
    trajectory: Trajectory
    body: Body = Body()


@dataclass(frozen=True)
class NoiseModel:
    """Per-joint detector noise, in pixels at the processed resolution
    of the viewport (a detector is about as precise as the image it
    actually sees, so full-frame downscaled passes are proportionally
    noisier in full-image coordinates)."""

    joint_sigma: float = 0.0
    miss_prob: float = 0.0
    occlusion_enabled: bool = False

    def __post_init__(self) -> None:
        if self.joint_sigma < 0:
            raise ConfigError("joint sigma must be >= 0")
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ConfigError("miss probability must be in [0, 1]")


@dataclass(frozen=True)
class DetectabilityConfig:
    """Minimum projected body height, in pixels at the viewport's
    processed resolution, for an agent to be detectable. The default of
    48 is calibrated so that a 1.7 m person seen by a 1.2 m camera
    becomes undetectable between 3 and 4 m on a 640x320 full-frame pass
    while remaining detectable at full resolution well past 8 m."""

    min_person_pixels: float = 48.0

    def __post_init__(self) -> None:
        if self.min_person_pixels <= 0:
            raise ConfigError("min_person_pixels must be positive")


@dataclass(frozen=True)
class Scenario:
    cam: CameraModel
    fps: float
    duration: float
    agents: tuple[Agent, ...]
    noise: NoiseModel = NoiseModel()
    detect_cfg: DetectabilityConfig = DetectabilityConfig()
    seed: int = 0
    camera_trajectory: Optional[Trajectory] = None
    annotate_every: int = 1
    annotate_from: int = 0

    def __post_init__(self) -> None:
        if self.fps <= 0 or self.duration <= 0:
            raise ConfigError("fps and duration must be positive")
        if not self.agents:
            raise ConfigError("scenario needs at least one agent")
        if self.annotate_every < 1 or self.annotate_from < 0:
            raise ConfigError("invalid annotation schedule")
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ConfigError("agent ids must be unique")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))


@dataclass(frozen=True)
class AgentState:
    """An agent's pose for one frame, in the camera-centered frame."""

    agent: Agent
    x: float
    y: float
    heading: float  # deg

    @property
    def ground_range(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class FrameSnapshot:
    """Opaque frame handle consumed by the synthetic detector."""

    index: int
    t: float
    cam: CameraModel
    agents: tuple[AgentState, ...]


def project_agent(state: AgentState, cam: CameraModel) -> Skeleton:
    """Noise-free skeleton of an agent.

    The neck sits on the body axis; paired joints are offset
    symmetrically in azimuth at the same ground range (half-widths
    measured sideways relative to the line of sight). Equal-range
    placement keeps the pixel midpoint of each joint pair an exact
    inverse of the axis projection, so localizing the ankle midpoint
    recovers the agent position without a stance-geometry bias.
    """
    if state.ground_range <= MIN_AGENT_RANGE:
        raise GeometryError(
            f"agent {state.agent.id} at range {state.ground_range:.3f} m is "
            "under the camera"
        )
    body = state.agent.body
    rho = state.ground_range
    theta = math.atan2(state.y, state.x)

    neck_z = body.height - body.neck_drop
    shoulder_z = neck_z
    hip_z = 0.55 * body.height

    def at(lateral: float, z: float) -> ImagePoint:
        ang = theta + math.atan2(lateral, rho)
        return world_to_image(
            WorldPoint(rho * math.cos(ang), rho * math.sin(ang), z), cam
        )

    joints = {
        "neck": Joint(at(0.0, neck_z), 1.0),
        "left_shoulder": Joint(at(body.shoulder_half_width, shoulder_z), 1.0),
        "right_shoulder": Joint(at(-body.shoulder_half_width, shoulder_z), 1.0),
        "left_hip": Joint(at(body.hip_half_width, hip_z), 1.0),
        "right_hip": Joint(at(-body.hip_half_width, hip_z), 1.0),
        "left_ankle": Joint(at(body.hip_half_width, body.ankle_height), 1.0),
        "right_ankle": Joint(at(-body.hip_half_width, body.ankle_height), 1.0),
    }
    return Skeleton(joints)


def projected_body_height_px(state: AgentState, cam: CameraModel) -> float:
    """Full-resolution pixel height of the agent's body (ground to top
    of head) at its current range."""
    d = state.ground_range
    top = math.degrees(math.atan2(state.agent.body.height - cam.mount_height, d))
    bottom = math.degrees(math.atan2(-cam.mount_height, d))
    return (top - bottom) / cam.deg_per_px_y


def _azimuth_interval(state: AgentState) -> tuple[float, float]:
    """(start_deg, length_deg) of the agent's angular footprint."""
    theta = math.degrees(math.atan2(state.y, state.x))
    half = math.degrees(
        math.atan2(state.agent.body.shoulder_half_width, state.ground_range)
    )
    return theta - half, 2.0 * half


def _occluded(state: AgentState, others: tuple[AgentState, ...]) -> bool:
    start, length = _azimuth_interval(state)
    if length <= 0:
        return False
    for other in others:
        if other.agent.id == state.agent.id:
            continue
        if other.ground_range >= state.ground_range:
            continue
        o_start, o_length = _azimuth_interval(other)
        overlap = cyclic_interval_overlap(start, length, o_start, o_length, 360.0)
        if overlap > 0.5 * length:
            return True
    return False


def synthetic_detect(
    viewport: Viewport,
    snapshot: FrameSnapshot,
    noise: NoiseModel,
    detect_cfg: DetectabilityConfig,
    rng: np.random.Generator,
) -> list[Skeleton]:
    """Detect agents visible in a viewport, in viewport-local processed
    coordinates.

    An agent is included iff its neck column lies inside the viewport
    (wrap-aware), its projected body height at the processed scale
    reaches min_person_pixels, and it is not occluded by a strictly
    nearer agent covering more than half of its angular footprint (when
    occlusion is enabled). Surviving joints get isotropic Gaussian
    noise; joints drop out with miss_prob, the two ankles jointly.
    """
    cam = snapshot.cam
    out = []
    for state in snapshot.agents:
        sk = project_agent(state, cam)
        if not viewport.contains_column(sk.neck.x, cam.image_width):
            continue
        if projected_body_height_px(state, cam) * viewport.scale < detect_cfg.min_person_pixels:
            continue
        if noise.occlusion_enabled and _occluded(state, snapshot.agents):
            continue

        drop_ankles = rng.random() < noise.miss_prob
        local = {}
        for name in sorted(sk.joints):
            j = sk.joints[name]
            if name in ("left_ankle", "right_ankle"):
                dropped = drop_ankles
            else:
                dropped = rng.random() < noise.miss_prob
            nx, ny = rng.normal(0.0, noise.joint_sigma, 2) if noise.joint_sigma > 0 else (0.0, 0.0)
            if dropped:
                continue
            lx = ((j.point.x - viewport.origin_x) % cam.image_width) * viewport.scale + nx
            ly = (j.point.y - viewport.origin_y) * viewport.scale + ny
            local[name] = Joint(ImagePoint(lx, ly), 1.0)
        if local:
            out.append(Skeleton(local))
    return out


def _viewport_key(viewport: Viewport) -> int:
    packed = struct.pack(
        "<5d",
        viewport.origin_x,
        viewport.origin_y,
        viewport.width,
        viewport.height,
        viewport.scale,
    )
    return zlib.crc32(packed)


class SyntheticDetector:
    """DetectorPort backed by the scenario's world snapshots.

    The random substream for each call is derived from (seed, frame
    index, viewport geometry), making the detector deterministic and
    safe for concurrent per-tile dispatch.
    """

    def __init__(
        self,
        noise: NoiseModel,
        detect_cfg: DetectabilityConfig,
        seed: int,
    ) -> None:
        self.noise = noise
        self.detect_cfg = detect_cfg
        self.seed = seed

    def detect(self, frame: FrameSnapshot, viewport: Viewport) -> list[Skeleton]:
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, frame.index, _viewport_key(viewport)])
        )
        return synthetic_detect(viewport, frame, self.noise, self.detect_cfg, rng)

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "SyntheticDetector":
        return cls(scenario.noise, scenario.detect_cfg, scenario.seed)


def agent_states(scenario: Scenario, t: float) -> tuple[AgentState, ...]:
    """Agent poses at time t, offset into the camera frame when the
    scenario scripts a camera trajectory."""
    cam_x = cam_y = 0.0
    if scenario.camera_trajectory is not None:
        cam_x, cam_y, _ = scenario.camera_trajectory.pose(t)
    states = []
    for agent in scenario.agents:
        x, y, heading = agent.trajectory.pose(t)
        states.append(AgentState(agent=agent, x=x - cam_x, y=y - cam_y, heading=heading))
    return tuple(states)


def ground_truth_record(scenario: Scenario, snapshot: FrameSnapshot) -> dict:
    """One ground-truth JSONL record: camera-frame agent positions and
    noise-free joints; agent 0 in declaration order is the target."""
    target_id = scenario.agents[0].id
    agents = []
    for state in snapshot.agents:
        sk = project_agent(state, scenario.cam)
        agents.append(
            {
                "id": state.agent.id,
                "x": state.x,
                "y": state.y,
                "joints": {
                    name: [j.point.x, j.point.y] for name, j in sorted(sk.joints.items())
                },
                "is_target": state.agent.id == target_id,
            }
        )
    return {"frame": snapshot.index, "t": snapshot.t, "agents": agents}


def run_scenario(scenario: Scenario) -> Iterator[tuple[FrameSnapshot, Optional[dict]]]:
    """Stream (frame snapshot, ground-truth record) pairs.

    The ground-truth record is None on frames outside the scenario's
    annotation schedule. Deterministic given the scenario (randomness
    only enters through the detector port)."""
    for i in range(scenario.n_frames):
        t = i / scenario.fps
        snapshot = FrameSnapshot(
            index=i, t=t, cam=scenario.cam, agents=agent_states(scenario, t)
        )
        annotated = (
            i >= scenario.annotate_from
            and (i - scenario.annotate_from) % scenario.annotate_every == 0
        )
        gt = ground_truth_record(scenario, snapshot) if annotated else None
        yield snapshot, gt


# --- scenario (de)serialization -------------------------------------------


def _trajectory_to_dict(traj: Trajectory) -> dict:
    if isinstance(traj, CircleTrajectory):
        return {
            "type": "circle",
            "center": list(traj.center),
            "radius": traj.radius,
            "angular_speed": traj.angular_speed,
            "start_angle": traj.start_angle,
        }
    return {
        "type": "waypoints",
        "points": [list(p) for p in traj.points],
        "speed": traj.speed,
    }


def _trajectory_from_dict(d: dict) -> Trajectory:
    kind = d.get("type")
    if kind == "circle":
        return CircleTrajectory(
            center=tuple(d.get("center", (0.0, 0.0))),
            radius=d["radius"],
            angular_speed=d.get("angular_speed", 30.0),
            start_angle=d.get("start_angle", 0.0),
        )
    if kind == "waypoints":
        return WaypointTrajectory(
            points=tuple(tuple(p) for p in d["points"]),
            speed=d.get("speed", 1.0),
        )
    raise InputError(f"unknown trajectory type: {kind!r}")


def scenario_to_dict(s: Scenario) -> dict:
    d = {
        "cam": s.cam.to_dict(),
        "fps": s.fps,
        "duration": s.duration,
        "agents": [
            {
                "id": a.id,
                "trajectory": _trajectory_to_dict(a.trajectory),
                "body": {
                    "height": a.body.height,
                    "ankle_height": a.body.ankle_height,
                    "shoulder_half_width": a.body.shoulder_half_width,
                    "hip_half_width": a.body.hip_half_width,
                    "neck_drop": a.body.neck_drop,
                },
            }
            for a in s.agents
        ],
        "noise": {
            "joint_sigma": s.noise.joint_sigma,
            "miss_prob": s.noise.miss_prob,
            "occlusion_enabled": s.noise.occlusion_enabled,
        },
        "detect_cfg": {"min_person_pixels": s.detect_cfg.min_person_pixels},
        "seed": s.seed,
        "annotate_every": s.annotate_every,
        "annotate_from": s.annotate_from,
    }
    if s.camera_trajectory is not None:
        d["camera_trajectory"] = _trajectory_to_dict(s.camera_trajectory)
    return d


def scenario_from_dict(d: dict) -> Scenario:
    try:
        agents = tuple(
            Agent(
                id=a["id"],
                trajectory=_trajectory_from_dict(a["trajectory"]),
                body=Body(**a.get("body", {})),
            )
            for a in d["agents"]
        )
        return Scenario(
            cam=CameraModel.from_dict(d.get("cam", {})),
            fps=d["fps"],
            duration=d["duration"],
            agents=agents,
            noise=NoiseModel(**d.get("noise", {})),
            detect_cfg=DetectabilityConfig(**d.get("detect_cfg", {})),
            seed=d.get("seed", 0),
            camera_trajectory=(
                _trajectory_from_dict(d["camera_trajectory"])
                if "camera_trajectory" in d
                else None
            ),
            annotate_every=d.get("annotate_every", 1),
            annotate_from=d.get("annotate_from", 0),
        )
    except KeyError as exc:
        raise InputError(f"scenario is missing required field {exc}") from exc
    except TypeError as exc:
        raise InputError(f"scenario has an invalid field: {exc}") from exc


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(
                f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
            ) from exc
    return scenario_from_dict(data)
