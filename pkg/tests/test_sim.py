import math

import numpy as np
import pytest

from panotrack.detect import Viewport, build_tiles
from panotrack.exceptions import ConfigError, GeometryError, InputError
from panotrack.geometry import CameraModel, localize
from panotrack.sim import (
    Agent,
    AgentState,
    Body,
    CircleTrajectory,
    DetectabilityConfig,
    FrameSnapshot,
    NoiseModel,
    Scenario,
    SyntheticDetector,
    WaypointTrajectory,
    agent_states,
    project_agent,
    projected_body_height_px,
    run_scenario,
    scenario_from_dict,
    scenario_to_dict,
    synthetic_detect,
)


def make_state(x, y, heading=0.0, height=1.7, agent_id=0):
    return AgentState(
        agent=Agent(id=agent_id, trajectory=WaypointTrajectory(points=((x, y),)), body=Body(height=height)),
        x=x,
        y=y,
        heading=heading,
    )


def snapshot(cam, *states, index=0, t=0.0):
    return FrameSnapshot(index=index, t=t, cam=cam, agents=tuple(states))


def full_vp(cam, scale=1.0):
    return Viewport(0, 0, cam.image_width, cam.image_height, scale)


class TestTrajectories:
    def test_circle_radius_constant(self):
        traj = CircleTrajectory(radius=2.0, angular_speed=45.0)
        for t in np.linspace(0, 8, 33):
            x, y, _ = traj.pose(t)
            assert math.hypot(x, y) == pytest.approx(2.0, abs=1e-9)

    def test_circle_heading_tangent(self):
        traj = CircleTrajectory(radius=2.0, angular_speed=90.0, start_angle=0.0)
        _, _, heading = traj.pose(0.0)
        assert heading == pytest.approx(90.0)

    def test_waypoints_constant_speed(self):
        traj = WaypointTrajectory(points=((0, 0), (4, 0), (4, 4)), speed=2.0)
        assert traj.pose(1.0)[:2] == pytest.approx((2, 0))
        assert traj.pose(3.0)[:2] == pytest.approx((4, 2))
        # holds at the end
        assert traj.pose(100.0)[:2] == pytest.approx((4, 4))

    def test_waypoints_heading(self):
        traj = WaypointTrajectory(points=((0, 0), (0, 5)), speed=1.0)
        assert traj.pose(1.0)[2] == pytest.approx(90.0)

    def test_stationary(self):
        traj = WaypointTrajectory(points=((1.5, -2.0),))
        assert traj.pose(10.0) == (1.5, -2.0, 0.0)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            CircleTrajectory(radius=0.0)
        with pytest.raises(ConfigError):
            WaypointTrajectory(points=())


class TestProjectAgent:
    def test_reference_pose(self, cam):
        # neck height 1.4188 m at (1.1, 0) reproduces the geometry chain
        state = make_state(1.1, 0.0, height=1.4188036041176237 + 0.25)
        sk = project_agent(state, cam)
        assert sk.neck.x == pytest.approx(960.0)
        assert sk.neck.y == pytest.approx(420.0, abs=1e-9)
        mid = sk.ankle_midpoint(cam.image_width)
        assert mid.x == pytest.approx(960.0)
        assert mid.y == pytest.approx(720.0, abs=1e-9)

    def test_behind_camera_at_seam(self, cam):
        sk = project_agent(make_state(-2.0, 0.0), cam)
        # neck sits on the seam column (0 == 1920)
        assert min(sk.neck.x, 1920 - sk.neck.x) == pytest.approx(0.0, abs=1e-9)

    def test_localize_round_trip(self, cam):
        state = make_state(2.2, -1.3)
        sk = project_agent(state, cam)
        w = localize(sk.ankle_midpoint(cam.image_width), sk.neck, cam)
        assert w.x == pytest.approx(state.x, abs=1e-6)
        assert w.y == pytest.approx(state.y, abs=1e-6)

    def test_under_camera_rejected(self, cam):
        with pytest.raises(GeometryError):
            project_agent(make_state(0.1, 0.0), cam)

    def test_ankles_straddle_sight_line(self, cam):
        sk = project_agent(make_state(2.0, 0.0), cam)
        la = sk.joints["left_ankle"].point
        ra = sk.joints["right_ankle"].point
        assert la.x != pytest.approx(ra.x)
        assert la.y == pytest.approx(ra.y)  # equal range, equal row


class TestDetectability:
    def test_boundary_values(self, cam):
        # 1.7 m person: ~144 px at 3.5 m -> 48.1 at scale 1/3 (boundary);
        # ~127 px at 4.0 m -> 42.4 (dropped)
        assert projected_body_height_px(make_state(3.5, 0.0), cam) == pytest.approx(
            144.29, abs=0.01
        )
        assert projected_body_height_px(make_state(4.0, 0.0), cam) == pytest.approx(
            127.06, abs=0.01
        )

    def test_lowres_drops_far_person(self, cam):
        rng = np.random.default_rng(0)
        cfg = DetectabilityConfig(min_person_pixels=48)
        near = synthetic_detect(
            full_vp(cam, scale=1 / 3), snapshot(cam, make_state(3.5, 0.0)),
            NoiseModel(), cfg, rng,
        )
        far = synthetic_detect(
            full_vp(cam, scale=1 / 3), snapshot(cam, make_state(4.0, 0.0)),
            NoiseModel(), cfg, rng,
        )
        assert len(near) == 1 and len(far) == 0

    def test_fullres_keeps_far_person(self, cam):
        rng = np.random.default_rng(0)
        out = synthetic_detect(
            full_vp(cam, scale=1.0), snapshot(cam, make_state(4.0, 0.0)),
            NoiseModel(), DetectabilityConfig(min_person_pixels=48), rng,
        )
        assert len(out) == 1

    def test_roi_pass_sees_six_meter_target_fullframe_does_not(self, cam):
        from panotrack.detect import RoiConfig, run_roi

        state = make_state(6.0, 0.0)
        det = SyntheticDetector(NoiseModel(), DetectabilityConfig(48), seed=0)
        snap = snapshot(cam, state)
        neck = project_agent(state, cam).neck
        with_roi = run_roi(snap, det, neck, cam, RoiConfig())
        without = run_roi(snap, det, None, cam, RoiConfig())
        assert len(with_roi.detections) == 1
        assert len(without.detections) == 0


class TestSyntheticDetect:
    def test_zero_noise_exact(self, cam):
        rng = np.random.default_rng(0)
        state = make_state(2.0, 1.0)
        out = synthetic_detect(
            full_vp(cam), snapshot(cam, state), NoiseModel(),
            DetectabilityConfig(), rng,
        )
        exact = project_agent(state, cam)
        assert len(out) == 1
        assert out[0].neck == pytest.approx(exact.neck)
        assert out[0].joint_count() == 7

    def test_column_filter_wrap_aware(self, cam):
        vp = Viewport(origin_x=1800, origin_y=0, width=300, height=960, scale=1.0)
        state = make_state(-2.0, -0.1)  # neck just past the seam
        out = synthetic_detect(
            vp, snapshot(cam, state), NoiseModel(), DetectabilityConfig(),
            np.random.default_rng(0),
        )
        assert len(out) == 1

    def test_outside_column_excluded(self, cam):
        vp = Viewport(origin_x=0, origin_y=0, width=300, height=960, scale=1.0)
        state = make_state(-2.0, 0.0)  # neck at the seam, column ~0 or 1920
        out = synthetic_detect(
            vp, snapshot(cam, make_state(0.0, 2.0)), NoiseModel(),
            DetectabilityConfig(), np.random.default_rng(0),
        )
        assert out == []  # person at theta=90 -> column 480, outside [0, 300)

    def test_duplicates_in_tile_overlap(self, cam):
        layout = build_tiles(cam)
        state = make_state(*_world_at_column(700, 2.0))
        det = SyntheticDetector(NoiseModel(), DetectabilityConfig(), seed=1)
        snap = snapshot(cam, state)
        per_tile = [det.detect(snap, vp) for vp in layout.viewports]
        assert sum(len(d) for d in per_tile) == 2  # seen by tiles A and B

    def test_occlusion(self, cam):
        near = make_state(2.0, 0.0, agent_id=0)
        far = make_state(4.0, 0.0, agent_id=1)
        out = synthetic_detect(
            full_vp(cam), snapshot(cam, near, far),
            NoiseModel(occlusion_enabled=True), DetectabilityConfig(1.0),
            np.random.default_rng(0),
        )
        assert len(out) == 1
        out = synthetic_detect(
            full_vp(cam), snapshot(cam, near, far),
            NoiseModel(occlusion_enabled=False), DetectabilityConfig(1.0),
            np.random.default_rng(0),
        )
        assert len(out) == 2

    def test_ankles_drop_jointly(self, cam):
        rng = np.random.default_rng(3)
        state = make_state(2.0, 0.0)
        for _ in range(200):
            out = synthetic_detect(
                full_vp(cam), snapshot(cam, state),
                NoiseModel(miss_prob=0.5), DetectabilityConfig(1.0), rng,
            )
            for sk in out:
                has_l = "left_ankle" in sk.joints
                has_r = "right_ankle" in sk.joints
                assert has_l == has_r

    def test_noise_scale_in_local_pixels(self, cam):
        state = make_state(2.0, 0.0)
        exact = project_agent(state, cam)
        errs = []
        for seed in range(300):
            out = synthetic_detect(
                full_vp(cam, scale=1.0), snapshot(cam, state),
                NoiseModel(joint_sigma=2.0), DetectabilityConfig(1.0),
                np.random.default_rng(seed),
            )
            errs.append(out[0].neck.x - exact.neck.x)
        assert np.std(errs) == pytest.approx(2.0, rel=0.25)


def _world_at_column(column, rho, cam=CameraModel()):
    theta = math.radians(180.0 - cam.deg_per_px_x * column)
    return rho * math.cos(theta), rho * math.sin(theta)


class TestRunScenario:
    def make_scenario(self, **kwargs):
        defaults = dict(
            cam=CameraModel(),
            fps=30.0,
            duration=10.0,
            agents=(Agent(id=0, trajectory=CircleTrajectory(radius=2.0, angular_speed=30.0)),),
            seed=7,
        )
        defaults.update(kwargs)
        return Scenario(**defaults)

    def test_frame_and_record_counts(self):
        s = self.make_scenario()
        pairs = list(run_scenario(s))
        assert len(pairs) == 300
        assert sum(1 for _, gt in pairs if gt is not None) == 300

    def test_gt_ranges_on_circle(self):
        s = self.make_scenario()
        for _, gt in run_scenario(s):
            a = gt["agents"][0]
            assert math.hypot(a["x"], a["y"]) == pytest.approx(2.0, abs=1e-9)
            assert a["is_target"]

    def test_annotation_schedule(self):
        s = self.make_scenario(annotate_every=10, annotate_from=5)
        annotated = [i for i, (_, gt) in enumerate(run_scenario(s)) if gt is not None]
        assert annotated[:3] == [5, 15, 25]

    def test_deterministic(self):
        a = [gt for _, gt in run_scenario(self.make_scenario())]
        b = [gt for _, gt in run_scenario(self.make_scenario())]
        assert a == b

    def test_detector_deterministic_given_seed(self, cam):
        s = self.make_scenario(noise=NoiseModel(joint_sigma=1.0))
        det = SyntheticDetector.for_scenario(s)
        snap = next(run_scenario(s))[0]
        vp = full_vp(cam)
        assert det.detect(snap, vp) == det.detect(snap, vp)

    def test_camera_trajectory_offsets(self):
        s = self.make_scenario(
            agents=(Agent(id=0, trajectory=WaypointTrajectory(points=((5.0, 0.0),))),),
            camera_trajectory=WaypointTrajectory(points=((0.0, 0.0), (3.0, 0.0)), speed=1.0),
        )
        states = agent_states(s, 3.0)
        assert states[0].x == pytest.approx(2.0)

    def test_round_trip_serialization(self):
        s = self.make_scenario(
            noise=NoiseModel(joint_sigma=1.5, miss_prob=0.1, occlusion_enabled=True),
            camera_trajectory=CircleTrajectory(radius=1.0),
            annotate_every=10,
        )
        assert scenario_from_dict(scenario_to_dict(s)) == s

    def test_bad_trajectory_type(self):
        d = scenario_to_dict(self.make_scenario())
        d["agents"][0]["trajectory"]["type"] = "spline"
        with pytest.raises(InputError):
            scenario_from_dict(d)
