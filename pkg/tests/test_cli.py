import json
from pathlib import Path

import pytest

from panotrack.cli import main
from panotrack.io import read_jsonl

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def short_scenario(tmp_path, duration=2.0, noise=1.0, name="short.json"):
    with open(SCENARIOS / "circle_2m.json") as fh:
        d = json.load(fh)
    d["duration"] = duration
    d["noise"]["joint_sigma"] = noise
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return path


def run_config(tmp_path, scenario_path, strategy="tiles", extra=None):
    cfg = {"scenario": str(scenario_path), "strategy": strategy}
    cfg.update(extra or {})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestSimulate:
    def test_circle_2m_produces_300_records(self, tmp_path):
        out = tmp_path / "sim"
        rc = main(
            ["simulate", "--scenario", str(SCENARIOS / "circle_2m.json"), "--out", str(out)]
        )
        assert rc == 0
        records = list(read_jsonl(str(out / "ground_truth.jsonl")))
        assert len(records) == 300
        assert (out / "scenario.json").exists()

    def test_same_seed_byte_identical(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert (
                main(
                    [
                        "simulate",
                        "--scenario",
                        str(SCENARIOS / "circle_2m.json"),
                        "--out",
                        str(out),
                        "--seed",
                        "7",
                    ]
                )
                == 0
            )
            outs.append((out / "ground_truth.jsonl").read_bytes())
        assert outs[0] == outs[1]

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["simulate", "--scenario", "nope.json", "--out", str(tmp_path)]) == 2

    def test_malformed_scenario_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"fps": 30,,}')
        assert main(["simulate", "--scenario", str(bad), "--out", str(tmp_path)]) == 2


class TestTrack:
    @pytest.mark.parametrize("strategy", ["tiles", "roi", "fullframe"])
    def test_strategies_produce_tracks(self, tmp_path, strategy):
        scenario = short_scenario(tmp_path)
        out = tmp_path / strategy
        cfg = run_config(tmp_path, scenario, strategy)
        assert main(["track", "--config", str(cfg), "--out", str(out)]) == 0
        tracks = list(read_jsonl(str(out / "tracks.jsonl")))
        dets = list(read_jsonl(str(out / "detections.jsonl")))
        assert len(tracks) == len(dets) == 60
        last = tracks[-1]["tracks"]
        assert any(t["is_target"] for t in last)
        record = last[0]
        assert set(record) == {
            "id",
            "x",
            "y",
            "h",
            "img_x",
            "img_y",
            "status",
            "is_target",
        }

    def test_deterministic_given_seed(self, tmp_path):
        scenario = short_scenario(tmp_path)
        cfg = run_config(tmp_path, scenario)
        blobs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["track", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
            blobs.append(
                (out / "detections.jsonl").read_bytes()
                + (out / "tracks.jsonl").read_bytes()
            )
        assert blobs[0] == blobs[1]

    def test_concurrency_does_not_change_output(self, tmp_path):
        scenario = short_scenario(tmp_path)
        blobs = []
        for parallel in (True, False):
            cfg = run_config(
                tmp_path, scenario, extra={"tiles": {"parallel": parallel}}
            )
            out = tmp_path / f"par_{parallel}"
            assert main(["track", "--config", str(cfg), "--out", str(out)]) == 0
            blobs.append(
                (out / "detections.jsonl").read_bytes()
                + (out / "tracks.jsonl").read_bytes()
            )
        assert blobs[0] == blobs[1]

    def test_offline_detections_input(self, tmp_path):
        scenario = short_scenario(tmp_path)
        first = tmp_path / "first"
        cfg = run_config(tmp_path, scenario)
        assert main(["track", "--config", str(cfg), "--out", str(first)]) == 0

        offline_cfg = tmp_path / "offline.json"
        offline_cfg.write_text(
            json.dumps(
                {
                    "detections": str(first / "detections.jsonl"),
                    "camera": json.loads((SCENARIOS / "circle_2m.json").read_text())["cam"],
                }
            )
        )
        out = tmp_path / "offline"
        assert main(["track", "--config", str(offline_cfg), "--out", str(out)]) == 0
        tracks = list(read_jsonl(str(out / "tracks.jsonl")))
        assert len(tracks) == 60
        assert any(t["is_target"] for t in tracks[-1]["tracks"])

    def test_both_inputs_rejected(self, tmp_path):
        scenario = short_scenario(tmp_path)
        cfg = tmp_path / "both.json"
        cfg.write_text(
            json.dumps({"scenario": str(scenario), "detections": "x.jsonl"})
        )
        assert main(["track", "--config", str(cfg)]) == 2

    def test_unknown_config_key_rejected(self, tmp_path):
        scenario = short_scenario(tmp_path)
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"scenario": str(scenario), "stratgey": "tiles"}))
        assert main(["track", "--config", str(cfg)]) == 2

    def test_tracker_overrides_apply(self, tmp_path):
        scenario = short_scenario(tmp_path)
        cfg = run_config(
            tmp_path,
            scenario,
            extra={"tracker": {"wrap_correction": False, "gate_px": 80.0}},
        )
        out = tmp_path / "custom"
        assert main(["track", "--config", str(cfg), "--out", str(out)]) == 0


class TestEval:
    def test_end_to_end_report(self, tmp_path, capsys):
        scenario = short_scenario(tmp_path, duration=3.0)
        sim_out = tmp_path / "sim"
        trk_out = tmp_path / "trk"
        assert main(["simulate", "--scenario", str(scenario), "--out", str(sim_out)]) == 0
        cfg = run_config(tmp_path, scenario)
        assert main(["track", "--config", str(cfg), "--out", str(trk_out)]) == 0
        assert (
            main(
                [
                    "eval",
                    "--gt",
                    str(sim_out / "ground_truth.jsonl"),
                    "--tracks",
                    str(trk_out / "tracks.jsonl"),
                    "--out",
                    str(tmp_path / "eval"),
                ]
            )
            == 0
        )
        report = json.loads((tmp_path / "eval" / "report.json").read_text())
        assert report["m2"] == 1.0
        assert report["m1"] > 0.9  # warm-up frames are annotated in this scenario
        assert report["m3"] < 0.1
        csv = (tmp_path / "eval" / "error_vs_distance.csv").read_text().splitlines()
        assert csv[0] == "bin_center_m,mean_error_m,count,miss_rate"
        assert "m2=1.0000" in capsys.readouterr().out

    def test_frame_mismatch_exits_2(self, tmp_path):
        gt = tmp_path / "gt.jsonl"
        gt.write_text(
            json.dumps(
                {"frame": 0, "t": 0.0, "agents": [{"id": 0, "x": 2, "y": 0, "is_target": True}]}
            )
            + "\n"
        )
        tracks = tmp_path / "tracks.jsonl"
        tracks.write_text(json.dumps({"frame": 5, "t": 0.1, "tracks": []}) + "\n")
        assert (
            main(["eval", "--gt", str(gt), "--tracks", str(tracks), "--out", str(tmp_path)])
            == 2
        )


class TestSensitivity:
    def test_curve_values(self, tmp_path):
        out = tmp_path / "sens"
        assert (
            main(
                [
                    "sensitivity",
                    "--distances",
                    "2,4,6",
                    "--pixel-errors",
                    "0,5",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        lines = (out / "sensitivity.csv").read_text().splitlines()
        assert lines[0] == "distance_m,pixel_error_px,error_m"
        rows = [line.split(",") for line in lines[1:]]
        zero_rows = [r for r in rows if r[1] == "0.0"]
        assert all(abs(float(r[2])) < 1e-9 for r in zero_rows)
        five = {float(r[0]): float(r[2]) for r in rows if r[1] == "5.0"}
        assert five[2.0] == pytest.approx(0.0799, abs=0.0005)
        assert five[2.0] < five[4.0] < five[6.0]

    def test_bad_distances_exit_2(self, tmp_path):
        assert (
            main(["sensitivity", "--distances", "a,b", "--out", str(tmp_path)]) == 2
        )
