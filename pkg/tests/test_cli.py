import json

import numpy as np
import pytest

from ringsense.cli import main

REFERENCE_WRENCH_FLOOR = np.array([4.30, 4.22, 9.93, 0.32, 0.13, 8.55])


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipe")
    rc = main(["pipeline", "--seed", "7", "--out", str(out),
               "--samples-per-axis", "20", "--quiet"])
    assert rc == 0
    return out


def test_layout_emit(tmp_path):
    out = tmp_path / "layout.json"
    assert main(["layout", "emit", "--out", str(out), "--quiet"]) == 0
    data = read_json(out)
    assert len(data["tags"]) == 35
    assert data["tag_size_mm"] == 2.0


def test_layout_emit_overlapping_radius_fails(tmp_path, capsys):
    out = tmp_path / "layout.json"
    rc = main(["layout", "emit", "--ring-radius", "2.5", "--out", str(out), "--quiet"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "tags" in err and "footprint" in err
    assert not out.exists()


def test_simulate_writes_files_and_manifest(tmp_path):
    out = tmp_path / "sim"
    rc = main(["simulate", "--axis", "2", "--samples-per-axis", "5",
               "--sigma", "0", "--seed", "3", "--out", str(out), "--quiet"])
    assert rc == 0
    assert (out / "sweep.csv").exists()
    assert (out / "frames.jsonl").exists()
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 3
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("axis,magnitude,fx,")
    assert len(rows) == 6


def test_simulate_digests_file_inputs(tmp_path):
    layout_file = tmp_path / "layout.json"
    assert main(["layout", "emit", "--out", str(layout_file), "--quiet"]) == 0
    out = tmp_path / "sim"
    rc = main(["simulate", "--axis", "0", "--samples-per-axis", "4",
               "--layout", str(layout_file), "--seed", "1", "--out", str(out),
               "--quiet"])
    assert rc == 0
    manifest = read_json(out / "manifest.json")
    assert set(manifest["input_digests"]) == {"layout"}
    assert len(manifest["input_digests"]["layout"]) == 64


def test_simulate_deterministic_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        rc = main(["simulate", "--axis", "0", "--samples-per-axis", "4",
                   "--seed", "11", "--out", str(out), "--quiet"])
        assert rc == 0
    for name in ("sweep.csv", "frames.jsonl", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_estimate_converges_on_simulated_frames(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--axis", "1", "--samples-per-axis", "6",
                 "--seed", "5", "--out", str(sim), "--quiet"]) == 0
    poses = tmp_path / "poses.jsonl"
    assert main(["estimate", "--frames", str(sim / "frames.jsonl"),
                 "--out", str(poses), "--quiet"]) == 0
    rows = read_jsonl(poses)
    assert len(rows) == 6
    assert all(r["converged"] for r in rows)
    assert all(r["rms_reprojection_error"] < 1.0 for r in rows)


def test_estimate_warm_start(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--axis", "1", "--samples-per-axis", "5",
                 "--sigma", "0", "--seed", "5", "--out", str(sim), "--quiet"]) == 0
    poses = tmp_path / "poses.jsonl"
    assert main(["estimate", "--frames", str(sim / "frames.jsonl"), "--warm-start",
                 "--out", str(poses), "--quiet"]) == 0
    rows = read_jsonl(poses)
    assert all(r["converged"] for r in rows)
    assert all(r["rms_reprojection_error"] < 1e-6 for r in rows)


def test_calibrate_on_ground_truth_sweep(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--samples-per-axis", "20", "--sigma", "0",
                 "--seed", "9", "--out", str(sim), "--quiet"]) == 0
    calib = tmp_path / "calib.json"
    scatter = tmp_path / "scatter.csv"
    rc = main(["calibrate", "--data", str(sim / "sweep.csv"), "--degree", "1",
               "--split", "0.8", "--seed", "9", "--out", str(calib),
               "--scatter-csv", str(scatter), "--quiet"])
    assert rc == 0
    report = read_json(calib)
    assert len(report["models"]) == 6
    assert all(m["r2_test"] > 0.9999 for m in report["models"])
    lines = scatter.read_text().splitlines()
    assert lines[0] == "wrench_axis,sample,input_value,actual,predicted,subset"
    assert len(lines) == 1 + 6 * 120


def test_sensitivity_with_defaults(pipeline_dir, tmp_path):
    out = tmp_path / "sens.json"
    rc = main(["sensitivity", "--calib", str(pipeline_dir / "calib.json"),
               "--out", str(out), "--quiet"])
    assert rc == 0
    data = read_json(out)
    assert data["delta_l_min_mm"] == pytest.approx(0.0135, abs=1e-4)
    assert data["delta_theta_min_rad"] == pytest.approx(0.0136, abs=1e-4)
    assert data["euler_convention"] == "XYZ-intrinsic"


def test_monitor_threshold_override(pipeline_dir, tmp_path):
    episode = tmp_path / "episode.json"
    rc = main(["monitor", "--threshold", "0.5", "--frames", "12", "--debounce", "2",
               "--poses", str(pipeline_dir / "poses.jsonl"),
               "--out", str(episode), "--quiet"])
    assert rc == 0
    data = read_json(episode)
    assert data["config"] == {"threshold_mm": 0.5, "total_frames": 12,
                              "control_interval_s": 0.02, "debounce_frames": 2}


def test_monitor_object_preset(pipeline_dir, tmp_path):
    episode = tmp_path / "episode.json"
    rc = main(["monitor", "--object", "seaweed",
               "--poses", str(pipeline_dir / "poses.jsonl"),
               "--out", str(episode), "--quiet"])
    # The pipeline sweep includes large deformations, so contact fires; the
    # point here is preset resolution and file output.
    assert rc == 0
    data = read_json(episode)
    assert data["config"]["threshold_mm"] == 0.01
    assert data["config"]["total_frames"] == 150
    assert data["config"]["control_interval_s"] == 0.02


def test_pipeline_outputs(pipeline_dir):
    for name in ("sweep.csv", "frames.jsonl", "poses.jsonl",
                 "sweep_estimated.csv", "calib.json", "sensitivity.json",
                 "manifest.json"):
        assert (pipeline_dir / name).exists()
    sens = read_json(pipeline_dir / "sensitivity.json")
    rel = np.abs(np.array(sens["wrench_floor"]) - REFERENCE_WRENCH_FLOOR) / REFERENCE_WRENCH_FLOOR
    assert np.max(rel) < 0.01
    poses = read_jsonl(pipeline_dir / "poses.jsonl")
    assert all(r["converged"] for r in poses)


def test_pipeline_zero_noise_r2(tmp_path):
    out = tmp_path / "zero"
    rc = main(["pipeline", "--seed", "3", "--sigma", "0", "--out", str(out),
               "--samples-per-axis", "20", "--quiet"])
    assert rc == 0
    report = read_json(out / "calib.json")
    assert all(m["r2_test"] > 0.9999 for m in report["models"])


def test_pipeline_starved_split_reports_axis(tmp_path, capsys):
    # Seed 2 at 20 samples/axis happens to leave axis 5 out of the held-out
    # partition; the failure must name the axis and the remedy.
    out = tmp_path / "starved"
    rc = main(["pipeline", "--seed", "2", "--sigma", "0", "--out", str(out),
               "--samples-per-axis", "20", "--quiet"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "stage 'calibrate'" in err
    assert "axis 5" in err and "split seed" in err


def test_degenerate_frames_are_numerical_failure(tmp_path, capsys):
    frames = tmp_path / "frames.jsonl"
    entries = [{"tag_id": i // 4, "corner": i % 4,
                "ref_mm": [float(i), 0.0, 0.0], "img_px": [10.0 + i, 20.0]}
               for i in range(8)]
    frames.write_text(json.dumps({"frame": 0, "timestamp_s": 0.0, "entries": entries}) + "\n")
    rc = main(["estimate", "--frames", str(frames),
               "--out", str(tmp_path / "poses.jsonl"), "--quiet"])
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err


def test_missing_input_file_is_io_failure(tmp_path, capsys):
    rc = main(["estimate", "--frames", str(tmp_path / "nope.jsonl"),
               "--out", str(tmp_path / "poses.jsonl"), "--quiet"])
    assert rc == 3
    assert "i/o failure" in capsys.readouterr().err


def test_monitor_requires_config(tmp_path, pipeline_dir, capsys):
    rc = main(["monitor", "--poses", str(pipeline_dir / "poses.jsonl"),
               "--out", str(tmp_path / "e.json"), "--quiet"])
    assert rc == 1
    assert "error" in capsys.readouterr().err
