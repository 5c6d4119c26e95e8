"""Command-line entry point wiring all stages into reproducible pipelines.

Subcommands: layout, simulate, estimate, calibrate, sensitivity, monitor,
pipeline. All randomness flows from a single --seed; per-stage seeds are
derived by stable hashing of (seed, stage name). Commands that write into
an output directory leave exactly one manifest.json there; re-running with
identical arguments reproduces byte-identical numeric outputs.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    CalibrationConfig,
    CalibrationReport,
    calibrate,
    split_indices,
)
from .contact import (
    ApproachTrajectory,
    ContactConfig,
    config_for_object,
    run_episode,
)
from .errors import NumericalFailure, RingSenseError, ValidationFailure
from .geometry import (
    EULER_CONVENTION,
    DeformationVector,
    PinholeCamera,
    RigidTransform,
    default_camera,
    delta_from_poses,
)
from .layout import TagLayout, default_layout
from .pnp import (
    Correspondence,
    CorrespondenceSet,
    PoseEstimate,
    SolverConfig,
    estimate_pose,
    refine_lm,
)
from .sensitivity import DetectionParams, analyze
from .simulator import (
    NoiseModel,
    Wrench,
    axis_magnitudes,
    default_compliance,
    default_reference_pose,
    derive_seed,
    sweep_dataset,
)

SWEEP_HEADER = [
    "axis", "magnitude",
    "fx", "fy", "fz", "tx", "ty", "tz",
    "dlx", "dly", "dlz", "dthx", "dthy", "dthz",
]


def _info(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _dump_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _load_jsonl(path: Path) -> list[dict]:
    with path.open("r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                    input_digests: dict[str, str]) -> None:
    _dump_json(out_dir / "manifest.json", {
        "command": command,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "input_digests": input_digests,
    })


def _load_camera(path: str | None) -> PinholeCamera:
    if path is None:
        return default_camera()
    return PinholeCamera.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_layout(path: str | None) -> TagLayout:
    if path is None:
        return default_layout()
    return TagLayout.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _corrs_to_row(frame: int, timestamp: float, corrs: CorrespondenceSet) -> dict:
    return {
        "frame": frame,
        "timestamp_s": timestamp,
        "entries": [
            {
                "tag_id": e.tag_id,
                "corner": e.corner_index,
                "ref_mm": list(e.point_ref),
                "img_px": list(e.point_img),
            }
            for e in corrs.entries
        ],
    }


def _corrs_from_row(row: dict) -> CorrespondenceSet:
    return CorrespondenceSet(entries=tuple(
        Correspondence(
            tag_id=int(e["tag_id"]),
            corner_index=int(e["corner"]),
            point_ref=tuple(float(v) for v in e["ref_mm"]),
            point_img=tuple(float(v) for v in e["img_px"]),
        )
        for e in row["entries"]
    ))


def _write_sweep_csv(path: Path, rows: list[tuple[int, float, Wrench, DeformationVector]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for axis, magnitude, wrench, delta in rows:
            writer.writerow(
                [axis, repr(magnitude)]
                + [repr(float(v)) for v in wrench.as_array()]
                + [repr(float(v)) for v in delta.as_array()]
            )


def _read_sweep_csv(path: Path) -> list[tuple[DeformationVector, Wrench]]:
    pairs = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SWEEP_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValidationFailure(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            wrench = Wrench(*(float(row[k]) for k in SWEEP_HEADER[2:8]))
            delta = DeformationVector(*(float(row[k]) for k in SWEEP_HEADER[8:14]))
            pairs.append((delta, wrench))
    return pairs


# ---------------------------------------------------------------- layout

def _cmd_layout(args) -> int:
    layout = default_layout(
        tag_size=args.tag_size,
        border=args.border,
        grid_pitch=args.grid_pitch,
        ring_radius=args.ring_radius,
        ring_spread=args.ring_spread,
    )
    payload = layout.to_dict()
    if args.out is None:
        json.dump(payload, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    else:
        _dump_json(Path(args.out), payload)
        _info(args, f"wrote {len(layout)} tags to {args.out}")
    return 0


# -------------------------------------------------------------- simulate

def _run_sweeps(camera, layout, reference, compliance, noise_sigma, occlusion, seed,
                axes: list[int], samples_per_axis: int, span: float):
    samples = []
    for axis in axes:
        magnitudes = axis_magnitudes(compliance, axis, samples_per_axis, span)
        noise = NoiseModel(corner_sigma=noise_sigma, occlusion_probability=occlusion,
                           seed=derive_seed(seed, "simulate"))
        samples.extend(sweep_dataset(
            axis, magnitudes, camera, layout, reference, compliance, noise,
            stream_offset=axis * samples_per_axis,
        ))
    return samples


def _cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    camera = _load_camera(args.camera)
    layout = _load_layout(args.layout)
    compliance = default_compliance()
    reference = default_reference_pose()
    axes = list(range(6)) if args.axis == "all" else [int(args.axis)]

    samples = _run_sweeps(camera, layout, reference, compliance, args.sigma,
                          args.occlusion, args.seed, axes, args.samples_per_axis, args.span)
    _write_sweep_csv(out_dir / "sweep.csv",
                     [(s.axis, s.magnitude, s.wrench, s.deformation) for s in samples])
    _dump_jsonl(out_dir / "frames.jsonl",
                (_corrs_to_row(i, i * 0.02, s.correspondences) for i, s in enumerate(samples)))
    config = {
        "axis": args.axis, "samples_per_axis": args.samples_per_axis,
        "sigma": args.sigma, "occlusion": args.occlusion, "span": args.span,
        "camera": camera.to_dict(), "layout_tags": len(layout),
        "reference_pose": reference.to_dict(),
    }
    digests = {name: _digest(Path(path))
               for name, path in (("camera", args.camera), ("layout", args.layout))
               if path is not None}
    _write_manifest(out_dir, "simulate", config, args.seed, digests)
    _info(args, f"wrote {len(samples)} frames to {out_dir}")
    return 0


# -------------------------------------------------------------- estimate

def _estimate_rows(camera, rows, config: SolverConfig, warm_start: bool,
                   allow_single_tag: bool):
    previous = None
    for row in rows:
        corrs = _corrs_from_row(row)
        if warm_start and previous is not None:
            estimate = refine_lm(camera, corrs, previous, config)
        else:
            estimate = estimate_pose(camera, corrs, config, allow_single_tag=allow_single_tag)
        previous = estimate.pose
        yield row["frame"], estimate


def _cmd_estimate(args) -> int:
    camera = _load_camera(args.camera)
    rows = _load_jsonl(Path(args.frames))
    out_rows = []
    for frame, estimate in _estimate_rows(camera, rows, SolverConfig(), args.warm_start,
                                          args.allow_single_tag):
        out_rows.append({"frame": frame, **estimate.to_dict()})
    _dump_jsonl(Path(args.out), out_rows)
    _info(args, f"estimated {len(out_rows)} poses to {args.out}")
    return 0


# ------------------------------------------------------------- calibrate

def _write_scatter_csv(path: Path, pairs, report: CalibrationReport) -> None:
    train_idx, _ = split_indices(len(pairs), report.split_fraction, report.split_seed)
    train_set = set(int(i) for i in train_idx)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wrench_axis", "sample", "input_value", "actual", "predicted", "subset"])
        for axis in range(6):
            model = report.model_for_axis(axis)
            for i, (delta, wrench) in enumerate(pairs):
                x = float(delta.as_array()[model.input_component])
                writer.writerow([
                    axis, i, repr(x),
                    repr(float(wrench.as_array()[axis])),
                    repr(float(model.predict(np.array([x]))[0])),
                    "train" if i in train_set else "test",
                ])


def _cmd_calibrate(args) -> int:
    pairs = _read_sweep_csv(Path(args.data))
    report = calibrate(pairs, CalibrationConfig(
        degree=args.degree, split_fraction=args.split, seed=args.seed,
    ))
    _dump_json(Path(args.out), report.to_dict())
    if args.scatter_csv:
        _write_scatter_csv(Path(args.scatter_csv), pairs, report)
    _info(args, "r2_test per axis: " + ", ".join(
        f"{m.axis}:{m.r2_test:.5f}" for m in report.models))
    return 0


# ------------------------------------------------------------ sensitivity

def _sensitivity_payload(params: DetectionParams, report: CalibrationReport) -> dict:
    result = analyze(params, report)
    return {
        "delta_l_min_mm": result.delta_l_min,
        "delta_theta_min_rad": result.delta_theta_min,
        "pose_floor": result.pose_floor.as_array().tolist(),
        "euler_convention": EULER_CONVENTION,
        "wrench_floor": result.wrench_floor.as_array().tolist(),
        "units": {"force": "mN", "torque": "mN*m (= N*mm)"},
        "params": params.to_dict(),
    }


def _cmd_sensitivity(args) -> int:
    params = DetectionParams() if args.params is None else DetectionParams.from_dict(
        json.loads(Path(args.params).read_text(encoding="utf-8")))
    report = CalibrationReport.from_dict(
        json.loads(Path(args.calib).read_text(encoding="utf-8")))
    _dump_json(Path(args.out), _sensitivity_payload(params, report))
    _info(args, f"wrote sensitivity analysis to {args.out}")
    return 0


# ---------------------------------------------------------------- monitor

def _cmd_monitor(args) -> int:
    if args.object is not None:
        config = config_for_object(args.object, debounce_frames=args.debounce)
        if args.threshold is not None or args.frames_count is not None:
            config = ContactConfig(
                threshold_mm=args.threshold if args.threshold is not None else config.threshold_mm,
                total_frames=args.frames_count if args.frames_count is not None else config.total_frames,
                debounce_frames=args.debounce,
            )
    else:
        if args.threshold is None or args.frames_count is None:
            raise ValidationFailure("provide --object or both --threshold and --frames")
        config = ContactConfig(threshold_mm=args.threshold, total_frames=args.frames_count,
                               debounce_frames=args.debounce)

    rows = _load_jsonl(Path(args.poses))
    poses = [
        PoseEstimate(
            pose=RigidTransform.from_dict(r["pose"]),
            rms_reprojection_error=float(r["rms_reprojection_error"]),
            iterations_used=int(r["iterations_used"]),
            converged=bool(r["converged"]),
        )
        for r in rows
    ]
    start = tuple(float(v) for v in args.start_joints.split(","))
    target = tuple(float(v) for v in args.target_joints.split(","))
    traj = ApproachTrajectory(start_joints=start, target_joints=target,
                              total_frames=config.total_frames)
    result = run_episode(traj, config, iter(poses))
    payload = {
        "object": args.object,
        "config": {
            "threshold_mm": config.threshold_mm,
            "total_frames": config.total_frames,
            "control_interval_s": config.control_interval_s,
            "debounce_frames": config.debounce_frames,
        },
        "event": None if result.event is None else {
            "frame_index": result.event.frame_index,
            "delta_z_mm": result.event.delta_z_mm,
            "phase": result.event.phase,
        },
        "delta_z_mm": list(result.delta_z_mm),
        "commands": [[f, list(j)] for f, j in result.commands],
        "skipped_frames": list(result.skipped_frames),
        "final_phase": result.final_phase,
    }
    _dump_json(Path(args.out), payload)
    if result.event is not None:
        _info(args, f"contact at frame {result.event.frame_index}")
    else:
        _info(args, "no contact")
    return 0


# ---------------------------------------------------------------- pipeline

def _stage(name: str, fn, *fn_args, **fn_kwargs):
    try:
        return fn(*fn_args, **fn_kwargs)
    except RingSenseError as exc:
        raise type(exc)(f"stage '{name}': {exc}") from exc


def _cmd_pipeline(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    camera = default_camera()
    layout = default_layout()
    compliance = default_compliance()
    reference = default_reference_pose()

    samples = _stage("simulate", _run_sweeps, camera, layout, reference, compliance,
                     args.sigma, 0.0, args.seed, list(range(6)),
                     args.samples_per_axis, args.span)
    _write_sweep_csv(out_dir / "sweep.csv",
                     [(s.axis, s.magnitude, s.wrench, s.deformation) for s in samples])
    _dump_jsonl(out_dir / "frames.jsonl",
                (_corrs_to_row(i, i * 0.02, s.correspondences) for i, s in enumerate(samples)))
    _info(args, f"simulated {len(samples)} frames")

    pose_rows = []
    estimated_pairs = []
    for i, sample in enumerate(samples):
        estimate = _stage("estimate", estimate_pose, camera, sample.correspondences)
        pose_rows.append({"frame": i, **estimate.to_dict()})
        estimated_pairs.append(
            (delta_from_poses(reference, estimate.pose), sample.wrench))
    _dump_jsonl(out_dir / "poses.jsonl", pose_rows)
    _write_sweep_csv(out_dir / "sweep_estimated.csv",
                     [(s.axis, s.magnitude, pair[1], pair[0])
                      for s, pair in zip(samples, estimated_pairs)])
    _info(args, f"estimated {len(pose_rows)} poses")

    report = _stage("calibrate", calibrate, estimated_pairs, CalibrationConfig(
        degree=args.degree, split_fraction=args.split,
        seed=derive_seed(args.seed, "calibrate") % 2**32,
    ))
    _dump_json(out_dir / "calib.json", report.to_dict())
    _info(args, "r2_test per axis: " + ", ".join(
        f"{m.axis}:{m.r2_test:.5f}" for m in report.models))

    payload = _stage("sensitivity", _sensitivity_payload, DetectionParams(), report)
    _dump_json(out_dir / "sensitivity.json", payload)

    config = {
        "samples_per_axis": args.samples_per_axis, "sigma": args.sigma,
        "span": args.span, "degree": args.degree, "split": args.split,
        "camera": camera.to_dict(), "layout_tags": len(layout),
        "reference_pose": reference.to_dict(),
    }
    _write_manifest(out_dir, "pipeline", config, args.seed, {})
    _info(args, f"wrote pipeline outputs to {out_dir}")
    return 0


# ------------------------------------------------------------------ main

def _add_common(parser, out_required: bool = True, out_default=None) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--out", required=out_required, default=out_default,
                        help="output path")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringsense",
        description="Fiducial-based tactile sensing math on synthetic data.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_layout = sub.add_parser("layout", help="emit a tag layout file")
    layout_sub = p_layout.add_subparsers(dest="layout_command", required=True)
    p_emit = layout_sub.add_parser("emit", help="write the (parametrized) default layout")
    p_emit.add_argument("--tag-size", type=float, default=2.0)
    p_emit.add_argument("--border", type=float, default=0.2)
    p_emit.add_argument("--grid-pitch", type=float, default=2.6)
    p_emit.add_argument("--ring-radius", type=float, default=8.0)
    p_emit.add_argument("--ring-spread", type=float, default=1.0)
    _add_common(p_emit, out_required=False)
    p_emit.set_defaults(handler=_cmd_layout)

    p_sim = sub.add_parser("simulate", help="synthesize a single-axis sweep dataset")
    p_sim.add_argument("--axis", default="all", choices=["all", "0", "1", "2", "3", "4", "5"])
    p_sim.add_argument("--samples-per-axis", type=int, default=170)
    p_sim.add_argument("--sigma", type=float, default=0.25, help="corner noise std (px)")
    p_sim.add_argument("--occlusion", type=float, default=0.0,
                       help="per-tag dropout probability")
    p_sim.add_argument("--span", type=float, default=0.8,
                       help="fraction of the deformation limit to sweep")
    p_sim.add_argument("--camera", default=None, help="camera intrinsics JSON")
    p_sim.add_argument("--layout", default=None, help="layout JSON")
    _add_common(p_sim)
    p_sim.set_defaults(handler=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate plate poses from correspondences")
    p_est.add_argument("--camera", default=None, help="camera intrinsics JSON")
    p_est.add_argument("--frames", required=True, help="correspondences JSONL")
    p_est.add_argument("--warm-start", action="store_true",
                       help="seed each frame with the previous pose instead of per-frame EPnP")
    p_est.add_argument("--allow-single-tag", action="store_true",
                       help="accept degraded 1-tag (4-corner) frames")
    _add_common(p_est)
    p_est.set_defaults(handler=_cmd_estimate)

    p_cal = sub.add_parser("calibrate", help="fit per-axis pose-to-wrench models")
    p_cal.add_argument("--data", required=True, help="sweep CSV")
    p_cal.add_argument("--degree", type=int, default=1, choices=[1, 3])
    p_cal.add_argument("--split", type=float, default=0.8)
    p_cal.add_argument("--scatter-csv", default=None,
                       help="also write per-sample truth/prediction rows")
    _add_common(p_cal)
    p_cal.set_defaults(handler=_cmd_calibrate)

    p_sens = sub.add_parser("sensitivity", help="minimum detectable pose and wrench")
    p_sens.add_argument("--params", default=None, help="detection params JSON")
    p_sens.add_argument("--calib", required=True, help="calibration report JSON")
    _add_common(p_sens)
    p_sens.set_defaults(handler=_cmd_sensitivity)

    p_mon = sub.add_parser("monitor", help="run contact detection over a pose stream")
    p_mon.add_argument("--object", default=None,
                       help="preset name (chip, eggshell, cone, cookie, balloon, "
                            "pencil, paper, paper_cup, grape, seaweed)")
    p_mon.add_argument("--threshold", type=float, default=None, help="override threshold (mm)")
    p_mon.add_argument("--frames", dest="frames_count", type=int, default=None,
                       help="override total approach frames")
    p_mon.add_argument("--debounce", type=int, default=1)
    p_mon.add_argument("--poses", required=True, help="poses JSONL")
    p_mon.add_argument("--start-joints", default="0.0")
    p_mon.add_argument("--target-joints", default="1.0")
    _add_common(p_mon)
    p_mon.set_defaults(handler=_cmd_monitor)

    p_pipe = sub.add_parser("pipeline", help="simulate, estimate, calibrate, sensitivity")
    p_pipe.add_argument("--samples-per-axis", type=int, default=170)
    p_pipe.add_argument("--sigma", type=float, default=0.25)
    p_pipe.add_argument("--span", type=float, default=0.8)
    p_pipe.add_argument("--degree", type=int, default=1, choices=[1, 3])
    p_pipe.add_argument("--split", type=float, default=0.8)
    _add_common(p_pipe)
    p_pipe.set_defaults(handler=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
