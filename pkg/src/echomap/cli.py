"""``echomap`` command line: synthesize, analyze, make-dataset, train, backproject.

Exit codes: 0 success, 2 usage, 3 malformed input or config, 4 no impacts
detected, 5 numerical failure, 6 file-system error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import NumericalFailureError
from .config import PRESETS, RADIUS_SOURCES, PipelineConfig, load_config
from .imaging.backproject import (
    NoPeakError,
    VoxelGrid,
    back_project,
    estimate_radius,
    extract_targets,
    radius_bin_tolerance,
    write_voxel_ply,
)
from .imaging.fdmap import register_fd_map, write_fd_map_csv, write_fd_map_ply
from .imaging.sync import sync_measurements
from .inference.estimator import JointPipeDepthModel
from .inference.io import load_checkpoint, read_dataset, save_checkpoint, write_dataset
from .inference.train import TrainingPair, aggregate_segments, depth_mask, predict_batches, stack_pairs
from .posegraph.io import read_trajectory_csv, write_trajectory_csv
from .posegraph.se3 import SE3Transform
from .signal.filters import low_pass_filter
from .signal.io import read_wav, write_soi_report, write_wav
from .signal.mel import mel_segments
from .signal.segmentation import detect_soi, segment_intervals
from .signal.spectral import classify_region, dft, fd, psd
from .signal.types import MEL_BANDS, MEL_FRAMES, RegionLabel, Spectrum
from .synth.scenario import generate_scenario, preset_config, write_ground_truth_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NO_SOI = 4
EXIT_NUMERICAL = 5
EXIT_IO = 6

TAP_GROUP_FIELDS = ["group", "x", "y", "z", "n", "fd_mean", "label", "soi_indices"]


class NoSOIError(RuntimeError):
    pass


def _num(v) -> str:
    return repr(float(v))


def _write_json(path, data) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def scenario_for(config: PipelineConfig):
    overrides = {"seed": config.seed}
    if config.noise_std is not None:
        overrides["noise_std"] = config.noise_std
    return preset_config(config.preset, **overrides)


# -- synth ------------------------------------------------------------------

def cmd_synth(config: PipelineConfig, output_dir) -> dict:
    out = _out_dir(output_dir)
    scenario = scenario_for(config)
    trace, trajectory, truth = generate_scenario(scenario)
    files = {
        "wav": write_wav(out / "recording.wav", trace, config.wav_format),
        "poses": out / "trajectory.csv",
        "ground_truth": out / "ground_truth.csv",
        "scenario": out / "scenario.json",
    }
    write_trajectory_csv(files["poses"], trajectory)
    write_ground_truth_csv(files["ground_truth"], truth)
    meta = {"preset": config.preset, "scenario": asdict(scenario), "total_impacts": truth.total_impacts,
            "duration_s": trace.duration, "version": __version__}
    _write_json(files["scenario"], meta)
    return files


# -- analyze ----------------------------------------------------------------

def run_front_end(trace, config: PipelineConfig):
    """Filter, find the loud regions and cut one SOI per impact."""
    filtered = low_pass_filter(trace, config.cutoff_hz)
    regions = segment_intervals(filtered, config.interval_length, config.relevance_threshold)
    return detect_soi(filtered, regions=regions.relevant_intervals)


def _sync(sois, trajectory, config: PipelineConfig):
    offset = None
    if any(config.tap_offset):
        offset = SE3Transform.from_translation(np.array(config.tap_offset))
    return sync_measurements(sois, trajectory, config.sync_tolerance, config.group_distance, offset)


def _segment_rows(sois, config: PipelineConfig):
    rows = []
    for k, soi in enumerate(sois):
        for seg in mel_segments(soi, segment_hop=config.segment_hop):
            rows.append((k, seg.values))
    return rows


def cmd_analyze(wav_path, pose_path, config: PipelineConfig, output_dir) -> dict:
    trace = read_wav(wav_path)
    trajectory = read_trajectory_csv(pose_path)
    sois = run_front_end(trace, config)
    if not sois:
        raise NoSOIError(f"{wav_path}: no impact reached the detection threshold")
    out = _out_dir(output_dir)
    spectra = [dft(s) for s in sois]
    report = [
        {"soi_index": k, "t_start": s.t_start, "fd": fd(sp), "psd": psd(sp),
         "label": classify_region(fd(sp), config.fd_threshold)}
        for k, (s, sp) in enumerate(zip(sois, spectra))
    ]
    files = {"report": write_soi_report(out / "soi_report.csv", report)}

    result = _sync(sois, trajectory, config)
    if result.unmatched:
        warnings.warn(f"{len(result.unmatched)} SOIs fall outside the pose trajectory and were skipped")
    points = register_fd_map(result.measurements, config.fd_threshold)
    files["fd_map_csv"] = out / "fd_map.csv"
    files["fd_map_ply"] = out / "fd_map.ply"
    write_fd_map_csv(files["fd_map_csv"], points)
    write_fd_map_ply(files["fd_map_ply"], points)

    files["tap_groups"] = out / "tap_groups.csv"
    with open(files["tap_groups"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TAP_GROUP_FIELDS)
        for g, group in enumerate(result.groups):
            fd_mean = float(np.mean([m.fd_value for m in group.measurements]))
            label = classify_region(fd_mean, config.fd_threshold)
            members = ";".join(str(m.soi_index) for m in group.measurements)
            w.writerow([g, *(_num(c) for c in group.centroid), len(group), _num(fd_mean), label.value, members])

    # spectra up to the filter cutoff feed the spectral radius estimate
    files["spectra"] = out / "soi_spectra.csv"
    with open(files["spectra"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["soi_index", "frequency_hz", "magnitude"])
        for k, sp in enumerate(spectra):
            keep = sp.frequencies <= config.cutoff_hz
            for f, x in zip(sp.frequencies[keep], sp.magnitudes[keep]):
                w.writerow([k, _num(f), _num(x)])

    files["segments"] = out / "soi_segments.csv"
    with open(files["segments"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["soi_index"] + [f"v{i}" for i in range(MEL_BANDS * MEL_FRAMES)])
        for k, values in _segment_rows(sois, config):
            w.writerow([k] + [_num(v) for v in values.ravel()])

    summary = {
        "wav": Path(wav_path).name, "poses": Path(pose_path).name, "n_soi": len(sois), "n_synced": len(result.measurements),
        "n_groups": len(result.groups), "unmatched": result.unmatched, "fd_threshold": config.fd_threshold,
        "cutoff_hz": config.cutoff_hz, "subsurface_groups": sum(
            classify_region(float(np.mean([m.fd_value for m in g.measurements])), config.fd_threshold)
            is RegionLabel.SUBSURFACE_OBJECT for g in result.groups),
    }
    files["summary"] = _write_json(out / "analysis.json", summary)
    return files


# -- make-dataset -----------------------------------------------------------

def build_dataset(config: PipelineConfig) -> tuple[list[TrainingPair], dict]:
    """Run a synthetic survey through the front end and label every segment.

    Each SOI is matched to the true impact nearest its onset. The label is
    whether that tap hears a pipe echo and the depth is the echo path length.
    """
    scenario = scenario_for(config)
    trace, _, truth = generate_scenario(scenario)
    sois = run_front_end(trace, config)
    if not sois:
        raise NoSOIError("synthetic survey produced no impacts above the detection threshold")
    times = np.concatenate([np.asarray(t, dtype=float) for t in truth.impact_times])
    stop = np.repeat(np.arange(len(truth)), truth.impacts)
    pairs, dropped = [], 0
    for k, values in _segment_rows(sois, config):
        j = int(np.argmin(np.abs(times - sois[k].t_start)))
        if abs(times[j] - sois[k].t_start) > config.sync_tolerance:
            dropped += 1
            continue
        label = int(truth.pipe_in_view[stop[j]])
        depth = float(truth.echo_depths[stop[j]]) if label else None
        pairs.append(TrainingPair(values, label, depth))
    info = {"preset": config.preset, "seed": config.seed, "n_soi": len(sois), "n_pairs": len(pairs),
            "dropped": dropped, "total_impacts": truth.total_impacts,
            "positives": int(sum(p.pipe_label for p in pairs))}
    return pairs, info


def cmd_make_dataset(config: PipelineConfig, output_dir) -> dict:
    pairs, info = build_dataset(config)
    if not pairs:
        raise NoSOIError("no SOI could be matched to a ground-truth impact")
    out = _out_dir(output_dir)
    files = {"dataset": write_dataset(out / "dataset.csv", pairs)}
    files["summary"] = _write_json(out / "dataset.json", info)
    return files


# -- train ------------------------------------------------------------------

def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    if n > 1:
        n_test = min(max(n_test, 1), n - 1)
    else:
        n_test = 0
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _estimator(config: PipelineConfig) -> JointPipeDepthModel:
    return JointPipeDepthModel(
        channels=config.channels, kernels=config.kernels, w0=config.w0, w1=config.w1,
        learning_rate=config.learning_rate, batch_size=config.batch_size, epochs=config.epochs,
        depth_supervision=config.depth_supervision, seed=config.seed,
    )


def evaluate(est: JointPipeDepthModel, X, y, d, supervision: str, train_depths) -> dict:
    if len(X) == 0:
        return {"n_test": 0}
    proba, depth = est._forward(X)
    pred = np.argmax(proba, axis=1)
    mask = depth_mask(y, d, supervision)
    metrics = {"n_test": int(len(X)), "accuracy": float(np.mean(pred == y))}
    train_depths = train_depths[np.isfinite(train_depths)]
    if mask.any():
        metrics["depth_mae"] = float(np.mean(np.abs(depth[mask] - d[mask])))
        if train_depths.size:
            metrics["baseline_depth_mae"] = float(np.mean(np.abs(train_depths.mean() - d[mask])))
    return metrics


def cmd_train(dataset_path, config: PipelineConfig, output_dir) -> dict:
    pairs = read_dataset(dataset_path)
    X, y, d = stack_pairs(pairs)
    train_idx, test_idx = split_indices(len(pairs), config.test_fraction, config.seed)
    est = _estimator(config)
    est.fit(X[train_idx], y[train_idx], d[train_idx])
    if not np.all(np.isfinite(est.loss_history_)):
        raise NumericalFailureError(f"training diverged (loss {est.loss_history_[-1]}); lower the learning rate")
    d_train = np.where(depth_mask(y[train_idx], d[train_idx], config.depth_supervision), d[train_idx], np.nan)
    metrics = evaluate(est, X[test_idx], y[test_idx], d[test_idx], config.depth_supervision, d_train)
    metrics.update(n_train=int(len(train_idx)), epochs=config.epochs, learning_rate=config.learning_rate,
                   seed=config.seed, final_loss=est.loss_history_[-1] if est.loss_history_ else None)
    out = _out_dir(output_dir)
    files = {"checkpoint": save_checkpoint(out / "model.ckpt", est.model_, {"scale": list(est.scale_)})}
    files["initial"] = save_checkpoint(out / "model_init.ckpt", est.initial_model_, {"scale": list(est.scale_)})
    files["loss"] = out / "loss_history.csv"
    with open(files["loss"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for k, v in enumerate(est.loss_history_, start=1):
            w.writerow([k, _num(v)])
    files["metrics"] = _write_json(out / "metrics.json", metrics)
    files["metrics_values"] = metrics
    return files


# -- backproject ------------------------------------------------------------

def read_tap_groups(path) -> list[dict]:
    groups = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.DictReader(fh)):
            try:
                groups.append({
                    "group": int(row["group"]),
                    "centroid": np.array([float(row["x"]), float(row["y"]), float(row["z"])]),
                    "label": RegionLabel(row["label"]),
                    "members": [int(v) for v in row["soi_indices"].split(";") if v != ""],
                })
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}: record {k}: {exc}") from exc
    return groups


def read_soi_spectra(path) -> dict[int, Spectrum]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = {}
    for k in np.unique(data[:, 0]).astype(int):
        rows = data[data[:, 0] == k]
        out[int(k)] = Spectrum(rows[:, 1], rows[:, 2])
    return out


def read_soi_segments(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.zeros(0, dtype=int), np.zeros((0, MEL_BANDS, MEL_FRAMES))
    return data[:, 0].astype(int), data[:, 1:].reshape(-1, MEL_BANDS, MEL_FRAMES)


def spectral_radii(groups, spectra, config: PipelineConfig) -> tuple[np.ndarray, float]:
    """Median echo radius over each group's SOIs and the largest half-bin radius error."""
    radii, tol = [], 0.0
    for g in groups:
        values = []
        for k in g["members"]:
            sp = spectra.get(k)
            if sp is None:
                continue
            try:
                r = estimate_radius(sp, config.wave_speed, config.band)
            except NoPeakError:
                continue
            values.append(r)
            tol = max(tol, radius_bin_tolerance(r, sp.bin_width, config.wave_speed))
        radii.append(float(np.median(values)) if values else np.nan)
    return np.array(radii), tol


def model_radii(groups, segments, checkpoint) -> np.ndarray:
    model, extra = load_checkpoint(checkpoint)
    mu, sd = extra.get("scale", (0.0, 1.0))
    index, X = segments
    if len(X):
        index, _, depth = aggregate_segments(*predict_batches(model, (X - mu) / sd), index)
    else:
        depth = np.zeros(0)
    radii = []
    for g in groups:
        values = depth[np.isin(index, g["members"])]
        radii.append(float(np.median(values)) if values.size else np.nan)
    return np.array(radii)


def survey_grid(centres, max_radius: float, resolution: float) -> VoxelGrid:
    """Grid over the taps widened by the largest radius, from that depth up to the surface.

    A horizontal axis along which all taps coincide is collapsed to one
    voxel layer: such a line of taps only constrains the vertical section
    through it, so the image is that section.
    """
    reach = max_radius + 2 * resolution
    lo = np.empty(3)
    dims = [0, 0, 0]
    for a in range(2):
        c_lo, c_hi = centres[:, a].min(), centres[:, a].max()
        if c_hi - c_lo < resolution:
            lo[a] = 0.5 * (c_lo + c_hi) - 0.5 * resolution
            dims[a] = 1
        else:
            lo[a] = np.floor((c_lo - reach) / resolution) * resolution
            dims[a] = int(np.ceil((c_hi + reach - lo[a]) / resolution - 1e-9))
    top = float(np.max(centres[:, 2]))
    lo[2] = top - np.ceil(reach / resolution) * resolution
    dims[2] = int(round((top - lo[2]) / resolution))
    return VoxelGrid(lo, resolution, tuple(dims))


def cmd_backproject(analysis_dir, config: PipelineConfig, output_dir=None, checkpoint=None) -> dict:
    src = Path(analysis_dir)
    out = _out_dir(output_dir if output_dir is not None else src)
    source = config.radius_source
    groups = [g for g in read_tap_groups(src / "tap_groups.csv") if g["label"] is RegionLabel.SUBSURFACE_OBJECT]
    bin_tol = 0.0
    if groups and source == "spectral":
        radii, bin_tol = spectral_radii(groups, read_soi_spectra(src / "soi_spectra.csv"), config)
    elif groups:
        if checkpoint is None:
            raise ValueError("--radius-source model needs --checkpoint")
        radii = model_radii(groups, read_soi_segments(src / "soi_segments.csv"), checkpoint)
    else:
        radii = np.zeros(0)
    ok = np.isfinite(radii) & (radii > 0)
    if groups and not ok.all():
        warnings.warn(f"{int((~ok).sum())} subsurface groups have no usable radius and were skipped")
    groups = [g for g, keep in zip(groups, ok) if keep]
    radii = radii[ok]

    files = {"targets": out / f"targets_{source}.csv", "voxels": out / f"voxels_{source}.ply"}
    meta = {"radius_source": source, "n_groups": len(groups), "radii": [float(r) for r in radii]}
    if not groups:
        warnings.warn("no SUBSURFACE_OBJECT tap groups; the target list is empty")
        targets = []
        grid = VoxelGrid(np.zeros(3), config.grid_res, (1, 1, 1))
    else:
        centres = np.array([g["centroid"] for g in groups])
        tol = config.shell_tol if config.shell_tol is not None else max(bin_tol, config.grid_res)
        grid = back_project(centres, radii, survey_grid(centres, float(radii.max()), config.grid_res), tol)
        targets = extract_targets(grid, config.target_fraction)
        meta.update(shell_tolerance=tol, argmax=[float(v) for v in grid.argmax_center()])
    with open(files["targets"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "x", "y", "z", "radius_source"])
        for k, t in enumerate(targets):
            w.writerow([k, *(_num(c) for c in t), source])
    meta["exported_voxels"] = write_voxel_ply(files["voxels"], grid, config.voxel_export_fraction)
    files["summary"] = _write_json(out / f"backproject_{source}.json", meta)
    files["target_points"] = targets
    return files


# -- argument parsing -------------------------------------------------------

FLAG_FIELDS = {
    "seed": "seed", "cutoff_hz": "cutoff_hz", "fd_threshold": "fd_threshold", "wave_speed": "wave_speed",
    "grid_res": "grid_res", "shell_tol": "shell_tol", "radius_source": "radius_source", "preset": "preset",
    "noise_std": "noise_std", "epochs": "epochs", "lr": "learning_rate", "wav_format": "wav_format",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML settings file (falls back to $ECHOMAP_CONFIG)")
    p.add_argument("--seed", type=int)
    p.add_argument("--cutoff-hz", type=float)
    p.add_argument("--fd-threshold", type=float)
    p.add_argument("--wave-speed", type=float)
    p.add_argument("--grid-res", type=float)
    p.add_argument("--shell-tol", type=float)
    p.add_argument("--radius-source", choices=RADIUS_SOURCES)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="echomap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic survey (WAV, poses, ground truth)")
    _common(p)
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--wav-format", choices=("pcm16", "float32"))

    p = sub.add_parser("analyze", help="FD map and per-SOI report from a recording and its poses")
    _common(p)
    p.add_argument("wav")
    p.add_argument("poses")

    p = sub.add_parser("make-dataset", help="labelled mel segments from a synthetic survey")
    _common(p)
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--noise-std", type=float)

    p = sub.add_parser("train", help="train the joint pipe/depth model on a dataset CSV")
    _common(p)
    p.add_argument("dataset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)

    p = sub.add_parser("backproject", help="locate targets from an analysis directory")
    _common(p)
    p.add_argument("analysis_dir")
    p.add_argument("--checkpoint", help="model checkpoint for --radius-source model")
    return parser


def config_from_args(args) -> PipelineConfig:
    overrides = {field: getattr(args, flag) for flag, field in FLAG_FIELDS.items() if hasattr(args, flag)}
    return load_config(args.config, overrides)


def _dispatch(args, config: PipelineConfig) -> None:
    if args.command == "synth":
        files = cmd_synth(config, args.out or ".")
        print(f"wrote {files['wav']}, {files['poses']}, {files['ground_truth']}")
    elif args.command == "analyze":
        files = cmd_analyze(args.wav, args.poses, config, args.out or ".")
        summary = json.loads(Path(files["summary"]).read_text())
        print(f"{summary['n_soi']} SOIs in {summary['n_groups']} tap groups, "
              f"{summary['subsurface_groups']} labelled {RegionLabel.SUBSURFACE_OBJECT.value}")
    elif args.command == "make-dataset":
        files = cmd_make_dataset(config, args.out or ".")
        print(f"wrote {files['dataset']}")
    elif args.command == "train":
        files = cmd_train(args.dataset, config, args.out or ".")
        m = files["metrics_values"]
        line = f"held-out accuracy {m.get('accuracy', float('nan')):.4f}"
        if "depth_mae" in m:
            line += f", depth MAE {m['depth_mae']:.4f} m (mean-depth baseline {m['baseline_depth_mae']:.4f} m)"
        print(line)
    elif args.command == "backproject":
        files = cmd_backproject(args.analysis_dir, config, args.out, args.checkpoint)
        print(f"{len(files['target_points'])} targets written to {files['targets']}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        config = config_from_args(args)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            _dispatch(args, config)
    except NoSOIError as exc:
        print(f"echomap: {exc}", file=sys.stderr)
        return EXIT_NO_SOI
    except (NumericalFailureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"echomap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"echomap: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"echomap: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"echomap: warning: {message}", file=sys.stderr)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
