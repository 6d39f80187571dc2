import csv
import json

import numpy as np
import pytest
from scipy.io import wavfile

from _builders import PIPE_DEPTH, PIPE_X
from echomap.cli import (
    EXIT_INPUT,
    EXIT_IO,
    EXIT_NO_SOI,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    main,
    survey_grid,
)
from echomap.config import CONFIG_ENV, ConfigError, PipelineConfig, load_config
from echomap.inference import load_checkpoint
from echomap.posegraph import read_trajectory_csv
from echomap.signal import read_wav
from echomap.synth import read_ground_truth_csv

SMALL_NET = {"channels": [4, 4], "kernels": [3, 3], "batch_size": 4}


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def survey(tmp_path_factory):
    root = tmp_path_factory.mktemp("survey")
    assert run("synth", "--out", root / "syn") == EXIT_OK
    assert run("analyze", root / "syn" / "recording.wav", root / "syn" / "trajectory.csv", "--out", root / "an") == EXIT_OK
    return root


@pytest.fixture(scope="module")
def five_tap(tmp_path_factory):
    root = tmp_path_factory.mktemp("five")
    assert run("synth", "--preset", "five-tap", "--out", root / "syn") == EXIT_OK
    assert run("analyze", root / "syn" / "recording.wav", root / "syn" / "trajectory.csv", "--out", root / "an") == EXIT_OK
    return root


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    assert run("make-dataset", "--preset", "default", "--out", root) == EXIT_OK
    (root / "net.json").write_text(json.dumps(SMALL_NET))
    return root


# -- configuration ----------------------------------------------------------

def test_flag_beats_file_beats_default(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"wave_speed": 800.0, "grid_res": 0.02}))
    cfg = load_config(path, {"wave_speed": 900.0, "cutoff_hz": None}, env={})
    assert cfg.wave_speed == 900.0
    assert cfg.grid_res == 0.02
    assert cfg.cutoff_hz == PipelineConfig().cutoff_hz


def test_env_var_is_file_fallback(tmp_path):
    pytest.importorskip("yaml")
    path = tmp_path / "cfg.yaml"
    path.write_text("fd_threshold: 5000000.0\n")
    assert load_config(None, {}, env={CONFIG_ENV: str(path)}).fd_threshold == 5e6
    other = tmp_path / "other.json"
    other.write_text('{"fd_threshold": 7e6}')
    assert load_config(other, {}, env={CONFIG_ENV: str(path)}).fd_threshold == 7e6


@pytest.mark.parametrize("values", [{"wave_speed": -1}, {"grid_res": 0}, {"nonsense": 1},
                                    {"band_low_hz": 3000.0}, {"radius_source": "magic"}, {"epochs": 1.5}])
def test_config_validation(values):
    with pytest.raises(ConfigError):
        load_config(None, values, env={})


def test_config_flags_reach_commands(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"cutoff_hz": -5}')
    assert run("synth", "--config", tmp_path / "bad.json", "--out", tmp_path) == EXIT_INPUT
    assert "cutoff_hz" in capsys.readouterr().err


# -- exit codes -------------------------------------------------------------

def test_exit_codes_are_distinct():
    codes = [EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NO_SOI, EXIT_NUMERICAL, EXIT_IO]
    assert len(set(codes)) == len(codes) and EXIT_OK == 0


def test_usage_error():
    assert run("nonsense") == EXIT_USAGE
    assert run("synth", "--seed", "abc") == EXIT_USAGE


def test_unwritable_output_names_path(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("synth", "--preset", "five-tap", "--out", blocker / "sub") == EXIT_IO
    assert str(blocker) in capsys.readouterr().err


def test_missing_input_is_io_error(tmp_path, capsys):
    assert run("analyze", tmp_path / "none.wav", tmp_path / "none.csv", "--out", tmp_path) == EXIT_IO
    assert "none.wav" in capsys.readouterr().err


def test_silent_wav_exits_with_no_soi(tmp_path, survey):
    wavfile.write(tmp_path / "silent.wav", 44100, np.zeros(44100 * 3, dtype=np.int16))
    code = run("analyze", tmp_path / "silent.wav", survey / "syn" / "trajectory.csv", "--out", tmp_path / "o")
    assert code == EXIT_NO_SOI


def test_malformed_pose_file(tmp_path, survey):
    (tmp_path / "poses.csv").write_text("when,where\n1,2\n")
    code = run("analyze", survey / "syn" / "recording.wav", tmp_path / "poses.csv", "--out", tmp_path / "o")
    assert code == EXIT_INPUT


# -- synth ------------------------------------------------------------------

def test_synth_default_files(survey):
    syn = survey / "syn"
    trace = read_wav(syn / "recording.wav")
    traj = read_trajectory_csv(syn / "trajectory.csv")
    assert trace.duration == pytest.approx(traj.duration, abs=1 / trace.sample_rate)
    meta = json.loads((syn / "scenario.json").read_text())
    assert meta["preset"] == "default"


def test_synth_seed_repeat_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--preset", "five-tap", "--seed", 7, "--out", tmp_path / name) == EXIT_OK
    for f in ("recording.wav", "trajectory.csv", "ground_truth.csv", "scenario.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert run("synth", "--preset", "five-tap", "--seed", 8, "--out", tmp_path / "c") == EXIT_OK
    assert (tmp_path / "c" / "recording.wav").read_bytes() != (tmp_path / "a" / "recording.wav").read_bytes()


def test_synth_paper_mirror_has_126_rows(tmp_path):
    assert run("synth", "--preset", "paper", "--out", tmp_path) == EXIT_OK
    gt = read_ground_truth_csv(tmp_path / "ground_truth.csv")
    assert len(gt) == 126
    assert sum(r["impacts"] for r in gt) == 406


# -- analyze ----------------------------------------------------------------

def test_analyze_finds_every_impact(survey):
    gt = read_ground_truth_csv(survey / "syn" / "ground_truth.csv")
    report = rows(survey / "an" / "soi_report.csv")
    assert len(report) == sum(r["impacts"] for r in gt)
    assert list(report[0]) == ["soi_index", "t_start", "fd", "psd", "label"]
    assert len(rows(survey / "an" / "fd_map.csv")) == len(report)
    assert len(rows(survey / "an" / "tap_groups.csv")) == len(gt)


def test_analyze_is_deterministic(survey, tmp_path):
    syn = survey / "syn"
    assert run("analyze", syn / "recording.wav", syn / "trajectory.csv", "--out", tmp_path) == EXIT_OK
    for f in (survey / "an").iterdir():
        if f.name.startswith(("targets_", "voxels_", "backproject_")):
            continue
        assert f.read_bytes() == (tmp_path / f.name).read_bytes(), f.name


def test_fd_threshold_flag_changes_labels(survey, tmp_path):
    syn = survey / "syn"
    run("analyze", syn / "recording.wav", syn / "trajectory.csv", "--fd-threshold", 1.0, "--out", tmp_path)
    assert {r["label"] for r in rows(tmp_path / "soi_report.csv")} == {"NORMAL"}


# -- make-dataset and train -------------------------------------------------

def test_make_dataset_matches_impacts(small_dataset):
    info = json.loads((small_dataset / "dataset.json").read_text())
    assert info["n_pairs"] == info["total_impacts"] == 72
    assert 0 < info["positives"] < info["n_pairs"]


def test_train_zero_lr_keeps_initialisation(small_dataset, tmp_path):
    code = run("train", small_dataset / "dataset.csv", "--config", small_dataset / "net.json",
               "--epochs", 1, "--lr", 0, "--out", tmp_path)
    assert code == EXIT_OK
    trained, _ = load_checkpoint(tmp_path / "model.ckpt")
    initial, _ = load_checkpoint(tmp_path / "model_init.ckpt")
    assert all(np.array_equal(trained.params[k], initial.params[k]) for k in trained.params)


def test_train_same_seed_same_metrics(small_dataset, tmp_path, capsys):
    for name in ("a", "b"):
        code = run("train", small_dataset / "dataset.csv", "--config", small_dataset / "net.json",
                   "--epochs", 2, "--lr", 0.02, "--seed", 3, "--out", tmp_path / name)
        assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "held-out accuracy" in out and "depth MAE" in out
    for f in ("metrics.json", "loss_history.csv", "model.ckpt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    metrics = json.loads((tmp_path / "a" / "metrics.json").read_text())
    assert metrics["n_test"] + metrics["n_train"] == 72 and metrics["n_test"] == round(0.2 * 72)


def test_train_malformed_record(tmp_path, small_dataset, capsys):
    lines = (small_dataset / "dataset.csv").read_text().splitlines()[:4]
    lines[3] = lines[3] + ",1.0"
    (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
    assert run("train", tmp_path / "bad.csv", "--out", tmp_path) == EXIT_INPUT
    assert "record 2" in capsys.readouterr().err


def test_train_divergence_is_numerical_failure(small_dataset, tmp_path):
    code = run("train", small_dataset / "dataset.csv", "--config", small_dataset / "net.json",
               "--epochs", 2, "--lr", 1e12, "--out", tmp_path)
    assert code == EXIT_NUMERICAL


# -- backproject ------------------------------------------------------------

def test_five_tap_target_near_pipe(five_tap):
    assert run("backproject", five_tap / "an") == EXIT_OK
    targets = rows(five_tap / "an" / "targets_spectral.csv")
    assert targets
    best = targets[0]
    x, z = float(best["x"]), float(best["z"])
    assert np.hypot(x - PIPE_X, z + PIPE_DEPTH) <= 2 * 0.01
    assert best["radius_source"] == "spectral"


def test_pipe_free_run_has_empty_targets(tmp_path, capsys):
    assert run("synth", "--preset", "no-pipe", "--out", tmp_path / "syn") == EXIT_OK
    syn = tmp_path / "syn"
    assert run("analyze", syn / "recording.wav", syn / "trajectory.csv", "--out", tmp_path / "an") == EXIT_OK
    assert run("backproject", tmp_path / "an") == EXIT_OK
    assert rows(tmp_path / "an" / "targets_spectral.csv") == []
    assert "warning" in capsys.readouterr().err


def test_radius_source_switch(five_tap, small_dataset, tmp_path):
    model_dir = tmp_path / "model"
    assert run("train", small_dataset / "dataset.csv", "--config", small_dataset / "net.json",
               "--epochs", 1, "--out", model_dir) == EXIT_OK
    out = tmp_path / "bp"
    assert run("backproject", five_tap / "an", "--out", out) == EXIT_OK
    code = run("backproject", five_tap / "an", "--radius-source", "model", "--checkpoint",
               model_dir / "model.ckpt", "--out", out)
    assert code == EXIT_OK
    for source in ("spectral", "model"):
        assert (out / f"targets_{source}.csv").exists() and (out / f"voxels_{source}.ply").exists()
        assert json.loads((out / f"backproject_{source}.json").read_text())["radius_source"] == source
        assert {r["radius_source"] for r in rows(out / f"targets_{source}.csv")} <= {source}


def test_model_source_needs_checkpoint(five_tap, tmp_path):
    assert run("backproject", five_tap / "an", "--radius-source", "model", "--out", tmp_path) == EXIT_INPUT


def test_shell_tol_and_grid_flags(five_tap, tmp_path):
    assert run("backproject", five_tap / "an", "--grid-res", 0.02, "--shell-tol", 0.005, "--out", tmp_path) == EXIT_OK
    meta = json.loads((tmp_path / "backproject_spectral.json").read_text())
    assert meta["shell_tolerance"] == 0.005
    assert json.loads((tmp_path / "voxels_spectral.ply.json").read_text())["resolution"] == 0.02


def test_survey_grid_collapses_tap_line():
    centres = np.array([[0.2, 0.2, 0.0], [0.3, 0.2, 0.0], [0.4, 0.2, 0.0]])
    grid = survey_grid(centres, 0.15, 0.01)
    assert grid.dims[1] == 1
    assert grid.axis_centers(1)[0] == pytest.approx(0.2)
    assert grid.origin[0] <= 0.2 - 0.15 and grid.origin[0] + grid.dims[0] * 0.01 >= 0.4 + 0.15
    assert grid.origin[2] + grid.dims[2] * 0.01 == pytest.approx(0.0)
    assert grid.origin[2] <= -0.15
    square = survey_grid(np.array([[0, 0, 0], [0.1, 0.1, 0]]), 0.1, 0.01)
    assert min(square.dims) > 1
