# tests/test_analysis/test_report.py

import json

import numpy as np
import pytest

from app.core.exceptions import ConfigError, ContractError, MissingArtifactError
from app.schemas.experiment import ExperimentConfig
from app.services.experiment_service import run_directory, run_experiment
from app.services.report_service import analyze_run, sweep_run
from app.utils.images import read_pgm


def run_random(tmp_path, orderings):
    config = ExperimentConfig.model_validate({
        "kind": "random-tasks", "name": "analysis", "output_dir": str(tmp_path),
        "architecture": {"depth": 3, "units": 4, "orderings": orderings, "include_identity": True},
        "training": {"iterations": 4, "batch_size": 4, "eval_every": 2},
        "data": {"sample_sizes": [6], "input_dim": 4},
    })
    run_experiment(config)
    return run_directory(config)


def run_pixels(tmp_path):
    config = ExperimentConfig.model_validate({
        "kind": "pixel-viz", "name": "pixels", "output_dir": str(tmp_path),
        "architecture": {"depth": 2, "units": 4, "encoder": "learned-linear", "share_encoder": True,
                         "decoder": "global-average-pool", "gate": "sigmoid", "orderings": ["soft"],
                         "activation": "sigmoid"},
        "training": {"iterations": 2, "batch_size": 4, "eval_every": 1},
        "data": {"task_counts": [2], "pixel_size": 3},
    })
    run_experiment(config)
    return run_directory(config)


def test_analyze_soft_cells(tmp_path):
    run_dir = run_random(tmp_path, ["parallel", "soft"])
    reports = analyze_run(run_dir)
    assert [r["cell"] for r in reports] == ["soft-n6-trial0"]
    out = run_dir / "analysis" / "soft-n6-trial0"
    for name in ("usage.csv", "usage.svg", "series.csv", "usage_series.csv", "series.svg",
                 "path_task0.svg", "path_task1.svg", "analysis.json"):
        assert (out / name).exists()
    report = reports[0]
    assert report["snapshots"] == 3
    assert report["initial_hardness"] == pytest.approx(0.25)
    assert report["initial_divergence"] == 0.0
    assert len(report["strongest_paths"]["0"]) == 3
    usage_lines = (out / "usage.csv").read_text().splitlines()
    assert usage_lines[0] == "layer,depth,usage"
    assert len(usage_lines) == 1 + 4 * 3


def test_analyze_refuses_fixed_orderings(tmp_path):
    run_dir = run_random(tmp_path, ["parallel", "permuted"])
    with pytest.raises(MissingArtifactError):
        analyze_run(run_dir)


def test_analyze_missing_run(tmp_path):
    with pytest.raises(MissingArtifactError):
        analyze_run(tmp_path / "nothing")


def test_sweep_run_writes_frames(tmp_path):
    run_dir = run_pixels(tmp_path)
    report = sweep_run(run_dir, task=1, layer=0, depths=[1, 2], steps=3)
    out = run_dir / "sweep" / "task1-layer0"
    assert len(report["frames"]) == 6
    for name in ("prediction.pgm", "contact.svg", "contact.png", "sweep.json", "depth2-step2.pgm"):
        assert (out / name).exists()
    assert read_pgm(out / "depth1-step0.pgm").shape == (3, 3)
    saved = json.loads((out / "sweep.json").read_text())
    assert saved["checksums"] == report["checksums"]
    assert set(saved["checksums"]) == {f"depth{d}-step{s}.pgm" for d in (1, 2) for s in range(3)}
    assert all(np.isfinite(v) for v in saved["checksums"].values())


def test_sweep_default_depths(tmp_path):
    report = sweep_run(run_pixels(tmp_path), task=0, layer=1, steps=1)
    assert report["depths"] == [1, 2]
    assert len(report["frames"]) == 2


def test_sweep_rejects_other_kinds(tmp_path):
    with pytest.raises(ConfigError):
        sweep_run(run_random(tmp_path, ["soft"]), task=0, layer=0)


def test_sweep_rejects_bad_depth(tmp_path):
    with pytest.raises(ContractError):
        sweep_run(run_pixels(tmp_path), task=0, layer=0, depths=[3])
