# app/services/report_service.py - Post-run artifacts: scaling analysis and layer sweeps

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.core.exceptions import ConfigError, ContractError, MissingArtifactError
from app.crud import run_store
from app.crud.checkpoint import load_checkpoint
from app.schemas.experiment import ExperimentKind, load_experiment_config
from app.services.analysis_service import (
    divergence_series, hardness_series, layer_usage, strongest_path, usage_series,
)
from app.services.experiment_service import run_directory
from app.services.pixel_tasks import pixel_coordinates
from app.services.sweep_service import sweep_grid, sweep_strips
from app.utils.files import write_csv_atomic, write_json_atomic, write_text_atomic
from app.utils.images import tile_rows, write_pgm, write_png
from app.utils.svg import contact_sheet, heatmap, line_chart, path_diagram

logger = logging.getLogger(__name__)

ANALYSIS_DIR = "analysis"
SWEEP_DIR = "sweep"


def _layer_labels(candidates: int, depth: int) -> List[str]:
    labels = [f"layer {j}" for j in range(depth)]
    if candidates > depth:
        labels.append("identity")
    return labels


# ========================================
# RUN LOOKUP
# ========================================

def locate_run(run_dir=None, config_path=None) -> Path:
    """An explicit run directory, else the one the experiment config writes to"""
    if run_dir is not None:
        return Path(run_dir)
    if config_path is None:
        raise ConfigError("name a run directory or pass --config")
    return run_directory(load_experiment_config(config_path))


def trial_for_seed(run_dir, seed: int) -> int:
    """Trial index of the cells trained from seed (trials are seeded base + trial)"""
    echo = run_store.load_config_echo(run_dir)
    base, trials = echo.get("training", {}).get("seed", 0), echo.get("trials", 1)
    trial = seed - base
    if not 0 <= trial < trials:
        raise MissingArtifactError(f"seed {seed} was not used by {run_dir} (seeds {base}..{base + trials - 1})",
                                   field="cells")
    return trial


# ========================================
# ANALYZE
# ========================================


def analyze_cell(cell_path: Path, out_dir: Path) -> Dict:
    snapshots = run_store.load_scaling_snapshots(cell_path)
    final = snapshots[-1][1]
    tasks, candidates, depth = final.shape
    out_dir.mkdir(parents=True, exist_ok=True)

    usage = layer_usage(final)
    write_csv_atomic(out_dir / "usage.csv", ["layer", "depth", "usage"], [
        {"layer": j, "depth": k + 1, "usage": float(usage[j, k])} for j in range(candidates) for k in range(depth)
    ])
    write_text_atomic(out_dir / "usage.svg", heatmap(
        usage, _layer_labels(candidates, depth), [f"depth {k + 1}" for k in range(depth)],
        title=f"{cell_path.name}: layer usage",
    ))

    hardness = hardness_series(snapshots)
    divergence = divergence_series(snapshots)
    usage_over_time = usage_series(snapshots)
    columns = ["iteration", "hardness", "divergence_mean"] + [f"divergence_depth{k + 1}" for k in range(depth)]
    rows = []
    for (iteration, h), (_, d) in zip(hardness, divergence):
        row = {"iteration": iteration, "hardness": h, "divergence_mean": float(np.mean(d))}
        row.update({f"divergence_depth{k + 1}": float(d[k]) for k in range(depth)})
        rows.append(row)
    write_csv_atomic(out_dir / "series.csv", columns, rows)
    write_csv_atomic(out_dir / "usage_series.csv", ["iteration", "layer", "depth", "usage"], [
        {"iteration": it, "layer": j, "depth": k + 1, "usage": float(u[j, k])}
        for it, u in usage_over_time for j in range(candidates) for k in range(depth)
    ])
    write_text_atomic(out_dir / "series.svg", line_chart(
        {"hardness": [(float(r["iteration"]), r["hardness"]) for r in rows],
         "divergence": [(float(r["iteration"]), r["divergence_mean"]) for r in rows]},
        title=f"{cell_path.name}: ordering hardness and task divergence", x_label="iteration",
    ))

    paths = {}
    for task in range(tasks):
        path = strongest_path(final, task)
        paths[task] = path
        write_text_atomic(out_dir / f"path_task{task}.svg",
                          path_diagram(path, final[task], title=f"task {task}: strongest path"))
    report = {
        "cell": cell_path.name,
        "snapshots": len(snapshots),
        "initial_hardness": hardness[0][1],
        "final_hardness": hardness[-1][1],
        "initial_divergence": rows[0]["divergence_mean"],
        "final_divergence": rows[-1]["divergence_mean"],
        "strongest_paths": {str(task): path for task, path in paths.items()},
    }
    write_json_atomic(out_dir / "analysis.json", report)
    return report


def _soft_cells(run_dir: Path, seed: Optional[int]) -> List[Path]:
    cells = []
    for cell_path in run_store.list_cells(run_dir):
        record = run_store.load_record(cell_path)
        if not record.get("scaling_snapshots"):
            logger.debug(f"skipping {cell_path.name}: fixed ordering")
            continue
        if seed is not None and record.get("cell", {}).get("seed") != seed:
            continue
        cells.append(cell_path)
    return cells


def analyze_run(run_dir, out_dir=None, seed: Optional[int] = None, workers: int = 1) -> List[Dict]:
    """Analyze every cell with scaling snapshots; refuses runs that have none.

    Reports go to <out_dir>/<cell>/, by default <run_dir>/analysis/<cell>/. With a seed,
    only the cells trained from that seed are analyzed.
    """
    run_dir = Path(run_dir)
    base = Path(out_dir) if out_dir is not None else run_dir / ANALYSIS_DIR
    cells = _soft_cells(run_dir, seed)
    if not cells:
        which = "" if seed is None else f" for seed {seed}"
        raise MissingArtifactError(
            f"{run_dir} has no scaling snapshots{which}: only soft-ordering runs can be analyzed",
            field="scaling_snapshots",
        )
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(analyze_cell, cell_path, base / cell_path.name) for cell_path in cells]
        reports = [future.result() for future in futures]
    logger.info(f"analyzed {len(reports)} soft-ordering cell(s) in {run_dir}")
    return reports


# ========================================
# SWEEP
# ========================================

def find_soft_cell(run_dir: Path, trial: int) -> Path:
    for cell_path in run_store.list_cells(run_dir):
        if cell_path.name.startswith("soft-") and cell_path.name.endswith(f"-trial{trial}"):
            return cell_path
    raise MissingArtifactError(f"{run_dir} has no soft-ordering cell for trial {trial}", field="cells")


def sweep_run(run_dir, task: int, layer: int, depths: Optional[Sequence[int]] = None, steps: int = 8,
              trial: int = 0, out_dir=None, workers: int = 1) -> Dict:
    """PGM frames, a PNG/SVG contact sheet (rows = depth, columns = scale) and frame checksums.

    layer is 0-based, depths are 1-based; the default covers depths 1..min(3, D). Artifacts
    go to <out_dir>/task<t>-layer<l>/, by default under <run_dir>/sweep/.
    """
    run_dir = Path(run_dir)
    echo = run_store.load_config_echo(run_dir)
    if echo.get("kind") != ExperimentKind.PIXEL_VIZ.value:
        raise ConfigError(f"sweeps need a pixel-viz run, {run_dir} is {echo.get('kind')!r}")
    cell_path = find_soft_cell(run_dir, trial)
    model = load_checkpoint(cell_path / run_store.MODEL_FILE)
    shapes = run_store.load_record(cell_path)["cell"].get("image_shapes") or []
    if not 0 <= task < len(shapes) or shapes[task] is None:
        raise ContractError(f"task {task} has no recorded image shape in {cell_path.name}")
    image_shape = tuple(shapes[task])
    if depths is None:
        depths = list(range(1, min(3, model.depth) + 1))
    if any(not 1 <= d <= model.depth for d in depths):
        raise ContractError(f"depths must lie in 1..{model.depth}, got {list(depths)}")

    strips = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(sweep_strips, model, task, layer, [d - 1], steps, image_shape) for d in depths]
        for future in futures:
            strips.update(future.result())
    base = Path(out_dir) if out_dir is not None else run_dir / SWEEP_DIR
    out_dir = base / f"task{task}-layer{layer}"

    frames, checksums = [], {}
    for d in depths:
        for s, frame in enumerate(strips[d - 1]):
            path = write_pgm(out_dir / f"depth{d}-step{s}.pgm", frame)
            frames.append(str(path))
            checksums[path.name] = float(np.sum(frame))
    prediction = model.predict(task, pixel_coordinates(*image_shape)).reshape(image_shape)
    write_pgm(out_dir / "prediction.pgm", prediction)

    grid = sweep_grid(model, task, layer, depths[0] - 1, steps)
    columns = [f"{v:.2f}" for v in grid] if steps > 1 else ["trained"]
    rows = [strips[d - 1] for d in depths]
    write_text_atomic(out_dir / "contact.svg", contact_sheet(
        rows, [f"depth {d}" for d in depths], columns,
        title=f"task {task}, layer {layer}: inactive -> active",
    ))
    write_png(out_dir / "contact.png", tile_rows(rows), scale=4)
    report = {"cell": cell_path.name, "task": task, "layer": layer, "depths": list(depths), "steps": steps,
              "frames": frames, "checksums": checksums}
    write_json_atomic(out_dir / "sweep.json", report)
    logger.info(f"wrote {len(frames)} sweep frames to {out_dir}")
    return report
