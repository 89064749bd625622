# app/services/experiment_service.py - Run experiment matrices: cells, trials, results and plots
"""
A run expands an ExperimentConfig into cells (ordering mode x axis value x trial). Each
cell builds its tasks and model from the trial seed, trains, and writes its artifacts under
<output_dir>/<name>/cells/. Cells of one trial share the seed, so every ordering mode starts
from the same core initialization and sees the same data.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import ContractError
from app.core.rng import Rng
from app.crud import run_store
from app.crud.dataset_export import export_jsonl
from app.models.dataset import TaskDataset
from app.models.layers import CoreKind
from app.models.ordering import OrderingMode, sample_permutations
from app.schemas.experiment import ExperimentConfig, ExperimentKind
from app.services.analysis_service import random_matrices, trace_diagnostic
from app.services.glyph_tasks import gen_synthetic_glyph_tasks
from app.services.mnist_tasks import load_idx, make_mnist_pair_tasks
from app.services.model_factory import build_model
from app.services.pixel_tasks import make_pixel_tasks, synthetic_images
from app.services.random_tasks import RandomTaskSpec, gen_random_tasks
from app.services.tabular_tasks import load_csv_task
from app.services.trainer_service import train
from app.utils.files import write_csv_atomic, write_text_atomic
from app.utils.images import read_pgm
from app.utils.svg import line_chart
from app.utils.validation import sanitize_filename

logger = logging.getLogger(__name__)

TRACE_FILE = "trace.csv"
TRACE_COLUMNS = ["T", "m", "residual", "normalized_residual", "min_abs_trace"]


# ========================================
# CELLS
# ========================================

@dataclass(frozen=True)
class Cell:
    mode: OrderingMode
    axis: str
    value: int
    trial: int
    seed: int

    @property
    def name(self) -> str:
        return run_store.cell_name(self.mode.value, self.axis, self.value, self.trial)

    def describe(self) -> Dict:
        return {"name": self.name, "mode": self.mode.value, "axis": self.axis, "value": self.value,
                "trial": self.trial, "seed": self.seed}


@dataclass
class CellResult:
    cell: Cell
    row: Dict
    loss_curve: List[Tuple[int, float]] = field(default_factory=list)


def experiment_axis(config: ExperimentConfig) -> Tuple[str, List[int]]:
    """The swept quantity of each experiment kind and its values"""
    data = config.data
    if config.kind is ExperimentKind.RANDOM_TASKS:
        return "n", list(data.sample_sizes)
    if config.kind is ExperimentKind.MNIST_PAIRS:
        return "k", list(data.task_counts)
    if config.kind is ExperimentKind.TABULAR:
        return "T", [len(data.csv_paths)]
    if config.kind is ExperimentKind.PIXEL_VIZ:
        return "T", [len(data.pixel_images) if data.pixel_images else data.task_counts[0]]
    if config.kind is ExperimentKind.GLYPHS:
        return "T", list(data.task_counts)
    raise ContractError(f"{config.kind.value} experiments have no training cells")


def plan_cells(config: ExperimentConfig) -> List[Cell]:
    axis, values = experiment_axis(config)
    return [
        Cell(mode, axis, value, trial, config.run_seed(trial))
        for value in values
        for trial in range(config.trials)
        for mode in config.architecture.orderings
    ]


# ========================================
# TASKS
# ========================================

class TaskSource:
    """Builds the datasets of a cell; file-backed data is read once per run"""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._mnist = None
        self._mnist_test = None
        self._pixel_images = None
        data = config.data
        if config.kind is ExperimentKind.MNIST_PAIRS:
            self._mnist = load_idx(data.mnist_images, data.mnist_labels)
            if data.mnist_test_images is not None and data.mnist_test_labels is not None:
                self._mnist_test = load_idx(data.mnist_test_images, data.mnist_test_labels)
        if config.kind is ExperimentKind.PIXEL_VIZ and data.pixel_images:
            self._pixel_images = [read_pgm(path) for path in data.pixel_images]

    def build(self, value: int, seed: int) -> Tuple[List[TaskDataset], Optional[List[int]]]:
        config, data, arch = self.config, self.config.data, self.config.architecture
        kind = config.kind
        if kind is ExperimentKind.RANDOM_TASKS:
            spec = RandomTaskSpec(m=data.input_dim, n=value, T=data.task_counts[0],
                                  nonlinearity=arch.activation, seed=seed)
            return gen_random_tasks(spec), None
        if kind is ExperimentKind.MNIST_PAIRS:
            images, labels = self._mnist
            test_images, test_labels = self._mnist_test if self._mnist_test else (None, None)
            return make_mnist_pair_tasks(images, labels, value, seed, test_images, test_labels)
        if kind is ExperimentKind.TABULAR:
            return [load_csv_task(path, seed, data.train_fraction) for path in data.csv_paths], None
        if kind is ExperimentKind.GLYPHS:
            channels = arch.units if arch.layer is CoreKind.CONV else 1
            return gen_synthetic_glyph_tasks(value, data.glyph_classes, data.glyph_size, seed, channels=channels,
                                             samples_per_class=data.glyph_samples_per_class), None
        if kind is ExperimentKind.PIXEL_VIZ:
            images = self._pixel_images or synthetic_images(value, data.pixel_size, seed)
            return make_pixel_tasks(images), None
        raise ContractError(f"{kind.value} experiments have no tasks")


# ========================================
# RUNNING
# ========================================

def final_row(cell: Cell, record) -> Dict:
    final = record.final_test or record.final_evaluation
    return {
        "cell": cell.name,
        "mode": cell.mode.value,
        "axis": cell.axis,
        "value": cell.value,
        "trial": cell.trial,
        "seed": cell.seed,
        "split": final.split,
        "loss": final.overall_loss,
        "accuracy": final.mean_accuracy(),
    }


def run_cell(config: ExperimentConfig, cell: Cell, source: TaskSource, run_dir: Path,
             export_data: bool = False) -> CellResult:
    try:
        datasets, encoder_seeds = source.build(cell.value, cell.seed)
        arch = config.architecture
        permutations = None
        if cell.mode is OrderingMode.PERMUTED:
            permutations = sample_permutations(len(datasets), arch.depth, Rng(cell.seed).spawn("permutations"))
        model = build_model(arch, datasets, cell.mode, Rng(cell.seed).spawn("model"), permutations,
                            encoder_seeds, seed=cell.seed)
        train_config = config.training.model_copy(update={"seed": cell.seed})
        record = train(model, datasets, train_config, run_name=cell.name)
        info = cell.describe()
        info["tasks"] = [ds.name for ds in datasets]
        info["image_shapes"] = [ds.metadata.get("image_shape") for ds in datasets]
        run_store.save_cell(run_dir, cell.name, record, model, info)
        if export_data:
            for ds in datasets:
                export_jsonl(ds, run_store.cell_dir(run_dir, cell.name) / "data" / f"{sanitize_filename(ds.name)}.jsonl")
    except Exception:
        logger.error(f"cell {cell.name} failed", exc_info=True)
        raise
    return CellResult(cell, final_row(cell, record), sorted(record.training_loss_by_iteration().items()))


def _stats(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    """Mean and sample standard deviation (0 for a single trial)"""
    if not values:
        return None, None
    array = np.asarray(values, dtype=np.float64)
    std = float(np.std(array, ddof=1)) if len(array) > 1 else 0.0
    return float(np.mean(array)), std


def summarize(config: ExperimentConfig, rows: Sequence[Dict]) -> Dict:
    """Per (mode, value) mean +- sample stddev over trials and pairwise mode differences"""
    axis, values = experiment_axis(config)
    modes = [mode.value for mode in config.architecture.orderings]
    cells = []
    means: Dict[Tuple[str, int], Optional[float]] = {}
    for value in values:
        for mode in modes:
            group = [r for r in rows if r["mode"] == mode and r["value"] == value]
            accuracies = [r["accuracy"] for r in group if r["accuracy"] is not None]
            acc_mean, acc_std = _stats(accuracies)
            loss_mean, loss_std = _stats([r["loss"] for r in group])
            means[(mode, value)] = acc_mean
            cells.append({
                "mode": mode, "axis": axis, "value": value, "trials": len(group),
                "accuracy_mean": acc_mean, "accuracy_std": acc_std,
                "loss_mean": loss_mean, "loss_std": loss_std,
            })
    differences = []
    for value in values:
        for a, b in itertools.combinations(modes, 2):
            if means[(a, value)] is not None and means[(b, value)] is not None:
                differences.append({"value": value, "modes": [a, b],
                                    "accuracy_difference": means[(a, value)] - means[(b, value)]})
    summary = {
        "schema_version": settings.SUMMARY_SCHEMA_VERSION,
        "name": config.name,
        "kind": config.kind.value,
        "axis": axis,
        "seeds": [config.run_seed(t) for t in range(config.trials)],
        "config": config.model_dump(mode="json"),
        "cells": cells,
        "pairwise_differences": differences,
    }
    if config.kind is ExperimentKind.RANDOM_TASKS and {"parallel", "permuted"} <= set(modes):
        summary["half_sample_comparison"] = [
            {"n": n, "permuted_accuracy": means[("permuted", n)], "parallel_accuracy_at_half": means[("parallel", n // 2)],
             "difference": means[("permuted", n)] - means[("parallel", n // 2)]}
            for n in values if n % 2 == 0 and n // 2 in values
        ]
    return summary


def write_plots(config: ExperimentConfig, run_dir: Path, summary: Dict, results: Sequence[CellResult]) -> None:
    axis = summary["axis"]
    series = {}
    for mode in config.architecture.orderings:
        points = [(c["value"], c["accuracy_mean"]) for c in summary["cells"]
                  if c["mode"] == mode.value and c["accuracy_mean"] is not None]
        if points:
            series[mode.value] = points
    write_text_atomic(run_dir / "accuracy.svg",
                      line_chart(series, title=f"{config.name}: final accuracy", x_label=axis, y_label="mean accuracy"))
    for mode in config.architecture.orderings:
        curves = {
            f"{axis}={r.cell.value}": [(float(it), loss) for it, loss in r.loss_curve]
            for r in results if r.cell.mode is mode and r.cell.trial == 0
        }
        write_text_atomic(run_dir / f"loss_{mode.value}.svg",
                          line_chart(curves, title=f"{mode.value}: summed training loss (trial 0)",
                                     x_label="iteration", y_label="loss"))


def _trace_row(T: int, m: int, seed: int, with_scalars: bool) -> Dict:
    diagnostic = trace_diagnostic(random_matrices(T, m, Rng(seed).spawn("trace", T, m)), with_scalars)
    return {
        "T": T, "m": m,
        "residual": diagnostic.residual,
        "normalized_residual": diagnostic.normalized_residual,
        "min_abs_trace": float(min(abs(t) for t in diagnostic.traces)),
    }


def run_trace_check(config: ExperimentConfig, run_dir: Path) -> Dict:
    """Residuals for every T in 2..trace.T and m in 2..trace.m"""
    grid = [(T, m) for T in range(2, config.trace.T + 1) for m in range(2, max(config.trace.m, 2) + 1)]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(_trace_row, T, m, config.training.seed, config.trace.with_scalars) for T, m in grid]
        rows = [future.result() for future in futures]
    write_csv_atomic(run_dir / TRACE_FILE, TRACE_COLUMNS, rows)
    summary = {
        "schema_version": settings.SUMMARY_SCHEMA_VERSION,
        "name": config.name,
        "kind": config.kind.value,
        "seeds": [config.training.seed],
        "config": config.model_dump(mode="json"),
        "max_residual": max(r["residual"] for r in rows),
        "max_normalized_residual": (max(r["normalized_residual"] for r in rows)
                                    if config.trace.with_scalars else None),
    }
    run_store.write_summary(run_dir, summary)
    return summary


def apply_overrides(config: ExperimentConfig, out_dir=None, seed: Optional[int] = None,
                    workers: Optional[int] = None) -> ExperimentConfig:
    update = {}
    if out_dir is not None:
        update["output_dir"] = str(out_dir)
    if workers is not None:
        update["workers"] = workers
    if seed is not None:
        update["training"] = config.training.model_copy(update={"seed": seed})
    return config.model_copy(update=update) if update else config


def run_directory(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / sanitize_filename(config.name)


def run_experiment(config: ExperimentConfig, export_data: bool = False) -> Dict:
    """Run every cell and write results.csv, summary.json, config.json and plots"""
    run_dir = run_directory(config)
    run_dir.mkdir(parents=True, exist_ok=True)
    run_store.write_config(run_dir, config.model_dump(mode="json"))
    logger.info(f"experiment {config.name} ({config.kind.value}) -> {run_dir}")
    if config.kind is ExperimentKind.TRACE_CHECK:
        return run_trace_check(config, run_dir)

    source = TaskSource(config)
    cells = plan_cells(config)
    logger.info(f"{len(cells)} cells, {config.workers} worker(s)")
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(run_cell, config, cell, source, run_dir, export_data) for cell in cells]
        results = [future.result() for future in futures]

    rows = [result.row for result in results]
    run_store.write_results(run_dir, rows)
    summary = summarize(config, rows)
    run_store.write_summary(run_dir, summary)
    write_plots(config, run_dir, summary, results)
    logger.info(f"experiment {config.name} finished: {len(rows)} cells")
    return summary
