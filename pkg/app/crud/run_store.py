# app/crud/run_store.py - Run directory layout: per-cell artifacts and top-level results

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.exceptions import MissingArtifactError
from app.crud.checkpoint import save_checkpoint
from app.models.multitask import MultitaskModel
from app.services.trainer_service import RunRecord, record_to_rows
from app.utils.files import read_csv, write_csv_atomic, write_json_atomic
from app.utils.validation import ensure_within, validate_cell_name

logger = logging.getLogger(__name__)

CELLS_DIR = "cells"
METRICS_FILE = "metrics.csv"
RECORD_FILE = "record.json"
MODEL_FILE = "model.npz"
RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.json"
CONFIG_FILE = "config.json"

METRICS_COLUMNS = ["iteration", "task_id", "split", "loss", "accuracy"]
RESULTS_COLUMNS = ["cell", "mode", "axis", "value", "trial", "seed", "split", "loss", "accuracy"]


def cell_name(mode: str, axis: str, value: int, trial: int) -> str:
    return f"{mode}-{axis}{value}-trial{trial}"


def cell_dir(run_dir, name: str) -> Path:
    return ensure_within(run_dir, Path(run_dir) / CELLS_DIR / name)


# ========== RECORDS ==========

def record_summary(record: RunRecord, cell: Optional[Dict] = None) -> Dict:
    """JSON-ready RunRecord summary; scaling snapshots are nested lists"""
    final = record.final_test or record.final_evaluation
    return {
        "cell": cell or {},
        "seed": record.seed,
        "wall_clock_seconds": round(record.wall_clock_seconds, 3),
        "monitor": record.monitor,
        "final": final.model_dump() if final is not None else None,
        "evaluations": [{"iteration": it, "report": report.model_dump()} for it, report in record.evaluations],
        "scaling_snapshots": [{"iteration": it, "scales": np.asarray(S).tolist()} for it, S in record.scaling_snapshots],
    }


def save_cell(run_dir, name: str, record: RunRecord, model: MultitaskModel, cell: Dict) -> Path:
    target = cell_dir(run_dir, name)
    target.mkdir(parents=True, exist_ok=True)
    write_csv_atomic(target / METRICS_FILE, METRICS_COLUMNS, record_to_rows(record))
    write_json_atomic(target / RECORD_FILE, record_summary(record, cell))
    save_checkpoint(model, target / MODEL_FILE)
    return target


def list_cells(run_dir) -> List[Path]:
    base = Path(run_dir) / CELLS_DIR
    if not base.is_dir():
        raise MissingArtifactError(f"{run_dir} has no {CELLS_DIR}/ directory", field=CELLS_DIR)
    cells = sorted(p for p in base.iterdir() if p.is_dir() and validate_cell_name(p.name))
    if not cells:
        raise MissingArtifactError(f"{run_dir} contains no run cells", field=CELLS_DIR)
    return cells


def load_record(path) -> Dict:
    path = Path(path)
    record_path = path / RECORD_FILE if path.is_dir() else path
    if not record_path.exists():
        raise MissingArtifactError(f"missing {RECORD_FILE} in {path}", field=RECORD_FILE)
    return json.loads(record_path.read_text(encoding="utf-8"))


def load_scaling_snapshots(path) -> List[Tuple[int, np.ndarray]]:
    snapshots = load_record(path).get("scaling_snapshots") or []
    if not snapshots:
        raise MissingArtifactError(f"{path} holds no scaling snapshots (fixed-ordering run?)",
                                   field="scaling_snapshots")
    return [(int(item["iteration"]), np.array(item["scales"], dtype=np.float64)) for item in snapshots]


def load_metrics(path) -> List[Dict[str, str]]:
    metrics_path = Path(path) / METRICS_FILE
    if not metrics_path.exists():
        raise MissingArtifactError(f"missing {METRICS_FILE} in {path}", field=METRICS_FILE)
    return read_csv(metrics_path)


# ========== TOP LEVEL ==========

def write_results(run_dir, rows: List[Dict]) -> Path:
    return write_csv_atomic(Path(run_dir) / RESULTS_FILE, RESULTS_COLUMNS, rows)


def read_results(run_dir) -> List[Dict[str, str]]:
    path = Path(run_dir) / RESULTS_FILE
    if not path.exists():
        raise MissingArtifactError(f"missing {RESULTS_FILE} in {run_dir}", field=RESULTS_FILE)
    return read_csv(path)


def write_summary(run_dir, summary: Dict) -> Path:
    return write_json_atomic(Path(run_dir) / SUMMARY_FILE, summary)


def write_config(run_dir, config_json: Dict) -> Path:
    return write_json_atomic(Path(run_dir) / CONFIG_FILE, config_json)


def load_config_echo(run_dir) -> Dict:
    path = Path(run_dir) / CONFIG_FILE
    if not path.exists():
        raise MissingArtifactError(f"missing {CONFIG_FILE} in {run_dir}", field=CONFIG_FILE)
    return json.loads(path.read_text(encoding="utf-8"))
