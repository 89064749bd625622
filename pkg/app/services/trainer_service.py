# app/services/trainer_service.py - Joint multitask training, evaluation and run records
"""
One iteration draws a batch for every task, sums the per-task batch-mean losses in
ascending task order, runs a single backward pass on the sum and applies one Adam update
to every trainable parameter.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core import autodiff as ad
from app.core.config import settings
from app.core.exceptions import ContractError
from app.core.monitoring import TrainingMonitor
from app.core.rng import Rng
from app.models.dataset import LossKind, SplitName, TaskDataset
from app.models.multitask import Mode, MultitaskModel
from app.models.ordering import ScalingTensor
from app.schemas.training import EvalReport, TaskMetrics, TrainConfig
from app.services.optimizer import Adam

logger = logging.getLogger(__name__)

LOSS_OPS = {
    LossKind.BCE: ad.bce_loss,
    LossKind.CE: ad.ce_loss,
    LossKind.MSE: ad.mse_loss,
}


def loss_node(kind, prediction: ad.Node, target) -> ad.Node:
    return LOSS_OPS[LossKind(kind)](prediction, target)


def compute_loss(kind, prediction, target) -> float:
    """Batch-mean loss of a prediction tensor against its targets"""
    return float(loss_node(kind, ad.constant(prediction), target).value)


# ========================================
# RUN RECORD
# ========================================

@dataclass
class RunRecord:
    seed: int
    train_losses: List[Tuple[int, int, float]] = field(default_factory=list)   # (iteration, task, loss)
    evaluations: List[Tuple[int, EvalReport]] = field(default_factory=list)
    scaling_snapshots: List[Tuple[int, ScalingTensor]] = field(default_factory=list)
    final_test: Optional[EvalReport] = None
    wall_clock_seconds: float = 0.0
    monitor: dict = field(default_factory=dict)

    @property
    def final_scaling(self) -> Optional[ScalingTensor]:
        return self.scaling_snapshots[-1][1] if self.scaling_snapshots else None

    @property
    def final_evaluation(self) -> Optional[EvalReport]:
        return self.evaluations[-1][1] if self.evaluations else None

    def training_loss_by_iteration(self) -> Dict[int, float]:
        """Summed training loss over tasks per iteration"""
        totals: Dict[int, float] = {}
        for iteration, _, loss in self.train_losses:
            totals[iteration] = totals.get(iteration, 0.0) + loss
        return totals


def record_to_rows(record: RunRecord) -> List[Dict]:
    """Metrics CSV rows: iteration, task_id, split, loss, accuracy"""
    rows = [
        {"iteration": it, "task_id": task, "split": "train_batch", "loss": loss, "accuracy": None}
        for it, task, loss in record.train_losses
    ]
    reports = list(record.evaluations)
    if record.final_test is not None:
        reports.append((reports[-1][0] if reports else 0, record.final_test))
    for iteration, report in reports:
        for metrics in report.tasks:
            rows.append({
                "iteration": iteration,
                "task_id": metrics.task_id,
                "split": metrics.split,
                "loss": metrics.loss,
                "accuracy": metrics.accuracy,
            })
    return rows


# ========================================
# BATCHES AND STEPS
# ========================================

def draw_batches(datasets: Sequence[TaskDataset], batch_size: int, rng: Rng,
                 synchronized: bool = False) -> List[np.ndarray]:
    """With-replacement index draws, one vector per task in ascending task order"""
    for ds in datasets:
        if len(ds.train) == 0:
            raise ContractError(f"task {ds.name} has an empty training split")
    if synchronized:
        indices = rng.integers(0, len(datasets[0].train), size=batch_size)
        return [indices for _ in datasets]
    return [rng.integers(0, len(ds.train), size=batch_size) for ds in datasets]


def inputs_synchronizable(model: MultitaskModel, datasets: Sequence[TaskDataset]) -> bool:
    """Shared encoder and identical training inputs across tasks"""
    if not model.shares_encoder():
        return False
    first = datasets[0].train.inputs
    return all(ds.train.inputs.shape == first.shape and np.array_equal(ds.train.inputs, first)
               for ds in datasets[1:])


def multitask_step(model: MultitaskModel, datasets: Sequence[TaskDataset], optimizer: Adam, rng: Rng,
                   batch_size: int, batches: Optional[Sequence[np.ndarray]] = None,
                   synchronized: bool = False) -> List[float]:
    """One joint update; returns the per-task batch losses (before the update)"""
    if len(datasets) != model.num_tasks:
        raise ContractError(f"{len(datasets)} datasets for a {model.num_tasks}-task model")
    if batches is None:
        batches = draw_batches(datasets, batch_size, rng, synchronized)
    losses = []
    for task, (ds, idx) in enumerate(zip(datasets, batches)):
        batch = ds.train.take(idx)
        prediction = model.forward(task, batch.inputs, Mode.TRAIN, rng)
        losses.append(loss_node(ds.loss_kind, prediction, batch.targets))
    total = ad.sum_nodes(losses)
    grads = ad.backward(total, wrt=optimizer.params)
    optimizer.step(grads)
    return [float(node.value) for node in losses]


# ========================================
# EVALUATION
# ========================================

def _accuracy(kind: LossKind, prediction: np.ndarray, targets: np.ndarray) -> Optional[float]:
    if kind is LossKind.BCE:
        return float(np.mean((prediction > 0.5).astype(float) == targets))
    if kind is LossKind.CE:
        return float(np.mean(prediction.argmax(axis=1) == targets))
    return None


def evaluate(model: MultitaskModel, datasets: Sequence[TaskDataset], split) -> EvalReport:
    """Eval-mode loss and accuracy per task plus the summed overall loss"""
    split = SplitName(split)
    tasks = []
    chunk = max(1, settings.EVAL_BATCH_SIZE)
    for task, ds in enumerate(datasets):
        data = ds.split(split)
        if data is None or len(data) == 0:
            raise ContractError(f"task {ds.name} has an empty {split.value} split")
        outputs = [model.predict(task, data.inputs[start:start + chunk]) for start in range(0, len(data), chunk)]
        prediction = np.concatenate(outputs, axis=0)
        tasks.append(TaskMetrics(
            task_id=task,
            split=split.value,
            loss=compute_loss(ds.loss_kind, prediction, data.targets),
            accuracy=_accuracy(ds.loss_kind, prediction, data.targets),
            samples=len(data),
        ))
    return EvalReport(split=split.value, tasks=tasks, overall_loss=float(sum(t.loss for t in tasks)))


def _periodic_split(datasets: Sequence[TaskDataset]) -> SplitName:
    names = {ds.eval_split_name() for ds in datasets}
    for name in (SplitName.VALIDATION, SplitName.TEST, SplitName.TRAIN):
        if name in names and all(ds.has_split(name) for ds in datasets):
            return name
    return SplitName.TRAIN


# ========================================
# TRAINING LOOP
# ========================================

def check_train_config(config: TrainConfig) -> None:
    if config.iterations < 1:
        raise ContractError(f"iterations must be >= 1, got {config.iterations}")
    if config.batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {config.batch_size}")
    if config.dropout_rate is not None and not 0.0 <= config.dropout_rate < 1.0:
        raise ContractError(f"dropout_rate must be in [0, 1), got {config.dropout_rate}")
    if config.eval_every < 1:
        raise ContractError(f"eval_every must be >= 1, got {config.eval_every}")


def train(model: MultitaskModel, datasets: Sequence[TaskDataset], config: TrainConfig,
          run_name: str = "run") -> RunRecord:
    """Run config.iterations joint steps, evaluating every eval_every iterations"""
    check_train_config(config)
    if not datasets:
        raise ContractError("train needs at least one dataset")
    if len(datasets) != model.num_tasks:
        raise ContractError(f"{len(datasets)} datasets for a {model.num_tasks}-task model")
    if config.dropout_rate is not None:
        model.dropout_rate = config.dropout_rate

    rng = Rng(config.seed).spawn("train")
    optimizer = Adam(model.trainable_parameters(), config.optimizer)
    monitor = TrainingMonitor(run_name)
    record = RunRecord(seed=config.seed)
    synchronized = inputs_synchronizable(model, datasets)
    split = _periodic_split(datasets)
    logger.info(
        f"[{run_name}] training {model.ordering.mode.value} model: T={model.num_tasks} D={model.depth} "
        f"params={model.parameter_count()} iterations={config.iterations} synchronized={synchronized}"
    )

    def checkpoint(iteration: int):
        report = evaluate(model, datasets, split)
        monitor.record_evaluation()
        record.evaluations.append((iteration, report))
        scaling = model.scaling()
        if scaling is not None:
            record.scaling_snapshots.append((iteration, scaling.copy()))
        logger.info(
            f"[{run_name}] it={iteration} {split.value} loss={report.overall_loss:.6f} "
            f"acc={report.mean_accuracy()}"
        )

    checkpoint(0)
    for iteration in range(1, config.iterations + 1):
        started = time.perf_counter()
        try:
            losses = multitask_step(model, datasets, optimizer, rng, config.batch_size,
                                    synchronized=synchronized)
        except Exception as e:
            monitor.record_error(str(e), iteration)
            raise
        monitor.record_step((time.perf_counter() - started) * 1000.0, sum(losses))
        for task, loss in enumerate(losses):
            record.train_losses.append((iteration, task, loss))
        logger.debug(f"[{run_name}] it={iteration} batch losses={losses}")
        if iteration % config.eval_every == 0 or iteration == config.iterations:
            checkpoint(iteration)

    if all(ds.has_split(SplitName.TEST) for ds in datasets) and split is not SplitName.TEST:
        record.final_test = evaluate(model, datasets, SplitName.TEST)
    record.wall_clock_seconds = monitor.elapsed_seconds()
    record.monitor = monitor.get_status()
    return record
