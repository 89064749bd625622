# app/schemas/training.py - Training configuration and evaluation report schemas

from pydantic import BaseModel, ConfigDict, Field
from typing import Dict, List, Optional


class AdamConfig(BaseModel):
    """Adam hyperparameters (defaults are the canonical ones)"""
    lr: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, ge=0.0)

    model_config = ConfigDict(extra="forbid")


class TrainConfig(BaseModel):
    iterations: int = Field(..., ge=1)
    batch_size: int = Field(64, ge=1, description="samples per task per iteration")
    optimizer: AdamConfig = Field(default_factory=AdamConfig)
    dropout_rate: Optional[float] = Field(None, ge=0.0, lt=1.0, description="overrides the model's rate")
    eval_every: int = Field(100, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)

    model_config = ConfigDict(extra="forbid")


class TaskMetrics(BaseModel):
    task_id: int
    split: str
    loss: float
    accuracy: Optional[float] = None
    samples: int


class EvalReport(BaseModel):
    split: str
    tasks: List[TaskMetrics]
    overall_loss: float

    def mean_accuracy(self) -> Optional[float]:
        values = [t.accuracy for t in self.tasks if t.accuracy is not None]
        return sum(values) / len(values) if values else None

    def by_task(self) -> Dict[int, TaskMetrics]:
        return {t.task_id: t for t in self.tasks}
