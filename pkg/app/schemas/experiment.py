# app/schemas/experiment.py - Declarative experiment configuration

import enum
import json
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.core.ops import Activation
from app.models.adapters import DecoderKind, EncoderKind
from app.models.layers import CoreKind
from app.models.ordering import Gate, OrderingMode
from app.schemas.training import TrainConfig


class ExperimentKind(str, enum.Enum):
    RANDOM_TASKS = "random-tasks"
    MNIST_PAIRS = "mnist-pairs"
    TABULAR = "tabular"
    GLYPHS = "glyphs"
    PIXEL_VIZ = "pixel-viz"
    TRACE_CHECK = "trace-check"


# ========================================
# BLOCKS
# ========================================

class ArchitectureConfig(BaseModel):
    depth: int = Field(4, ge=1, description="number of shared core layers D")
    layer: CoreKind = CoreKind.DENSE
    units: int = Field(32, ge=1, description="dense width or conv filter count")
    activation: Activation = Activation.RELU
    encoder: EncoderKind = EncoderKind.IDENTITY
    share_encoder: bool = False
    decoder: DecoderKind = DecoderKind.DENSE_SIGMOID
    share_decoder: bool = False
    orderings: List[OrderingMode] = Field(
        default_factory=lambda: [OrderingMode.PARALLEL, OrderingMode.PERMUTED, OrderingMode.SOFT]
    )
    gate: Gate = Gate.SOFTMAX
    include_identity: bool = False
    dropout: float = Field(0.0, ge=0.0, lt=1.0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("orderings")
    @classmethod
    def orderings_unique(cls, value):
        if not value:
            raise ValueError("at least one ordering mode is required")
        if len(set(value)) != len(value):
            raise ValueError("ordering modes must not repeat")
        return value

    @model_validator(mode="after")
    def identity_needs_dense_core(self):
        if self.include_identity and self.layer is CoreKind.CONV:
            raise ValueError("include_identity requires a dense core (conv layers change the spatial size)")
        return self


class DataConfig(BaseModel):
    mnist_images: Optional[Path] = None
    mnist_labels: Optional[Path] = None
    mnist_test_images: Optional[Path] = None
    mnist_test_labels: Optional[Path] = None
    csv_paths: List[Path] = Field(default_factory=list)
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    task_counts: List[int] = Field(default_factory=lambda: [2])
    sample_sizes: List[int] = Field(default_factory=list)
    input_dim: int = Field(16, ge=1)
    glyph_classes: int = Field(4, ge=2)
    glyph_size: int = Field(16, ge=8)
    glyph_samples_per_class: int = Field(20, ge=1)
    pixel_images: List[Path] = Field(default_factory=list)
    pixel_size: int = Field(16, ge=2)

    model_config = ConfigDict(extra="forbid")

    @field_validator("mnist_images", "mnist_labels", "mnist_test_images", "mnist_test_labels")
    @classmethod
    def file_exists(cls, value):
        if value is not None and not Path(value).exists():
            raise ValueError(f"path does not exist: {value}")
        return value

    @field_validator("csv_paths", "pixel_images")
    @classmethod
    def files_exist(cls, value):
        for path in value:
            if not Path(path).exists():
                raise ValueError(f"path does not exist: {path}")
        return value

    @field_validator("task_counts", "sample_sizes")
    @classmethod
    def positive_counts(cls, value):
        if any(v < 1 for v in value):
            raise ValueError("counts must be >= 1")
        return value


class TraceConfig(BaseModel):
    T: int = Field(5, ge=2)
    m: int = Field(8, ge=1)
    with_scalars: bool = True

    model_config = ConfigDict(extra="forbid")


# ========================================
# EXPERIMENT
# ========================================

class ExperimentConfig(BaseModel):
    """One experiment matrix: every (ordering mode x axis value x trial) cell is a run"""
    schema_version: int = Field(settings.SUMMARY_SCHEMA_VERSION, ge=1)
    kind: ExperimentKind
    name: str = Field(..., min_length=1, max_length=100)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    training: TrainConfig = Field(default_factory=lambda: TrainConfig(iterations=1000))
    trials: int = Field(1, ge=1)
    data: DataConfig = Field(default_factory=DataConfig)
    trace: TraceConfig = Field(default_factory=TraceConfig)
    output_dir: str = settings.OUTPUT_DIR
    workers: int = Field(settings.WORKERS, ge=1)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def kind_requirements(self):
        arch, data = self.architecture, self.data
        if arch.gate is Gate.SIGMOID and self.kind is not ExperimentKind.PIXEL_VIZ:
            raise ValueError("sigmoid gating is only permitted for pixel-viz experiments")
        if self.kind is ExperimentKind.MNIST_PAIRS and (data.mnist_images is None or data.mnist_labels is None):
            raise ValueError("mnist-pairs needs data.mnist_images and data.mnist_labels")
        if self.kind is ExperimentKind.TABULAR and not data.csv_paths:
            raise ValueError("tabular needs at least one entry in data.csv_paths")
        if self.kind is ExperimentKind.RANDOM_TASKS:
            if not data.sample_sizes:
                raise ValueError("random-tasks needs data.sample_sizes")
            if (arch.encoder is EncoderKind.IDENTITY and arch.layer is CoreKind.DENSE
                    and data.input_dim != arch.units):
                raise ValueError(f"identity encoder passes data.input_dim={data.input_dim} straight to the core, "
                                 f"which needs architecture.units={arch.units}")
        if self.kind is ExperimentKind.PIXEL_VIZ:
            if arch.orderings != [OrderingMode.SOFT]:
                raise ValueError("pixel-viz trains soft ordering only")
            if arch.decoder is not DecoderKind.GLOBAL_AVERAGE_POOL:
                raise ValueError("pixel-viz needs the global-average-pool decoder")
            if arch.encoder is not EncoderKind.LEARNED_LINEAR or not arch.share_encoder:
                raise ValueError("pixel-viz needs one learned-linear encoder shared by every task "
                                 "(encoder: learned-linear, share_encoder: true)")
        return self

    def run_seed(self, trial: int) -> int:
        """Trials are seeded base_seed + trial_index"""
        return self.training.seed + trial


def _error_lines(error: ValidationError) -> List[str]:
    lines = []
    for item in error.errors():
        where = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{where}: {item['msg']}")
    return lines


def parse_experiment_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno} column {e.colno}: {e.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{source}: invalid config\n" + "\n".join(_error_lines(e)))


def load_experiment_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment config"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_experiment_config(path.read_text(encoding="utf-8"), source=str(path))


def experiment_json_schema() -> dict:
    return ExperimentConfig.model_json_schema()
