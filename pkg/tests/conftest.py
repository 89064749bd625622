# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.core.ops import Activation  # noqa: E402
from app.core.rng import Rng  # noqa: E402
from app.models.adapters import Decoder, DecoderKind, Encoder, EncoderKind  # noqa: E402
from app.models.dataset import LossKind, Split, TaskDataset  # noqa: E402
from app.models.layers import CoreKind, CoreLayer  # noqa: E402
from app.models.multitask import MultitaskModel  # noqa: E402
from app.models.ordering import OrderingMode, OrderingSpec, sample_permutations  # noqa: E402
from app.services.mnist_tasks import write_idx  # noqa: E402


@pytest.fixture
def rng():
    return Rng(1234)


def make_dense_model(mode=OrderingMode.PARALLEL, T=2, D=3, m=4, out=1, seed=0,
                     activation=Activation.RELU, include_identity=False, dropout=0.0,
                     decoder=DecoderKind.DENSE_SIGMOID, permutations=None, gate="softmax", sweep_mode=False):
    """Small dense model with learned-dense encoders over m-dimensional inputs"""
    r = Rng(seed)
    core = [CoreLayer(j, CoreKind.DENSE, m, activation, r) for j in range(D)]
    encoders = [Encoder(f"encoder.{i}", EncoderKind.LEARNED_DENSE, m, m, rng=r) for i in range(T)]
    if decoder is DecoderKind.GLOBAL_AVERAGE_POOL:
        decoders = [Decoder(f"decoder.{i}", decoder) for i in range(T)]
    else:
        decoders = [Decoder(f"decoder.{i}", decoder, m, out, rng=r) for i in range(T)]
    mode = OrderingMode(mode)
    if mode is OrderingMode.PERMUTED and permutations is None:
        permutations = sample_permutations(T, D, r)
    ordering = OrderingSpec(mode, permutations=permutations if mode is OrderingMode.PERMUTED else None,
                            gate=gate, include_identity=include_identity, sweep_mode=sweep_mode)
    return MultitaskModel(core, encoders, decoders, ordering, dropout_rate=dropout, seed=seed)


@pytest.fixture
def dense_model():
    return make_dense_model


def binary_dataset(name="task", n=32, m=4, seed=0, with_test=False):
    r = Rng(seed)
    x = r.random((n, m))
    y = (x.sum(axis=1, keepdims=True) > m / 2).astype(float)
    test = Split(x[: n // 4], y[: n // 4]) if with_test else None
    return TaskDataset(name=name, train=Split(x, y), test=test, loss_kind=LossKind.BCE,
                       input_shape=(m,), output_shape=(1,), num_classes=2)


@pytest.fixture
def binary_tasks():
    def build(T=2, n=32, m=4, with_test=False):
        return [binary_dataset(f"task-{i}", n, m, seed=i, with_test=with_test) for i in range(T)]
    return build


@pytest.fixture
def idx_pair(tmp_path):
    """Tiny IDX files: 8x8 images, 6 samples of every digit, pixel value tied to the label"""
    labels = np.repeat(np.arange(10), 6).astype(np.uint8)
    images = np.zeros((len(labels), 8, 8), dtype=np.uint8)
    for i, label in enumerate(labels):
        images[i, label % 8, :] = 255
        images[i, :, (i % 8)] = 40 + 20 * int(label)
    images_path, labels_path = tmp_path / "images.idx", tmp_path / "labels.idx"
    write_idx(images, labels, images_path, labels_path)
    return images_path, labels_path


@pytest.fixture
def iris_csv(tmp_path):
    """Iris-shaped file: 4 features, 3 classes, 150 rows"""
    r = Rng(7)
    lines = ["sepal_length,sepal_width,petal_length,petal_width,species"]
    names = ["setosa", "versicolor", "virginica"]
    for i in range(150):
        cls = i % 3
        features = r.normal(4) * 0.3 + cls
        lines.append(",".join(f"{v:.3f}" for v in features) + f",{names[cls]}")
    path = tmp_path / "iris.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
