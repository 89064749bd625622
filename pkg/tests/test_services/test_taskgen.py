# tests/test_services/test_taskgen.py

import gzip
import struct

import numpy as np
import pytest

from app.core.exceptions import ContractError, DataFormatError
from app.core.rng import Rng
from app.models.dataset import LossKind
from app.services.glyph_tasks import gen_synthetic_glyph_tasks, render_strokes
from app.services.mnist_tasks import all_digit_pairs, load_idx, make_mnist_pair_tasks, write_idx
from app.services.pixel_tasks import make_pixel_tasks, pixel_coordinates, reconstruct_image, synthetic_images
from app.services.random_tasks import RandomTaskSpec, gen_random_tasks
from app.services.tabular_tasks import load_csv_task, min_max_scale


# ========================================
# RANDOM TASKS
# ========================================

def test_random_tasks_shapes_and_labels():
    tasks = gen_random_tasks(RandomTaskSpec(m=8, n=20, T=3, seed=5))
    assert [t.name for t in tasks] == ["random-0", "random-1", "random-2"]
    for task in tasks:
        assert task.train.inputs.shape == (20, 8)
        assert task.train.targets.shape == (20, 1)
        assert set(np.unique(task.train.targets)) <= {0.0, 1.0}
        assert task.train.inputs.min() >= 0.0 and task.train.inputs.max() < 1.0
        assert task.loss_kind is LossKind.BCE
        assert task.validation is None and task.test is None


def test_random_tasks_deterministic():
    a = gen_random_tasks(RandomTaskSpec(m=4, n=10, seed=1))
    b = gen_random_tasks(RandomTaskSpec(m=4, n=10, seed=1))
    c = gen_random_tasks(RandomTaskSpec(m=4, n=10, seed=2))
    np.testing.assert_array_equal(a[1].train.inputs, b[1].train.inputs)
    assert not np.array_equal(a[0].train.inputs, c[0].train.inputs)


@pytest.mark.parametrize("kwargs", [{"m": 0, "n": 5}, {"m": 4, "n": 0}, {"m": 4, "n": 5, "T": 1},
                                    {"m": 4, "n": 5, "nonlinearity": "sigmoid"}])
def test_random_task_spec_rejects(kwargs):
    with pytest.raises(ContractError):
        RandomTaskSpec(**kwargs)


# ========================================
# IDX / DIGIT PAIRS
# ========================================

def test_load_idx_scales_pixels(idx_pair):
    images, labels = load_idx(*idx_pair)
    assert images.shape == (60, 8, 8)
    assert labels.shape == (60,)
    assert images.max() == 1.0
    assert images.min() == 0.0
    assert labels.dtype == np.int64


def test_load_idx_reads_gzip(tmp_path, idx_pair):
    images_path, labels_path = idx_pair
    gz = tmp_path / "images.idx.gz"
    gz.write_bytes(gzip.compress(images_path.read_bytes()))
    plain, _ = load_idx(images_path, labels_path)
    zipped, _ = load_idx(gz, labels_path)
    np.testing.assert_array_equal(plain, zipped)


def test_load_idx_rejects_wrong_magic(tmp_path, idx_pair):
    _, labels_path = idx_pair
    bad = tmp_path / "bad.idx"
    bad.write_bytes(struct.pack(">IIII", 2052, 1, 2, 2) + bytes(4))
    with pytest.raises(DataFormatError) as exc:
        load_idx(bad, labels_path)
    assert exc.value.field == "images.magic"


def test_load_idx_rejects_truncated_pixels(tmp_path, idx_pair):
    images_path, labels_path = idx_pair
    short = tmp_path / "short.idx"
    short.write_bytes(images_path.read_bytes()[:-1])
    with pytest.raises(DataFormatError) as exc:
        load_idx(short, labels_path)
    assert exc.value.field == "images.shape"


def test_load_idx_rejects_count_mismatch(tmp_path):
    images, labels = tmp_path / "i.idx", tmp_path / "l.idx"
    write_idx(np.zeros((3, 2, 2)), np.zeros(2), images, labels)
    with pytest.raises(DataFormatError) as exc:
        load_idx(images, labels)
    assert exc.value.field == "labels.count"


def test_all_digit_pairs():
    pairs = all_digit_pairs()
    assert len(pairs) == 45
    assert all(a < b for a, b in pairs)


def test_mnist_pair_tasks(idx_pair):
    images, labels = load_idx(*idx_pair)
    tasks, seeds = make_mnist_pair_tasks(images, labels, k=4, seed=3)
    assert len(tasks) == len(seeds) == 4
    for task in tasks:
        a, b = task.metadata["pair"]
        assert a != b
        assert task.name == f"mnist-{a}v{b}"
        assert len(task.train) + len(task.test) == 12
        assert len(task.test) == 2
        assert task.input_shape == (8, 8)
        # row (label % 8) is lit in every image of that label, bar one column
        for x, y in zip(task.train.inputs, task.train.targets[:, 0]):
            digit = b if y == 1.0 else a
            assert np.count_nonzero(x[digit % 8] == 1.0) >= 7


def test_mnist_pair_tasks_deterministic(idx_pair):
    images, labels = load_idx(*idx_pair)
    first, s1 = make_mnist_pair_tasks(images, labels, k=2, seed=11)
    second, s2 = make_mnist_pair_tasks(images, labels, k=2, seed=11)
    assert s1 == s2
    assert [t.name for t in first] == [t.name for t in second]
    np.testing.assert_array_equal(first[0].test.inputs, second[0].test.inputs)


def test_mnist_pair_tasks_explicit_test_data(idx_pair):
    images, labels = load_idx(*idx_pair)
    tasks, _ = make_mnist_pair_tasks(images, labels, k=1, seed=0, test_images=images, test_labels=labels)
    assert len(tasks[0].train) == len(tasks[0].test) == 12


def test_mnist_missing_digit():
    images = np.zeros((4, 2, 2))
    with pytest.raises(ContractError):
        make_mnist_pair_tasks(images, np.zeros(4, dtype=np.int64), k=1, seed=0)


# ========================================
# CSV
# ========================================

def test_iris_split_and_scaling(iris_csv):
    task = load_csv_task(iris_csv, seed=0)
    assert len(task.train) == 120
    assert len(task.validation) == 30
    assert task.input_shape == (4,)
    assert task.output_shape == (3,)
    assert task.metadata["classes"] == ["setosa", "versicolor", "virginica"]
    assert task.train.inputs.min() == 0.0 and task.train.inputs.max() == 1.0
    assert task.validation.inputs.min() >= 0.0 and task.validation.inputs.max() <= 1.0
    assert task.loss_kind is LossKind.CE


def test_csv_same_seed_same_split(iris_csv):
    a, b = load_csv_task(iris_csv, seed=4), load_csv_task(iris_csv, seed=4)
    np.testing.assert_array_equal(a.validation.targets, b.validation.targets)


def test_constant_column_scales_to_zero():
    train = np.array([[1.0, 5.0], [3.0, 5.0]])
    scaled, other = min_max_scale(train, np.array([[2.0, 5.0], [9.0, 7.0]]))
    np.testing.assert_array_equal(scaled[:, 1], [0.0, 0.0])
    np.testing.assert_array_equal(other, [[0.5, 0.0], [1.0, 0.0]])


def test_many_class_output_size(tmp_path):
    lines = ["a,b,c,d,e,f,g,h,site"]
    sites = ["CYT", "NUC", "MIT", "ME3", "ME2", "ME1", "EXC", "VAC", "POX", "ERL"]
    r = Rng(0)
    for i in range(200):
        lines.append(",".join(f"{v:.2f}" for v in r.random(8)) + "," + sites[i % 10])
    path = tmp_path / "yeast.csv"
    path.write_text("\n".join(lines))
    task = load_csv_task(path, seed=0)
    assert task.output_shape == (10,)
    assert task.input_shape == (8,)


def test_numeric_labels_sorted_numerically(tmp_path):
    path = tmp_path / "numeric.csv"
    path.write_text("x,label\n0.1,10\n0.2,2\n0.3,1\n0.4,2\n")
    assert load_csv_task(path, seed=0).metadata["classes"] == ["1", "2", "10"]


@pytest.mark.parametrize("body, field", [
    ("x,y,label\n1,2,a\n3,b\n", "line 3"),
    ("x,y,label\n1,2,a\n3,oops,b\n", "line 3, column y"),
    ("x,y,label\n1,2,a\n", "rows"),
])
def test_malformed_csv(tmp_path, body, field):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataFormatError) as exc:
        load_csv_task(path, seed=0)
    assert exc.value.field == field


def test_csv_bad_ratio(iris_csv):
    with pytest.raises(DataFormatError):
        load_csv_task(iris_csv, seed=0, train_fraction=1.0)


# ========================================
# PIXELS
# ========================================

def test_pixel_coordinates_two_by_two():
    np.testing.assert_array_equal(pixel_coordinates(2, 2), [[0, 0], [1, 0], [0, 1], [1, 1]])


def test_pixel_tasks_reconstruct_losslessly():
    images = synthetic_images(2, 6, seed=1)
    tasks = make_pixel_tasks(images)
    assert [t.name for t in tasks] == ["pixels-0", "pixels-1"]
    for image, task in zip(images, tasks):
        assert task.loss_kind is LossKind.MSE
        assert len(task.train) == 36
        np.testing.assert_array_equal(reconstruct_image(task.train.targets, (6, 6)), image)


def test_pixel_tasks_reject_out_of_range():
    with pytest.raises(ContractError):
        make_pixel_tasks([np.full((2, 2), 1.5)])


# ========================================
# GLYPHS
# ========================================

def test_render_strokes_binary():
    image = render_strokes([0, 4], 16)
    assert image.shape == (16, 16)
    assert set(np.unique(image)) == {0.0, 1.0}


def test_glyph_tasks_shapes():
    tasks = gen_synthetic_glyph_tasks(T=2, classes=3, image_size=12, seed=0, channels=2,
                                      samples_per_class=10, test_fraction=0.2)
    for task in tasks:
        assert task.train.inputs.shape == (24, 2, 12, 12)
        assert task.test.inputs.shape == (6, 2, 12, 12)
        assert np.all(task.train.inputs[:, 1] == 0.0)
        assert task.output_shape == (3,)


def test_glyph_tasks_deterministic():
    a = gen_synthetic_glyph_tasks(T=2, classes=3, image_size=10, seed=4)
    b = gen_synthetic_glyph_tasks(T=2, classes=3, image_size=10, seed=4)
    np.testing.assert_array_equal(a[1].train.inputs, b[1].train.inputs)
    assert a[1].metadata == b[1].metadata


def test_glyphs_separable_by_nearest_centroid():
    task = gen_synthetic_glyph_tasks(T=1, classes=4, image_size=16, seed=2, samples_per_class=30)[0]
    x = task.train.inputs.reshape(len(task.train), -1)
    centroids = np.stack([x[task.train.targets == c].mean(axis=0) for c in range(4)])
    test = task.test.inputs.reshape(len(task.test), -1)
    predicted = np.argmin(((test[:, None, :] - centroids[None]) ** 2).sum(axis=2), axis=1)
    assert np.mean(predicted == task.test.targets) > 0.5


def test_glyph_tasks_reject_small_images():
    with pytest.raises(ContractError):
        gen_synthetic_glyph_tasks(T=1, classes=2, image_size=4, seed=0)
