# tests/test_acceptance.py - scaled-down end-to-end checks (pytest -m slow)

from pathlib import Path

import numpy as np
import pytest

from app.core.rng import Rng
from app.models.adapters import DecoderKind, EncoderKind
from app.models.layers import CoreKind
from app.models.ordering import Gate, OrderingMode, OrderingSpec, one_hot_scaling, sample_permutations
from app.schemas.experiment import ArchitectureConfig, load_experiment_config
from app.schemas.training import AdamConfig, TrainConfig
from app.services.analysis_service import mean_pairwise_distance, ordering_hardness
from app.services.experiment_service import run_experiment
from app.services.glyph_tasks import gen_synthetic_glyph_tasks
from app.services.model_factory import build_model
from app.services.optimizer import Adam
from app.services.pixel_tasks import make_pixel_tasks, pixel_coordinates, synthetic_images
from app.services.sweep_service import layer_sweep, sweep_grid, sweep_strips
from app.services.trainer_service import evaluate, inputs_synchronizable, multitask_step, train
from tests.conftest import make_dense_model

pytestmark = pytest.mark.slow


def test_soft_forward_matches_permuted_over_many_models():
    r = Rng(100)
    for trial in range(200):
        T, D, m = int(r.integers(1, 4)), int(r.integers(1, 5)), int(r.integers(1, 7))
        perms = sample_permutations(T, D, r)
        permuted = make_dense_model(OrderingMode.PERMUTED, T=T, D=D, m=m, seed=trial, permutations=perms)
        soft = permuted.with_ordering(OrderingSpec(OrderingMode.SOFT))
        x = r.random((3, m))
        for task in range(T):
            np.testing.assert_allclose(soft.predict(task, x, scales=one_hot_scaling(perms)),
                                       permuted.predict(task, x), rtol=0, atol=1e-9)


def test_soft_ordering_diverges_and_hardens_on_glyphs():
    arch = ArchitectureConfig(depth=4, units=32, encoder=EncoderKind.LEARNED_DENSE,
                              decoder=DecoderKind.DENSE_SOFTMAX, orderings=[OrderingMode.SOFT])
    distances, hardness = [], []
    for seed in range(5):
        tasks = gen_synthetic_glyph_tasks(T=2, classes=4, image_size=16, seed=seed)
        model = build_model(arch, tasks, OrderingMode.SOFT, Rng(seed).spawn("model"), seed=seed)
        record = train(model, tasks, TrainConfig(iterations=2000, batch_size=32, eval_every=500, seed=seed))
        final = record.final_scaling
        distances.append(float(np.mean(mean_pairwise_distance(final))))
        hardness.append(ordering_hardness(final))
    assert np.mean(distances) > 0.05
    assert np.mean(hardness) > 1 / 4 + 0.05


def _check_conv_checkpoint(model, tasks, perms):
    S = model.scaling()
    np.testing.assert_allclose(S.sum(axis=1), 1.0, atol=1e-12)
    permuted = model.with_ordering(OrderingSpec(OrderingMode.PERMUTED, permutations=perms))
    for task in range(len(tasks)):
        x = tasks[task].train.inputs[:4]
        np.testing.assert_allclose(model.predict(task, x, scales=one_hot_scaling(perms)), permuted.predict(task, x),
                                   rtol=0, atol=1e-9)


def test_conv_core_fits_glyphs_with_normalized_scales():
    arch = ArchitectureConfig(depth=4, layer=CoreKind.CONV, units=8, decoder=DecoderKind.DENSE_SOFTMAX,
                              orderings=[OrderingMode.SOFT])
    tasks = gen_synthetic_glyph_tasks(T=2, classes=4, image_size=16, seed=0, channels=8, samples_per_class=10)
    model = build_model(arch, tasks, OrderingMode.SOFT, Rng(0).spawn("model"))
    optimizer = Adam(model.trainable_parameters(), AdamConfig(lr=3e-3))
    rng = Rng(0).spawn("train")
    perms = [(3, 1, 0, 2), (0, 2, 1, 3)]
    _check_conv_checkpoint(model, tasks, perms)
    for iteration in range(1, 2001):
        multitask_step(model, tasks, optimizer, rng, batch_size=16)
        if iteration % 500 == 0:
            _check_conv_checkpoint(model, tasks, perms)
    report = evaluate(model, tasks, "train")
    for metrics in report.tasks:
        assert 1.0 - metrics.accuracy < 0.10


def test_pixel_sweep_endpoints_differ_and_trained_frame_is_exact():
    arch = ArchitectureConfig(depth=4, units=100, encoder=EncoderKind.LEARNED_LINEAR, share_encoder=True,
                              decoder=DecoderKind.GLOBAL_AVERAGE_POOL, gate=Gate.SIGMOID,
                              orderings=[OrderingMode.SOFT])
    shape = (12, 12)
    tasks = make_pixel_tasks(synthetic_images(2, 12, seed=0))
    model = build_model(arch, tasks, OrderingMode.SOFT, Rng(0))
    assert inputs_synchronizable(model, tasks)
    train(model, tasks, TrainConfig(iterations=300, batch_size=32, eval_every=100))
    assert evaluate(model, tasks, "train").overall_loss < 1.0

    strips = sweep_strips(model, 0, 1, [0, 1, 2], 8, shape)
    for frames in strips.values():
        assert len(frames) == 8
        assert float(np.sum(frames[0])) != float(np.sum(frames[-1]))
    trained = layer_sweep(model, 0, 1, 0, sweep_grid(model, 0, 1, 0, 1), shape)[0]
    np.testing.assert_array_equal(trained, model.predict(0, pixel_coordinates(*shape)).reshape(shape))


# ========================================
# RANDOM TASKS
# ========================================

CONFIGS = Path(__file__).parent.parent / "configs"
SAMPLE_SIZES = [32, 64, 128, 256]


def run_random_tasks(tmp_path, name):
    config = load_experiment_config(CONFIGS / f"{name}.json")
    orderings = [OrderingMode.PARALLEL, OrderingMode.PERMUTED]
    architecture = config.architecture.model_copy(update={"orderings": orderings})
    config = config.model_copy(update={"architecture": architecture, "output_dir": str(tmp_path)})
    return run_experiment(config)


def test_permuted_fits_n_samples_as_well_as_parallel_fits_half(tmp_path):
    summary = run_random_tasks(tmp_path, "random-tasks")
    rows = {row["n"]: row for row in summary["half_sample_comparison"]}
    assert sorted(rows) == SAMPLE_SIZES
    for n in SAMPLE_SIZES:
        assert abs(rows[n]["difference"]) <= 0.03, rows[n]


def test_permuted_keeps_up_with_parallel_on_relu_core(tmp_path):
    summary = run_random_tasks(tmp_path, "random-tasks-relu")
    accuracy = {(c["mode"], c["value"]): c["accuracy_mean"] for c in summary["cells"]}
    for n in SAMPLE_SIZES:
        assert accuracy[("permuted", n)] >= accuracy[("parallel", n)] - 0.03
