# tests/test_services/test_model_factory.py

import numpy as np
import pytest

from app.core.exceptions import ContractError, DimensionError
from app.core.rng import Rng
from app.models.adapters import DecoderKind, EncoderKind
from app.models.layers import CoreKind
from app.models.ordering import Gate, OrderingMode
from app.schemas.experiment import ArchitectureConfig
from app.services.glyph_tasks import gen_synthetic_glyph_tasks
from app.services.model_factory import build_model, core_output_shape
from app.services.random_tasks import RandomTaskSpec, gen_random_tasks
from app.services.tabular_tasks import load_csv_task


def random_tasks(m=4, T=3):
    return gen_random_tasks(RandomTaskSpec(m=m, n=10, T=T, seed=0))


def test_identity_encoder_dense_model():
    arch = ArchitectureConfig(depth=3, units=4)
    model = build_model(arch, random_tasks(), OrderingMode.PARALLEL, Rng(0))
    assert model.num_tasks == 3 and model.depth == 3
    assert model.predict(1, np.zeros((2, 4))).shape == (2, 1)


def test_identity_encoder_rejects_wrong_width():
    with pytest.raises(DimensionError):
        build_model(ArchitectureConfig(depth=2, units=8), random_tasks(m=4), OrderingMode.PARALLEL, Rng(0))


def test_modes_share_core_initialization():
    arch = ArchitectureConfig(depth=3, units=4)
    tasks = random_tasks()
    models = [build_model(arch, tasks, mode, Rng(5), permutations=[(0, 1, 2)] * 3) for mode in OrderingMode]
    for model in models[1:]:
        for a, b in zip(models[0].core, model.core):
            np.testing.assert_array_equal(a.weight.value, b.weight.value)


def test_shared_adapters_are_one_instance():
    arch = ArchitectureConfig(depth=2, units=4, share_encoder=True, share_decoder=True,
                              encoder=EncoderKind.LEARNED_DENSE)
    model = build_model(arch, random_tasks(), OrderingMode.SOFT, Rng(0))
    assert model.encoders[0] is model.encoders[2]
    assert model.decoders[0] is model.decoders[1]
    assert len(model.unique_encoders()) == 1


def test_frozen_encoders_use_given_seeds():
    arch = ArchitectureConfig(depth=2, units=6, encoder=EncoderKind.FROZEN_RANDOM_DENSE)
    tasks = random_tasks(m=4, T=2)
    a = build_model(arch, tasks, OrderingMode.PARALLEL, Rng(0), encoder_seeds=[7, 8])
    b = build_model(arch, tasks, OrderingMode.PARALLEL, Rng(99), encoder_seeds=[7, 8])
    np.testing.assert_array_equal(a.encoders[1].weight.value, b.encoders[1].weight.value)
    assert all(p.trainable for p in a.trainable_parameters())
    assert a.encoders[0].weight not in a.trainable_parameters()


def test_soft_sigmoid_gate_marks_sweep_mode():
    arch = ArchitectureConfig(depth=2, units=4, gate=Gate.SIGMOID, encoder=EncoderKind.LEARNED_DENSE,
                              decoder=DecoderKind.GLOBAL_AVERAGE_POOL)
    model = build_model(arch, random_tasks(), OrderingMode.SOFT, Rng(0))
    assert model.ordering.sweep_mode
    np.testing.assert_array_equal(model.scaling(), np.full((3, 2, 2), 0.5))


def test_identity_member_only_in_soft():
    arch = ArchitectureConfig(depth=2, units=4, include_identity=True)
    soft = build_model(arch, random_tasks(), OrderingMode.SOFT, Rng(0))
    parallel = build_model(arch, random_tasks(), OrderingMode.PARALLEL, Rng(0))
    assert soft.scaling().shape == (3, 3, 2)
    assert not parallel.ordering.include_identity


def test_conv_core_on_glyphs():
    arch = ArchitectureConfig(depth=2, layer=CoreKind.CONV, units=3, decoder=DecoderKind.DENSE_SOFTMAX)
    tasks = gen_synthetic_glyph_tasks(T=2, classes=3, image_size=16, seed=0, channels=3, samples_per_class=4)
    model = build_model(arch, tasks, OrderingMode.SOFT, Rng(0))
    out = model.predict(0, tasks[0].train.inputs[:5])
    assert out.shape == (5, 3)
    np.testing.assert_allclose(out.sum(axis=1), 1.0)


def test_conv_core_too_deep_for_image():
    arch = ArchitectureConfig(depth=4, layer=CoreKind.CONV, units=1, decoder=DecoderKind.DENSE_SOFTMAX)
    tasks = gen_synthetic_glyph_tasks(T=1, classes=2, image_size=8, seed=0, samples_per_class=2)
    with pytest.raises(DimensionError):
        build_model(arch, tasks, OrderingMode.PARALLEL, Rng(0))


def test_conv_core_needs_identity_encoder():
    arch = ArchitectureConfig(depth=1, layer=CoreKind.CONV, units=1, encoder=EncoderKind.LEARNED_DENSE)
    tasks = gen_synthetic_glyph_tasks(T=1, classes=2, image_size=8, seed=0, samples_per_class=2)
    with pytest.raises(ContractError):
        build_model(arch, tasks, OrderingMode.PARALLEL, Rng(0))


def test_shared_decoder_needs_one_output_shape(tmp_path, iris_csv):
    other = tmp_path / "two.csv"
    other.write_text("a,b,c,d,label\n" + "\n".join(f"{i},{i},{i},{i},{i % 2}" for i in range(10)))
    tasks = [load_csv_task(iris_csv, 0), load_csv_task(other, 0)]
    arch = ArchitectureConfig(depth=2, units=4, encoder=EncoderKind.LEARNED_DENSE, share_decoder=True,
                              decoder=DecoderKind.DENSE_SOFTMAX)
    with pytest.raises(DimensionError):
        build_model(arch, tasks, OrderingMode.PARALLEL, Rng(0))


def test_core_output_shape_pools_conv():
    arch = ArchitectureConfig(depth=3, layer=CoreKind.CONV, units=2)
    model_core = build_model(
        ArchitectureConfig(depth=3, layer=CoreKind.CONV, units=2, decoder=DecoderKind.DENSE_SOFTMAX),
        gen_synthetic_glyph_tasks(T=1, classes=2, image_size=16, seed=0, channels=2, samples_per_class=2),
        OrderingMode.PARALLEL, Rng(0),
    ).core
    assert arch.depth == len(model_core)
    assert core_output_shape(model_core, (2, 16, 16)) == (2, 2, 2)
