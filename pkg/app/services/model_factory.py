# app/services/model_factory.py - Build multitask models from an architecture block

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractError, DimensionError
from app.core.rng import Rng
from app.models.adapters import Decoder, DecoderKind, Encoder, EncoderKind
from app.models.dataset import TaskDataset
from app.models.layers import CoreKind, CoreLayer
from app.models.multitask import MultitaskModel
from app.models.ordering import Gate, OrderingMode, OrderingSpec, Permutation, sample_permutations
from app.schemas.experiment import ArchitectureConfig

logger = logging.getLogger(__name__)


def core_input_shape(arch: ArchitectureConfig, dataset: TaskDataset) -> Tuple[int, ...]:
    if arch.layer is CoreKind.DENSE:
        return (arch.units,)
    if arch.encoder is not EncoderKind.IDENTITY:
        raise ContractError("conv cores take channel-padded images through the identity encoder")
    if len(dataset.input_shape) != 3 or dataset.input_shape[0] != arch.units:
        raise DimensionError(
            f"conv core with {arch.units} filters needs inputs of shape ({arch.units}, h, w), "
            f"got {dataset.input_shape}"
        )
    return dataset.input_shape


def core_output_shape(core: Sequence[CoreLayer], input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
    shape = tuple(input_shape)
    for layer in core:
        shape = layer.output_shape(shape)
        if any(dim < 1 for dim in shape):
            raise DimensionError(f"core of depth {len(core)} shrinks input {input_shape} to nothing")
    return shape


def _build_encoder(name: str, arch: ArchitectureConfig, dataset: TaskDataset, rng: Rng,
                   seed: Optional[int]) -> Encoder:
    if arch.encoder is EncoderKind.IDENTITY:
        if arch.layer is CoreKind.DENSE and dataset.input_shape != (arch.units,):
            raise DimensionError(f"identity encoder needs inputs of shape ({arch.units},), got {dataset.input_shape}")
        return Encoder(name, arch.encoder)
    in_features = int(np.prod(dataset.input_shape))
    if arch.encoder is EncoderKind.FROZEN_RANDOM_DENSE:
        if seed is None:
            seed = int(rng.integers(0, 2 ** 62))
        return Encoder(name, arch.encoder, in_features, arch.units, seed=seed)
    return Encoder(name, arch.encoder, in_features, arch.units, rng=rng)


def _build_decoder(name: str, arch: ArchitectureConfig, dataset: TaskDataset, core_out: Tuple[int, ...],
                   rng: Rng) -> Decoder:
    out_features = int(np.prod(dataset.output_shape))
    if arch.decoder is DecoderKind.GLOBAL_AVERAGE_POOL:
        if out_features != 1:
            raise DimensionError(f"global-average-pool decoder yields one value, task {dataset.name} needs "
                                 f"{dataset.output_shape}")
        return Decoder(name, arch.decoder)
    if arch.decoder is DecoderKind.IDENTITY:
        if tuple(dataset.output_shape) != tuple(core_out):
            raise DimensionError(f"identity decoder needs output shape {core_out}, got {dataset.output_shape}")
        return Decoder(name, arch.decoder)
    return Decoder(name, arch.decoder, int(np.prod(core_out)), out_features, rng=rng)


def build_model(arch: ArchitectureConfig, datasets: Sequence[TaskDataset], mode: OrderingMode, rng: Rng,
                permutations: Optional[List[Permutation]] = None,
                encoder_seeds: Optional[Sequence[int]] = None, seed: int = 0) -> MultitaskModel:
    """One model over the given tasks.

    Shared encoders/decoders are a single instance referenced from every task slot; a
    frozen encoder takes its seed from encoder_seeds[task] when given.
    """
    if not datasets:
        raise ContractError("build_model needs at least one task")
    mode = OrderingMode(mode)
    core = [CoreLayer(j, arch.layer, arch.units, arch.activation, rng) for j in range(arch.depth)]
    core_out = core_output_shape(core, core_input_shape(arch, datasets[0]))

    if arch.share_encoder:
        shapes = {ds.input_shape for ds in datasets}
        if len(shapes) != 1:
            raise DimensionError(f"a shared encoder needs one input shape, got {sorted(shapes)}")
        first_seed = encoder_seeds[0] if encoder_seeds else None
        shared = _build_encoder("encoder.shared", arch, datasets[0], rng, first_seed)
        encoders = [shared] * len(datasets)
    else:
        encoders = [
            _build_encoder(f"encoder.{i}", arch, ds, rng, encoder_seeds[i] if encoder_seeds else None)
            for i, ds in enumerate(datasets)
        ]

    if arch.share_decoder:
        shapes = {ds.output_shape for ds in datasets}
        if len(shapes) != 1:
            raise DimensionError(f"a shared decoder needs one output shape, got {sorted(shapes)}")
        shared = _build_decoder("decoder.shared", arch, datasets[0], core_out, rng)
        decoders = [shared] * len(datasets)
    else:
        decoders = [_build_decoder(f"decoder.{i}", arch, ds, core_out, rng) for i, ds in enumerate(datasets)]

    soft = mode is OrderingMode.SOFT
    if mode is OrderingMode.PERMUTED and permutations is None:
        permutations = sample_permutations(len(datasets), arch.depth, rng)
    ordering = OrderingSpec(
        mode=mode,
        permutations=permutations if mode is OrderingMode.PERMUTED else None,
        gate=arch.gate if soft else Gate.SOFTMAX,
        include_identity=arch.include_identity and soft,
        sweep_mode=soft and arch.gate is Gate.SIGMOID,
    )
    model = MultitaskModel(core, encoders, decoders, ordering, dropout_rate=arch.dropout, seed=seed)
    logger.debug(f"built {mode.value} model: T={len(datasets)} D={arch.depth} params={model.parameter_count()}")
    return model
