# app/services/sweep_service.py - Render pixel-task images while sweeping one layer's scale

import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractError
from app.models.multitask import MultitaskModel
from app.models.ordering import Gate, OrderingMode
from app.services.pixel_tasks import pixel_coordinates, reconstruct_image

logger = logging.getLogger(__name__)


def check_sweep_model(model: MultitaskModel) -> None:
    if model.ordering.mode is not OrderingMode.SOFT or model.ordering.gate is not Gate.SIGMOID:
        raise ContractError("layer sweeps need a soft-ordering model with the sigmoid gate")


def sweep_grid(model: MultitaskModel, task: int, layer: int, depth: int, steps: int) -> List[float]:
    """steps evenly spaced scales in [0, 1]; a single step is the trained scale itself"""
    if steps < 1:
        raise ContractError(f"steps must be >= 1, got {steps}")
    if steps == 1:
        return [float(model.scaling()[task, layer, depth])]
    return [float(v) for v in np.linspace(0.0, 1.0, steps)]


def layer_sweep(model: MultitaskModel, task: int, layer: int, depth: int, grid: Sequence[float],
                image_shape: Tuple[int, int]) -> List[np.ndarray]:
    """One rendered image per grid value with s[task, layer, depth] overwritten.

    depth is 0-based. Every other scale stays at its trained value.
    """
    check_sweep_model(model)
    model.check_task(task)
    candidates = model.ordering.candidates(model.depth)
    if not 0 <= layer < candidates:
        raise ContractError(f"layer {layer} out of range for {candidates} candidates")
    if not 0 <= depth < model.depth:
        raise ContractError(f"depth {depth} out of range for a depth-{model.depth} core")
    grid = [float(v) for v in grid]
    if any(not 0.0 <= v <= 1.0 for v in grid):
        raise ContractError(f"sweep values must lie in [0, 1], got {grid}")

    coordinates = pixel_coordinates(*image_shape)
    trained = model.scaling()
    frames = []
    for value in grid:
        scales = trained.copy()
        scales[task, layer, depth] = value
        prediction = model.predict(task, coordinates, scales=scales)
        frames.append(reconstruct_image(prediction, image_shape))
    logger.debug(f"swept task={task} layer={layer} depth={depth} over {len(grid)} values")
    return frames


def sweep_strips(model: MultitaskModel, task: int, layer: int, depths: Sequence[int], steps: int,
                 image_shape: Tuple[int, int]) -> Dict[int, List[np.ndarray]]:
    """depth -> frame strip, inactive to active left to right"""
    return {
        depth: layer_sweep(model, task, layer, depth, sweep_grid(model, task, layer, depth, steps), image_shape)
        for depth in depths
    }
