# app/services/pixel_tasks.py - Generative pixel tasks: (x, y) -> brightness

from typing import List, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractError
from app.core.rng import Rng
from app.models.dataset import LossKind, Split, TaskDataset


def pixel_coordinates(height: int, width: int) -> np.ndarray:
    """Row-major (x, y) pairs normalized to [0, 1]^2"""
    xs = np.arange(width) / (width - 1) if width > 1 else np.zeros(1)
    ys = np.arange(height) / (height - 1) if height > 1 else np.zeros(1)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([grid_x.reshape(-1), grid_y.reshape(-1)], axis=1)


def make_pixel_tasks(images: Sequence[np.ndarray]) -> List[TaskDataset]:
    """One task per grayscale image; every pixel is a training sample"""
    datasets = []
    for i, image in enumerate(images):
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 2:
            raise ContractError(f"pixel task {i} needs a 2-D grayscale image, got {image.shape}")
        if image.min() < 0.0 or image.max() > 1.0:
            raise ContractError(f"pixel task {i} values must lie in [0, 1]")
        height, width = image.shape
        datasets.append(TaskDataset(
            name=f"pixels-{i}",
            train=Split(pixel_coordinates(height, width), image.reshape(-1, 1).copy()),
            loss_kind=LossKind.MSE,
            input_shape=(2,),
            output_shape=(1,),
            metadata={"image_shape": [height, width]},
        ))
    return datasets


def reconstruct_image(values: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Map per-pixel values (in sample order) back onto the pixel grid"""
    values = np.asarray(values).reshape(-1)
    if values.size != shape[0] * shape[1]:
        raise ContractError(f"{values.size} values cannot fill a {shape[0]}x{shape[1]} image")
    return values.reshape(shape)


def synthetic_images(count: int, size: int, seed: int) -> List[np.ndarray]:
    """Smooth grayscale test patterns (oriented waves plus a radial blob) in [0, 1]"""
    rng = Rng(seed)
    coords = pixel_coordinates(size, size)
    x, y = coords[:, 0].reshape(size, size), coords[:, 1].reshape(size, size)
    images = []
    for _ in range(count):
        angle = rng.uniform(0.0, np.pi)
        frequency = rng.uniform(1.0, 3.0)
        cx, cy = rng.uniform(0.25, 0.75, 2)
        wave = 0.5 + 0.5 * np.sin(2.0 * np.pi * frequency * (x * np.cos(angle) + y * np.sin(angle)))
        blob = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / 0.05)
        images.append(np.clip(0.6 * wave + 0.4 * blob, 0.0, 1.0))
    return images
