# app/services/glyph_tasks.py - Synthetic stroke-glyph classification tasks for the conv core

import enum
import logging
from typing import List, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from app.core.exceptions import ContractError
from app.core.rng import Rng
from app.models.dataset import LossKind, Split, TaskDataset

logger = logging.getLogger(__name__)

MIN_IMAGE_SIZE = 8
STROKES_PER_GLYPH = 3
FLIP_PROBABILITY = 0.02

# Unit-square strokes: ("line", x0, y0, x1, y1) or ("arc", cx, cy, r, start_deg, end_deg)
STROKE_LIBRARY: List[Tuple] = [
    ("line", 0.15, 0.2, 0.85, 0.2),
    ("line", 0.15, 0.5, 0.85, 0.5),
    ("line", 0.15, 0.8, 0.85, 0.8),
    ("line", 0.2, 0.15, 0.2, 0.85),
    ("line", 0.5, 0.15, 0.5, 0.85),
    ("line", 0.8, 0.15, 0.8, 0.85),
    ("line", 0.15, 0.15, 0.85, 0.85),
    ("line", 0.85, 0.15, 0.15, 0.85),
    ("arc", 0.5, 0.5, 0.3, 180, 360),
    ("arc", 0.5, 0.5, 0.3, 0, 180),
    ("arc", 0.5, 0.3, 0.2, 0, 360),
    ("arc", 0.3, 0.6, 0.2, 90, 270),
    ("arc", 0.7, 0.6, 0.2, 270, 450),
]


class GlyphTransform(str, enum.Enum):
    """How a task applies the shared strokes"""
    IDENTITY = "identity"
    MIRROR_X = "mirror-x"
    MIRROR_Y = "mirror-y"
    TRANSPOSE = "transpose"


def _apply(transform: GlyphTransform, image: np.ndarray) -> np.ndarray:
    if transform is GlyphTransform.MIRROR_X:
        return image[:, ::-1]
    if transform is GlyphTransform.MIRROR_Y:
        return image[::-1, :]
    if transform is GlyphTransform.TRANSPOSE:
        return image.T
    return image


def render_strokes(strokes: Sequence[int], size: int, dx: int = 0, dy: int = 0) -> np.ndarray:
    """Rasterize library strokes onto a size x size binary image"""
    canvas = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(canvas)
    scale = size - 1
    for index in strokes:
        stroke = STROKE_LIBRARY[index]
        if stroke[0] == "line":
            _, x0, y0, x1, y1 = stroke
            draw.line([(x0 * scale + dx, y0 * scale + dy), (x1 * scale + dx, y1 * scale + dy)], fill=255, width=1)
        else:
            _, cx, cy, r, start, end = stroke
            box = [(cx - r) * scale + dx, (cy - r) * scale + dy, (cx + r) * scale + dx, (cy + r) * scale + dy]
            draw.arc(box, start, end, fill=255, width=1)
    return (np.asarray(canvas) > 127).astype(np.float64)


def draw_templates(classes: int, rng: Rng) -> List[Tuple[int, ...]]:
    """Distinct stroke subsets, one per class"""
    templates: List[Tuple[int, ...]] = []
    while len(templates) < classes:
        pick = tuple(sorted(int(j) for j in rng.choice(len(STROKE_LIBRARY), size=STROKES_PER_GLYPH, replace=False)))
        if pick not in templates:
            templates.append(pick)
    return templates


def pad_channels(images: np.ndarray, channels: int) -> np.ndarray:
    """(n, h, w) -> (n, channels, h, w) with the image in channel 0 and zeros elsewhere"""
    padded = np.zeros((images.shape[0], channels) + images.shape[1:])
    padded[:, 0] = images
    return padded


def gen_synthetic_glyph_tasks(T: int, classes: int, image_size: int, seed: int, channels: int = 1,
                              samples_per_class: int = 20, test_fraction: float = 0.2) -> List[TaskDataset]:
    """T glyph alphabets drawn from one stroke library.

    Each task has its own class templates and its own way of placing strokes (a mirror or
    transpose). Samples jitter their template by up to one pixel and flip a few pixels.
    """
    if image_size < MIN_IMAGE_SIZE:
        raise ContractError(f"image_size must be >= {MIN_IMAGE_SIZE}, got {image_size}")
    if T < 1 or classes < 2 or channels < 1 or samples_per_class < 1:
        raise ContractError(f"invalid glyph task request T={T} classes={classes} channels={channels}")
    if not 0.0 <= test_fraction < 1.0:
        raise ContractError(f"test_fraction must be in [0, 1), got {test_fraction}")

    transforms = list(GlyphTransform)
    datasets = []
    for t in range(T):
        rng = Rng(seed).spawn("glyphs", t)
        transform = transforms[int(rng.integers(0, len(transforms)))]
        templates = draw_templates(classes, rng)
        images, targets = [], []
        for label, template in enumerate(templates):
            for _ in range(samples_per_class):
                dx, dy = (int(v) for v in rng.integers(-1, 2, size=2))
                image = _apply(transform, render_strokes(template, image_size, dx, dy))
                flips = rng.random(image.shape) < FLIP_PROBABILITY
                images.append(np.where(flips, 1.0 - image, image))
                targets.append(label)
        inputs = pad_channels(np.stack(images), channels)
        labels = np.array(targets, dtype=np.int64)
        order = rng.permutation(len(labels))
        cut = int(round(test_fraction * len(labels)))
        test = Split(inputs[order[:cut]], labels[order[:cut]]) if cut else None
        datasets.append(TaskDataset(
            name=f"glyphs-{t}",
            train=Split(inputs[order[cut:]], labels[order[cut:]]),
            test=test,
            loss_kind=LossKind.CE,
            input_shape=(channels, image_size, image_size),
            output_shape=(classes,),
            num_classes=classes,
            metadata={"transform": transform.value, "templates": [list(tpl) for tpl in templates]},
        ))
        logger.debug(f"glyph task {t}: transform={transform.value} templates={templates}")
    return datasets
