# app/utils/images.py - Plain-text PGM frames and PNG copies via Pillow

import io
from pathlib import Path
from typing import List, Sequence

import numpy as np
from PIL import Image

from app.core.exceptions import DataFormatError
from app.utils.files import write_bytes_atomic, write_text_atomic

PGM_MAXVAL = 255


def to_gray_levels(image: np.ndarray) -> np.ndarray:
    """[0, 1] floats -> 0..255 integers (values outside the range are clipped)"""
    return np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * PGM_MAXVAL).astype(np.int64)


def encode_pgm(image: np.ndarray) -> str:
    levels = to_gray_levels(image)
    height, width = levels.shape
    lines = ["P2", f"{width} {height}", str(PGM_MAXVAL)]
    lines += [" ".join(str(v) for v in row) for row in levels]
    return "\n".join(lines) + "\n"


def write_pgm(path, image: np.ndarray) -> Path:
    return write_text_atomic(path, encode_pgm(image))


def read_pgm(path) -> np.ndarray:
    """Read a P2 (plain) PGM image scaled to [0, 1]"""
    path = Path(path)
    tokens: List[str] = []
    for line in path.read_text(encoding="ascii").splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise DataFormatError(f"{path.name} is not a plain PGM file", field="magic")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        values = np.array([int(t) for t in tokens[4:]], dtype=np.float64)
    except (IndexError, ValueError):
        raise DataFormatError(f"{path.name} has a malformed header or pixel", field="pixels")
    if maxval < 1 or values.size != width * height:
        raise DataFormatError(f"{path.name}: expected {width * height} pixels, got {values.size}", field="pixels")
    return values.reshape(height, width) / maxval


def write_png(path, image: np.ndarray, scale: int = 1) -> Path:
    picture = Image.fromarray(to_gray_levels(image).astype(np.uint8), mode="L")
    if scale > 1:
        picture = picture.resize((picture.width * scale, picture.height * scale), Image.Resampling.NEAREST)
    buf = io.BytesIO()
    picture.save(buf, format="PNG")
    return write_bytes_atomic(path, buf.getvalue())


def tile_rows(rows: Sequence[Sequence[np.ndarray]], gap: int = 1) -> np.ndarray:
    """Lay frame rows out on one canvas with a white gap between frames"""
    height, width = np.shape(rows[0][0])
    columns = max(len(row) for row in rows)
    canvas = np.ones((len(rows) * (height + gap) - gap, columns * (width + gap) - gap))
    for r, row in enumerate(rows):
        for c, frame in enumerate(row):
            top, left = r * (height + gap), c * (width + gap)
            canvas[top:top + height, left:left + width] = frame
    return canvas
