# app/utils/svg.py - Static SVG charts: line charts, heatmaps and frame contact sheets

from typing import Dict, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]

WIDTH = 640
HEIGHT = 400
MARGIN = 56


def _document(width: int, height: int, body: List[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>'] + body + ["</svg>"]) + "\n"


def _text(x: float, y: float, label: str, anchor: str = "middle", size: int = 12) -> str:
    return f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-size="{size}">{escape(str(label))}</text>'


def _span(values: Sequence[float]) -> Tuple[float, float]:
    low, high = float(min(values)), float(max(values))
    if high == low:
        pad = abs(low) * 0.1 or 1.0
        return low - pad, high + pad
    return low, high


def line_chart(series: Dict[str, Sequence[Tuple[float, float]]], title: str = "", x_label: str = "",
               y_label: str = "", y_range: Optional[Tuple[float, float]] = None) -> str:
    """One polyline per named series of (x, y) points, with a legend"""
    points = [p for values in series.values() for p in values]
    body = [_text(WIDTH / 2, 20, title, size=14)]
    if not points:
        body.append(_text(WIDTH / 2, HEIGHT / 2, "no data"))
        return _document(WIDTH, HEIGHT, body)
    x_low, x_high = _span([p[0] for p in points])
    y_low, y_high = y_range if y_range else _span([p[1] for p in points])
    plot_w, plot_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x_low) / (x_high - x_low) * plot_w

    def sy(y):
        return HEIGHT - MARGIN - (y - y_low) / (y_high - y_low) * plot_h

    body.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>')
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x_low + frac * (x_high - x_low), y_low + frac * (y_high - y_low)
        body.append(_text(sx(xv), HEIGHT - MARGIN + 16, f"{xv:.4g}"))
        body.append(_text(MARGIN - 6, sy(yv) + 4, f"{yv:.4g}", anchor="end"))
    body.append(_text(WIDTH / 2, HEIGHT - 12, x_label))
    body.append(f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
                f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{escape(y_label)}</text>')
    for i, (name, values) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in sorted(values))
        body.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in values:
            body.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        body.append(f'<rect x="{WIDTH - MARGIN - 110}" y="{MARGIN + 8 + 16 * i}" width="10" height="10" fill="{color}"/>')
        body.append(_text(WIDTH - MARGIN - 94, MARGIN + 17 + 16 * i, name, anchor="start"))
    return _document(WIDTH, HEIGHT, body)


def _gray(value: float) -> str:
    level = int(round(float(np.clip(value, 0.0, 1.0)) * 255))
    return f"rgb({level},{level},{level})"


def _heat(value: float) -> str:
    v = float(np.clip(value, 0.0, 1.0))
    return f"rgb({int(255 * v)},{int(80 + 60 * (1 - v))},{int(255 * (1 - v))})"


def heatmap(matrix: np.ndarray, row_labels: Sequence[str], col_labels: Sequence[str], title: str = "",
            cell: int = 48) -> str:
    """Cells colored by value in [0, 1], annotated with the value"""
    matrix = np.asarray(matrix, dtype=np.float64)
    rows, cols = matrix.shape
    left, top = 80, 48
    width, height = left + cols * cell + 20, top + rows * cell + 40
    body = [_text(width / 2, 20, title, size=14)]
    for r in range(rows):
        body.append(_text(left - 8, top + r * cell + cell / 2 + 4, row_labels[r], anchor="end"))
        for c in range(cols):
            x, y = left + c * cell, top + r * cell
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_heat(matrix[r, c])}" stroke="white"/>')
            body.append(_text(x + cell / 2, y + cell / 2 + 4, f"{matrix[r, c]:.2f}", size=10))
    for c in range(cols):
        body.append(_text(left + c * cell + cell / 2, top + rows * cell + 16, col_labels[c]))
    return _document(width, height, body)


def contact_sheet(rows: Sequence[Sequence[np.ndarray]], row_labels: Sequence[str],
                  col_labels: Sequence[str], title: str = "", pixel: int = 4) -> str:
    """Grid of grayscale frames; rows and columns labelled"""
    frame_h, frame_w = np.shape(rows[0][0])
    gap, left, top = 8, 90, 48
    tile_w, tile_h = frame_w * pixel + gap, frame_h * pixel + gap
    columns = max(len(row) for row in rows)
    width, height = left + columns * tile_w + 10, top + len(rows) * tile_h + 20
    body = [_text(width / 2, 20, title, size=14)]
    for c in range(columns):
        label = col_labels[c] if c < len(col_labels) else ""
        body.append(_text(left + c * tile_w + frame_w * pixel / 2, top - 6, label, size=10))
    for r, row in enumerate(rows):
        y0 = top + r * tile_h
        body.append(_text(left - 8, y0 + frame_h * pixel / 2 + 4, row_labels[r], anchor="end"))
        for c, frame in enumerate(row):
            x0 = left + c * tile_w
            body.append(f'<g transform="translate({x0},{y0})">')
            for i in range(frame_h):
                for j in range(frame_w):
                    body.append(f'<rect x="{j * pixel}" y="{i * pixel}" width="{pixel}" height="{pixel}" '
                                f'fill="{_gray(frame[i, j])}"/>')
            body.append("</g>")
    return _document(width, height, body)


def path_diagram(path: Sequence[int], scales: np.ndarray, title: str = "") -> str:
    """Layers (rows) by depth (columns); node opacity is the scale, the strongest path is drawn"""
    scales = np.asarray(scales, dtype=np.float64)
    layers, depths = scales.shape
    step_x, step_y, left, top = 90, 50, 80, 50
    width, height = left + depths * step_x + 20, top + layers * step_y + 20
    body = [_text(width / 2, 20, title, size=14)]
    centers = [(left + k * step_x + step_x / 2, top + j * step_y + step_y / 2) for k, j in enumerate(path)]
    if len(centers) > 1:
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in centers)
        body.append(f'<polyline points="{coords}" fill="none" stroke="#d62728" stroke-width="3"/>')
    for j in range(layers):
        body.append(_text(left - 10, top + j * step_y + step_y / 2 + 4, f"layer {j}", anchor="end"))
        for k in range(depths):
            cx, cy = left + k * step_x + step_x / 2, top + j * step_y + step_y / 2
            body.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="14" fill="#1f77b4" '
                        f'fill-opacity="{float(np.clip(scales[j, k], 0, 1)):.3f}" stroke="#333"/>')
    for k in range(depths):
        body.append(_text(left + k * step_x + step_x / 2, height - 6, f"depth {k + 1}"))
    return _document(width, height, body)
