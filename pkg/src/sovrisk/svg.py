"""Minimal dependency-free SVG plots: line charts, scatter with trend, heatmaps."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
W, H, PAD = 720, 400, 56


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return (a + b) / 2.0
    return a + (v - lo) / (hi - lo) * (b - a)


def _frame(title: str, xlabel: str, ylabel: str, x_ticks, y_ticks) -> list[str]:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" '
           f'font-size="11">', f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {H / 2:.1f})">'
           f'{escape(ylabel)}</text>']
    for pos, label in x_ticks:
        out.append(f'<text x="{pos:.1f}" y="{H - PAD + 14}" text-anchor="middle">{escape(label)}</text>')
    for pos, label in y_ticks:
        out.append(f'<text x="{PAD - 4}" y="{pos + 4:.1f}" text-anchor="end">{escape(label)}</text>')
    return out


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def _bounds(arrays):
    vals = np.concatenate([np.asarray(a, float)[np.isfinite(a)] for a in arrays]) if arrays else np.zeros(0)
    if vals.size == 0:
        return 0.0, 1.0
    return float(vals.min()), float(vals.max())


def line_chart(path, series: Mapping[str, tuple[Sequence, Sequence]], title: str = "", xlabel: str = "",
               ylabel: str = "", x_labels: Sequence[str] | None = None) -> None:
    """``series`` maps a label to ``(x, y)``; NaN values break the line."""
    xs = [np.asarray(x, float) for x, _ in series.values()]
    ys = [np.asarray(y, float) for _, y in series.values()]
    x0, x1 = _bounds(xs)
    y0, y1 = _bounds(ys)
    sx = lambda v: _scale(v, x0, x1, PAD, W - PAD)  # noqa: E731
    sy = lambda v: _scale(v, y0, y1, H - PAD, PAD)  # noqa: E731
    xt = [(sx(v), f"{v:.3g}") for v in _ticks(x0, x1)]
    if x_labels is not None and len(x_labels):
        idx = np.linspace(0, len(x_labels) - 1, min(5, len(x_labels))).round().astype(int)
        xt = [(sx(float(i)), x_labels[i]) for i in idx]
    out = _frame(title, xlabel, ylabel, xt, [(sy(v), f"{v:.3g}") for v in _ticks(y0, y1)])
    for k, (label, x, y) in enumerate(zip(series, xs, ys)):
        color = PALETTE[k % len(PALETTE)]
        segs, cur = [], []
        for a, b in zip(x, y):
            if np.isfinite(a) and np.isfinite(b):
                cur.append(f"{sx(a):.1f},{sy(b):.1f}")
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        for s in segs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(s)}"/>')
        out.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * k}" fill="{color}">{escape(str(label))}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def scatter(path, x, y, curve: tuple[Sequence, Sequence] | None = None, title: str = "", xlabel: str = "",
            ylabel: str = "", max_points: int = 4000) -> None:
    """Scatter of ``(x, y)`` with an optional trend curve; thins to ``max_points`` evenly."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) > max_points:
        keep = np.linspace(0, len(x) - 1, max_points).round().astype(int)
        x, y = x[keep], y[keep]
    arrays_x = [x] + ([np.asarray(curve[0], float)] if curve is not None else [])
    arrays_y = [y] + ([np.asarray(curve[1], float)] if curve is not None else [])
    x0, x1 = _bounds(arrays_x)
    y0, y1 = _bounds(arrays_y)
    sx = lambda v: _scale(v, x0, x1, PAD, W - PAD)  # noqa: E731
    sy = lambda v: _scale(v, y0, y1, H - PAD, PAD)  # noqa: E731
    out = _frame(title, xlabel, ylabel, [(sx(v), f"{v:.3g}") for v in _ticks(x0, x1)],
                 [(sy(v), f"{v:.3g}") for v in _ticks(y0, y1)])
    for a, b in zip(x, y):
        if np.isfinite(a) and np.isfinite(b):
            out.append(f'<circle cx="{sx(a):.1f}" cy="{sy(b):.1f}" r="1.5" fill="{PALETTE[0]}" '
                       f'fill-opacity="0.4"/>')
    if curve is not None:
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(*curve) if np.isfinite(a) and np.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{PALETTE[1]}" stroke-width="2" points="{pts}"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def heatmap(path, values, row_labels: Sequence[str], col_labels: Sequence[str], title: str = "") -> None:
    """White-to-blue heatmap scaled to the finite range of ``values``."""
    v = np.asarray(values, float)
    nr, nc = v.shape
    top, left = 40, 90
    cw = (W - left - 20) / max(nc, 1)
    ch = max(8.0, min(20.0, (H - top - 60) / max(nr, 1)))
    height = int(top + ch * nr + 60)
    lo, hi = _bounds([v])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" font-family="sans-serif" '
           f'font-size="9">', f'<rect width="{W}" height="{height}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for i in range(nr):
        y = top + i * ch
        out.append(f'<text x="{left - 4}" y="{y + ch * 0.7:.1f}" text-anchor="end">{escape(str(row_labels[i]))}'
                   f'</text>')
        for j in range(nc):
            if np.isfinite(v[i, j]):
                t = _scale(v[i, j], lo, hi, 0.0, 1.0)
                r, g = int(255 * (1 - t)), int(255 * (1 - 0.6 * t))
                fill = f"rgb({r},{g},255)"
            else:
                fill = "#dddddd"
            out.append(f'<rect x="{left + j * cw:.1f}" y="{y:.1f}" width="{cw:.1f}" height="{ch:.1f}" '
                       f'fill="{fill}"/>')
    for j in range(nc):
        x = left + (j + 0.5) * cw
        y = top + nr * ch + 12
        out.append(f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="middle">{escape(str(col_labels[j]))}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
