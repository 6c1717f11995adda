"""Minimal SVG emitters for curves, heatmaps and ledger timelines.

Output is plain text so tests can inspect structure (one ``<polyline>`` per
series, one ``<rect class="cell">`` per heatmap cell).
"""

from __future__ import annotations

from html import escape
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


class Canvas:
    def __init__(self, width: int, height: int):
        self.width, self.height = width, height
        self.parts: list[str] = []

    def add(self, s: str) -> None:
        self.parts.append(s)

    def text(self, x, y, s, size=12, anchor="middle", rotate=None, cls=None) -> None:
        rot = f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"' if rotate else ""
        c = f' class="{cls}"' if cls else ""
        self.add(f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
                 f'text-anchor="{anchor}"{rot}{c}>{escape(str(s))}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
                f'font-family="sans-serif">')
        return "\n".join([head, f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
                          *self.parts, "</svg>"]) + "\n"


def _panel(cv: Canvas, box, series: dict[str, Sequence[tuple[float, float]]], title: str,
           xlabel: str, ylabel: str, ylim=None) -> None:
    x0, y0, w, h = box
    pts = [p for s in series.values() for p in s]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] or [0.0, 1.0]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = ylim if ylim else (min(ys), max(ys))
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0

    def sx(x):
        return x0 + (x - xmin) / (xmax - xmin) * w

    def sy(y):
        return y0 + h - (y - ymin) / (ymax - ymin) * h

    cv.add(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>')
    cv.text(x0 + w / 2, y0 - 8, title, size=13)
    cv.text(x0 + w / 2, y0 + h + 32, xlabel)
    cv.text(x0 - 42, y0 + h / 2, ylabel, rotate=-90)
    for frac in (0.0, 0.5, 1.0):
        cv.text(x0 - 6, sy(ymin + frac * (ymax - ymin)) + 4, f"{ymin + frac * (ymax - ymin):.3g}",
                size=10, anchor="end")
        cv.text(sx(xmin + frac * (xmax - xmin)), y0 + h + 14,
                f"{xmin + frac * (xmax - xmin):.4g}", size=10)
    for i, (name, s) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in s)
        cv.add(f'<polyline class="series" data-name="{escape(name)}" fill="none" '
               f'stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        cv.text(x0 + w - 4, y0 + 14 + 14 * i, name, size=11, anchor="end")


def line_chart(series: dict[str, Sequence[tuple[float, float]]], title: str = "",
               xlabel: str = "", ylabel: str = "", ylim=None) -> str:
    cv = Canvas(640, 400)
    _panel(cv, (70, 40, 540, 300), series, title, xlabel, ylabel, ylim)
    return cv.render()


def stacked_panels(panels: list[tuple[str, dict[str, Sequence[tuple[float, float]]]]],
                   xlabel: str = "", ylabel: str = "") -> str:
    """Panels stacked top to bottom, each a set of series sharing the x axis."""
    ph = 200
    cv = Canvas(640, 60 + len(panels) * (ph + 60))
    for k, (title, series) in enumerate(panels):
        _panel(cv, (70, 40 + k * (ph + 60), 540, ph), series, title, xlabel, ylabel)
    return cv.render()


def heatmap(matrix, row_labels: Sequence[str], col_labels: Sequence[str], title: str = "",
            xlabel: str = "predicted", ylabel: str = "true") -> str:
    M = np.asarray(matrix, dtype=np.float64)
    n_r, n_c = M.shape
    cell = max(8, min(28, 560 // max(n_r, n_c, 1)))
    left, top = 90, 60
    cv = Canvas(left + cell * n_c + 30, top + cell * n_r + 70)
    cv.text(left + cell * n_c / 2, 24, title, size=13)
    # normalize per row so colors show where each true class's predictions go
    sums = M.sum(axis=1, keepdims=True)
    frac = np.divide(M, sums, out=np.zeros_like(M), where=sums > 0)
    for i in range(n_r):
        for j in range(n_c):
            shade = int(round(255 * (1.0 - frac[i, j])))
            cv.add(f'<rect class="cell" x="{left + j * cell}" y="{top + i * cell}" '
                   f'width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)">'
                   f'<title>{int(M[i, j])}</title></rect>')
        cv.text(left - 4, top + i * cell + cell * 0.7, row_labels[i], size=9, anchor="end")
    for j in range(n_c):
        x = left + j * cell + cell * 0.6
        cv.text(x, top - 4, col_labels[j], size=9, anchor="start", rotate=-60)
    cv.text(left + cell * n_c / 2, top + cell * n_r + 24, xlabel)
    cv.text(16, top + cell * n_r / 2, ylabel, rotate=-90)
    return cv.render()


def bar_chart(labels: Sequence[str], up: Sequence[float], down: Sequence[float],
              title: str = "", up_name: str = "", down_name: str = "") -> str:
    """Bars above the axis for ``up`` and mirrored below it for ``down``."""
    n = len(labels)
    bw = max(6, min(24, 560 // max(n, 1)))
    left, top, half = 70, 50, 150
    cv = Canvas(left + bw * n + 40, top + 2 * half + 60)
    peak = max([*up, *down, 1e-300])
    axis = top + half
    cv.text(left + bw * n / 2, 24, title, size=13)
    cv.add(f'<line x1="{left}" y1="{axis}" x2="{left + bw * n}" y2="{axis}" stroke="#444"/>')
    for i, (u, d) in enumerate(zip(up, down)):
        hu, hd = u / peak * half, d / peak * half
        x = left + i * bw + 1
        cv.add(f'<rect class="bar up" x="{x}" y="{_fmt(axis - hu)}" width="{bw - 2}" '
               f'height="{_fmt(hu)}" fill="{PALETTE[0]}"/>')
        cv.add(f'<rect class="bar down" x="{x}" y="{axis}" width="{bw - 2}" '
               f'height="{_fmt(hd)}" fill="{PALETTE[1]}"/>')
        cv.text(x + bw / 2, top + 2 * half + 16, labels[i], size=9, rotate=-60, anchor="end")
    cv.text(left - 6, top + 10, up_name, size=10, anchor="end")
    cv.text(left - 6, top + 2 * half, down_name, size=10, anchor="end")
    return cv.render()
