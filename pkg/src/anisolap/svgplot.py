"""Minimal deterministic SVG line plots.

Writes self-contained SVG directly so report artifacts are byte-stable under
fixed inputs; no plotting library is involved.
"""

from __future__ import annotations

import math
from typing import Sequence

__all__ = ["line_plot"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 36, 55


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(t)
        t += step
    return out


def line_plot(series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
              path, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False) -> None:
    """Write a line plot of (label, xs, ys) triples to an SVG file."""

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    xs_all = [tx(x) for _, xs, _ in series for x in xs]
    ys_all = [ty(y) for _, _, ys in series for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad_y = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    def px(v):
        return _ML + (_W - _ML - _MR) * (v - x_lo) / (x_hi - x_lo)

    def py(v):
        return _H - _MB - (_H - _MT - _MB) * (v - y_lo) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{title}</text>',
    ]
    for t in _ticks(x_lo, x_hi):
        X = px(t)
        label = _fmt(10.0 ** t) if logx else _fmt(t)
        parts.append(f'<line x1="{X:.1f}" y1="{_MT}" x2="{X:.1f}" y2="{_H - _MB}" '
                     f'stroke="#dddddd"/>')
        parts.append(f'<text x="{X:.1f}" y="{_H - _MB + 16}" text-anchor="middle" '
                     f'font-size="11" font-family="sans-serif">{label}</text>')
    for t in _ticks(y_lo, y_hi):
        Y = py(t)
        label = _fmt(10.0 ** t) if logy else _fmt(t)
        parts.append(f'<line x1="{_ML}" y1="{Y:.1f}" x2="{_W - _MR}" y2="{Y:.1f}" '
                     f'stroke="#dddddd"/>')
        parts.append(f'<text x="{_ML - 6}" y="{Y + 4:.1f}" text-anchor="end" '
                     f'font-size="11" font-family="sans-serif">{label}</text>')
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
                 f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12" '
                 f'font-family="sans-serif">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
                 f'font-family="sans-serif" transform="rotate(-90 16 {_H / 2})">{ylabel}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(tx(x)):.2f},{py(ty(y)):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{px(tx(x)):.2f}" cy="{py(ty(y)):.2f}" r="2.5" '
                         f'fill="{color}"/>')
        ly = _MT + 16 + 16 * k
        parts.append(f'<line x1="{_W - _MR - 130}" y1="{ly - 4}" x2="{_W - _MR - 110}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MR - 104}" y="{ly}" font-size="11" '
                     f'font-family="sans-serif">{label}</text>')
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
