"""Tiny deterministic SVG line charts; no display server, byte-stable output."""

from __future__ import annotations

import math
from pathlib import Path

PALETTE = ("#000000", "#7b2d8b", "#c0392b", "#2471a3", "#1e8449", "#b7950b")

WIDTH, HEIGHT = 960, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 36, 46


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _tick_values(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * max(abs(hi), 1.0):
        ticks.append(round(t, 12))
        t += step
    return ticks or [lo]


def line_chart(path: str | Path, series: list[tuple[str, list[float], list[float]]],
               title: str, y_label: str = "") -> Path:
    """Write a fixed-size SVG line chart; series are (label, xs, ys)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" font-family="monospace" font-size="15" '
        f'text-anchor="middle">{title}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>',
    ]
    for t in _tick_values(y_lo, y_hi):
        y = sy(t)
        parts.append(f'<line x1="{MARGIN_L}" y1="{_fmt(y)}" x2="{WIDTH - MARGIN_R}" '
                     f'y2="{_fmt(y)}" stroke="#dddddd"/>')
        parts.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(y + 4)}" font-family="monospace" '
                     f'font-size="11" text-anchor="end">{t:.4g}</text>')
    for t in _tick_values(x_lo, x_hi, 8):
        x = sx(t)
        parts.append(f'<line x1="{_fmt(x)}" y1="{MARGIN_T}" x2="{_fmt(x)}" '
                     f'y2="{HEIGHT - MARGIN_B}" stroke="#eeeeee"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{HEIGHT - MARGIN_B + 16}" '
                     f'font-family="monospace" font-size="11" '
                     f'text-anchor="middle">{t:.5g}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{HEIGHT / 2:.0f}" font-family="monospace" '
                     f'font-size="12" transform="rotate(-90 16 {HEIGHT / 2:.0f})" '
                     f'text-anchor="middle">{y_label}</text>')
    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
        if pts:
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         f'stroke-width="1.2"/>')
        lx = MARGIN_L + 10 + 150 * idx
        parts.append(f'<line x1="{lx}" y1="{MARGIN_T + 12}" x2="{lx + 18}" '
                     f'y2="{MARGIN_T + 12}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 22}" y="{MARGIN_T + 16}" font-family="monospace" '
                     f'font-size="11">{label}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path
