"""Self-contained SVG line charts for experiment output.

No rasterizer, no external dependency: charts are plain SVG text with
fixed-precision coordinates, so identical input produces byte-identical
output. At most eight series fit on one chart.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from .errors import EmptySeries, TooManySeries

MAX_SERIES = 8

_WIDTH, _HEIGHT = 800, 480
_MARGIN_LEFT, _MARGIN_RIGHT, _MARGIN_TOP, _MARGIN_BOTTOM = 62, 24, 24, 46

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
    "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
)


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    """Round tick positions at a 1/2/5 step covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target - 1, 1)
    power = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * power
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + step * 1e-9:
        ticks.append(0.0 if abs(value) < step * 1e-9 else value)
        value += step
    return ticks


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_series(
    series: Mapping[str, Sequence[tuple[float, float]]],
    output_path=None,
    x_label: str = "t (s)",
    y_label: str = "velocity (m/s)",
) -> str:
    """Render named (t, value) series as one SVG line chart.

    Returns the SVG text; writes it to ``output_path`` when given.
    Raises EmptySeries for a chart with no series or an empty series,
    TooManySeries above eight.
    """
    if not series:
        raise EmptySeries("no series to plot")
    if len(series) > MAX_SERIES:
        raise TooManySeries(f"{len(series)} series; a chart holds at most {MAX_SERIES}")
    for name, points in series.items():
        if len(points) == 0:
            raise EmptySeries(f"series {name!r} has no points")

    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi <= y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    y_pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    # axes
    x0, y0 = _MARGIN_LEFT, _MARGIN_TOP + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>'
    )
    parts.append(f'<line x1="{x0}" y1="{_MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for tick in _nice_ticks(x_lo, x_hi):
        x = px(tick)
        parts.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{x:.2f}" y="{y0 + 18}" font-size="11" text-anchor="middle" '
            f'font-family="sans-serif">{tick:g}</text>'
        )
    for tick in _nice_ticks(y_lo, y_hi):
        y = py(tick)
        parts.append(f'<line x1="{x0 - 5}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end" '
            f'font-family="sans-serif">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{x0 + plot_w / 2:.2f}" y="{_HEIGHT - 8}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">{_escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="14" y="{_MARGIN_TOP + plot_h / 2:.2f}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 14 {_MARGIN_TOP + plot_h / 2:.2f})">'
        f"{_escape(y_label)}</text>"
    )
    # series + legend
    for k, (name, points) in enumerate(series.items()):
        color = _PALETTE[k]
        coords = " ".join(f"{px(t):.2f},{py(v):.2f}" for t, v in points)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = _MARGIN_TOP + 14 + 16 * k
        lx = _WIDTH - _MARGIN_RIGHT - 130
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly}" font-size="11" font-family="sans-serif">'
            f"{_escape(name)}</text>"
        )
    parts.append("</svg>")
    document = "\n".join(parts) + "\n"
    if output_path is not None:
        with open(output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(document)
    return document
