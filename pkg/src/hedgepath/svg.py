"""Minimal deterministic SVG line charts for experiment outputs.

Hand-rolled so reruns produce byte-identical files: no timestamps, no
generator metadata, fixed float formatting.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH = 640
_HEIGHT = 400
_MARGIN_LEFT = 60
_MARGIN_RIGHT = 20
_MARGIN_TOP = 30
_MARGIN_BOTTOM = 45


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def line_chart(
    series: Mapping[str, Sequence[float]],
    title: str,
    x_label: str,
    y_label: str,
    x_values: Sequence[float] | None = None,
) -> str:
    """Render named series as an SVG polyline chart string."""
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM
    lengths = {len(v) for v in series.values() if len(v)}
    n = max(lengths) if lengths else 0
    xs = list(x_values) if x_values is not None else list(range(n))
    x_min, x_max = (min(xs), max(xs)) if xs else (0.0, 1.0)
    all_y = [y for values in series.values() for y in values]
    y_min = min(all_y + [0.0]) if all_y else 0.0
    y_max = max(all_y) if all_y else 1.0
    if x_max == x_min:
        x_max = x_min + 1.0
    if y_max == y_min:
        y_max = y_min + 1.0

    def px(x: float) -> float:
        return _MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w

    def py(y: float) -> float:
        return _MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.0f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP + plot_h}" '
        f'x2="{_MARGIN_LEFT + plot_w}" y2="{_MARGIN_TOP + plot_h}" stroke="black"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" '
        f'x2="{_MARGIN_LEFT}" y2="{_MARGIN_TOP + plot_h}" stroke="black"/>',
        f'<text x="{_MARGIN_LEFT + plot_w / 2:.0f}" y="{_HEIGHT - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>',
        f'<text x="14" y="{_MARGIN_TOP + plot_h / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {_MARGIN_TOP + plot_h / 2:.0f})">{y_label}</text>',
    ]
    for tick in range(5):
        y_val = y_min + (y_max - y_min) * tick / 4
        y_pos = py(y_val)
        parts.append(
            f'<line x1="{_MARGIN_LEFT - 4}" y1="{y_pos:.1f}" x2="{_MARGIN_LEFT}" '
            f'y2="{y_pos:.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{y_pos + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{_fmt(y_val)}</text>'
        )
        x_val = x_min + (x_max - x_min) * tick / 4
        x_pos = px(x_val)
        parts.append(
            f'<line x1="{x_pos:.1f}" y1="{_MARGIN_TOP + plot_h}" x2="{x_pos:.1f}" '
            f'y2="{_MARGIN_TOP + plot_h + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x_pos:.1f}" y="{_MARGIN_TOP + plot_h + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{_fmt(x_val)}</text>'
        )
    for idx, (name, values) in enumerate(sorted(series.items())):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(
            f"{px(xs[i]):.1f},{py(v):.1f}" for i, v in enumerate(values)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        legend_y = _MARGIN_TOP + 14 * idx
        parts.append(
            f'<line x1="{_MARGIN_LEFT + plot_w - 130}" y1="{legend_y + 6}" '
            f'x2="{_MARGIN_LEFT + plot_w - 110}" y2="{legend_y + 6}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT + plot_w - 105}" y="{legend_y + 10}" '
            f'font-family="sans-serif" font-size="10">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_line_chart(
    path: Path | str,
    series: Mapping[str, Sequence[float]],
    title: str,
    x_label: str,
    y_label: str,
    x_values: Sequence[float] | None = None,
) -> None:
    Path(path).write_text(
        line_chart(series, title, x_label, y_label, x_values), encoding="utf-8"
    )
