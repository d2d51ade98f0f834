"""Tile-grid choropleth of state-level summaries as a deterministic SVG.

Fill hue encodes the mean score through a two-anchor linear RGB ramp over
[0, 5]; fill opacity encodes sample size as min(1, log10(1 + n) / 3), so
reliability saturates at n = 1000. States without data render neutral gray.
Output is stable byte-for-byte: fixed element order, no timestamps.
"""

from __future__ import annotations

import json
from importlib import resources
from xml.sax.saxutils import escape

from .analysis import GroupSummary
from .errors import EmptyInputError, UnknownStateCodeError, VocabularyError
from .vocab import STATE_NAMES, state_code

RAMP_LOW = (247, 251, 255)
RAMP_HIGH = (8, 48, 107)
NEUTRAL_FILL = "#cccccc"

_CELL = 64
_GAP = 6
_MARGIN = 20
_LEGEND_HEIGHT = 70


def ramp_color(mean_scvi: float) -> str:
    """Linear interpolation between the ramp anchors, round-half-up per channel."""
    t = min(max(mean_scvi / 5.0, 0.0), 1.0)
    channels = (int(lo + t * (hi - lo) + 0.5) for lo, hi in zip(RAMP_LOW, RAMP_HIGH))
    return "#{:02x}{:02x}{:02x}".format(*channels)


def sample_opacity(n: int) -> float:
    """min(1, log10(1 + n) / 3): n = 1 is faint, n >= 999 fully opaque."""
    import math

    if n < 0:
        raise ValueError(f"sample size must be non-negative: {n}")
    return min(1.0, math.log10(1 + n) / 3.0)


def _load_grid() -> dict[str, tuple[int, int]]:
    raw = resources.files("scvindex.data").joinpath("state_grid.json").read_text()
    return {code: (col, row) for code, (col, row) in json.loads(raw).items()}


def render_choropleth(summaries: list[GroupSummary]) -> str:
    """Render group summaries keyed by US state (code or full name) to SVG."""
    if not summaries:
        raise EmptyInputError("no state summaries to render")
    by_code: dict[str, GroupSummary] = {}
    for summary in summaries:
        try:
            code = state_code(summary.group)
        except VocabularyError as exc:
            raise UnknownStateCodeError(str(exc)) from exc
        if code in by_code:
            raise UnknownStateCodeError(f"duplicate summaries for state {code}")
        by_code[code] = summary

    grid = _load_grid()
    columns = max(col for col, _ in grid.values()) + 1
    rows = max(row for _, row in grid.values()) + 1
    width = 2 * _MARGIN + columns * (_CELL + _GAP) - _GAP
    height = 2 * _MARGIN + rows * (_CELL + _GAP) - _GAP + _LEGEND_HEIGHT

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<defs>",
        '<linearGradient id="scvi-ramp" x1="0" y1="0" x2="1" y2="0">',
        f'<stop offset="0" stop-color="{ramp_color(0.0)}"/>',
        f'<stop offset="1" stop-color="{ramp_color(5.0)}"/>',
        "</linearGradient>",
        "</defs>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]

    for code in sorted(grid):
        col, row = grid[code]
        x = _MARGIN + col * (_CELL + _GAP)
        y = _MARGIN + row * (_CELL + _GAP)
        summary = by_code.get(code)
        if summary is None:
            fill, opacity = NEUTRAL_FILL, 1.0
            title = f"{STATE_NAMES[code]}: no data"
            extra = ' data-missing="true"'
        else:
            fill = ramp_color(summary.mean_scvi)
            opacity = sample_opacity(summary.n)
            title = (
                f"{STATE_NAMES[code]}: mean SCVI {summary.mean_scvi:.4f}, "
                f"n={summary.n}, CI [{summary.ci_lower:.4f}, {summary.ci_upper:.4f}]"
            )
            extra = f' data-scvi="{summary.mean_scvi:.4f}" data-n="{summary.n}"'
        parts.append(
            f'<g data-state="{code}"{extra}>'
            f'<title>{escape(title)}</title>'
            f'<rect x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" '
            f'fill="{fill}" fill-opacity="{opacity:.4f}" stroke="#444444" stroke-width="1"/>'
            f'<text x="{x + _CELL // 2}" y="{y + _CELL // 2 + 5}" '
            f'font-family="sans-serif" font-size="16" text-anchor="middle" '
            f'fill="#222222">{code}</text>'
            "</g>"
        )

    legend_y = height - _LEGEND_HEIGHT + 10
    legend_width = width - 2 * _MARGIN
    parts.extend([
        f'<g data-legend="scvi">'
        f'<rect x="{_MARGIN}" y="{legend_y}" width="{legend_width}" height="14" '
        f'fill="url(#scvi-ramp)" stroke="#444444" stroke-width="1"/>',
        *(
            f'<text x="{_MARGIN + legend_width * tick // 5}" y="{legend_y + 30}" '
            f'font-family="sans-serif" font-size="12" text-anchor="middle" '
            f'fill="#222222">{tick}</text>'
            for tick in range(6)
        ),
        f'<text x="{_MARGIN}" y="{legend_y + 48}" font-family="sans-serif" '
        f'font-size="12" fill="#222222">'
        "Fill: mean SCVI on [0, 5]. Opacity: min(1, log10(1 + n) / 3). "
        "Gray: no data.</text>",
        "</g>",
    ])
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
