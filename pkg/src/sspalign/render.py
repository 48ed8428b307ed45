"""Self-contained SVG heatmaps and per-year line charts."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

from .errors import EmptyInput
from .ingest import format_value
from .model import SCENARIOS, Orientation

# poor -> neutral -> good
_STOPS = ((0xD7, 0x30, 0x27), (0xFF, 0xFF, 0xBF), (0x1A, 0x98, 0x50))
LINE_COLOURS = {
    "SSP1": "#1b9e77",
    "SSP2": "#7570b3",
    "SSP3": "#d95f02",
    "SSP4": "#e7298a",
    "SSP5": "#666666",
}

CELL_W, CELL_H = 96, 30
LEFT, TOP = 150, 64


def shade(t: float) -> str:
    """Colour for goodness ``t`` in [0, 1] (1 = best aligned)."""
    t = min(1.0, max(0.0, t))
    if t <= 0.5:
        a, b, u = _STOPS[0], _STOPS[1], t / 0.5
    else:
        a, b, u = _STOPS[1], _STOPS[2], (t - 0.5) / 0.5
    rgb = (round(x + (y - x) * u) for x, y in zip(a, b))
    return "#" + "".join(f"{c:02x}" for c in rgb)


def _open(width: int, height: int, title: str, provenance: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f"<title>{escape(title)}</title>",
        f"<metadata>provenance {escape(provenance)}</metadata>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def heatmap_svg(
    entries: Mapping[tuple[str, str], float],
    orientation: Orientation | str,
    method: str,
    provenance: str = "",
) -> str:
    """Regions as rows, SSP1..SSP5 as columns, every cell value-labelled.

    Shading spans the observed score range and always runs from red (worst)
    to green (best) under the matrix orientation; a flat matrix is shaded
    uniformly at mid-scale.
    """
    if not entries:
        raise EmptyInput("cannot render an empty score matrix")
    orientation = Orientation(orientation)
    regions = sorted({r for r, _ in entries})
    values = list(entries.values())
    lo, hi = min(values), max(values)
    width = LEFT + CELL_W * len(SCENARIOS) + 20
    height = TOP + CELL_H * len(regions) + 20
    title = f"{method} scores ({orientation.value})"
    out = _open(width, height, title, provenance)
    out.append(f'<text x="{LEFT}" y="24" font-size="15" font-weight="bold">{escape(title)}</text>')
    for j, s in enumerate(SCENARIOS):
        x = LEFT + CELL_W * j + CELL_W / 2
        out.append(f'<text x="{x:.1f}" y="{TOP - 10}" font-size="12" text-anchor="middle">{s.value}</text>')
    for i, region in enumerate(regions):
        y = TOP + CELL_H * i
        out.append(
            f'<text x="{LEFT - 8}" y="{y + CELL_H / 2 + 4:.1f}" font-size="12" text-anchor="end">{escape(region)}</text>'
        )
        for j, s in enumerate(SCENARIOS):
            x = LEFT + CELL_W * j
            v = entries.get((region, s.value))
            if v is None:
                out.append(
                    f'<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="#eeeeee" stroke="#ffffff"/>'
                )
                continue
            t = 0.5 if hi == lo else (v - lo) / (hi - lo)
            if orientation is Orientation.LOWER_BETTER:
                t = 1.0 - t
            out.append(
                f'<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" '
                f'fill="{shade(t)}" stroke="#ffffff"/>'
            )
            out.append(
                f'<text class="value" x="{x + CELL_W / 2:.1f}" y="{y + CELL_H / 2 + 4:.1f}" '
                f'font-size="11" text-anchor="middle">{format_value(v)}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart_svg(
    region: str,
    years: Sequence[int],
    series: Mapping[str, Sequence[float | None]],
    provenance: str = "",
    title: str | None = None,
) -> str:
    """One polyline per scenario across ``years``; ``None`` values are skipped."""
    if not years or not series:
        raise EmptyInput("cannot render an empty time series")
    width, height = 680, 380
    left, right, top, bottom = 90, 110, 50, 50
    plot_w, plot_h = width - left - right, height - top - bottom
    values = [v for vs in series.values() for v in vs if v is not None]
    if not values:
        raise EmptyInput("no values to plot")
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    y0, y1 = years[0], years[-1]

    def px(year):
        return left + (plot_w / 2 if y1 == y0 else plot_w * (year - y0) / (y1 - y0))

    def py(v):
        return top + plot_h * (hi - v) / (hi - lo)

    title = title or f"norm score over time: {region}"
    out = _open(width, height, title, provenance)
    out.append(f'<text x="{left}" y="28" font-size="15" font-weight="bold">{escape(title)}</text>')
    out.append(
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999999"/>'
    )
    for year in years:
        x = px(year)
        out.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 18}" font-size="11" text-anchor="middle">{year}</text>'
        )
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = py(v)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#999999"/>')
        out.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="10" text-anchor="end">{format_value(v)}</text>'
        )
    for n, (name, vs) in enumerate(series.items()):
        pts = " ".join(f"{px(yr):.2f},{py(v):.2f}" for yr, v in zip(years, vs) if v is not None)
        colour = LINE_COLOURS.get(name, "#000000")
        out.append(
            f'<polyline data-scenario={quoteattr(name)} points="{pts}" fill="none" stroke="{colour}" stroke-width="2"/>'
        )
        ly = top + 14 + 18 * n
        out.append(
            f'<line x1="{left + plot_w + 12}" y1="{ly}" x2="{left + plot_w + 32}" y2="{ly}" stroke="{colour}" stroke-width="2"/>'
        )
        out.append(f'<text x="{left + plot_w + 38}" y="{ly + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
