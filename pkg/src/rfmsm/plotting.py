"""Standalone SVG figures: strategy/ratio heatmaps and accuracy-vs-SNR curves.

Hand-written SVG keeps figures diff-able in tests and avoids a graphics
dependency. Each file embeds a provenance comment naming its data source.
"""

from __future__ import annotations

import csv
import json
import math

from .errors import ValidationError

_CELL = 56
_MARGIN = 70


def _color(value: float, lo: float, hi: float) -> str:
    """Two-anchor ramp, dark blue (low) to yellow (high)."""
    if hi <= lo:
        t = 0.5
    else:
        t = (value - lo) / (hi - lo)
    t = min(1.0, max(0.0, t))
    r = int(40 + t * (250 - 40))
    g = int(50 + t * (220 - 50))
    b = int(120 + t * (60 - 120))
    return f"rgb({r},{g},{b})"


def heatmap_svg(rows: list[dict], source: str) -> str:
    """Render sweep CSV rows (strategy, ratio, accuracy) as a heatmap grid."""
    cells = []
    for row in rows:
        if row.get("accuracy") in (None, "", "error"):
            continue
        cells.append(
            (str(row["strategy"]), float(row["ratio"]), float(row["accuracy"]))
        )
    if not cells:
        raise ValidationError("no plottable cells in heatmap input")
    strategies = sorted({c[0] for c in cells})
    ratios = sorted({c[1] for c in cells})
    values = [c[2] for c in cells]
    lo, hi = min(values), max(values)
    width = _MARGIN * 2 + _CELL * len(ratios)
    height = _MARGIN * 2 + _CELL * len(strategies)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- data provenance: {source} -->",
        f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" font-size="14">'
        "masking strategy vs ratio: mean accuracy</text>",
    ]
    for strategy, ratio, acc in cells:
        col = ratios.index(ratio)
        row_i = strategies.index(strategy)
        x = _MARGIN + col * _CELL
        y = _MARGIN + row_i * _CELL
        parts.append(
            f'<rect class="cell" x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" '
            f'fill="{_color(acc, lo, hi)}" stroke="white"/>'
        )
        parts.append(
            f'<text x="{x + _CELL / 2:.0f}" y="{y + _CELL / 2 + 4:.0f}" text-anchor="middle" '
            f'font-size="11" fill="white">{acc:.2f}</text>'
        )
    for i, strategy in enumerate(strategies):
        parts.append(
            f'<text x="{_MARGIN - 10}" y="{_MARGIN + i * _CELL + _CELL / 2 + 4:.0f}" '
            f'text-anchor="end" font-size="12">{strategy}</text>'
        )
    for j, ratio in enumerate(ratios):
        parts.append(
            f'<text x="{_MARGIN + j * _CELL + _CELL / 2:.0f}" y="{_MARGIN - 10}" '
            f'text-anchor="middle" font-size="12">{ratio:g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heatmap_from_csv(path) -> str:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty heatmap CSV")
    return heatmap_svg(rows, source=str(path))


def snr_curve_svg(per_snr: dict[int, float], source: str) -> str:
    """Accuracy-vs-SNR line chart with one marked vertex per SNR level."""
    if not per_snr:
        raise ValidationError("no per-SNR accuracy points to plot")
    points = sorted((int(k), float(v)) for k, v in per_snr.items())
    width, height = 640, 400
    x0, y0, x1, y1 = 70, 40, width - 30, height - 50
    smin, smax = points[0][0], points[-1][0]
    span = max(1, smax - smin)

    def px(snr):
        return x0 + (snr - smin) / span * (x1 - x0)

    def py(acc):
        return y1 - acc * (y1 - y0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- data provenance: {source} -->",
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.0f}" y="{height - 12}" text-anchor="middle" font-size="12">SNR (dB)</text>',
        f'<text x="18" y="{(y0 + y1) / 2:.0f}" font-size="12" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.0f})" text-anchor="middle">accuracy</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(frac)
        parts.append(f'<line x1="{x0 - 4}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{frac:g}</text>'
        )
    poly = " ".join(f"{px(s):.1f},{py(a):.1f}" for s, a in points)
    parts.append(f'<polyline points="{poly}" fill="none" stroke="rgb(30,90,180)" stroke-width="2"/>')
    for s, a in points:
        parts.append(
            f'<circle class="pt" cx="{px(s):.1f}" cy="{py(a):.1f}" r="3" fill="rgb(30,90,180)"/>'
        )
    step = max(1, math.ceil(len(points) / 9))
    for s, _ in points[::step]:
        parts.append(
            f'<text x="{px(s):.1f}" y="{y1 + 16}" text-anchor="middle" font-size="10">{s}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def snr_curve_from_metrics(path) -> str:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid metrics JSON: {exc}")
    per_snr = doc.get("per_snr_accuracy")
    if not per_snr:
        raise ValidationError(f"{path}: metrics file has no per_snr_accuracy data")
    return snr_curve_svg({int(k): float(v) for k, v in per_snr.items()}, source=str(path))
