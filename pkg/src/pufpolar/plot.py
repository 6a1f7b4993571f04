"""Log-y BLER curves as a standalone SVG; no plotting library needed."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 20, 50


def read_series(path: str | Path) -> list[tuple[float, float]]:
    """(epsilon, bler) pairs from a sweep or baseline CSV."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"epsilon", "bler"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: needs 'epsilon' and 'bler' columns")
        try:
            return [(float(r["epsilon"]), float(r["bler"])) for r in reader]
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: malformed row") from exc


def render_svg(series: Sequence[tuple[str, list[tuple[float, float]]]]) -> str:
    """One polyline plus point markers per series; zero-BLER points are skipped."""
    pts = [(lab, [(x, y) for x, y in rows if y > 0]) for lab, rows in series]
    xs = [x for _, p in pts for x, _ in p]
    ys = [y for _, p in pts for _, y in p]
    if not xs:
        raise ValueError("nothing to plot: no positive BLER values")
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 0.01, x1 + 0.01
    d0 = math.floor(math.log10(min(ys)))
    d1 = math.ceil(math.log10(max(ys)))
    if d0 == d1:
        d1 += 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + (d1 - math.log10(y)) / (d1 - d0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>']
    for d in range(d0, d1 + 1):
        y = TOP + (d1 - d) / (d1 - d0) * ph
        out.append(f'<line class="grid" x1="{LEFT}" y1="{y:.2f}" x2="{LEFT + pw}" y2="{y:.2f}" '
                   'stroke="#ccc"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">1e{d}</text>')
    for k in range(6):
        x = x0 + k * (x1 - x0) / 5
        out.append(f'<text x="{sx(x):.2f}" y="{TOP + ph + 18}" text-anchor="middle">'
                   f'{x:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 8}" text-anchor="middle">epsilon</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2})">BLER</text>')
    for k, (label, p) in enumerate(pts):
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<g class="series" stroke="{color}" fill="{color}">')
        if p:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
            out.append(f'<polyline points="{coords}" fill="none" stroke-width="1.5"/>')
            for x, y in p:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3"/>')
        ly = TOP + 10 + 18 * k
        out.append(f'<text x="{LEFT + pw + 12}" y="{ly + 4}" stroke="none">{escape(label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(csv_paths: Sequence[str | Path], out_path: str | Path,
              labels: Sequence[str] | None = None) -> None:
    """Read sweep CSVs and write the SVG; nothing is written on error."""
    if labels is not None and len(labels) != len(csv_paths):
        raise ValueError("need one label per CSV")
    series = []
    for k, path in enumerate(csv_paths):
        rows = read_series(path)
        if not rows:
            raise ValueError(f"{path}: no data rows")
        series.append((labels[k] if labels else Path(path).stem, rows))
    svg = render_svg(series)
    Path(out_path).write_text(svg)
