"""Plot-ready data: an x/y/series CSV and an optional dependency-free SVG line chart.

``plot_data.csv`` columns: ``series, x, y, stderr, n`` with one row per
(series, sweep point), taken from the summary rows.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from ..errors import ConfigError

PLOT_COLUMNS = ["series", "x", "y", "stderr", "n"]
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


@dataclass
class PlotSpec:
    title: str
    xlabel: str
    ylabel: str
    series: tuple = ()  # empty: every series in the table


def default_spec(table):
    if table.experiment == "shuffle_dof":
        return PlotSpec("Achievable DoF", "number of devices K", "DoF per message")
    if table.experiment == "edge_power":
        return PlotSpec("Average total power consumption", "target SINR [dB]", "total power [W]")
    return PlotSpec("Total power by phase method", "target SINR [dB]", "total power [W]")


def plot_points(table, spec: PlotSpec):
    """``{series: [(x, y, stderr, n), ...]}`` from the table's summary rows."""
    if not table.summary:
        raise ConfigError("result table has no aggregate rows to plot")
    wanted = list(spec.series) if spec.series else list(table.series)
    present = {s.algorithm for s in table.summary}
    missing = [s for s in wanted if s not in present]
    if missing:
        raise ConfigError(f"series not in table: {', '.join(missing)}")
    pts = {name: [] for name in wanted}
    for s in table.summary:
        if s.algorithm in pts:
            pts[s.algorithm].append((float(s.sweep_value), s.mean, s.stderr, s.feasible))
    return pts


def emit_plot_data(table, spec: PlotSpec = None, path=None):
    """Write (or return) the plot-data CSV."""
    spec = spec or default_spec(table)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_COLUMNS)
    for name, rows in plot_points(table, spec).items():
        for x, y, se, n in rows:
            w.writerow([name, repr(x), repr(y), repr(se), n])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def render_svg(table, spec: PlotSpec = None, path=None, width=640, height=420):
    """Minimal SVG line chart of the summary means."""
    spec = spec or default_spec(table)
    pts = plot_points(table, spec)
    finite = [(x, y) for rows in pts.values() for x, y, _, _ in rows if math.isfinite(y)]
    if not finite:
        raise ConfigError("no finite points to plot")
    xs = [p[0] for p in finite]
    ys = [p[1] for p in finite]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0 or abs(y1) or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(spec.title)}</text>',
        f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(spec.xlabel)}</text>',
        f'<text x="15" y="{mt + ph / 2}" text-anchor="middle" transform="rotate(-90 15 {mt + ph / 2})">{escape(spec.ylabel)}</text>',
    ]
    for i in range(5):
        yv = y0 + i * (y1 - y0) / 4
        out.append(f'<text x="{ml - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    for xv in sorted(set(xs)):
        out.append(f'<text x="{sx(xv):.1f}" y="{mt + ph + 16}" text-anchor="middle">{xv:g}</text>')
    for i, (name, rows) in enumerate(pts.items()):
        col = COLORS[i % len(COLORS)]
        seg = [(sx(x), sy(y)) for x, y, _, _ in rows if math.isfinite(y)]
        if seg:
            path_d = " ".join(f"{'M' if j == 0 else 'L'}{a:.1f},{b:.1f}" for j, (a, b) in enumerate(seg))
            out.append(f'<path d="{path_d}" fill="none" stroke="{col}" stroke-width="2"/>')
            out += [f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3" fill="{col}"/>' for a, b in seg]
        ly = mt + 16 + 18 * i
        out.append(f'<line x1="{ml + pw + 12}" y1="{ly}" x2="{ml + pw + 32}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 38}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
