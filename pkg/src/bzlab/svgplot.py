"""Minimal deterministic SVG renderer for log-log error plots.

No plotting dependency: output is a self-contained SVG with one polyline per
series, decade ticks on log axes, and a text legend. Identical inputs produce
byte-identical files, so plots can be golden-tested.
"""

import math
from dataclasses import dataclass

from .errors import BzlabError

WIDTH, HEIGHT = 640, 460
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 20, 50

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: x column, series grouping keys, y column, log-log flag."""

    x: str = "L"
    series_keys: tuple = ("scheme", "sigma")
    y: str = "abs_error"
    loglog: bool = True
    title: str = ""


def _series_label(keys, values):
    return " ".join(f"{k}={v}" for k, v in zip(keys, values) if v != "")


def build_series(rows, spec):
    """Group CSV rows into series; returns ([(label, points)], dropped_count).

    Points with non-positive coordinates are dropped on log axes and counted.
    """
    for col in (spec.x, spec.y) + tuple(spec.series_keys):
        if rows and col not in rows[0]:
            raise BzlabError(f"column {col!r} not present in the CSV")
    groups = {}
    dropped = 0
    for row in rows:
        if row[spec.x] == "" or row[spec.y] == "":
            continue
        x, y = float(row[spec.x]), float(row[spec.y])
        if spec.loglog and (x <= 0.0 or y <= 0.0):
            dropped += 1
            continue
        key = tuple(row[k] for k in spec.series_keys)
        groups.setdefault(key, []).append((x, y))
    series = [( _series_label(spec.series_keys, key), sorted(pts))
              for key, pts in sorted(groups.items())]
    series = [(label, pts) for label, pts in series if pts]
    if not series:
        raise BzlabError("no plottable series (all points empty or dropped)")
    return series, dropped


def _transform(v, loglog):
    return math.log10(v) if loglog else v


def _ticks(lo, hi, loglog):
    if loglog:
        return list(range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1))
    if hi == lo:
        return [lo]
    step = 10.0 ** math.floor(math.log10(hi - lo))
    first = math.ceil(lo / step)
    return [t * step for t in range(first, math.floor(hi / step) + 1)]


def render_svg(series, spec):
    """Render grouped series to SVG text."""
    tx = [[(_transform(x, spec.loglog), _transform(y, spec.loglog)) for x, y in pts]
          for _, pts in series]
    xs = [p[0] for pts in tx for p in pts]
    ys = [p[1] for pts in tx for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    padx = 0.04 * (x1 - x0)
    pady = 0.04 * (y1 - y0)
    x0, x1 = x0 - padx, x1 + padx
    y0, y1 = y0 - pady, y1 + pady
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + plot_w * (x - x0) / (x1 - x0)

    def py(y):
        return MARGIN_T + plot_h * (y1 - y) / (y1 - y0)

    out = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
               f'viewBox="0 0 {WIDTH} {HEIGHT}">')
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
               f'fill="none" stroke="black"/>')

    for t in _ticks(x0, x1, spec.loglog):
        x = px(t)
        label = f"1e{t}" if spec.loglog else "%g" % t
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T + plot_h}" x2="{x:.2f}" '
                   f'y2="{MARGIN_T + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + plot_h + 18}" font-size="11" '
                   f'text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1, spec.loglog):
        y = py(t)
        label = f"1e{t}" if spec.loglog else "%g" % t
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{y:.2f}" x2="{MARGIN_L}" '
                   f'y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{label}</text>')
    out.append(f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="{HEIGHT - 12}" font-size="13" '
               f'text-anchor="middle">{spec.x}</text>')
    out.append(f'<text x="16" y="{MARGIN_T + plot_h / 2:.2f}" font-size="13" '
               f'text-anchor="middle" transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.2f})">'
               f'{spec.y}</text>')
    if spec.title:
        out.append(f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="14" font-size="13" '
                   f'text-anchor="middle">{spec.title}</text>')

    for i, ((label, _), pts) in enumerate(zip(series, tx)):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        ly = MARGIN_T + 14 + 16 * i
        lx = MARGIN_L + plot_w + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
