"""Tiny dependency-free SVG line plots for experiment tables.

Good enough for eyeballing a Monte Carlo sweep next to its bound; not a
plotting library.  Series may contain None gaps, which split the path.
"""
from __future__ import annotations

import math

_COLORS = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2",
)

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _ticks(lo, hi, log):
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0**e for e in range(lo_e, hi_e + 1)]
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10.0 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(t)
        t += step
    return out


def _fmt_tick(v):
    if v == 0:
        return "0"
    e = math.log10(abs(v))
    if abs(e - round(e)) < 1e-9 and (e >= 4 or e <= -3):
        return f"1e{int(round(e))}"
    return f"{v:g}"


def render_lines(series, title="", xlabel="", ylabel="", logx=False, logy=False):
    """Render named series to an SVG document string.

    series: list of (label, points) with points a list of (x, y); y may be
    None to mark a gap.  Log axes drop non-positive values.
    """
    xs, ys = [], []
    for _, pts in series:
        for x, y in pts:
            if y is None:
                continue
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ValueError("nothing to plot: all points are gaps")
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xlo == xhi:
        xlo, xhi = xlo * 0.9 if xlo else -1, xhi * 1.1 if xhi else 1
    if ylo == yhi:
        ylo, yhi = ylo * 0.9 if ylo else -1, yhi * 1.1 if yhi else 1
    if not logy:
        pad = 0.05 * (yhi - ylo)
        ylo, yhi = ylo - pad, yhi + pad

    def px(x):
        f = (math.log10(x) - math.log10(xlo)) / (math.log10(xhi) - math.log10(xlo)) if logx \
            else (x - xlo) / (xhi - xlo)
        return _ML + f * (_W - _ML - _MR)

    def py(y):
        f = (math.log10(y) - math.log10(ylo)) / (math.log10(yhi) - math.log10(ylo)) if logy \
            else (y - ylo) / (yhi - ylo)
        return _H - _MB - f * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
    ]
    axis = f'{_ML},{_MT} {_ML},{_H - _MB} {_W - _MR},{_H - _MB}'
    parts.append(f'<polyline points="{axis}" fill="none" stroke="black"/>')

    for t in _ticks(xlo, xhi, logx):
        if t < xlo * (1 - 1e-9) or t > xhi * (1 + 1e-9):
            continue
        x = px(t)
        parts.append(f'<line x1="{x:.1f}" y1="{_H - _MB}" x2="{x:.1f}" y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{_H - _MB + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _ticks(ylo, yhi, logy):
        if t < ylo * (1 - 1e-9) or t > yhi * (1 + 1e-9):
            continue
        y = py(t)
        parts.append(f'<line x1="{_ML - 5}" y1="{y:.1f}" x2="{_ML}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt_tick(t)}</text>')
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{(_MT + _H - _MB) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2})">{ylabel}</text>'
    )

    for si, (label, pts) in enumerate(series):
        color = _COLORS[si % len(_COLORS)]
        runs, cur = [], []
        for x, y in pts:
            bad = y is None or (logx and x <= 0) or (logy and y <= 0)
            if bad:
                if cur:
                    runs.append(cur)
                cur = []
            else:
                cur.append((x, y))
        if cur:
            runs.append(cur)
        for run in runs:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in run)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        ly = _MT + 16 + 16 * si
        parts.append(
            f'<line x1="{_W - _MR - 150}" y1="{ly - 4}" x2="{_W - _MR - 125}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(f'<text x="{_W - _MR - 120}" y="{ly}">{label}</text>')

    parts.append("</svg>")
    return "\n".join(parts)


def plot_table(result, name, outpath):
    """Plot one result table as value-vs-first-column lines, bound dashed in."""
    columns, rows = result.tables[name]
    idx = {c: i for i, c in enumerate(columns)}
    if "mechanism" in idx:
        xcol, ycol = "s", "mse"
        keys = sorted({r[idx["mechanism"]] for r in rows})
        series = [
            (k, [(r[idx[xcol]], r[idx[ycol]]) for r in rows if r[idx["mechanism"]] == k])
            for k in keys
        ]
        bounds = sorted({(r[idx[xcol]], r[idx["ppcr_trace"]]) for r in rows})
        series.append(("bound", list(bounds)))
        svg = render_lines(series, title=name, xlabel="s", ylabel="mse", logy=True)
    elif "sensor" in idx:
        xcol, ycol = "k", "mse"
        sensors = sorted({r[idx["sensor"]] for r in rows})
        series = [
            (f"sensor {i}", [(r[idx[xcol]], r[idx[ycol]]) for r in rows if r[idx["sensor"]] == i])
            for i in sensors
        ]
        bounds = sorted({(r[idx[xcol]], r[idx["bound"]]) for r in rows})
        series.append(("bound", list(bounds)))
        logx = name.startswith("online")
        svg = render_lines(series, title=name, xlabel="k", ylabel="mse", logx=logx, logy=True)
    else:
        series = [("variance", [(r[0], r[1]) for r in rows]), ("bound", [(r[0], r[3]) for r in rows])]
        svg = render_lines(series, title=name, xlabel="reps", ylabel="variance")
    with open(outpath, "w") as fh:
        fh.write(svg)
    return outpath
