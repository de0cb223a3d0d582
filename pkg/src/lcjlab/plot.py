"""Minimal SVG line plots from result CSVs (axes, series, optional log scales)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .errors import ValidationError
from .io import read_csv

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
W, H, PAD = 640, 420, 60


def _num(v):
    try:
        x = float(v)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(k) for k in range(a, b + 1)] if b > a else [float(a)]
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / 4 for i in range(5)]


def svg_plot(series: dict[str, list[tuple[float, float]]], xlabel: str, ylabel: str, title: str = "",
             logx: bool = False, logy: bool = False) -> str:
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = {k: [(tx(x), ty(y)) for x, y in v if (x > 0 or not logx) and (y > 0 or not logy)]
           for k, v in series.items()}
    xs = [p[0] for v in pts.values() for p in v]
    ys = [p[1] for v in pts.values() for p in v]
    if not xs:
        raise ValidationError("nothing to plot")
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    sx = lambda x: PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)
    sy = lambda y: H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>']
    for t in _ticks(x0, x1, logx):
        label = f"1e{int(t)}" if logx else f"{t:.3g}"
        out.append(f'<text x="{sx(t):.1f}" y="{H - PAD + 16}" text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1, logy):
        label = f"1e{int(t)}" if logy else f"{t:.3g}"
        out.append(f'<text x="{PAD - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 14}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i, (name, v) in enumerate(sorted(pts.items())):
        color = PALETTE[i % len(PALETTE)]
        v = sorted(v)
        path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in v)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        out.extend(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>' for x, y in v)
        out.append(f'<text x="{W - PAD + 4}" y="{PAD + 16 * i}" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(path, x: str, y: str, series: str | None = None, logx: bool = False, logy: bool = False) -> str:
    cols, rows = read_csv(path)
    for c in (x, y) + ((series,) if series else ()):
        if c not in cols:
            raise ValidationError(f"column {c!r} not in {path}")
    data: dict[str, list] = {}
    for r in rows:
        xv, yv = _num(r[x]), _num(r[y])
        if xv is None or yv is None:
            continue
        data.setdefault(r[series] if series else y, []).append((xv, yv))
    return svg_plot(data, x, y, title=str(path).rsplit("/", 1)[-1], logx=logx, logy=logy)
