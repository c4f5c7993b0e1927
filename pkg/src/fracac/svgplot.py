"""Minimal deterministic SVG line plots — no plotting stack, byte-stable.

Each plot is assembled from fixed-precision text, so identical data yields
identical bytes.  Series beyond a point budget are downsampled by a uniform
stride (keeping endpoints) to keep files small.  Log-scale axes fall back to
linear with a note when the data contains nonpositive values, rather than
failing.
"""

from __future__ import annotations

import math

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
_W, _H = 720, 460
_ML, _MR, _MT, _MB = 72, 24, 36, 52
_MAX_POINTS = 1600


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if span / step <= count + 0.5:
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return out or [lo, hi]


def _downsample(xs, ys):
    n = len(xs)
    if n <= _MAX_POINTS:
        return xs, ys
    stride = (n - 1) // (_MAX_POINTS - 1) + 1
    idx = list(range(0, n, stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return [xs[i] for i in idx], [ys[i] for i in idx]


def line_plot(path: str, series, title: str = "", xlabel: str = "",
              ylabel: str = "", logx: bool = False, logy: bool = False) -> str | None:
    """Write a line plot; ``series`` is a list of (label, xs, ys).

    Returns the path, or None (nothing written) when no series carries at
    least one finite point.
    """
    cleaned = []
    for label, xs, ys in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(float(x)) and math.isfinite(float(y))]
        if pts:
            cleaned.append((str(label), pts))
    if not cleaned:
        return None
    notes = []
    if logx and any(p[0] <= 0 for _, pts in cleaned for p in pts):
        logx, notes = False, notes + ["linear x (nonpositive data)"]
    if logy and any(p[1] <= 0 for _, pts in cleaned for p in pts):
        logy, notes = False, notes + ["linear y (nonpositive data)"]
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)

    xlo = min(tx(p[0]) for _, pts in cleaned for p in pts)
    xhi = max(tx(p[0]) for _, pts in cleaned for p in pts)
    ylo = min(ty(p[1]) for _, pts in cleaned for p in pts)
    yhi = max(ty(p[1]) for _, pts in cleaned for p in pts)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.04 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    iw = _W - _ML - _MR
    ih = _H - _MT - _MB
    px = lambda v: _ML + iw * (tx(v) - xlo) / (xhi - xlo)
    py = lambda v: _MT + ih * (yhi - ty(v)) / (yhi - ylo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{_ML}" y="{_MT}" width="{iw}" height="{ih}" fill="none" '
           f'stroke="#333333" stroke-width="1"/>']
    style = 'font-family="monospace" font-size="12" fill="#333333"'
    if title:
        out.append(f'<text x="{_W // 2}" y="22" text-anchor="middle" '
                   f'font-family="monospace" font-size="14" fill="#111111">{title}</text>')

    for t in _ticks(xlo, xhi):
        x = _ML + iw * (t - xlo) / (xhi - xlo)
        out.append(f'<line x1="{_fmt(x)}" y1="{_MT + ih}" x2="{_fmt(x)}" '
                   f'y2="{_MT + ih + 5}" stroke="#333333"/>')
        lab = f"1e{t:g}" if logx else f"{t:g}"
        out.append(f'<text x="{_fmt(x)}" y="{_MT + ih + 20}" text-anchor="middle" {style}>{lab}</text>')
    for t in _ticks(ylo, yhi):
        y = _MT + ih * (yhi - t) / (yhi - ylo)
        out.append(f'<line x1="{_ML - 5}" y1="{_fmt(y)}" x2="{_ML}" '
                   f'y2="{_fmt(y)}" stroke="#333333"/>')
        lab = f"1e{t:g}" if logy else f"{t:g}"
        out.append(f'<text x="{_ML - 8}" y="{_fmt(y + 4)}" text-anchor="end" {style}>{lab}</text>')
    if xlabel:
        out.append(f'<text x="{_ML + iw // 2}" y="{_H - 12}" text-anchor="middle" {style}>{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="18" y="{_MT + ih // 2}" text-anchor="middle" {style} '
                   f'transform="rotate(-90 18 {_MT + ih // 2})">{ylabel}</text>')

    for i, (label, pts) in enumerate(cleaned):
        color = _PALETTE[i % len(_PALETTE)]
        xs, ys = _downsample([p[0] for p in pts], [p[1] for p in pts])
        coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        if len(xs) == 1:
            out.append(f'<circle cx="{_fmt(px(xs[0]))}" cy="{_fmt(py(ys[0]))}" '
                       f'r="3" fill="{color}"/>')
        else:
            out.append(f'<polyline points="{coords}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 16 + 16 * i
        out.append(f'<line x1="{_W - _MR - 150}" y1="{ly - 4}" x2="{_W - _MR - 126}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _MR - 120}" y="{ly}" {style}>{label}</text>')
    for j, note in enumerate(notes):
        out.append(f'<text x="{_ML + 6}" y="{_MT + 14 + 14 * j}" {style}>{note}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def overlay_plot(path: str, segments, points=None, title: str = "") -> str | None:
    """2D overlay: interface segments (list of ((x1,y1),(x2,y2))) and points."""
    seg = [((float(a[0]), float(a[1])), (float(b[0]), float(b[1])))
           for a, b in (segments or [])]
    pts = [(float(p[0]), float(p[1])) for p in (points or [])]
    allx = [c[0] for s in seg for c in s] + [p[0] for p in pts]
    ally = [c[1] for s in seg for c in s] + [p[1] for p in pts]
    if not allx:
        return None
    xlo, xhi = min(allx), max(allx)
    ylo, yhi = min(ally), max(ally)
    span = max(xhi - xlo, yhi - ylo, 1e-9)
    size = 560
    m = 40
    sx = lambda x: m + (size - 2 * m) * (x - xlo) / span
    sy = lambda y: size - m - (size - 2 * m) * (y - ylo) / span
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        out.append(f'<text x="{size // 2}" y="20" text-anchor="middle" '
                   f'font-family="monospace" font-size="13" fill="#111111">{title}</text>')
    for a, b in seg:
        out.append(f'<line x1="{_fmt(sx(a[0]))}" y1="{_fmt(sy(a[1]))}" '
                   f'x2="{_fmt(sx(b[0]))}" y2="{_fmt(sy(b[1]))}" '
                   f'stroke="#d62728" stroke-width="1.5"/>')
    for p in pts:
        out.append(f'<circle cx="{_fmt(sx(p[0]))}" cy="{_fmt(sy(p[1]))}" r="2" fill="#1f77b4"/>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path
