"""Standalone SVG line charts of OPE error against sqrt(K).

Data are drawn inside a group whose transform flips the y axis, so the
coordinates written into each ``polyline`` and band ``path`` are in a
y-up frame: a decreasing error curve has decreasing y coordinates.
"""

import math
import os
from xml.sax.saxutils import escape

DEFAULT_STYLE = {
    "width": 480,
    "height": 360,
    "margin": (30, 20, 50, 70),  # top, right, bottom, left
    "colors": {"va_ope": "#1f77b4", "fqi_ope": "#d62728"},
    "fallback_colors": ("#2ca02c", "#9467bd", "#8c564b"),
    "band_opacity": 0.2,
    "labels": {"va_ope": "VA-OPE", "fqi_ope": "FQI-OPE"},
}


def _fmt(x):
    return f"{x:.3f}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def render_svg(rows, title, style=None):
    """SVG document (a string) for summary rows sharing one (H, p)."""
    st = dict(DEFAULT_STYLE, **(style or {}))
    W, Hpx = st["width"], st["height"]
    top, right, bottom, left = st["margin"]
    pw, ph = W - left - right, Hpx - top - bottom

    methods = sorted({r.method for r in rows})
    series = {m: sorted((r for r in rows if r.method == m), key=lambda r: r.K) for m in methods}
    floor = 1e-300
    xs = [math.sqrt(r.K) for r in rows]
    ys = [math.log10(max(v, floor)) for r in rows for v in (r.mean, r.q10, r.q90)]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        # y-up frame inside the flipped group
        return (y - y_lo) / (y_hi - y_lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{Hpx}" '
        f'viewBox="0 0 {W} {Hpx}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{W}" height="{Hpx}" fill="white"/>',
        f'<text x="{left + pw / 2}" y="{top - 10}" text-anchor="middle" font-size="13">'
        f"{escape(title)}</text>",
        f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = left + px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{top + ph}" x2="{_fmt(x)}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{top + ph + 16}" text-anchor="middle">{t:.0f}</text>')
    for t in _ticks(y_lo, y_hi):
        y = top + ph - py(t)
        out.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">{t:.2f}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{Hpx - 12}" text-anchor="middle">sqrt(K)</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">log10(OPE error)</text>')

    out.append(f'<g class="data" transform="translate({left},{top + ph}) scale(1,-1)">')
    colors = {}
    for i, m in enumerate(methods):
        colors[m] = st["colors"].get(m, st["fallback_colors"][i % len(st["fallback_colors"])])
        pts = series[m]
        upper = [(px(math.sqrt(r.K)), py(math.log10(max(r.q90, floor)))) for r in pts]
        lower = [(px(math.sqrt(r.K)), py(math.log10(max(r.q10, floor)))) for r in pts]
        ring = upper + lower[::-1]
        d = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in ring) + " Z"
        out.append(f'<path class="band" data-method="{m}" d="{d}" fill="{colors[m]}" '
                   f'fill-opacity="{st["band_opacity"]}" stroke="none"/>')
    for m in methods:
        pts = " ".join(f"{_fmt(px(math.sqrt(r.K)))},{_fmt(py(math.log10(max(r.mean, floor))))}"
                       for r in series[m])
        out.append(f'<polyline class="series" data-method="{m}" points="{pts}" fill="none" '
                   f'stroke="{colors[m]}" stroke-width="2"/>')
    out.append("</g>")

    for i, m in enumerate(methods):
        y = top + 8 + 16 * i
        x = left + pw - 110
        out.append(f'<rect x="{x}" y="{y - 6}" width="18" height="4" fill="{colors[m]}"/>')
        out.append(f'<text x="{x + 24}" y="{y}">{escape(st["labels"].get(m, m))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(summary, out_dir, style=None):
    """Write one SVG per (H, p) found in ``summary``; return the file paths."""
    if not summary:
        raise ValueError("empty summary")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for H, p in sorted({(r.H, r.p) for r in summary}):
        rows = [r for r in summary if (r.H, r.p) == (H, p)]
        path = os.path.join(out_dir, f"error_H{H}_p{p:g}.svg")
        with open(path, "w") as f:
            f.write(render_svg(rows, f"OPE error, H={H}, p={p:g}", style))
        paths.append(path)
    return paths
