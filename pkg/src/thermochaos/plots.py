"""Minimal deterministic SVG line plots (radial signals, divergence curves)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np


def line_svg(ys, xs=None, title: str = "", xlabel: str = "", ylabel: str = "",
             width: int = 640, height: int = 320) -> str:
    y = np.asarray(ys, dtype=np.float64)
    x = np.arange(len(y), dtype=np.float64) if xs is None else np.asarray(xs, dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    left, right, top, bottom = 60, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom

    def span(v):
        if len(v) == 0:
            return 0.0, 1.0
        lo, hi = float(v.min()), float(v.max())
        return (lo - 0.5, hi + 0.5) if hi == lo else (lo, hi)

    x0, x1 = span(x)
    y0, y1 = span(y)
    px = left + (x - x0) / (x1 - x0) * pw
    py = top + (1.0 - (y - y0) / (y1 - y0)) * ph
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>\n'
        f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2" points="{pts}"/>\n'
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>\n'
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>\n'
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {height / 2:.1f})">{escape(ylabel)}</text>\n'
        f'<text x="{left - 4}" y="{top + 4}" text-anchor="end" font-size="10">{y1:.4g}</text>\n'
        f'<text x="{left - 4}" y="{top + ph}" text-anchor="end" font-size="10">{y0:.4g}</text>\n'
        f'<text x="{left}" y="{top + ph + 14}" text-anchor="middle" font-size="10">{x0:.4g}</text>\n'
        f'<text x="{left + pw}" y="{top + ph + 14}" text-anchor="middle" font-size="10">{x1:.4g}</text>\n'
        "</svg>\n"
    )
