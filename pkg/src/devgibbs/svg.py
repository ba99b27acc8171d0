"""Minimal deterministic SVG line plots.

Hand-rolled so the output is a pure function of the data: no timestamps,
ids, or library version strings.  Presentation only; excluded from the
byte-determinism contract all the same.
"""

from __future__ import annotations

import math

W, H = 640, 420
MARGIN = 56


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(vals, lo, hi, out_lo, out_hi):
    if hi <= lo:
        hi = lo + 1.0
    return [out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo) for v in vals]


def line_plot(xs, ys, title: str, xlabel: str, ylabel: str,
              logy: bool = False) -> str:
    pts = [(x, y) for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y) and (not logy or y > 0)]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    if pts:
        px = [p[0] for p in pts]
        py = [math.log10(p[1]) if logy else p[1] for p in pts]
        x0, x1 = min(px), max(px)
        y0, y1 = min(py), max(py)
        sx = _scale(px, x0, x1, MARGIN, W - MARGIN)
        sy = _scale(py, y0, y1, H - MARGIN, MARGIN)
        poly = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx, sy))
        parts.append(f'<polyline points="{poly}" fill="none" '
                     f'stroke="#1f77b4" stroke-width="1.5"/>')
        for gx, gv in ((MARGIN, x0), (W - MARGIN, x1)):
            parts.append(f'<text x="{gx}" y="{H - MARGIN + 18}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="11">{gv:.4g}</text>')
        for gy, gv in ((H - MARGIN, y0), (MARGIN, y1)):
            label = f"1e{gv:.2f}" if logy else f"{gv:.4g}"
            parts.append(f'<text x="{MARGIN - 6}" y="{gy + 4}" '
                         f'text-anchor="end" font-family="sans-serif" '
                         f'font-size="11">{label}</text>')
    parts.append(
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{W - 2 * MARGIN}" '
        f'height="{H - 2 * MARGIN}" fill="none" stroke="#444"/>')
    parts.append(f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{H // 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {H // 2})">{ylabel}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
