"""Self-contained SVG 1.1 log-log panels for experiment results."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PANEL_W, PANEL_H = 320, 260
MARGIN = dict(left=58, right=14, top=30, bottom=44)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")

X_LABEL = {"bias": "n - 1", "variance": "K", "allocation": "N"}


def _ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def _panel(H, xs, ys, fit, bound, kind, color, ox) -> list[str]:
    lx = [math.log10(x) for x in xs]
    ly = [math.log10(y) for y in ys]
    x0, x1 = min(lx), max(lx)
    pad_x = 0.08 * (x1 - x0 or 1.0)
    x0, x1 = x0 - pad_x, x1 + pad_x
    y_fit = [fit.intercept + fit.slope * v for v in (x0, x1)]
    # bound line anchored at the fitted value of the first sweep point
    anchor = fit.intercept + fit.slope * min(lx)
    y_bound = [anchor + bound * (v - min(lx)) for v in (x0, x1)]
    y0 = min(ly + y_fit + y_bound)
    y1 = max(ly + y_fit + y_bound)
    pad_y = 0.08 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad_y, y1 + pad_y

    w = PANEL_W - MARGIN["left"] - MARGIN["right"]
    h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]

    def X(v):
        return ox + MARGIN["left"] + (v - x0) / (x1 - x0) * w

    def Y(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * h

    out = [f'<rect x="{ox + MARGIN["left"]:.1f}" y="{MARGIN["top"]}" width="{w}" height="{h}" '
           'fill="none" stroke="#444" stroke-width="1"/>']
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{X(t):.1f}" y1="{MARGIN["top"] + h}" x2="{X(t):.1f}" '
                       f'y2="{MARGIN["top"] + h + 4}" stroke="#444"/>')
            out.append(f'<text x="{X(t):.1f}" y="{MARGIN["top"] + h + 16}" font-size="10" '
                       f'text-anchor="middle">1e{t}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{ox + MARGIN["left"] - 4}" y1="{Y(t):.1f}" '
                       f'x2="{ox + MARGIN["left"]}" y2="{Y(t):.1f}" stroke="#444"/>')
            out.append(f'<text x="{ox + MARGIN["left"] - 6}" y="{Y(t) + 3:.1f}" font-size="10" '
                       f'text-anchor="end">1e{t}</text>')
    out.append(f'<line x1="{X(x0):.1f}" y1="{Y(y_fit[0]):.1f}" x2="{X(x1):.1f}" y2="{Y(y_fit[1]):.1f}" '
               f'stroke="{color}" stroke-width="1.5"/>')
    out.append(f'<line x1="{X(x0):.1f}" y1="{Y(y_bound[0]):.1f}" x2="{X(x1):.1f}" y2="{Y(y_bound[1]):.1f}" '
               'stroke="#555" stroke-width="1.2" stroke-dasharray="5,4"/>')
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{X(a):.1f}" cy="{Y(b):.1f}" r="3.2" fill="{color}"/>')
    title = escape(f"H = {H:.2f}: slope {fit.slope:.2f} (bound {bound:.2f})")
    out.append(f'<text x="{ox + PANEL_W / 2:.1f}" y="18" font-size="12" text-anchor="middle">{title}</text>')
    out.append(f'<text x="{ox + MARGIN["left"] + w / 2:.1f}" y="{PANEL_H - 8}" font-size="11" '
               f'text-anchor="middle">{escape(X_LABEL[kind])}</text>')
    return out


def experiment_svg(result) -> str:
    """One log-log panel per H: MSE points, fitted line, dashed bound line."""
    kind = result.config.kind
    panels = [H for H in result.config.H if H in result.fits]
    width = PANEL_W * max(1, len(panels))
    parts = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{PANEL_H}" '
             f'viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">',
             f'<rect width="{width}" height="{PANEL_H}" fill="white"/>']
    for k, H in enumerate(panels):
        cells = result.cells_for(H)
        parts.extend(_panel(H, [c.x for c in cells], [c.mse for c in cells], result.fits[H],
                            result.diagnostics[H]["bound"], kind, COLORS[k % len(COLORS)], k * PANEL_W))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
