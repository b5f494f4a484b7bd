"""Minimal scatter plots as hand-written SVG (circles and polylines)."""

from __future__ import annotations

import numpy as np

SIZE = 480
MARGIN = 24


def _fmt(v):
    return f"{v:.3f}"


class _Frame:
    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        span = np.maximum(hi - lo, 1e-9)
        self.lo = lo
        self.scale = (SIZE - 2 * MARGIN) / float(np.max(span))

    def __call__(self, P):
        P = np.atleast_2d(P)
        x = MARGIN + (P[:, 0] - self.lo[0]) * self.scale
        y = SIZE - MARGIN - (P[:, 1] - self.lo[1]) * self.scale
        return np.column_stack([x, y])


def scatter_svg(points, circles=(), polylines=(), extent=None, point_radius=2.5):
    """Render ``points`` (n, >=2, first two columns used) with optional
    overlays. ``circles`` holds ``(center, radius)`` pairs in data units and
    ``polylines`` holds (k, 2) arrays. Returns the SVG document as a string."""
    P = np.asarray(points, dtype=float)
    P2 = P[:, :2] if P.ndim == 2 and P.shape[1] >= 2 else np.column_stack([np.ravel(P), np.zeros(np.size(P))])
    if extent is None:
        pool = [P2] + [np.asarray(c, float)[None] + np.array([[-r, -r], [r, r]]) for c, r in circles]
        pool += [np.asarray(p, float) for p in polylines]
        allp = np.concatenate(pool)
        extent = (allp.min(axis=0), allp.max(axis=0))
    frame = _Frame(*extent)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
           f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>']
    for center, radius in circles:
        (cx, cy), = frame(np.asarray(center, float))
        out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(radius * frame.scale)}" '
                   'fill="none" stroke="black" stroke-width="1.5"/>')
    for line in polylines:
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in frame(np.asarray(line, float)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="0.8" stroke-opacity="0.6"/>')
    for x, y in frame(P2):
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{point_radius}" fill="firebrick" fill-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
