"""Minimal SVG output: colour-mapped grid cells, polygons and markers."""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .grid import GridDomain

SIZE = 480
PAD = 10


class Canvas:
    def __init__(self, box, size: int = SIZE):
        self.x0, self.x1, self.y0, self.y1 = map(float, box)
        span = max(self.x1 - self.x0, self.y1 - self.y0)
        self.scale = (size - 2 * PAD) / span
        self.w = int(round((self.x1 - self.x0) * self.scale)) + 2 * PAD
        self.h = int(round((self.y1 - self.y0) * self.scale)) + 2 * PAD
        self.items = []

    def map(self, x, y):
        return (PAD + (x - self.x0) * self.scale, self.h - PAD - (y - self.y0) * self.scale)

    def rect(self, x, y, w, h, fill):
        px, py = self.map(x, y + h)
        self.items.append(
            f'<rect x="{px:.2f}" y="{py:.2f}" width="{w * self.scale:.2f}" '
            f'height="{h * self.scale:.2f}" fill="{fill}"/>')

    def polygon(self, pts, stroke="black", fill="none", width=1.0, closed=True):
        xy = " ".join("%.2f,%.2f" % self.map(x, y) for x, y in np.asarray(pts))
        tag = "polygon" if closed else "polyline"
        self.items.append(f'<{tag} points="{xy}" fill="{fill}" stroke="{stroke}" '
                          f'stroke-width="{width}"/>')

    def circle(self, x, y, r=3.0, fill="black"):
        px, py = self.map(x, y)
        self.items.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{r}" fill="{fill}"/>')

    def text(self, x, y, s):
        px, py = self.map(x, y)
        self.items.append(f'<text x="{px:.2f}" y="{py:.2f}" font-size="12">{s}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">')
        return "\n".join([head, f'<rect width="{self.w}" height="{self.h}" fill="white"/>',
                          *self.items, "</svg>"]) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.render())
        return path


def _cells(c: Canvas, dom: GridDomain, colors: np.ndarray):
    # cells centred on nodes, runs of equal colour merged per row; None is blank
    for j in range(dom.ny):
        i = 0
        while i < dom.nx:
            col = colors[j][i]
            k = i + 1
            while k < dom.nx and colors[j][k] == col:
                k += 1
            if col is not None:
                c.rect(dom.x[i] - dom.dx / 2, dom.y[j] - dom.dy / 2, (k - i) * dom.dx, dom.dy, col)
            i = k


def diverging(v: float, vmax: float) -> str:
    """Blue for negative, red for positive, white at zero."""
    t = 0.0 if vmax <= 0 else float(np.clip(v / vmax, -1, 1))
    if t >= 0:
        g = int(round(255 * (1 - t)))
        return f"rgb(255,{g},{g})"
    g = int(round(255 * (1 + t)))
    return f"rgb({g},{g},255)"


def certificate_svg(cert, path, support_point: Optional[Sequence[float]] = None) -> Path:
    dom = cert.dom
    c = Canvas(dom.box)
    colors = np.full((dom.ny, dom.nx), None, dtype=object)
    colors[dom.interior] = "#dddddd"
    colors[cert.K] = "#9ecae1"
    colors[cert.X] = "#3182bd"
    _cells(c, dom, colors)
    for x, y in dom.boundary_points:
        c.circle(x, y, r=0.8, fill="black")
    c.circle(*dom.node_xy(cert.xbar), fill="black")
    if support_point is not None:
        c.circle(*support_point, r=4.0, fill="red")
    return c.save(path)


def scalar_field_svg(dom: GridDomain, values: np.ndarray, path, mask: Optional[np.ndarray] = None) -> Path:
    """Diverging colour map of a (ny, nx) array; nan and unmasked cells stay blank."""
    values = np.asarray(values, dtype=float)
    mask = np.isfinite(values) if mask is None else mask & np.isfinite(values)
    vmax = float(np.abs(values[mask]).max()) if mask.any() else 1.0
    colors = np.full((dom.ny, dom.nx), None, dtype=object)
    for j, i in zip(*np.nonzero(mask)):
        colors[j, i] = diverging(values[j, i], vmax)
    c = Canvas(dom.box)
    _cells(c, dom, colors)
    return c.save(path)


def hull_svg(interior_image: np.ndarray, hull_vertices: np.ndarray, path,
             worst: Optional[Sequence[float]] = None) -> Path:
    """Interior image samples against the hull polygon of the boundary image."""
    pts = np.vstack([interior_image, hull_vertices])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * max(float((hi - lo).max()), 1e-9)
    c = Canvas((lo[0] - pad, hi[0] + pad, lo[1] - pad, hi[1] + pad))
    step = max(1, len(interior_image) // 4000)
    for x, y in interior_image[::step]:
        c.circle(x, y, r=1.0, fill="#888888")
    if len(hull_vertices) >= 2:
        c.polygon(hull_vertices, stroke="#d62728", width=1.5, closed=len(hull_vertices) > 2)
    if worst is not None:
        c.circle(*worst, r=4.0, fill="#d62728")
    return c.save(path)
