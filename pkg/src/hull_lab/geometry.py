"""Convex hulls, hull distances and separating functionals for finite point sets.

Planar hulls use Andrew's monotone chain.  Membership and distance in any
dimension go through a Frank-Wolfe (away-step) minimisation of
``|q - sum_i w_i b_i|^2`` over the probability simplex, which also yields the
nearest hull point used to build separating hyperplanes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, HullLabError, NoSeparationError

MAX_DIM = 8
COLLINEAR_EPS = 1e-12
DEFAULT_GAP_TOL = 1e-10


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionMismatchError(
                f"expected a non-empty (n, dim) array of points, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


def as_pointset(ps) -> PointSet:
    return ps if isinstance(ps, PointSet) else PointSet(ps)


@dataclass(frozen=True)
class HullRegion:
    source: PointSet
    hull_vertices_2d: Optional[np.ndarray]
    tolerance: float = 0.0

    @property
    def vertices(self) -> np.ndarray:
        return self.hull_vertices_2d

    def contains_points(self, q, tol: Optional[float] = None) -> np.ndarray:
        tol = self.tolerance if tol is None else tol
        return polygon_distance(q, self.hull_vertices_2d) <= tol


@dataclass(frozen=True)
class SeparationWitness:
    """Affine separator ``<direction, y> = threshold``.

    The hull lies on the side ``>= threshold``; the separated point sits at
    least ``margin`` below it.
    """

    direction: np.ndarray
    threshold: float
    margin: float
    nearest: Optional[np.ndarray] = field(default=None, compare=False)

    def value(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.direction


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(ps, tol: float = 0.0) -> HullRegion:
    """Counterclockwise hull polygon of a planar point set.

    Collinear and duplicate points are dropped.  One- and two-vertex
    polygons represent degenerate (point / segment) hulls.
    """
    ps = as_pointset(ps)
    if ps.dim != 2:
        raise DimensionMismatchError(f"convex_hull_2d needs dim = 2, got {ps.dim}")
    pts = np.unique(ps.points, axis=0)  # lexicographic sort + exact dedup
    scale = max(1.0, float(np.abs(pts).max()))
    eps = COLLINEAR_EPS * scale * scale
    if tol > 0 and len(pts) > 1:
        keep = [0]
        for i in range(1, len(pts)):
            if np.linalg.norm(pts[i] - pts[keep[-1]]) > tol:
                keep.append(i)
        pts = pts[keep]
    if len(pts) <= 2:
        verts = pts
    else:
        pl = [tuple(p) for p in pts]
        lower = []
        for p in pl:
            while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= eps:
                lower.pop()
            lower.append(p)
        upper = []
        for p in reversed(pl):
            while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= eps:
                upper.pop()
            upper.append(p)
        verts = np.array(lower[:-1] + upper[:-1], dtype=float)
        if len(verts) < 2:
            verts = np.array([pl[0], pl[-1]], dtype=float)
    verts = np.array(verts, dtype=float)
    verts.setflags(write=False)
    return HullRegion(source=ps, hull_vertices_2d=verts, tolerance=tol)


def _segment_distance(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from rows of ``q`` to each segment [a_k, b_k]; shape (n, k)."""
    ab = b - a
    denom = np.einsum("kd,kd->k", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    aq = q[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nkd,kd->nk", aq, ab) / denom, 0.0, 1.0)
    diff = aq - t[..., None] * ab[None, :, :]
    return np.sqrt(np.einsum("nkd,nkd->nk", diff, diff))


def polygon_boundary_distance(q, verts, chunk: int = 4096) -> np.ndarray:
    """Distance from each query point to the boundary curve of a convex polygon.

    For degenerate polygons (1 or 2 vertices) the boundary is the polygon itself.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    verts = np.asarray(verts, dtype=float)
    if len(verts) == 1:
        return np.linalg.norm(q - verts[0], axis=1)
    if len(verts) == 2:
        a, b = verts[:1], verts[1:]
    else:
        a, b = verts, np.roll(verts, -1, axis=0)
    out = np.empty(len(q))
    for s in range(0, len(q), chunk):
        out[s:s + chunk] = _segment_distance(q[s:s + chunk], a, b).min(axis=1)
    return out


def point_in_polygon(q, verts, tol: float = 0.0) -> np.ndarray:
    """Containment in a CCW convex polygon, inclusive within ``tol``."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    verts = np.asarray(verts, dtype=float)
    if len(verts) <= 2:
        return polygon_boundary_distance(q, verts) <= tol
    nxt = np.roll(verts, -1, axis=0)
    edge = nxt - verts
    length = np.linalg.norm(edge, axis=1)
    rel = q[:, None, :] - verts[None, :, :]
    # signed distance to each edge's supporting line, positive on the inner side
    signed = (edge[None, :, 0] * rel[..., 1] - edge[None, :, 1] * rel[..., 0]) / length
    return np.all(signed >= -tol, axis=1)


def polygon_distance(q, verts) -> np.ndarray:
    """Euclidean distance from query points to a convex polygon (0 inside)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    d = polygon_boundary_distance(q, verts)
    if len(verts) >= 3:
        d = np.where(point_in_polygon(q, verts), 0.0, d)
    return d


def _fw_nearest(q: np.ndarray, B: np.ndarray, tol: float, max_iter: int = 100_000):
    """Away-step Frank-Wolfe for min_w |q - B^T w|^2, w in the simplex.

    Returns (distance, nearest point, weights).  Stops once the duality gap
    certifies the distance to within ``tol``.
    """
    n = B.shape[0]
    w = np.zeros(n)
    i0 = int(np.argmin(np.einsum("nd,nd->n", B - q, B - q)))
    w[i0] = 1.0
    x = B[i0].copy()
    for _ in range(max_iter):
        r = x - q
        dist = float(np.linalg.norm(r))
        if dist <= tol:
            break
        g = 2.0 * (B @ r)
        s = int(np.argmin(g))
        gw = float(g @ w)
        gap = gw - g[s]
        if gap <= tol * dist:
            break
        active = np.flatnonzero(w > 0)
        a = int(active[np.argmax(g[active])])
        away_gap = g[a] - gw
        if gap >= away_gap:
            D = B[s] - x
            gmax = 1.0
            fw_step = True
        else:
            D = x - B[a]
            gmax = w[a] / (1.0 - w[a]) if w[a] < 1.0 else np.inf
            fw_step = False
        dd = float(D @ D)
        if dd == 0.0:
            break
        gamma = min(max(-float(r @ D) / dd, 0.0), gmax)
        if fw_step:
            w *= 1.0 - gamma
            w[s] += gamma
        else:
            w *= 1.0 + gamma
            w[a] -= gamma
            if gamma == gmax:
                w[a] = 0.0
        w[w < 0] = 0.0
        x = x + gamma * D
    return float(np.linalg.norm(x - q)), x, w


def _check_query(q, ps: PointSet) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != ps.dim:
        raise DimensionMismatchError(
            f"query has {q.shape[0]} coordinates, point set has dim {ps.dim}"
        )
    if ps.dim > MAX_DIM:
        raise DimensionMismatchError(f"dimension {ps.dim} exceeds supported maximum {MAX_DIM}")
    return q


def nearest_hull_point(q, ps, tol: float = DEFAULT_GAP_TOL):
    """Distance to conv(ps) together with the (approximate) nearest hull point."""
    ps = as_pointset(ps)
    q = _check_query(q, ps)
    if tol <= 0:
        raise ValueError("tol must be positive")
    dist, p, _ = _fw_nearest(q, ps.points, tol)
    return dist, p


def hull_distance(q, ps, tol: float = DEFAULT_GAP_TOL) -> float:
    return nearest_hull_point(q, ps, tol)[0]


class OracleDisagreementError(HullLabError):
    pass


def contains(q, ps, tol: float = 1e-9) -> bool:
    ps = as_pointset(ps)
    d = hull_distance(q, ps, tol / 4.0)
    inside = d <= tol
    if ps.dim == 2:
        verts = convex_hull_2d(ps).hull_vertices_2d
        q2 = np.asarray(q, dtype=float).reshape(1, 2)
        poly_inside = bool(polygon_distance(q2, verts)[0] <= tol)
        margin = polygon_boundary_distance(q2, verts)[0]
        if poly_inside != inside and margin > tol:
            raise OracleDisagreementError(
                f"polygon test ({poly_inside}) and distance test ({inside}) disagree at {q}"
            )
    return bool(inside)


def separate(q, ps, tol: float = 1e-9) -> SeparationWitness:
    """Separating functional between ``q`` and conv(ps); ``q`` must lie outside."""
    ps = as_pointset(ps)
    q = _check_query(q, ps)
    pts = ps.points
    if ps.dim == 2 and len(pts) > 64:
        # same convex hull, far fewer Frank-Wolfe atoms
        pts = convex_hull_2d(ps).hull_vertices_2d
    dist, p, _ = _fw_nearest(q, pts, tol / 4.0)
    if dist <= tol:
        raise NoSeparationError(f"point {q.tolist()} lies in the hull (distance {dist:.3e})")
    direction = (p - q) / np.linalg.norm(p - q)
    threshold = float(direction @ ((p + q) / 2.0))
    margin = threshold - float(direction @ q)
    direction.setflags(write=False)
    return SeparationWitness(direction=direction, threshold=threshold, margin=margin, nearest=p)
