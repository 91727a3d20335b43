"""Structured grids over masked planar domains, plus Jacobian and gradient helpers.

A domain is the part of an axis-aligned box where every *level function* of
the mask is negative.  Grid nodes are tagged interior (inside the open set),
boundary (on the closure but not interior) or exterior.  Wherever a grid edge
joins an interior node to an exterior one, the crossing of the mask's zero set
is located by bisection and added to the boundary sample, so boundary samples
lie on the true boundary curve.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArityError, EmptyDomainError, StencilError
from .fields import FieldExpr, as_field, det2

Box = Tuple[float, float, float, float]

_CMP = re.compile(r"(<=|>=|<|>)")
_LEVEL_EPS = 1e-12
_BISECT_ITERS = 60


def parse_mask(mask) -> Tuple[FieldExpr, ...]:
    """Turn a mask description into level functions (the domain is where all are < 0).

    Accepted: ``None``/``"all"`` (the open box), an inequality string such as
    ``"x^2 + y^2 < 1"`` (clauses joined by ``and``), a scalar FieldExpr level
    function, or a sequence of any of these.
    """
    if mask is None or (isinstance(mask, str) and mask.strip().lower() in ("", "all", "box")):
        return ()
    if isinstance(mask, FieldExpr):
        if mask.m != 1:
            raise ArityError("level functions must be scalar")
        return (mask,)
    if isinstance(mask, str):
        levels = []
        for clause in re.split(r"\band\b|&", mask):
            parts = _CMP.split(clause)
            if len(parts) != 3:
                raise ValueError(f"mask clause {clause.strip()!r} must be a single inequality")
            lhs, op, rhs = (p.strip() for p in parts)
            if op.startswith("<"):
                levels.append(FieldExpr(f"({lhs}) - ({rhs})"))
            else:
                levels.append(FieldExpr(f"({rhs}) - ({lhs})"))
        return tuple(levels)
    out = []
    for m in mask:
        out.extend(parse_mask(m))
    return tuple(out)


class GridDomain:
    """Node classification of a bounded open set on a uniform grid (row-major)."""

    def __init__(self, box: Box, nx: int, ny: int, mask=None, periodic_y: bool = False,
                 mask_text: Optional[str] = None):
        x0, x1, y0, y1 = map(float, box)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate box {box}")
        if nx < 3 or ny < 3:
            raise ValueError("nx and ny must be at least 3")
        self.box = (x0, x1, y0, y1)
        self.nx, self.ny = int(nx), int(ny)
        self.periodic_y = bool(periodic_y)
        self.levels = parse_mask(mask)
        self.mask_text = mask_text if mask_text is not None else (
            mask if isinstance(mask, str) or mask is None else None)
        self.x = np.linspace(x0, x1, self.nx)
        if self.periodic_y:
            self.y = y0 + (y1 - y0) * np.arange(self.ny) / self.ny
        else:
            self.y = np.linspace(y0, y1, self.ny)
        self.dx = self.x[1] - self.x[0]
        self.dy = self.y[1] - self.y[0]
        self.X, self.Y = np.meshgrid(self.x, self.y)
        self._classify()

    def __repr__(self):
        return (f"GridDomain(box={self.box}, nx={self.nx}, ny={self.ny}, "
                f"mask={self.mask_text!r}, periodic_y={self.periodic_y})")

    # -- classification --------------------------------------------------------
    def level(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if not self.levels:
            return np.full(len(pts), -np.inf)
        return np.max(np.stack([lv.scalar(pts) for lv in self.levels]), axis=0)

    def _classify(self):
        nodes = np.column_stack([self.X.ravel(), self.Y.ravel()])
        lv = self.level(nodes).reshape(self.ny, self.nx)
        finite = lv[np.isfinite(lv)]
        eps = _LEVEL_EPS * (1.0 + (np.abs(finite).max() if finite.size else 0.0))
        edge = np.zeros((self.ny, self.nx), dtype=bool)
        edge[:, 0] = edge[:, -1] = True
        if not self.periodic_y:
            edge[0, :] = edge[-1, :] = True
        interior = (lv < -eps) & ~edge
        closure = lv <= eps
        boundary = closure & ~interior
        self.interior = interior
        self.boundary_nodes = boundary
        self.exterior = ~closure
        for arr in (self.interior, self.boundary_nodes, self.exterior):
            arr.setflags(write=False)
        if not interior.any():
            raise EmptyDomainError("mask selects no interior grid node")

        crossings = []
        # horizontal edges
        a = interior[:, :-1] & self.exterior[:, 1:]
        b = self.exterior[:, :-1] & interior[:, 1:]
        for j, i in zip(*np.nonzero(a | b)):
            p_in, p_out = ((self.x[i], self.y[j]), (self.x[i + 1], self.y[j])) if a[j, i] \
                else ((self.x[i + 1], self.y[j]), (self.x[i], self.y[j]))
            crossings.append((p_in, p_out))
        # vertical edges (with wrap-around when periodic)
        rows = self.ny if self.periodic_y else self.ny - 1
        for j in range(rows):
            jn = (j + 1) % self.ny
            up = interior[j] & self.exterior[jn]
            down = self.exterior[j] & interior[jn]
            y_lo, y_hi = self.y[j], self.y[j] + self.dy
            for i in np.flatnonzero(up | down):
                p_in, p_out = ((self.x[i], y_lo), (self.x[i], y_hi)) if up[i] \
                    else ((self.x[i], y_hi), (self.x[i], y_lo))
                crossings.append((p_in, p_out))
        if crossings:
            inner = np.array([c[0] for c in crossings], dtype=float)
            outer = np.array([c[1] for c in crossings], dtype=float)
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (inner + outer)
                neg = self.level(mid) < 0
                inner = np.where(neg[:, None], mid, inner)
                outer = np.where(neg[:, None], outer, mid)
            cross_pts = 0.5 * (inner + outer)
            order = np.lexsort((cross_pts[:, 0], cross_pts[:, 1]))
            cross_pts = cross_pts[order]
        else:
            cross_pts = np.empty((0, 2))
        node_pts = np.column_stack([self.X[boundary], self.Y[boundary]])
        bpts = np.vstack([node_pts, cross_pts])
        if len(bpts) == 0:
            raise EmptyDomainError("domain has empty boundary")
        bpts.setflags(write=False)
        self.boundary_points = bpts
        self.n_boundary_nodes = len(node_pts)

    # -- node sets -----------------------------------------------------------
    @property
    def spacing(self) -> Tuple[float, float]:
        return self.dx, self.dy

    @property
    def h(self) -> float:
        return max(self.dx, self.dy)

    def points(self, nodes: np.ndarray) -> np.ndarray:
        """Coordinates (row-major order) of the nodes selected by a boolean mask."""
        return np.column_stack([self.X[nodes], self.Y[nodes]])

    @cached_property
    def interior_points(self) -> np.ndarray:
        return self.points(self.interior)

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.interior.ravel())

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def node_xy(self, flat_index: int) -> Tuple[float, float]:
        j, i = divmod(int(flat_index), self.nx)
        return float(self.x[i]), float(self.y[j])

    @cached_property
    def _btree(self):
        return cKDTree(self.boundary_points)

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Distance of every interior node to the boundary sample (nan elsewhere)."""
        out = np.full((self.ny, self.nx), np.nan)
        d, _ = self._btree.query(self.interior_points)
        out[self.interior] = d
        out.setflags(write=False)
        return out

    def distance_to_boundary(self, pts) -> np.ndarray:
        d, _ = self._btree.query(np.atleast_2d(pts))
        return d

    def contains(self, pts) -> np.ndarray:
        """Analytic membership in the open set."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, x1, y0, y1 = self.box
        ok = (pts[:, 0] > x0) & (pts[:, 0] < x1)
        if not self.periodic_y:
            ok &= (pts[:, 1] > y0) & (pts[:, 1] < y1)
        return ok & (self.level(pts) < 0)

    def nodes_within(self, center, radius: float, nodes: Optional[np.ndarray] = None) -> np.ndarray:
        sel = (self.X - center[0]) ** 2 + (self.Y - center[1]) ** 2 < radius ** 2
        return sel & (self.interior if nodes is None else nodes)

    def refined(self, factor: int) -> "GridDomain":
        """Same domain with (n - 1) * factor + 1 nodes per axis."""
        ny = self.ny * factor if self.periodic_y else (self.ny - 1) * factor + 1
        return GridDomain(self.box, (self.nx - 1) * factor + 1, ny, self.levels,
                          self.periodic_y, self.mask_text)


def build_grid(box: Box, nx: int, ny: int, mask=None, periodic_y: bool = False) -> GridDomain:
    return GridDomain(box, nx, ny, mask, periodic_y)


@dataclass(frozen=True)
class Collar:
    parent: GridDomain
    width: float
    nodes: np.ndarray

    def __len__(self):
        return int(self.nodes.sum())


def collar(dom: GridDomain, width: float) -> Collar:
    """Interior nodes closer than ``width`` to the boundary."""
    if width <= 0:
        raise ValueError("collar width must be positive")
    with np.errstate(invalid="ignore"):
        nodes = dom.interior & (dom.boundary_distance < width)
    nodes.setflags(write=False)
    return Collar(dom, float(width), nodes)


def evaluate(field, pts) -> np.ndarray:
    return as_field(field)(pts)


@dataclass(frozen=True)
class JacobianSample:
    point: Tuple[float, float]
    matrix: np.ndarray
    source: str  # "analytic" | "finite-difference"

    @property
    def det(self) -> float:
        return float(det2(self.matrix))


def jacobian(field, point) -> JacobianSample:
    f = as_field(field)
    if f.m != 2:
        raise ArityError(f"jacobian needs a map into R^2, field has {f.m} component(s)")
    p = np.asarray(point, dtype=float).reshape(2)
    return JacobianSample((float(p[0]), float(p[1])), f.jacobians(p), "analytic")


def jacobian_fd(field, point, h_step: float = 1e-5, dom: Optional[GridDomain] = None) -> JacobianSample:
    """Central-difference Jacobian; the stencil must stay inside ``dom`` when given."""
    f = as_field(field)
    p = np.asarray(point, dtype=float).reshape(2)
    stencil = np.array([p + [h_step, 0], p - [h_step, 0], p + [0, h_step], p - [0, h_step]])
    if dom is not None and not dom.contains(stencil).all():
        raise StencilError(f"difference stencil of width {h_step} at {tuple(p)} leaves the domain")
    v = f(stencil)
    cols = [(v[0] - v[1]) / (2 * h_step), (v[2] - v[3]) / (2 * h_step)]
    return JacobianSample((float(p[0]), float(p[1])), np.column_stack(cols), "finite-difference")


def _axis_derivative(u, valid, step, axis, periodic):
    """Second-order derivative along one axis; nan where no stencil is available."""
    def shift(a, k, fill):
        if periodic:
            return np.roll(a, -k, axis=axis)
        out = np.full_like(a, fill)
        src = [slice(None)] * 2
        dst = [slice(None)] * 2
        n = a.shape[axis]
        if k > 0:
            src[axis], dst[axis] = slice(k, n), slice(0, n - k)
        else:
            src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
        out[tuple(dst)] = a[tuple(src)]
        return out

    up1, up2 = shift(u, 1, np.nan), shift(u, 2, np.nan)
    dn1, dn2 = shift(u, -1, np.nan), shift(u, -2, np.nan)
    v_up1, v_up2 = shift(valid, 1, False), shift(valid, 2, False)
    v_dn1, v_dn2 = shift(valid, -1, False), shift(valid, -2, False)
    central = (up1 - dn1) / (2 * step)
    forward = (-3 * u + 4 * up1 - up2) / (2 * step)
    backward = (3 * u - 4 * dn1 + dn2) / (2 * step)
    out = np.where(v_up1 & v_dn1, central,
                   np.where(v_up1 & v_up2, forward,
                            np.where(v_dn1 & v_dn2, backward, np.nan)))
    return np.where(valid, out, np.nan)


def gradient_fd_all(samples: np.ndarray, dom: GridDomain) -> np.ndarray:
    """Finite-difference gradients on every closure node, shape (ny, nx, 2).

    Central differences where both axis neighbours exist, one-sided
    second-order formulas otherwise; nan where neither stencil fits.
    """
    u = np.asarray(samples, dtype=float).reshape(dom.ny, dom.nx)
    valid = (dom.interior | dom.boundary_nodes) & np.isfinite(u)
    gx = _axis_derivative(u, valid, dom.dx, 1, False)
    gy = _axis_derivative(u, valid, dom.dy, 0, dom.periodic_y)
    return np.stack([gx, gy], axis=-1)


def gradient_fd(samples: np.ndarray, dom: GridDomain, node) -> Tuple[float, float]:
    """Gradient estimate at one node, given as (row, col) or a flat row-major index."""
    if np.ndim(node) == 0:
        j, i = divmod(int(node), dom.nx)
    else:
        j, i = (int(v) for v in node)
    if not (dom.interior[j, i] or dom.boundary_nodes[j, i]):
        raise StencilError(f"node ({j}, {i}) is not on the closed domain")
    g = gradient_fd_all(samples, dom)[j, i]
    if not np.all(np.isfinite(g)):
        raise StencilError(f"insufficient stencil at node ({j}, {i})")
    return float(g[0]), float(g[1])
