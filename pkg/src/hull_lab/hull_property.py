"""Deciders for the convex hull property and the convex hull-like property.

``check_hull_property`` compares every interior image point against the convex
hull of the boundary image.  ``check_hull_like_property`` only sees the field
on interior nodes and replaces the limsup toward the boundary by suprema over
a shrinking sequence of collars.  Both report per-probe supremum gaps for a
family of quasi-convex probes (linear functionals, distances, maxima of
affine functions).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import CollarTooThinError, FieldEvaluationError, PreconditionError
from .fields import FieldExpr, as_field
from .geometry import convex_hull_2d, hull_distance, polygon_distance
from .grid import GridDomain, collar

N_DIRECTIONS = 64
COLLAR_LEVELS = 5
COLLAR_FIRST = 10.0  # first collar width, in grid spacings
COLLAR_MIN = 2.0     # narrowest admissible collar, in grid spacings


@dataclass(frozen=True)
class QuasiConvexProbe:
    """A continuous quasi-convex function on R^m.

    kind ``linear``: y -> <d, y>; ``norm``: y -> |y - center|;
    ``max_linear``: y -> max_k (<d_k, y> + c_k).
    """

    kind: str
    directions: np.ndarray = None
    offsets: np.ndarray = None
    center: np.ndarray = None

    @classmethod
    def linear(cls, direction) -> "QuasiConvexProbe":
        d = np.asarray(direction, dtype=float)
        return cls("linear", directions=d.reshape(1, -1), offsets=np.zeros(1))

    @classmethod
    def norm(cls, center) -> "QuasiConvexProbe":
        return cls("norm", center=np.asarray(center, dtype=float))

    @classmethod
    def max_linear(cls, directions, offsets=None) -> "QuasiConvexProbe":
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        c = np.zeros(len(d)) if offsets is None else np.asarray(offsets, dtype=float)
        return cls("max_linear", directions=d, offsets=c)

    def __call__(self, ys) -> np.ndarray:
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        if self.kind == "norm":
            return np.linalg.norm(ys - self.center, axis=1)
        vals = ys @ self.directions.T + self.offsets
        return vals[:, 0] if self.kind == "linear" else vals.max(axis=1)

    @property
    def lipschitz(self) -> float:
        if self.kind == "norm":
            return 1.0
        return float(np.linalg.norm(self.directions, axis=1).max())

    def describe(self) -> dict:
        if self.kind == "norm":
            return {"kind": "norm", "center": self.center}
        return {"kind": self.kind, "directions": self.directions, "offsets": self.offsets}


def unit_directions(n: int = N_DIRECTIONS) -> np.ndarray:
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(t), np.sin(t)])


def default_probes(m: int = 2, n_directions: int = N_DIRECTIONS) -> List[QuasiConvexProbe]:
    """Unit-direction linear probes plus the Euclidean norm."""
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif m == 2:
        dirs = unit_directions(n_directions)
    else:
        dirs = np.vstack([np.eye(m), -np.eye(m)])
    probes = [QuasiConvexProbe.linear(d) for d in dirs]
    probes.append(QuasiConvexProbe.norm(np.zeros(m)))
    return probes


@dataclass
class HullPropertyReport:
    holds: bool
    worst_point: tuple
    worst_node: int
    worst_violation: float
    probe_gaps: List[float]
    tolerance: float
    kind: str = "hull"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "verdict": self.holds,
            "worst_point": self.worst_point,
            "worst_node": self.worst_node,
            "violation": self.worst_violation,
            "probe_gaps": self.probe_gaps,
            "tolerance": self.tolerance,
        }


@dataclass
class ProbeTrace:
    probe: QuasiConvexProbe
    interior_sup: float
    collar_sups: List[float]
    satisfied: bool
    attaining_node: int
    attaining_boundary_point: tuple

    def to_dict(self) -> dict:
        return {
            "probe": self.probe.describe(),
            "interior_sup": self.interior_sup,
            "collar_sups": self.collar_sups,
            "satisfied": self.satisfied,
            "attaining_node": self.attaining_node,
            "attaining_boundary_point": self.attaining_boundary_point,
        }


@dataclass
class HullLikeReport:
    holds: bool
    widths: List[float]
    traces: List[ProbeTrace]
    tolerance: float

    @property
    def failing(self) -> List[ProbeTrace]:
        return [t for t in self.traces if not t.satisfied]

    def to_dict(self) -> dict:
        return {
            "kind": "hull-like",
            "verdict": self.holds,
            "widths": self.widths,
            "tolerance": self.tolerance,
            "collar_traces": [t.to_dict() for t in self.traces],
        }


def field_lipschitz(f: FieldExpr, pts) -> float:
    try:
        return f.lipschitz(pts)
    except FieldEvaluationError:
        return np.inf


def default_tolerance(f: FieldExpr, dom: GridDomain, pts=None) -> float:
    """4 grid spacings times the field's largest Jacobian norm (at least 1)."""
    pts = dom.interior_points if pts is None else pts
    L = field_lipschitz(f, pts)
    return 4.0 * dom.h * max(1.0, L)


def hull_distances(values: np.ndarray, boundary_values: np.ndarray) -> np.ndarray:
    """Distance of each row of ``values`` to conv(boundary_values)."""
    m = values.shape[1]
    if m == 1:
        lo, hi = boundary_values.min(), boundary_values.max()
        v = values[:, 0]
        return np.maximum(np.maximum(lo - v, v - hi), 0.0)
    if m == 2:
        verts = convex_hull_2d(boundary_values).hull_vertices_2d
        return polygon_distance(values, verts)
    return np.array([hull_distance(v, boundary_values, 1e-10) for v in values])


def probe_sup_gap(f, dom: GridDomain, probe: QuasiConvexProbe):
    """(sup over interior nodes, sup over boundary samples) of probe(f)."""
    f = as_field(f)
    return (float(probe(f(dom.interior_points)).max()),
            float(probe(f(dom.boundary_points)).max()))


def report_from_samples(fi: np.ndarray, fb: np.ndarray, dom: GridDomain, tol: float,
                        probes: Sequence[QuasiConvexProbe]) -> HullPropertyReport:
    """Hull verdict for interior image samples ``fi`` against boundary samples ``fb``."""
    dist = hull_distances(fi, fb)
    k = int(np.argmax(dist))
    worst = float(dist[k])
    if fi.shape[1] == 2 and worst > 0:
        # independent confirmation of the worst point by Frank-Wolfe
        worst = hull_distance(fi[k], fb, 1e-10 * max(1.0, worst))
    gaps = [float(p(fi).max() - p(fb).max()) for p in probes]
    return HullPropertyReport(
        holds=bool(worst <= tol),
        worst_point=tuple(float(v) for v in dom.interior_points[k]),
        worst_node=int(dom.interior_index[k]),
        worst_violation=worst,
        probe_gaps=gaps,
        tolerance=float(tol),
    )


def check_hull_property(f, dom: GridDomain, tol: Optional[float] = None,
                        probes: Optional[Sequence[QuasiConvexProbe]] = None) -> HullPropertyReport:
    f = as_field(f)
    fi = f(dom.interior_points)
    fb = f(dom.boundary_points)
    if tol is None:
        tol = default_tolerance(f, dom, np.vstack([dom.interior_points, dom.boundary_points]))
    probes = default_probes(f.m) if probes is None else probes
    return report_from_samples(fi, fb, dom, tol, probes)


def collar_widths(dom: GridDomain, first: float = COLLAR_FIRST, levels: int = COLLAR_LEVELS,
                  minimum: float = COLLAR_MIN) -> List[float]:
    """Halving widths from ``first`` grid spacings, stopping above ``minimum`` spacings."""
    widths = []
    w = first * dom.h
    for _ in range(levels):
        if w < minimum * dom.h - 1e-12:
            break
        widths.append(w)
        w /= 2
    return widths


def check_hull_like_property(f, dom: GridDomain, probes: Optional[Sequence[QuasiConvexProbe]] = None,
                             widths: Optional[Sequence[float]] = None,
                             tol: Optional[float] = None) -> HullLikeReport:
    f = as_field(f)
    pts = dom.interior_points
    fi = f(pts)
    widths = collar_widths(dom) if widths is None else sorted(map(float, widths), reverse=True)
    if widths[-1] < COLLAR_MIN * dom.h - 1e-12:
        raise PreconditionError(
            f"narrowest collar {widths[-1]:.3g} is below {COLLAR_MIN} grid spacings")
    if tol is None:
        tol = default_tolerance(f, dom)
    collars = [collar(dom, w).nodes[dom.interior] for w in widths]
    for w, c in zip(widths, collars):
        if not c.any():
            raise CollarTooThinError(f"collar of width {w:.3g} contains no interior node")
    probes = default_probes(f.m) if probes is None else probes
    traces = []
    for p in probes:
        s = p(fi)
        sup_all = float(s.max())
        sups = [float(s[c].max()) for c in collars]
        last = collars[-1]
        k = int(np.flatnonzero(last)[np.argmax(s[last])])
        _, b = dom._btree.query(pts[k])
        traces.append(ProbeTrace(
            probe=p,
            interior_sup=sup_all,
            collar_sups=sups,
            satisfied=bool(sups[-1] >= sup_all - tol),
            attaining_node=int(dom.interior_index[k]),
            attaining_boundary_point=tuple(float(v) for v in dom.boundary_points[b]),
        ))
    return HullLikeReport(
        holds=all(t.satisfied for t in traces),
        widths=list(widths),
        traces=traces,
        tolerance=float(tol),
    )


def dual_containment(A, B, probes: Sequence[QuasiConvexProbe], tol: float) -> bool:
    """True iff sup_A probe <= sup_B probe + tol for every probe."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return all(p(A).max() <= p(B).max() + tol for p in probes)


def random_probe_family(rng: np.random.Generator, m: int = 2, n_linear: int = 200,
                        n_max: int = 50, pieces: int = 3) -> List[QuasiConvexProbe]:
    def unit(k):
        d = rng.normal(size=(k, m))
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    probes = [QuasiConvexProbe.linear(d) for d in unit(n_linear)]
    for _ in range(n_max):
        probes.append(QuasiConvexProbe.max_linear(unit(pieces), rng.normal(size=pieces)))
    return probes
