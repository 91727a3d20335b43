"""Jacobian singularities, preimage counts and bifurcation witnesses for g + lam f."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import CountUncertainError
from .fields import FieldExpr, as_field, combine, det2
from .geometry import hull_distance
from .grid import GridDomain

log = logging.getLogger(__name__)

GN_STEPS = 20
DEFAULT_TOL_DET = 1e-9


@dataclass(frozen=True)
class QuadraticDetCoeffs:
    """det(J_g + lam J_f) = a lam^2 + b lam + c at one point."""

    a: float
    b: float
    c: float

    def __call__(self, lam):
        return (self.a * lam + self.b) * lam + self.c


def det_coefficients(f, g, pts):
    """Arrays (a, b, c) of the quadratic determinant coefficients at each point."""
    Jf = as_field(f).jacobians(np.atleast_2d(pts))
    Jg = as_field(g).jacobians(np.atleast_2d(pts))
    ux, uy, vx, vy = Jf[:, 0, 0], Jf[:, 0, 1], Jf[:, 1, 0], Jf[:, 1, 1]
    ax, ay, bx, by = Jg[:, 0, 0], Jg[:, 0, 1], Jg[:, 1, 0], Jg[:, 1, 1]
    a = ux * vy - uy * vx
    b = by * ux - bx * uy - ay * vx + ax * vy
    c = ax * by - ay * bx
    return a, b, c


def det_quadratic(f, g, point) -> QuadraticDetCoeffs:
    a, b, c = det_coefficients(f, g, np.asarray(point, dtype=float).reshape(1, 2))
    return QuadraticDetCoeffs(float(a[0]), float(b[0]), float(c[0]))


def direct_det(f, g, lam, pts) -> np.ndarray:
    """det(J_g + lam J_f) from the summed Jacobian matrices."""
    pts = np.atleast_2d(pts)
    return det2(as_field(g).jacobians(pts) + lam * as_field(f).jacobians(pts))


def geometric_lambdas(lam_min: float, lam_max: float, steps: int) -> np.ndarray:
    if not 0 < lam_min <= lam_max:
        raise ValueError("need 0 < lam_min <= lam_max")
    if steps == 1:
        return np.array([lam_min])
    return lam_min * (lam_max / lam_min) ** (np.arange(steps) / (steps - 1))


@dataclass
class SweepRow:
    lam: float
    min_abs_det: float
    argmin_node: int
    argmin_point: tuple
    sign_change: bool
    certified: bool


@dataclass
class SingularSweepResult:
    rows: List[SweepRow]
    tol_det: float

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows])

    @property
    def first_certified(self) -> Optional[float]:
        for r in self.rows:
            if r.certified:
                return r.lam
        return None

    @property
    def any_certified(self) -> bool:
        return any(r.certified for r in self.rows)

    def csv_rows(self):
        for r in self.rows:
            yield (r.lam, r.min_abs_det, r.argmin_point[0], r.argmin_point[1], int(r.certified))

    def to_dict(self) -> dict:
        return {
            "tol_det": self.tol_det,
            "first_certified": self.first_certified,
            "rows": [vars(r) for r in self.rows],
        }


def _sign_change(D: np.ndarray) -> bool:
    """Opposite signs across some 4-adjacent pair of nodes (nan = outside the set)."""
    with np.errstate(invalid="ignore"):
        h = D[:, :-1] * D[:, 1:] < 0
        v = D[:-1, :] * D[1:, :] < 0
    return bool(h.any() or v.any())


def singular_sweep(g, f, X: np.ndarray, dom: GridDomain, lam_min: float = None,
                   lam_max: float = None, steps: int = 20, lambdas: Sequence[float] = None,
                   tol_det: float = DEFAULT_TOL_DET) -> SingularSweepResult:
    """Scan lam and certify zeros of det(J_{g + lam f}) on the node set ``X``.

    A zero is certified at lam when the smallest |det| over X is at most
    ``tol_det`` or the determinant changes sign between 4-adjacent nodes of X.
    """
    X = np.asarray(X, dtype=bool)
    if not X.any():
        raise ValueError("node set X is empty")
    if lambdas is None:
        lambdas = geometric_lambdas(lam_min, lam_max, steps)
    pts = dom.points(X)
    flat = np.flatnonzero(X.ravel())
    Jf = as_field(f).jacobians(pts)
    Jg = as_field(g).jacobians(pts)
    rows = []
    D = np.full((dom.ny, dom.nx), np.nan)
    for lam in lambdas:
        det = det2(Jg + lam * Jf)
        k = int(np.argmin(np.abs(det)))
        D[X] = det
        sc = _sign_change(D)
        m = float(abs(det[k]))
        rows.append(SweepRow(float(lam), m, int(flat[k]), tuple(map(float, pts[k])), sc,
                             bool(m <= tol_det or sc)))
    return SingularSweepResult(rows, float(tol_det))


# -- preimages --------------------------------------------------------------------

def gauss_newton(fmap: FieldExpr, target, x0, steps: int = GN_STEPS):
    """Least-squares Gauss-Newton on fmap(x) = target; returns (x, residual norm)."""
    x = np.asarray(x0, dtype=float).copy()
    target = np.asarray(target, dtype=float)
    best_x, best_r = x.copy(), float(np.linalg.norm(fmap(x) - target))
    for _ in range(steps):
        r = fmap(x) - target
        J = fmap.jacobians(x)
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        x = x - step
        res = float(np.linalg.norm(fmap(x) - target))
        if not np.isfinite(res):
            break
        if res < best_r:
            best_x, best_r = x.copy(), res
        if res == 0.0:
            break
    return best_x, best_r


def _diameter(p: np.ndarray) -> float:
    if len(p) < 2:
        return 0.0
    if len(p) > 2000:
        return float(np.linalg.norm(p.max(axis=0) - p.min(axis=0)))
    return float(pdist(p).max())


def _split(p: np.ndarray, tol_x: float) -> List[np.ndarray]:
    """Greedy split of a point cloud into chunks of diameter <= tol_x."""
    left = np.ones(len(p), dtype=bool)
    chunks = []
    for i in range(len(p)):
        if not left[i]:
            continue
        take = left & (np.linalg.norm(p - p[i], axis=1) <= tol_x / 2)
        chunks.append(np.flatnonzero(take))
        left &= ~take
    return chunks


@dataclass
class PreimageResult:
    count: int
    points: np.ndarray
    residuals: List[float]
    non_isolated: bool
    n_clusters: int

    def to_dict(self) -> dict:
        return {"count": self.count, "points": self.points, "residuals": self.residuals,
                "non_isolated": self.non_isolated, "clusters": self.n_clusters}


def preimage_count(fmap, target, dom: GridDomain, region: Optional[np.ndarray] = None,
                   tol_x: Optional[float] = None, tol_y: Optional[float] = None,
                   steps: int = GN_STEPS) -> PreimageResult:
    """Count solutions of fmap(x) = target among the nodes of ``region``.

    Near-solution nodes are grouped into 4-connected clusters (split further
    into pieces of diameter <= tol_x), each refined by Gauss-Newton from its
    best node.  Clusters wider than tol_x mark the solution set as
    non-isolated.
    """
    fmap = as_field(fmap)
    region = dom.interior if region is None else np.asarray(region, dtype=bool)
    target = np.asarray(target, dtype=float)
    pts = dom.points(region)
    vals = fmap(pts)
    tol_x = 4.0 * dom.h if tol_x is None else tol_x
    if tol_y is None:
        tol_y = max(fmap.lipschitz(pts), 1e-12) * dom.h
    res = np.linalg.norm(vals - target, axis=1)
    near = np.zeros((dom.ny, dom.nx), dtype=bool)
    near[region] = res <= tol_y
    labels, n = ndimage.label(near)  # default structure is 4-connectivity
    full_res = np.full((dom.ny, dom.nx), np.inf)
    full_res[region] = res
    non_isolated = False
    starts = []
    raw = []
    for lab in range(1, n + 1):
        sel = labels == lab
        cpts = dom.points(sel)
        cres = full_res[sel]
        raw.append(cpts)
        if _diameter(cpts) > tol_x:
            non_isolated = True
            chunks = _split(cpts, tol_x)
        else:
            chunks = [np.arange(len(cpts))]
        for ch in chunks:
            starts.append(cpts[ch[np.argmin(cres[ch])]])
    whole = np.array_equal(region, dom.interior)
    sols, resids = [], []
    for s in starts:
        x, r = gauss_newton(fmap, target, s, steps)
        if r < tol_y / 100 and np.linalg.norm(x - s) <= tol_x and dom.contains(x)[0] \
                and (whole or _near_region(dom, region, x)):
            sols.append(x)
            resids.append(r)
    if starts and not sols:
        raise CountUncertainError(
            f"Gauss-Newton failed on all {len(starts)} clusters for target {target.tolist()}",
            clusters=raw)
    merge = min(tol_x, dom.h) / 2
    distinct, dres = [], []
    for x, r in zip(sols, resids):
        if all(np.linalg.norm(x - y) > merge for y in distinct):
            distinct.append(x)
            dres.append(r)
    return PreimageResult(
        count=len(distinct),
        points=np.array(distinct).reshape(-1, 2),
        residuals=dres,
        non_isolated=non_isolated,
        n_clusters=len(starts),
    )


def _near_region(dom: GridDomain, region: np.ndarray, x) -> bool:
    i = int(round((x[0] - dom.x[0]) / dom.dx))
    j = int(round((x[1] - dom.y[0]) / dom.dy))
    return 0 <= i < dom.nx and 0 <= j < dom.ny and bool(region[j, i])


# -- bifurcation witnesses -----------------------------------------------------------

@dataclass
class BifurcationWitness:
    lam: float
    node: int
    point: tuple
    image_point: np.ndarray
    y_list: List[dict] = field(default_factory=list)
    z_list: List[dict] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "support_node": self.node, "support_point": self.point,
                "image_point": self.image_point, "y": self.y_list, "z": self.z_list,
                "warnings": self.warnings}


def bifurcation_scan(g, f, cert, lam: float, r0: Optional[float] = None, K: int = 4,
                     tol_y: Optional[float] = None, steps: int = 50) -> BifurcationWitness:
    """Targets near the supported image point with zero and with two preimages.

    For balls B(xhat, r0 / 2^k), k = 1..K: y_k steps off the supported image
    against the supporting functional and must have no preimage in X; z_k is a
    value attained at two distinct nodes of the ball (collision search), with
    the second preimage refined by Gauss-Newton.
    """
    from .dichotomy import verify_supported

    verdict = verify_supported(g, f, lam, cert)
    dom = cert.dom
    fmap = combine(as_field(g), cert.f, lam)
    center = np.array(verdict.point)
    y0 = fmap(center)
    phi = cert.direction
    if r0 is None:
        bd = dom.points(cert.dom.interior & ~cert.X)
        r0 = float(np.min(np.linalg.norm(bd - center, axis=1)))
    wit = BifurcationWitness(float(lam), verdict.node, verdict.point, y0)
    for k in range(1, K + 1):
        rk = r0 / 2 ** k
        ball = dom.nodes_within(center, rk, cert.X)
        bpts = dom.points(ball)
        if len(bpts) < 2:
            wit.warnings.append(f"k={k}: ball of radius {rk:.3g} holds fewer than two nodes")
            continue
        L = fmap.lipschitz(bpts)
        eps = rk * L if L > 0 else rk
        yk = y0 - eps * phi
        pre = preimage_count(fmap, yk, dom, cert.X, tol_y=eps / 2)
        wit.y_list.append({"k": k, "radius": rk, "epsilon": eps, "y": yk,
                           "preimages": pre.count})

        vals = fmap(bpts)
        tz = L * dom.h if tol_y is None else tol_y
        pairs = cKDTree(vals).query_pairs(max(tz, 1e-300), output_type="ndarray")
        if len(pairs):
            sep = np.linalg.norm(bpts[pairs[:, 0]] - bpts[pairs[:, 1]], axis=1)
            pairs = pairs[sep >= 2 * dom.h - 1e-12]
        found = None
        if len(pairs):
            mismatch = np.linalg.norm(vals[pairs[:, 0]] - vals[pairs[:, 1]], axis=1)
            order = np.lexsort((pairs[:, 1], pairs[:, 0], mismatch))
            for idx in order:
                iu, iv = pairs[idx]
                u = bpts[iu]
                z = vals[iu]
                v, rv = gauss_newton(fmap, z, bpts[iv], steps)
                ru = float(np.linalg.norm(fmap(u) - z))
                if np.linalg.norm(v - center) < rk and np.linalg.norm(u - v) >= dom.h:
                    found = {"k": k, "radius": rk, "z": z, "u": u, "v": v,
                             "residual_u": ru, "residual_v": rv}
                    break
        if found is None:
            msg = f"k={k}: no collision found in ball of radius {rk:.3g} (ball too coarse)"
            log.warning(msg)
            wit.warnings.append(msg)
        else:
            wit.z_list.append(found)
    return wit


# -- the one-dimensional counterexample ------------------------------------------------

@dataclass
class Remark1Report:
    lam: float
    samples: int
    injective: bool
    min_pair_distance: float
    violation: float
    expected_violation: float
    domain_dim: int = 1
    codomain_dim: int = 2

    @property
    def dims_mismatch(self) -> bool:
        return self.codomain_dim > self.domain_dim

    def to_dict(self) -> dict:
        d = dict(vars(self))
        d["dims_mismatch"] = self.dims_mismatch
        return d


def remark1_case(lam: float = 1.0, samples: int = 1000) -> Remark1Report:
    """The circle-arc map theta -> lam (cos theta, sin theta) on (0, pi)."""
    theta = np.pi * np.arange(1, samples + 1) / (samples + 1)
    pts = lam * np.column_stack([np.cos(theta), np.sin(theta)])
    dmin = float(pdist(pts).min())
    ends = lam * np.array([[1.0, 0.0], [-1.0, 0.0]])
    viol = hull_distance(lam * np.array([0.0, 1.0]), ends, 1e-13)
    return Remark1Report(lam=float(lam), samples=samples, injective=bool(dmin > 1e-12),
                         min_pair_distance=dmin, violation=viol, expected_violation=abs(lam))
