"""Certificates for fields that fail the hull-like property, and supportedness checks.

For a field ``f`` and a quasi-convex probe whose collar suprema stay below the
interior supremum, ``build_certificate`` produces the level ``r``, the core
``K = {probe(f) >= r}``, a separating linear functional ``phi`` for the point of
maximal probe value, the level ``rho`` and the open region
``X = {phi(f) < rho}``.  For any perturbation ``g`` and ``lam`` above the
threshold returned by ``lambda_tilde``, ``verify_supported`` checks that the
minimiser of ``phi(g + lam f)`` over ``K`` falls in ``X``, i.e. the image of
``X`` is supported there.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .errors import (
    CertificateInvalidError,
    CollarTooThinError,
    NoCertificateError,
    NoSeparationError,
    PreconditionError,
    SublevelSamplingError,
    TheoremViolationError,
)
from .fields import FieldExpr, as_field
from .geometry import SeparationWitness, convex_hull_2d, polygon_boundary_distance, separate
from .grid import GridDomain, collar
from .hull_property import COLLAR_FIRST, QuasiConvexProbe

SUBLEVEL_SAMPLES = 512
MARGIN_FACTOR = 8.0


@dataclass
class DichotomyCertificate:
    f: FieldExpr
    dom: GridDomain
    probe: QuasiConvexProbe
    delta: float
    collar_sup: float
    interior_sup: float
    lipschitz: float
    r: float
    K: np.ndarray          # (ny, nx) bool
    phi: SeparationWitness
    rho: float
    X: np.ndarray          # (ny, nx) bool
    xbar: int              # flat node index
    outside_inf: float     # inf of phi(f) over interior nodes outside K

    @property
    def direction(self) -> np.ndarray:
        return self.phi.direction

    def to_dict(self) -> dict:
        return {
            "field": self.f.text,
            "domain": {"box": self.dom.box, "nx": self.dom.nx, "ny": self.dom.ny,
                       "mask": self.dom.mask_text, "periodic_y": self.dom.periodic_y},
            "probe": self.probe.describe(),
            "delta": self.delta,
            "collar_sup": self.collar_sup,
            "interior_sup": self.interior_sup,
            "lipschitz": self.lipschitz,
            "r": self.r,
            "phi": self.phi.direction,
            "rho": self.rho,
            "xbar": self.xbar,
            "xbar_point": self.dom.node_xy(self.xbar),
            "K_nodes": np.flatnonzero(self.K.ravel()),
            "X_nodes": np.flatnonzero(self.X.ravel()),
            "outside_inf": self.outside_inf,
        }


def _sublevel_samples(probe: QuasiConvexProbe, r: float, values: np.ndarray, n: int) -> np.ndarray:
    """Points of {probe <= r} inside the 10%-inflated bounding box of ``values``."""
    lo, hi = values.min(axis=0), values.max(axis=0)
    pad = 0.1 * max(float((hi - lo).max()), 1e-12)
    lo, hi = lo - pad, hi + pad
    u = qmc.Halton(d=values.shape[1], scramble=False).random(n)
    pts = lo + u * (hi - lo)
    return pts[probe(pts) <= r]


def check_certificate(cert: DichotomyCertificate) -> None:
    """Raise CertificateInvalidError unless all certificate invariants hold on the grid."""
    dom = cert.dom
    fi = cert.f(dom.interior_points)
    s = cert.probe(fi)
    K = cert.K[dom.interior]
    X = cert.X[dom.interior]
    c = collar(dom, cert.delta).nodes[dom.interior]
    phi_f = fi @ cert.direction
    k = int(np.searchsorted(dom.interior_index, cert.xbar))
    problems = []
    if not (s[c].max() < cert.r < s.max()):
        problems.append("collar sup < r < interior sup fails")
    if np.any(K & c):
        problems.append("K meets the collar")
    if not np.array_equal(K, s >= cert.r):
        problems.append("K is not the superlevel set of the probe")
    if not X.any():
        problems.append("X is empty")
    if np.any(X & ~K):
        problems.append("X is not contained in K")
    if not np.array_equal(X, phi_f < cert.rho):
        problems.append("X is not the sublevel set of phi(f)")
    if not (phi_f[k] < cert.rho < phi_f[~K].min()):
        problems.append("phi(f(xbar)) < rho < inf_{interior minus K} phi(f) fails")
    if problems:
        raise CertificateInvalidError("; ".join(problems))


def build_certificate(f, dom: GridDomain, probe: QuasiConvexProbe, delta: Optional[float] = None,
                      n_sublevel: int = SUBLEVEL_SAMPLES, tol: float = 1e-9) -> DichotomyCertificate:
    f = as_field(f)
    delta = COLLAR_FIRST * dom.h if delta is None else float(delta)
    pts = dom.interior_points
    fi = f(pts)
    s = probe(fi)
    c = collar(dom, delta).nodes[dom.interior]
    if not c.any():
        raise CollarTooThinError(f"collar of width {delta:.3g} contains no interior node")
    collar_sup = float(s[c].max())
    sup = float(s.max())
    L = f.lipschitz(pts) * probe.lipschitz
    if sup - collar_sup <= MARGIN_FACTOR * L * dom.h:
        raise NoCertificateError(
            f"collar sup {collar_sup:.6g} is within {MARGIN_FACTOR}*L*h = "
            f"{MARGIN_FACTOR * L * dom.h:.3g} of the interior sup {sup:.6g}")

    r = 0.5 * (collar_sup + sup)
    K = s >= r
    k_bar = int(np.argmax(s))
    cloud = np.vstack([fi[s <= r], _sublevel_samples(probe, r, fi, n_sublevel)])
    try:
        phi = separate(fi[k_bar], cloud, tol)
    except NoSeparationError as exc:
        raise SublevelSamplingError(str(exc)) from exc
    phi_f = fi @ phi.direction
    outside_inf = float(phi_f[~K].min())
    if not phi_f[k_bar] < outside_inf:
        raise SublevelSamplingError("separating functional does not isolate f(xbar)")
    rho = 0.5 * (float(phi_f[k_bar]) + outside_inf)

    def lift(mask):
        full = np.zeros((dom.ny, dom.nx), dtype=bool)
        full[dom.interior] = mask
        full.setflags(write=False)
        return full

    cert = DichotomyCertificate(
        f=f, dom=dom, probe=probe, delta=delta, collar_sup=collar_sup, interior_sup=sup,
        lipschitz=L, r=r, K=lift(K), phi=phi, rho=rho, X=lift(phi_f < rho),
        xbar=int(dom.interior_index[k_bar]), outside_inf=outside_inf,
    )
    check_certificate(cert)
    return cert


def _lambda_ratios(g: FieldExpr, cert: DichotomyCertificate):
    dom = cert.dom
    K = cert.K[dom.interior]
    X = cert.X[dom.interior]
    if not X.any():
        raise CertificateInvalidError("region X is empty")
    pts = dom.interior_points
    phi_g = as_field(g)(pts[K]) @ cert.direction
    inf_K = float(phi_g.min())
    phi_g_X = as_field(g)(pts[X]) @ cert.direction
    phi_f_X = cert.f(pts[X]) @ cert.direction
    return (phi_g_X - inf_K) / (cert.rho - phi_f_X)


def lambda_tilde(g, f, cert: DichotomyCertificate) -> float:
    """Threshold inf_X (phi(g) - inf_K phi(g)) / (rho - phi(f)), clamped at 0."""
    if as_field(f) != cert.f:
        raise CertificateInvalidError("certificate was built for a different field")
    return max(0.0, float(_lambda_ratios(as_field(g), cert).min()))


@dataclass
class SupportVerdict:
    lam: float
    lam_tilde: float
    node: int
    point: tuple
    value: np.ndarray
    functional: SeparationWitness
    boundary_distance: float
    tolerance: float
    in_X: bool

    @property
    def passed(self) -> bool:
        return self.in_X and self.boundary_distance <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "lambda_tilde": self.lam_tilde,
            "support_node": self.node,
            "support_point": self.point,
            "image_point": self.value,
            "phi": self.functional.direction,
            "phi_value": self.functional.threshold,
            "boundary_distance": self.boundary_distance,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def verify_supported(g, f, lam: float, cert: DichotomyCertificate,
                     tol: Optional[float] = None) -> SupportVerdict:
    g = as_field(g)
    lt = lambda_tilde(g, f, cert)
    if not lam > lt:
        raise PreconditionError(f"lambda = {lam} does not exceed lambda_tilde = {lt}")
    dom = cert.dom
    tol = 4.0 * dom.h if tol is None else tol
    pts = dom.interior_points
    K = cert.K[dom.interior]
    X = cert.X[dom.interior]
    image = g(pts) + lam * cert.f(pts)
    vals = image @ cert.direction
    k_nodes = np.flatnonzero(K)
    k = int(k_nodes[np.argmin(vals[K])])  # lowest index among ties
    node = int(dom.interior_index[k])
    if not X[k]:
        raise TheoremViolationError(
            f"minimiser of phi(g + lam f) over K at node {node} lies outside X (lam = {lam})")
    img_X = image[X]
    verts = convex_hull_2d(img_X).hull_vertices_2d
    bd = float(polygon_boundary_distance(image[k], verts)[0])
    witness = SeparationWitness(direction=cert.direction, threshold=float(vals[k]), margin=0.0)
    return SupportVerdict(
        lam=float(lam), lam_tilde=lt, node=node, point=dom.node_xy(node), value=image[k],
        functional=witness, boundary_distance=bd, tolerance=float(tol), in_X=True,
    )
