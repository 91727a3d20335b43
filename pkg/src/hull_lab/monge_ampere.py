"""Dirichlet problem for u_xx u_yy - u_xy^2 = h (h >= 0) on rectangular grids.

Pointwise nonlinear Gauss-Seidel: at each interior node the 5-point second
differences are written as D_xx = 2 (a1 - u) / dx^2, D_yy = 2 (a2 - u) / dy^2,
the cross derivative is frozen at its 4-corner value, and the resulting scalar
quadratic is solved for the root that keeps both second differences
nonnegative (the convex branch).  Sweeps alternate row-major and reverse
order and are over-relaxed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numba
import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import spsolve

from .errors import PreconditionError
from .fields import FieldExpr, as_field
from .grid import GridDomain, gradient_fd_all
from .hull_property import HullPropertyReport, default_probes, report_from_samples

log = logging.getLogger(__name__)

OMEGA_CAP = 1.9


@dataclass
class MAProblem:
    dom: GridDomain
    h: FieldExpr
    boundary: FieldExpr

    def __post_init__(self):
        self.h = as_field(self.h)
        self.boundary = as_field(self.boundary)
        if self.dom.levels or self.dom.periodic_y:
            raise PreconditionError("the Monge-Ampere solver needs a plain rectangular grid")
        hv = self.h_values()
        if np.nanmin(hv[self.dom.interior]) < -1e-12:
            raise PreconditionError("h must be nonnegative on the interior")
        bv = self.boundary_values()
        if not np.all(np.isfinite(bv[self.dom.boundary_nodes])):
            raise PreconditionError("boundary data must be finite")

    def h_values(self) -> np.ndarray:
        out = np.full((self.dom.ny, self.dom.nx), np.nan)
        out[self.dom.interior] = self.h.scalar(self.dom.interior_points)
        return out

    def boundary_values(self) -> np.ndarray:
        out = np.full((self.dom.ny, self.dom.nx), np.nan)
        b = self.dom.boundary_nodes
        out[b] = self.boundary.scalar(self.dom.points(b))
        return out


@dataclass
class MASolution:
    u: np.ndarray
    iterations: int
    residual: float
    convexity_defect: float
    converged: bool
    degenerate_nodes: int = 0
    trace: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual,
                "convexity_defect": self.convexity_defect, "converged": self.converged,
                "degenerate_nodes": self.degenerate_nodes, "trace": self.trace}


@numba.njit(cache=True)
def _local_update(u, hv, j, i, dx2, dy2, dxdy4):
    a1 = 0.5 * (u[j, i + 1] + u[j, i - 1])
    a2 = 0.5 * (u[j + 1, i] + u[j - 1, i])
    c = (u[j + 1, i + 1] - u[j + 1, i - 1] - u[j - 1, i + 1] + u[j - 1, i - 1]) / dxdy4
    R = 0.25 * dx2 * dy2 * (hv[j, i] + c * c)
    disc = (a1 - a2) * (a1 - a2) + 4.0 * R
    degenerate = False
    if disc < 0.0:
        disc = 0.0
        degenerate = True
    return 0.5 * ((a1 + a2) - np.sqrt(disc)), degenerate


@numba.njit(cache=True)
def _gs_sweeps(u, hv, dx, dy, omega, max_iters, stop_change):
    ny, nx = u.shape
    dx2, dy2, dxdy4 = dx * dx, dy * dy, 4.0 * dx * dy
    it = 0
    change = np.inf
    degenerate = 0
    while it < max_iters:
        change = 0.0
        degenerate = 0
        for rev in range(2):
            for jj in range(1, ny - 1):
                j = jj if rev == 0 else ny - 1 - jj
                for ii in range(1, nx - 1):
                    i = ii if rev == 0 else nx - 1 - ii
                    new, deg = _local_update(u, hv, j, i, dx2, dy2, dxdy4)
                    if deg:
                        degenerate += 1
                    d = omega * (new - u[j, i])
                    u[j, i] += d
                    if abs(d) > change:
                        change = abs(d)
        it += 1
        if change <= stop_change:
            break
    return it, change, degenerate


def _jacobi_sweeps(u, hv, dx, dy, max_iters, stop_change):
    dx2, dy2 = dx * dx, dy * dy
    change = np.inf
    degenerate = 0
    it = 0
    while it < max_iters:
        a1 = 0.5 * (u[1:-1, 2:] + u[1:-1, :-2])
        a2 = 0.5 * (u[2:, 1:-1] + u[:-2, 1:-1])
        c = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * dx * dy)
        disc = (a1 - a2) ** 2 + dx2 * dy2 * (hv[1:-1, 1:-1] + c * c)
        degenerate = int((disc < 0).sum())
        new = 0.5 * ((a1 + a2) - np.sqrt(np.maximum(disc, 0.0)))
        change = float(np.abs(new - u[1:-1, 1:-1]).max())
        u[1:-1, 1:-1] = new
        it += 1
        if change <= stop_change:
            break
    return it, change, degenerate


def laplace_initial_guess(dom: GridDomain, boundary: np.ndarray) -> np.ndarray:
    """5-point harmonic extension of the boundary data (direct sparse solve)."""
    ny, nx = dom.ny, dom.nx
    mi, mj = nx - 2, ny - 2
    n = mi * mj
    cx, cy = 1.0 / dom.dx ** 2, 1.0 / dom.dy ** 2
    idx = np.arange(n).reshape(mj, mi)
    main = np.full(n, -2 * (cx + cy))
    A = sps.diags(main)
    A = A + sps.coo_matrix((np.full(mj * (mi - 1), cx), (idx[:, 1:].ravel(), idx[:, :-1].ravel())), shape=(n, n))
    A = A + sps.coo_matrix((np.full(mj * (mi - 1), cx), (idx[:, :-1].ravel(), idx[:, 1:].ravel())), shape=(n, n))
    A = A + sps.coo_matrix((np.full((mj - 1) * mi, cy), (idx[1:, :].ravel(), idx[:-1, :].ravel())), shape=(n, n))
    A = A + sps.coo_matrix((np.full((mj - 1) * mi, cy), (idx[:-1, :].ravel(), idx[1:, :].ravel())), shape=(n, n))
    rhs = np.zeros((mj, mi))
    rhs[:, 0] -= cx * boundary[1:-1, 0]
    rhs[:, -1] -= cx * boundary[1:-1, -1]
    rhs[0, :] -= cy * boundary[0, 1:-1]
    rhs[-1, :] -= cy * boundary[-1, 1:-1]
    u = boundary.copy()
    u[1:-1, 1:-1] = spsolve(A.tocsr(), rhs.ravel()).reshape(mj, mi)
    return u


def second_differences(u: np.ndarray, dom: GridDomain):
    """Central D_xx, D_yy, D_xy on interior nodes of a rectangle (shape (ny-2, nx-2))."""
    dxx = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / dom.dx ** 2
    dyy = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / dom.dy ** 2
    dxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * dom.dx * dom.dy)
    return dxx, dyy, dxy


def residual_ma(u: np.ndarray, prob: MAProblem) -> float:
    dxx, dyy, dxy = second_differences(np.asarray(u, dtype=float), prob.dom)
    h = prob.h_values()[1:-1, 1:-1]
    return float(np.abs(dxx * dyy - dxy ** 2 - h).max())


def convexity_defect(u: np.ndarray, dom: GridDomain) -> float:
    """Smallest eigenvalue of the discrete Hessian over interior nodes."""
    dxx, dyy, dxy = second_differences(u, dom)
    return float((0.5 * (dxx + dyy - np.sqrt((dxx - dyy) ** 2 + 4 * dxy ** 2))).min())


def optimal_omega(dom: GridDomain) -> float:
    n = max(dom.nx, dom.ny) - 1
    # the Laplace-optimal value overshoots for the variable-coefficient MA operator
    return min(2.0 / (1.0 + np.sin(np.pi / n)), OMEGA_CAP)


def solve_ma(prob: MAProblem, max_iters: int = 200_000, tol_res: float = 1e-8,
             omega: Optional[float] = None, mode: str = "gauss-seidel",
             chunk: int = 200) -> MASolution:
    """Convex-branch pointwise solver; returns the best iterate with flags."""
    dom = prob.dom
    bnd = prob.boundary_values()
    hv = np.nan_to_num(prob.h_values(), nan=0.0)
    hv = np.maximum(hv, 0.0)
    u = laplace_initial_guess(dom, np.nan_to_num(bnd))
    stop = tol_res * min(dom.dx, dom.dy) ** 2
    omega_target = optimal_omega(dom) if omega is None else omega
    # plain Gauss-Seidel until the iterate settles on the convex branch
    omega_now = 1.0 if mode == "gauss-seidel" else omega_target
    it_total, trace, degenerate = 0, [], 0
    change, last = np.inf, np.inf
    while it_total < max_iters:
        n = min(chunk, max_iters - it_total)
        backup = u.copy()
        if mode == "gauss-seidel":
            it, change, degenerate = _gs_sweeps(u, hv, dom.dx, dom.dy, omega_now, n, stop)
        elif mode == "jacobi":
            it, change, degenerate = _jacobi_sweeps(u, hv, dom.dx, dom.dy, n, stop)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        it_total += it
        if not np.isfinite(change) or not np.all(np.isfinite(u)) or change > 10 * last:
            u = backup
            omega_now = 1.0 + 0.5 * (omega_now - 1.0)
            change = last
            continue
        trace.append(float(change))
        if change <= stop:
            break
        if omega_now == 1.0 and omega_target > 1.0 and change < last and mode == "gauss-seidel":
            omega_now = omega_target
        last = change
    converged = bool(change <= stop)
    if not converged:
        log.warning("Monge-Ampere iteration stopped at %d sweeps, last change %.3e", it_total, change)
    return MASolution(
        u=u, iterations=it_total, residual=residual_ma(u, prob),
        convexity_defect=convexity_defect(u, dom), converged=converged,
        degenerate_nodes=int(degenerate), trace=trace,
    )


def solution_from_samples(u: np.ndarray, prob: MAProblem) -> MASolution:
    u = np.asarray(u, dtype=float).reshape(prob.dom.ny, prob.dom.nx)
    return MASolution(u=u, iterations=0, residual=residual_ma(u, prob),
                      convexity_defect=convexity_defect(u, prob.dom), converged=True)


def check_gradient_hull(u: np.ndarray, dom: GridDomain, tol: Optional[float] = None) -> HullPropertyReport:
    """Hull property of the finite-difference gradient map of grid samples ``u``."""
    grad = gradient_fd_all(u, dom)
    gi = grad[dom.interior]
    gb = grad[dom.boundary_nodes]
    if tol is None:
        tol = 4.0 * dom.h * float(np.linalg.norm(gb, axis=1).max())
    return report_from_samples(gi, gb, dom, tol, default_probes(2))


def verify_theorem5(sol: MASolution, prob: MAProblem, tol: Optional[float] = None,
                    tol_res: float = 1e-8) -> HullPropertyReport:
    if sol.residual > 10 * tol_res:
        raise PreconditionError(
            f"solution residual {sol.residual:.3e} exceeds 10 * tol_res = {10 * tol_res:.1e}")
    return check_gradient_hull(sol.u, prob.dom, tol)


def solution_rows(sol: MASolution, dom: GridDomain):
    """(x, y, u, u_x, u_y) for every closure node, row-major."""
    grad = gradient_fd_all(sol.u, dom)
    sel = dom.interior | dom.boundary_nodes
    for j, i in zip(*np.nonzero(sel)):
        yield (dom.x[i], dom.y[j], sol.u[j, i], grad[j, i, 0], grad[j, i, 1])
