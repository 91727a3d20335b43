"""Exact solutions u = F(beta) of beta_y u_x - beta_x u_y = 0 and max-principle checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConstructionError, HypothesisError
from .fields import FieldExpr, as_field
from .grid import GridDomain

HYPOTHESIS_MARGIN = 1e-8
RESIDUAL_TOL = 1e-10


@dataclass
class TransportInstance:
    beta: FieldExpr
    alpha: FieldExpr
    F: str
    u: FieldExpr
    dom: GridDomain
    min_hypothesis: float
    max_residual: float

    def to_dict(self) -> dict:
        return {"beta": self.beta.text, "alpha": self.alpha.text, "F": self.F, "u": self.u.text,
                "min_abs_alpha_beta_jacobian": self.min_hypothesis,
                "max_residual": self.max_residual}


def transport_residual(beta: FieldExpr, u: FieldExpr, pts) -> np.ndarray:
    Jb = beta.jacobians(pts)[:, 0, :]
    Ju = u.jacobians(pts)[:, 0, :]
    return Jb[:, 1] * Ju[:, 0] - Jb[:, 0] * Ju[:, 1]


def make_instance(beta, alpha, F: str, dom: GridDomain) -> TransportInstance:
    """Build u = F(beta) and check the companion hypothesis and the equation node by node."""
    beta, alpha = as_field(beta), as_field(alpha)
    u = beta.compose(F)
    pts = dom.interior_points
    Ja = alpha.jacobians(pts)[:, 0, :]
    Jb = beta.jacobians(pts)[:, 0, :]
    hyp = np.abs(Ja[:, 0] * Jb[:, 1] - Ja[:, 1] * Jb[:, 0])
    k = int(np.argmin(hyp))
    if hyp[k] < HYPOTHESIS_MARGIN:
        node = tuple(float(v) for v in pts[k])
        raise HypothesisError(
            f"alpha_x beta_y - alpha_y beta_x = {hyp[k]:.3e} at {node} (margin {HYPOTHESIS_MARGIN})",
            node=node)
    res = np.abs(transport_residual(beta, u, pts))
    if res.max() > RESIDUAL_TOL:
        raise ConstructionError(f"transport residual {res.max():.3e} exceeds {RESIDUAL_TOL}")
    return TransportInstance(beta, alpha, F, u, dom, float(hyp[k]), float(res.max()))


@dataclass
class MaxPrincipleReport:
    passed: bool
    sup_interior: float
    sup_boundary: float
    inf_interior: float
    inf_boundary: float
    sup_node: tuple
    inf_node: tuple
    tolerance: float

    @property
    def sup_gap(self) -> float:
        return self.sup_interior - self.sup_boundary

    @property
    def inf_gap(self) -> float:
        return self.inf_boundary - self.inf_interior

    def to_dict(self) -> dict:
        return {"passed": self.passed, "sup_gap": self.sup_gap, "inf_gap": self.inf_gap,
                "sup_interior": self.sup_interior, "sup_boundary": self.sup_boundary,
                "inf_interior": self.inf_interior, "inf_boundary": self.inf_boundary,
                "sup_node": self.sup_node, "inf_node": self.inf_node,
                "tolerance": self.tolerance}


def lipschitz_tolerance(u: FieldExpr, dom: GridDomain) -> float:
    return 2.0 * dom.h * u.lipschitz(dom.interior_points)


def max_principle(u, dom: GridDomain, tol: Optional[float] = None) -> MaxPrincipleReport:
    u = as_field(u)
    ui = u.scalar(dom.interior_points)
    ub = u.scalar(dom.boundary_points)
    tol = lipschitz_tolerance(u, dom) if tol is None else tol
    ks, ki = int(np.argmax(ui)), int(np.argmin(ui))
    rep = MaxPrincipleReport(
        passed=False,
        sup_interior=float(ui[ks]), sup_boundary=float(ub.max()),
        inf_interior=float(ui[ki]), inf_boundary=float(ub.min()),
        sup_node=tuple(map(float, dom.interior_points[ks])),
        inf_node=tuple(map(float, dom.interior_points[ki])),
        tolerance=float(tol),
    )
    rep.passed = bool(rep.sup_gap <= tol and rep.inf_gap <= tol)
    return rep


def check_max_principle(inst: TransportInstance, tol: Optional[float] = None) -> MaxPrincipleReport:
    return max_principle(inst.u, inst.dom, tol)


@dataclass
class CounterexampleReport:
    critical_point: tuple
    min_gradient_norm: float
    has_critical_point: bool
    fails: bool
    interior_excess: float
    report: MaxPrincipleReport

    def to_dict(self) -> dict:
        return {"critical_point": self.critical_point, "min_gradient_norm": self.min_gradient_norm,
                "has_critical_point": self.has_critical_point, "fails": self.fails,
                "interior_excess": self.interior_excess, "max_principle": self.report.to_dict()}


def counterexample_probe(beta, F: str, dom: GridDomain, tol: Optional[float] = None) -> CounterexampleReport:
    """Build u = F(beta) without a companion and see whether the max principle breaks."""
    beta = as_field(beta)
    u = beta.compose(F)
    pts = dom.interior_points
    g = np.linalg.norm(beta.jacobians(pts)[:, 0, :], axis=1)
    k = int(np.argmin(g))
    rep = max_principle(u, dom, tol)
    excess = max(rep.sup_gap, rep.inf_gap)
    return CounterexampleReport(
        critical_point=tuple(map(float, pts[k])),
        min_gradient_norm=float(g[k]),
        has_critical_point=bool(g[k] <= beta.lipschitz(pts) * dom.h),
        fails=not rep.passed,
        interior_excess=float(excess),
        report=rep,
    )
