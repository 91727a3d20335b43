"""The acceptance battery: ten criteria run in a fixed order.

Each criterion returns a :class:`CriterionResult` with the expected and
observed quantities.  ``tol_scale`` multiplies every numeric tolerance (0
makes the battery fail in a controlled way).
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List

import numpy as np

from .dichotomy import build_certificate, lambda_tilde, verify_supported
from .fields import FieldExpr, zero_field
from .geometry import convex_hull_2d, hull_distance, point_in_polygon, polygon_boundary_distance
from .grid import build_grid
from .hull_property import QuasiConvexProbe, check_hull_like_property, check_hull_property
from .monge_ampere import MAProblem, check_gradient_hull, solve_ma, verify_theorem5
from .singularity import (
    QuadraticDetCoeffs,
    bifurcation_scan,
    det_coefficients,
    direct_det,
    remark1_case,
    singular_sweep,
)
from .transport import check_max_principle, counterexample_probe, make_instance

SEED = 20240611
MA_SIZES = (51, 101, 201)
SQUARE = (-1.0, 1.0, -1.0, 1.0)

# (name, solution, h); all convex with h >= 0
MA_CORPUS = {
    "exponential": ("exp((x^2 + y^2)/2)", "(1 + x^2 + y^2)*exp(x^2 + y^2)"),
    "quadratic": ("(x^2 + y^2)/2", "1"),
    "affine": ("x + 2*y", "0"),
}

HESSIAN_CORPUS = ["(x^2 + y^2)/2", "x^4/4 + y^2/2", "exp((x^2 + y^2)/2)", "x + 2*y", "x^2/2"]


@dataclass
class CriterionResult:
    number: int
    title: str
    expected: str
    observed: str
    passed: bool
    seconds: float
    budget: float

    def to_dict(self) -> dict:
        return dict(vars(self))


@lru_cache(maxsize=None)
def ma_solution(name: str, n: int):
    exact, h = MA_CORPUS[name]
    prob = MAProblem(build_grid(SQUARE, n, n), h, exact)
    return prob, solve_ma(prob)


def _max_error(name: str, n: int) -> float:
    prob, sol = ma_solution(name, n)
    dom = prob.dom
    sel = dom.interior | dom.boundary_nodes
    exact = FieldExpr(MA_CORPUS[name][0]).scalar(dom.points(sel))
    return float(np.abs(sol.u[sel] - exact).max())


def c1_remark1(s: float):
    worst, inj = 0.0, True
    for lam in (0.5, 1.0, 2.0):
        r = remark1_case(lam, 1000)
        inj &= r.injective
        worst = max(worst, abs(r.violation - lam))
    return ("injective; |violation - lam| <= %.1e" % (1e-9 * s),
            f"injective={inj}, max |violation - lam| = {worst:.2e}",
            inj and worst <= 1e-9 * s)


def _random_poly(rng, deg: int = 3) -> str:
    # dyadic coefficients are exact in floating point and keep sympy fast
    terms = []
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            terms.append(f"({int(rng.integers(-8, 9))}/4)*x^{i}*y^{j}")
    return " + ".join(terms)


def c2_quadratic_identity(s: float):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(50):
        f = FieldExpr([_random_poly(rng), _random_poly(rng)])
        g = FieldExpr([_random_poly(rng), _random_poly(rng)])
        pts = rng.uniform(-1, 1, size=(20, 2))
        coef = QuadraticDetCoeffs(*det_coefficients(f, g, pts))
        for lam in rng.uniform(-3, 3, size=5):
            worst = max(worst, float(np.abs(coef(lam) - direct_det(f, g, lam, pts)).max()))
    return f"max |a l^2 + b l + c - det| <= {1e-12 * s:.1e}", f"{worst:.2e}", worst <= 1e-12 * s


def c3_guard(s: float):
    dom = build_grid(SQUARE, 101, 101)
    g = FieldExpr("(-y, x)")
    lams = np.linspace(0.0, 100.0, 201)
    pts = dom.interior_points
    min_abs, certified = np.inf, False
    for w in HESSIAN_CORPUS:
        f = FieldExpr(w).gradient()
        coef = QuadraticDetCoeffs(*det_coefficients(f, g, pts))
        for lam in lams:
            min_abs = min(min_abs, float(np.abs(coef(lam)).min()))
        res = singular_sweep(g, f, dom.interior, dom, lambdas=lams)
        certified |= res.any_certified
    ok = min_abs >= 1.0 - 1e-12 * s and not certified
    return "min |h lam^2 + 1| >= 1; no certified zero", \
        f"min = {min_abs:.12g}, certified = {certified}", ok


def c4_ma_convergence(s: float):
    errs = [_max_error("exponential", n) for n in MA_SIZES]
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    ok = all(e2 < e1 for e1, e2 in zip(errs, errs[1:])) and min(orders) >= 1.7
    return "errors decrease, observed order >= 1.7", \
        "errors " + ", ".join(f"{e:.3e}" for e in errs) + "; orders " + \
        ", ".join(f"{o:.2f}" for o in orders), bool(ok)


def c5_gradient_hull(s: float):
    parts, ok = [], True
    for name in ("affine", "quadratic", "exponential"):
        prob, sol = ma_solution(name, 201)
        rep = verify_theorem5(sol, prob, tol=None)
        tol = rep.tolerance * s
        good = rep.holds and rep.worst_violation <= tol
        ok &= good
        parts.append(f"{name}: holds={rep.holds} viol={rep.worst_violation:.2e} tol={tol:.2e}")
    # control: u = x^2 - y^2 lies outside the hypotheses (h = -4)
    dom = build_grid(SQUARE, 201, 201)
    u = np.full((dom.ny, dom.nx), np.nan)
    sel = dom.interior | dom.boundary_nodes
    u[sel] = FieldExpr("x^2 - y^2").scalar(dom.points(sel))
    ctl = check_gradient_hull(u, dom)
    parts.append(f"saddle: holds={ctl.holds} viol={ctl.worst_violation:.2e}")
    ok &= not ctl.holds
    return "three corpus problems hold; saddle control holds = false", "; ".join(parts), bool(ok)


@lru_cache(maxsize=None)
def disk_certificate():
    dom = build_grid(SQUARE, 201, 201, "x^2 + y^2 < 1")
    f = FieldExpr("(1 - x^2 - y^2, 0)")
    cert = build_certificate(f, dom, QuasiConvexProbe.linear([1.0, 0.0]))
    return dom, f, cert


def c6_dichotomy(s: float):
    dom, f, cert = disk_certificate()
    small = dom.nodes_within((0.0, 0.0), 0.2, dom.interior)
    contains_disk = bool(np.all(cert.X[small]))
    zero = zero_field(2)
    lt0 = lambda_tilde(zero, f, cert)
    support_ok, worst_bd = True, 0.0
    for lam in (0.5, 1.0, 10.0):
        v = verify_supported(zero, f, lam, cert, 4.0 * dom.h * s)
        worst_bd = max(worst_bd, v.boundary_distance)
        support_ok &= v.passed and bool(cert.X.ravel()[v.node])
    g = FieldExpr("(x, y)")
    tested = [2.5, 3.0, 5.0, 10.0, 100.0]
    sweep = singular_sweep(g, f, cert.X, dom, lambdas=tested)
    sweep_ok = all(r.certified for r in sweep.rows)
    ok = contains_disk and lt0 == 0.0 and support_ok and sweep_ok
    return ("X contains r <= 0.2; lambda_tilde(0) = 0; supported at 0.5, 1, 10 within 4dx; "
            "det zero certified for lam in 2.5..100"), \
        (f"X contains disk: {contains_disk}; lambda_tilde = {lt0:g}; supported: {support_ok} "
         f"(max boundary distance {worst_bd:.2e}); sweep: {sweep_ok}"), bool(ok)


def c7_bifurcation(s: float):
    dom, f, cert = disk_certificate()
    w = bifurcation_scan(zero_field(2), f, cert, 1.0, r0=0.4, K=4)
    ys = {y["k"]: y["preimages"] for y in w.y_list}
    ok = all(ys.get(k) == 0 for k in range(1, 5))
    center = np.array(w.point)
    worst = 0.0
    zs = {z["k"]: z for z in w.z_list}
    for k in range(1, 5):
        z = zs.get(k)
        if z is None:
            ok = False
            continue
        rk = 0.4 / 2 ** k
        inside = np.linalg.norm(z["u"] - center) < rk and np.linalg.norm(z["v"] - center) < rk
        distinct = np.linalg.norm(z["u"] - z["v"]) >= dom.h
        res = max(z["residual_u"], z["residual_v"])
        worst = max(worst, res)
        ok &= bool(inside and distinct and res <= 1e-8 * s)
    return "k = 1..4: y_k has 0 preimages, z_k has 2 distinct preimages, residual <= 1e-8", \
        f"y preimages {ys}; z found for k in {sorted(zs)}; max residual {worst:.1e}", bool(ok)


PROP3_CORPUS = [
    ("(x, y)", "disk", True),
    ("(2*x + y, x - 3*y + 1)", "disk", True),
    ("(x^2 - y^2, 2*x*y)", "disk", True),
    ("(exp(x)*cos(y), exp(x)*sin(y))", "disk", True),
    ("(x*exp((x^2 + y^2)/2), y*exp((x^2 + y^2)/2))", "disk", True),
    ("(x^3, y)", "disk", True),
    ("(1 - x^2 - y^2, 0)", "disk", False),
    ("(x, 1 - x^2 - y^2)", "disk", False),
    ("(x^2 + y^2, 0)", "disk", False),
    ("(sin(pi*x)*sin(pi*y), 0)", "square", False),
]


def c8_equivalence(s: float):
    doms = {"disk": build_grid(SQUARE, 101, 101, "x^2 + y^2 < 1"),
            "square": build_grid(SQUARE, 101, 101)}
    agree, rows = True, []
    for text, where, _ in PROP3_CORPUS:
        dom = doms[where]
        tol = 4.0 * dom.h * s
        a = check_hull_like_property(text, dom, tol=tol).holds
        b = check_hull_property(text, dom, tol=tol).holds
        agree &= a == b
        rows.append("%s%s" % ("T" if a else "F", "T" if b else "F"))
    return "hull-like and hull verdicts agree on 10 fields", " ".join(rows), bool(agree)


TRANSPORT_CASES = [
    ("x", "-y", "t", (0, 1, 0, 1), None),
    ("x + 2*y", "y", "exp(t)", (0, 1, 0, 1), None),
    ("x^2 + y^2", "y", "sin(t)", (0, 1.5, -1.5, 1.5),
     "0.25 < x^2 + y^2 and x^2 + y^2 < 1.96 and x > 0.1"),
    ("x*y", "x", "cos(t)", (0.2, 1.2, -1, 1), None),
    ("exp(x)*sin(y)", "exp(x)*cos(y)", "t^2", SQUARE, "x^2 + y^2 < 1"),
]


def c9_transport(s: float):
    ok, gaps = True, []
    for beta, alpha, F, box, mask in TRANSPORT_CASES:
        dom = build_grid(box, 101, 101, mask)
        inst = make_instance(beta, alpha, F, dom)
        rep = check_max_principle(inst)
        tol = rep.tolerance * s
        ok &= rep.sup_gap <= tol and rep.inf_gap <= tol
        gaps.append(max(rep.sup_gap, rep.inf_gap) / rep.tolerance)
    disk = build_grid(SQUARE, 101, 101, "x^2 + y^2 < 1")
    c = counterexample_probe("x^2 + y^2", "-t", disk)
    ok &= c.fails and c.interior_excess >= 0.9
    return "5 instances within 2dx*Lip(u); counterexample excess >= 0.9", \
        ("gap/tol " + ", ".join(f"{g:.2f}" for g in gaps)
         + f"; counterexample fails={c.fails} excess={c.interior_excess:.3f}"), bool(ok)


def _seg_dist(q, a, b) -> float:
    ab = b - a
    t = np.clip(np.dot(q - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(q - (a + t * ab)))


def _tri_dist(q, a, b, c) -> float:
    # barycentric inside test, else nearest edge
    T = np.column_stack([b - a, c - a])
    l1, l2 = np.linalg.solve(T, q - a)
    if l1 >= 0 and l2 >= 0 and l1 + l2 <= 1:
        return 0.0
    return min(_seg_dist(q, a, b), _seg_dist(q, b, c), _seg_dist(q, c, a))


def c10_geometry(s: float):
    rng = np.random.default_rng(SEED + 10)
    pts = rng.normal(size=(30, 2))
    verts = convex_hull_2d(pts).hull_vertices_2d
    q = rng.uniform(-3, 3, size=(1000, 2))
    margin = 1e-6
    far = polygon_boundary_distance(q, verts) > margin
    poly = point_in_polygon(q[far], verts)
    dist = np.array([hull_distance(p, pts, 1e-12) for p in q[far]])
    mismatch = int(np.sum(poly != (dist <= margin / 2)))
    worst = 0.0
    for i in range(100):
        p = rng.normal(size=2) * 2
        if i < 50:
            a, b = rng.normal(size=(2, 2))
            exact, got = _seg_dist(p, a, b), hull_distance(p, np.array([a, b]), 1e-12)
        else:
            a, b, c = rng.normal(size=(3, 2))
            exact, got = _tri_dist(p, a, b, c), hull_distance(p, np.array([a, b, c]), 1e-12)
        worst = max(worst, abs(exact - got))
    ok = mismatch == 0 and worst <= 1e-8 * s
    return "0 containment mismatches; Frank-Wolfe error <= 1e-8", \
        f"{mismatch} mismatches of {int(far.sum())}; max error {worst:.1e}", bool(ok)


CRITERIA: List[tuple] = [
    (1, "arc counterexample regression", c1_remark1, 1.0),
    (2, "quadratic determinant identity", c2_quadratic_identity, 5.0),
    (3, "nonnegative-h guard", c3_guard, 10.0),
    (4, "Monge-Ampere convergence", c4_ma_convergence, 120.0),
    (5, "gradient hull of MA solutions", c5_gradient_hull, 150.0),
    (6, "certificate pipeline", c6_dichotomy, 30.0),
    (7, "bifurcation witnesses", c7_bifurcation, 30.0),
    (8, "restriction/extension equivalence", c8_equivalence, 60.0),
    (9, "transport max principle", c9_transport, 10.0),
    (10, "geometry oracles", c10_geometry, 5.0),
]


def run_criterion(number: int, tol_scale: float = 1.0) -> CriterionResult:
    num, title, fn, budget = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        expected, observed, passed = fn(tol_scale)
    except Exception as exc:  # a crash is a failure of that criterion only
        expected, observed, passed = "runs", f"{type(exc).__name__}: {exc}", False
    dt = time.perf_counter() - t0
    if dt > budget:
        observed += f" (over budget: {dt:.1f}s > {budget:g}s)"
        passed = False
    return CriterionResult(num, title, expected, observed, bool(passed), dt, budget)


def run_suite(tol_scale: float = 1.0, only: Callable[[int], bool] = lambda n: True) -> List[CriterionResult]:
    return [run_criterion(n, tol_scale) for n, *_ in CRITERIA if only(n)]
