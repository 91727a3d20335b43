import numpy as np
import pytest

from hull_lab.errors import PreconditionError
from hull_lab.fields import FieldExpr
from hull_lab.grid import build_grid
from hull_lab.monge_ampere import (
    MAProblem,
    check_gradient_hull,
    convexity_defect,
    residual_ma,
    solution_from_samples,
    solve_ma,
    verify_theorem5,
)

SQ = (-1, 1, -1, 1)
EXP = "exp((x^2 + y^2)/2)"
EXP_H = "(1 + x^2 + y^2)*exp(x^2 + y^2)"


def exact_on(dom, text):
    u = np.full((dom.ny, dom.nx), np.nan)
    sel = dom.interior | dom.boundary_nodes
    u[sel] = FieldExpr(text).scalar(dom.points(sel))
    return u, sel


def max_err(sol, dom, text):
    u, sel = exact_on(dom, text)
    return np.abs(sol.u[sel] - u[sel]).max()


def test_affine_homogeneous():
    dom = build_grid(SQ, 31, 31)
    prob = MAProblem(dom, "0", "1 + 2*x - y")
    sol = solve_ma(prob)
    assert sol.converged
    assert max_err(sol, dom, "1 + 2*x - y") <= 1e-10


def test_quadratic_recovered():
    dom = build_grid(SQ, 41, 41)
    sol = solve_ma(MAProblem(dom, "1", "(x^2 + y^2)/2"))
    assert sol.converged
    assert max_err(sol, dom, "(x^2 + y^2)/2") <= dom.dx ** 2


def test_exponential_second_order():
    errs = []
    for n in (21, 41, 81):
        dom = build_grid(SQ, n, n)
        sol = solve_ma(MAProblem(dom, EXP_H, EXP))
        assert sol.converged and sol.convexity_defect >= -1e-12
        errs.append(max_err(sol, dom, EXP))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.7)


def test_residual_exact_samples():
    dom = build_grid(SQ, 21, 21)
    prob = MAProblem(dom, "1", "(x^2 + y^2)/2")
    u, _ = exact_on(dom, "(x^2 + y^2)/2")
    assert residual_ma(u, prob) <= 1e-10
    prob0 = MAProblem(dom, "0", "x^4")
    u4, _ = exact_on(dom, "x^4")
    assert residual_ma(u4, prob0) <= 1e-10
    assert convexity_defect(u4, dom) == 0.0


def test_rejects_bad_problems():
    dom = build_grid(SQ, 11, 11)
    with pytest.raises(PreconditionError):
        MAProblem(dom, "-1", "x^2")
    disk = build_grid(SQ, 11, 11, "x^2 + y^2 < 1")
    with pytest.raises(PreconditionError):
        MAProblem(disk, "1", "x^2")


def test_iteration_cap_returns_flagged_iterate():
    dom = build_grid(SQ, 41, 41)
    sol = solve_ma(MAProblem(dom, EXP_H, EXP), max_iters=5)
    assert not sol.converged and sol.iterations <= 5
    assert np.all(np.isfinite(sol.u[dom.interior]))


def test_jacobi_mode_agrees():
    dom = build_grid(SQ, 15, 15)
    prob = MAProblem(dom, EXP_H, EXP)
    a = solve_ma(prob, mode="jacobi")
    b = solve_ma(prob)
    assert a.converged and b.converged
    assert np.abs(a.u - b.u)[dom.interior].max() <= 1e-6


def test_gradient_hull_quadratic():
    dom = build_grid(SQ, 41, 41)
    prob = MAProblem(dom, "1", "(x^2 + y^2)/2")
    rep = verify_theorem5(solve_ma(prob), prob)
    assert rep.holds and rep.worst_violation <= 2 * dom.dx


def test_gradient_hull_affine_and_exponential():
    dom = build_grid(SQ, 41, 41)
    for h, u in (("0", "x + 2*y"), (EXP_H, EXP)):
        prob = MAProblem(dom, h, u)
        rep = verify_theorem5(solve_ma(prob), prob)
        assert rep.holds


def test_unconverged_solution_rejected():
    dom = build_grid(SQ, 21, 21)
    prob = MAProblem(dom, "1", "(x^2 + y^2)/2")
    u, _ = exact_on(dom, "x^2 + y^2")  # det D^2 = 4, not 1
    with pytest.raises(PreconditionError):
        verify_theorem5(solution_from_samples(u, prob), prob)


def test_saddle_gradient_is_affine():
    # x^2 - y^2 has the linear gradient (2x, -2y): its image of the square is
    # the square [-2, 2]^2 with boundary onto boundary, so the hull test holds
    dom = build_grid(SQ, 41, 41)
    u, _ = exact_on(dom, "x^2 - y^2")
    assert check_gradient_hull(u, dom).holds
