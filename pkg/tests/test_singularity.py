import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hull_lab.dichotomy import build_certificate
from hull_lab.errors import CountUncertainError
from hull_lab.fields import FieldExpr, zero_field
from hull_lab.grid import build_grid
from hull_lab.hull_property import QuasiConvexProbe
from hull_lab.singularity import (
    QuadraticDetCoeffs,
    bifurcation_scan,
    det_coefficients,
    det_quadratic,
    direct_det,
    gauss_newton,
    preimage_count,
    remark1_case,
    singular_sweep,
)

F = "(1 - x^2 - y^2, 0)"


@pytest.fixture(scope="module")
def disk_cert():
    dom = build_grid((-1, 1, -1, 1), 201, 201, "x^2 + y^2 < 1")
    return dom, build_certificate(F, dom, QuasiConvexProbe.linear([1, 0]))


def test_gradient_pair_coefficients():
    f = FieldExpr("(x^2 + y^2)/2").gradient()
    c = det_quadratic(f, "(-y, x)", (0.3, -0.4))
    assert (c.a, c.b, c.c) == (1.0, 0.0, 1.0)
    c = det_quadratic("(0, 0)", "(2*x + y, x*y)", (0.5, 2.0))
    assert c.a == 0 and c.b == 0
    assert c.c == pytest.approx(2 * 0.5 - 1 * 2.0)  # alpha_x beta_y - alpha_y beta_x


coef = st.integers(-6, 6)


def quad(cs):
    return "({})*x^2 + ({})*x*y + ({})*y^2 + ({})*x + ({})*y + ({})".format(*cs)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(coef, min_size=6, max_size=6), min_size=4, max_size=4),
       st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=20),
       st.floats(-5, 5))
def test_quadratic_identity(cs, pts, lam):
    f = FieldExpr([quad(cs[0]), quad(cs[1])])
    g = FieldExpr([quad(cs[2]), quad(cs[3])])
    pts = np.array(pts)
    q = QuadraticDetCoeffs(*det_coefficients(f, g, pts))
    direct = direct_det(f, g, lam, pts)
    assert np.allclose(q(lam), direct, rtol=1e-12, atol=1e-12 * (1 + np.abs(direct).max()))


def test_sweep_disk_certifies_zero(disk_cert):
    dom, cert = disk_cert
    res = singular_sweep("(x, y)", F, cert.X, dom, lambdas=[2.5, 3.0, 5.0, 10.0, 100.0])
    assert all(r.certified for r in res.rows)
    for r in res.rows:
        # |det| = |1 - 2 lam x| is smallest at the node nearest to x = 1/(2 lam)
        assert abs(r.argmin_point[0] - 1 / (2 * r.lam)) <= dom.dx
    # below the curve x = 1/(2 lam) leaving X, det stays positive
    low = singular_sweep("(x, y)", F, cert.X, dom, lambdas=[0.5, 1.0])
    assert not low.any_certified


def test_sweep_positive_jacobian_never_zero():
    dom = build_grid((-1, 1, -1, 1), 41, 41)
    res = singular_sweep(zero_field(2), "(exp(x)*cos(y), exp(x)*sin(y))", dom.interior, dom,
                         lam_min=0.1, lam_max=100, steps=15)
    assert not res.any_certified


def test_sweep_gradient_pair_guard():
    dom = build_grid((-1, 1, -1, 1), 41, 41)
    f = FieldExpr("x^4/4 + y^2/2").gradient()
    res = singular_sweep("(-y, x)", f, dom.interior, dom, lambdas=np.linspace(0, 100, 51))
    assert not res.any_certified
    assert min(r.min_abs_det for r in res.rows) >= 1.0


def test_gauss_newton_converges():
    x, r = gauss_newton(FieldExpr("(x + y^3, y - x^2)"), (1.0, 0.5), (0.5, 0.5))
    assert r < 1e-12


def test_preimage_counts():
    dom = build_grid((-1, 1, -1, 1), 81, 81, "x^2 + y^2 < 1")
    one = preimage_count("(x, y)", (0.23, -0.41), dom)
    assert one.count == 1 and np.allclose(one.points[0], (0.23, -0.41), atol=1e-10)
    circle = preimage_count("(1 - x^2 - y^2, 0)", (0.5, 0.0), dom)
    assert circle.non_isolated and circle.count > 2
    assert np.allclose(np.linalg.norm(circle.points, axis=1), np.sqrt(0.5), atol=1e-8)
    none = preimage_count("(1 - x^2 - y^2, 0)", (0.0, 1.0), dom)
    assert none.count == 0


def test_count_uncertain_when_newton_fails():
    dom = build_grid((-1, 1, -1, 1), 21, 21)
    # the target sits just outside the image x^2 >= 0: nodes come within tol_y
    # but no Gauss-Newton refinement can reach a small residual
    with pytest.raises(CountUncertainError) as info:
        preimage_count("(x^2, y)", (-0.05, 0.0), dom, tol_y=0.2)
    assert info.value.clusters


def test_bifurcation_witnesses(disk_cert):
    dom, cert = disk_cert
    w = bifurcation_scan(zero_field(2), F, cert, 1.0, r0=0.4, K=4)
    assert [y["preimages"] for y in w.y_list] == [0, 0, 0, 0]
    assert all(y["y"][0] > 1.0 for y in w.y_list)  # beyond the image's right end
    center = np.array(w.point)
    assert len(w.z_list) == 4
    for z in w.z_list:
        assert np.linalg.norm(z["u"] - z["v"]) >= dom.h
        assert np.linalg.norm(z["v"] - center) < z["radius"]
        assert max(z["residual_u"], z["residual_v"]) <= 1e-8
        f = FieldExpr(F)
        assert np.allclose(f(z["v"]), z["z"], atol=1e-8)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_remark1(lam):
    r = remark1_case(lam)
    assert r.injective
    assert abs(r.violation - lam) <= 1e-9
    assert r.dims_mismatch


def test_remark1_degenerate():
    r = remark1_case(0.0)
    assert r.violation == 0.0 and not r.injective
