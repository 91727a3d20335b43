import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from hull_lab.dichotomy import build_certificate, check_certificate, lambda_tilde, verify_supported
from hull_lab.errors import (
    CertificateInvalidError,
    CollarTooThinError,
    NoCertificateError,
    PreconditionError,
)
from hull_lab.fields import FieldExpr, zero_field
from hull_lab.grid import build_grid
from hull_lab.hull_property import QuasiConvexProbe

F = "(1 - x^2 - y^2, 0)"


@pytest.fixture(scope="module")
def setup():
    dom = build_grid((-1, 1, -1, 1), 201, 201, "x^2 + y^2 < 1")
    f = FieldExpr(F)
    cert = build_certificate(f, dom, QuasiConvexProbe.linear([1, 0]))
    return dom, f, cert


def test_levels_match_closed_form(setup):
    dom, f, cert = setup
    pts = dom.interior_points
    rad = np.linalg.norm(pts, axis=1)
    # collar: nodes within delta of the unit circle
    delta = 10 * dom.h
    collar_sup = np.max(1 - rad[1 - rad < delta] ** 2)
    assert cert.collar_sup == pytest.approx(collar_sup, abs=2 * dom.h)
    assert cert.interior_sup == 1.0
    assert cert.r == pytest.approx((collar_sup + 1) / 2, abs=dom.h)
    assert np.allclose(cert.direction, [-1, 0], atol=1e-9)
    # inf of phi(f) outside K is -sup{1 - r^2 : 1 - r^2 < r}, which is about -r
    assert cert.rho == pytest.approx((-1 - cert.r) / 2, abs=2 * dom.h)
    assert dom.node_xy(cert.xbar) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_sets_match_closed_form(setup):
    dom, f, cert = setup
    rad2 = np.sum(dom.interior_points ** 2, axis=1)
    assert np.array_equal(cert.K[dom.interior], 1 - rad2 >= cert.r)
    # nodes lying on the level circle itself are decided by rounding
    clear = np.abs(rad2 - (1 + cert.rho)) > 1e-12
    assert np.array_equal(cert.X[dom.interior][clear], (rad2 < 1 + cert.rho)[clear])
    assert np.all(cert.X[dom.nodes_within((0, 0), 0.2, dom.interior)])
    check_certificate(cert)


def test_max_norm_field_gives_square():
    dom = build_grid((-1, 1, -1, 1), 101, 101)
    cert = build_certificate("(0, 1 - max(abs(x), abs(y)))", dom, QuasiConvexProbe.linear([0, 1]))
    m = np.max(np.abs(dom.interior_points), axis=1)
    X = cert.X[dom.interior]
    clear = np.abs(m - (1 + cert.rho)) > 1e-12
    assert np.array_equal(X[clear], (m < 1 + cert.rho)[clear])
    assert np.array_equal(cert.X, cert.X[::-1, :]) and np.array_equal(cert.X, cert.X.T)


def test_no_certificate_for_identity():
    dom = build_grid((-1, 1, -1, 1), 101, 101, "x^2 + y^2 < 1")
    with pytest.raises(NoCertificateError):
        build_certificate("(x, y)", dom, QuasiConvexProbe.linear([1, 0]))


def test_collar_thinner_than_grid():
    dom = build_grid((-1, 1, -1, 1), 41, 41)
    with pytest.raises(CollarTooThinError):
        build_certificate(F, dom, QuasiConvexProbe.linear([1, 0]), delta=0.01 * dom.h)


def exhaustive_lambda(g, cert):
    dom = cert.dom
    pts = dom.interior_points
    K, X = cert.K[dom.interior], cert.X[dom.interior]
    d = cert.direction
    pg = FieldExpr(g)(pts) @ d
    pf = cert.f(pts) @ d
    return max(0.0, np.min((pg[X] - pg[K].min()) / (cert.rho - pf[X])))


def test_lambda_tilde(setup):
    dom, f, cert = setup
    assert lambda_tilde(zero_field(2), f, cert) == 0.0
    assert lambda_tilde("(3, -2)", f, cert) == 0.0
    assert lambda_tilde(F, f, cert) == pytest.approx(exhaustive_lambda(F, cert), rel=1e-12)
    lt = lambda_tilde("(x, y)", f, cert)
    assert lt == pytest.approx(exhaustive_lambda("(x, y)", cert), rel=1e-12)
    # continuum value with the grid's K radius and rho: min over x of (R - x) / (rho + 1 - x^2)
    R = np.sqrt(1 - cert.r)
    s = np.sqrt(1 + cert.rho)
    cont = minimize_scalar(lambda x: (R - x) / (cert.rho + 1 - x ** 2), bounds=(-s + 1e-9, s - 1e-9),
                           method="bounded").fun
    assert lt == pytest.approx(cont, rel=0.03)


def test_lambda_tilde_rejects_other_field(setup):
    dom, f, cert = setup
    with pytest.raises(CertificateInvalidError):
        lambda_tilde("(x, y)", "(x, y)", cert)


def test_supported_point_disk(setup):
    dom, f, cert = setup
    v = verify_supported(zero_field(2), f, 1.0, cert)
    assert np.linalg.norm(v.point) <= dom.h
    assert v.value == pytest.approx([1.0, 0.0])
    assert v.boundary_distance == 0.0 and v.passed


def test_supported_point_perturbed(setup):
    dom, f, cert = setup
    g = FieldExpr("(0.01*y, 0.01*x)")
    v = verify_supported(g, f, 10.0, cert, 4 * dom.h)
    assert v.passed
    # oracle: exhaustive minimisation over K
    pts = dom.interior_points
    K = cert.K[dom.interior]
    vals = (g(pts) + 10 * f(pts)) @ cert.direction
    k = np.flatnonzero(K)[np.argmin(vals[K])]
    assert v.node == dom.interior_index[k]


def test_lambda_below_threshold(setup):
    dom, f, cert = setup
    lt = lambda_tilde("(x, y)", f, cert)
    with pytest.raises(PreconditionError):
        verify_supported("(x, y)", f, lt, cert)
    assert verify_supported("(x, y)", f, lt * 1.01 + 0.01, cert).passed
