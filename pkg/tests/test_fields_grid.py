import numpy as np
import pytest

from hull_lab.errors import (
    ArityError,
    EmptyDomainError,
    FieldEvaluationError,
    StencilError,
)
from hull_lab.fields import FieldExpr
from hull_lab.grid import (
    build_grid,
    collar,
    evaluate,
    gradient_fd,
    jacobian,
    jacobian_fd,
)


def test_parse_and_evaluate():
    f = FieldExpr("(x^2, x*y)")
    assert f.m == 2
    assert np.allclose(f([[2.0, 3.0]]), [[4.0, 6.0]])
    assert np.allclose(evaluate("(cos(x), sin(x))", [[0.0, 0.0]]), [[1.0, 0.0]])
    c = evaluate("(3, -1)", np.random.default_rng(0).uniform(size=(5, 2)))
    assert np.all(c == [3.0, -1.0])


def test_parse_rejects_unknowns():
    with pytest.raises(ValueError):
        FieldExpr("(x, z)")
    with pytest.raises(ValueError):
        FieldExpr("(tan(x), y)")


def test_nonfinite_evaluation_reports_point():
    f = FieldExpr("1/(x - 1)")
    with pytest.raises(FieldEvaluationError) as info:
        f([[0.0, 0.0], [1.0, 0.5]])
    assert np.allclose(info.value.point, [1.0, 0.5])


def test_jacobian_exact():
    assert np.allclose(jacobian("(x, y)", (0.3, -0.7)).matrix, np.eye(2))
    J = jacobian("(1 - x^2 - y^2, 0)", (0.1, 0.2))
    assert np.allclose(J.matrix, [[-0.2, -0.4], [0, 0]])
    assert J.det == 0
    with pytest.raises(ArityError):
        jacobian("(x, y, x*y)", (0, 0))


def test_gradient_of_quadratic_potential():
    f = FieldExpr("(x^2 + y^2)/2").gradient()
    pts = np.random.default_rng(1).uniform(-1, 1, size=(10, 2))
    assert np.allclose(f(pts), pts)
    assert np.allclose([jacobian(f, p).det for p in pts], 1.0)


def test_jacobian_fd():
    M = np.array([[2.0, -1.0], [0.5, 3.0]])
    J = jacobian_fd("(1 + 2*x - y, -2 + 0.5*x + 3*y)", (0.4, 0.1)).matrix
    assert np.abs(J - M).max() <= 1e-9
    J = jacobian_fd("(x^2, x*y)", (1.0, 1.0), 1e-5).matrix
    assert np.abs(J - [[2, 0], [1, 1]]).max() <= 1e-9
    J = jacobian_fd("(sin(x)*cos(y), exp(x))", (0.0, 0.0), 1e-5).matrix
    assert np.abs(J - [[1, 0], [1, 0]]).max() <= 1e-9


def test_jacobian_fd_stencil_leaves_domain():
    dom = build_grid((0, 1, 0, 1), 11, 11)
    with pytest.raises(StencilError):
        jacobian_fd("(x, y)", (1e-7, 0.5), 1e-5, dom)


def test_unit_square_counts():
    dom = build_grid((0, 1, 0, 1), 11, 11)
    assert dom.interior.sum() == 81
    assert dom.boundary_nodes.sum() == 40
    tiny = build_grid((0, 1, 0, 1), 3, 3)
    assert tiny.interior.sum() == 1 and tiny.interior[1, 1]


def test_disk_count_close_to_area():
    dom = build_grid((-1, 1, -1, 1), 101, 101, "x^2 + y^2 < 1")
    expected = np.pi / (dom.dx * dom.dy)
    assert abs(dom.interior.sum() - expected) <= 0.02 * expected


def test_interior_neighbours_in_closure():
    dom = build_grid((-1, 1, -1, 1), 61, 61, "x^2 + y^2 < 1")
    closure = dom.interior | dom.boundary_nodes
    J, I = np.nonzero(dom.interior)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        lost = ~closure[J + dj, I + di]
        # a missing neighbour must be replaced by a crossing point on that edge
        mids = np.column_stack([dom.x[I[lost]] + di * dom.dx / 2, dom.y[J[lost]] + dj * dom.dy / 2])
        if len(mids):
            d, _ = dom._btree.query(mids)
            assert np.all(d <= dom.h / 2 + 1e-12)


def test_empty_domain():
    with pytest.raises(EmptyDomainError):
        build_grid((0, 1, 0, 1), 11, 11, "x^2 + y^2 < -1")


def test_collar_widths():
    dom = build_grid((0, 1, 0, 1), 41, 41)
    c = collar(dom, 3 * dom.h)
    pts = dom.points(c.nodes)
    edge = np.minimum.reduce([pts[:, 0], 1 - pts[:, 0], pts[:, 1], 1 - pts[:, 1]])
    assert np.all(edge < 3 * dom.h + 1e-12)
    assert len(c) > 0 and not np.any(c.nodes & ~dom.interior)


def test_gradient_fd():
    dom = build_grid((0, 1, 0, 1), 21, 21)
    u = dom.X + 2 * dom.Y
    assert np.allclose(gradient_fd(u, dom, (7, 3)), (1, 2), atol=1e-12)
    u = (dom.X ** 2 + dom.Y ** 2) / 2
    g = gradient_fd(u, dom, (10, 10))
    assert np.allclose(g, (dom.x[10], dom.y[10]), atol=dom.dx ** 2)
    u = dom.X ** 2
    g = gradient_fd(u, dom, (5, 0))  # left edge, one-sided
    assert abs(g[0] - 2 * dom.x[0]) <= 2 * dom.dx ** 2
