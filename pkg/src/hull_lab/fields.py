"""Analytic scalar and vector fields in the plane with exact partial derivatives.

Fields are sympy expression trees over ``x`` and ``y``.  They are compiled to
numpy kernels for evaluation; derivatives are taken symbolically.
"""
from __future__ import annotations

from functools import cached_property
from typing import Sequence, Union

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from tokenize import TokenError

from .errors import ArityError, FieldEvaluationError

X, Y = sp.symbols("x y", real=True)
T = sp.Symbol("t", real=True)

_ALLOWED_FUNCS = {
    "exp": sp.exp,
    "sin": sp.sin,
    "cos": sp.cos,
    "sqrt": sp.sqrt,
    "abs": sp.Abs,
    "max": sp.Max,
    "min": sp.Min,
}
_ALLOWED_CLASSES = (sp.exp, sp.sin, sp.cos, sp.Abs, sp.Max, sp.Min)
_TRANSFORMS = standard_transformations + (convert_xor,)


def _check_tree(expr: sp.Expr, variables) -> None:
    extra = expr.free_symbols - set(variables)
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ValueError(f"unknown symbol(s) in expression: {names}")
    for node in sp.preorder_traversal(expr):
        if isinstance(node, sp.Function) and not isinstance(node, _ALLOWED_CLASSES):
            raise ValueError(f"function {node.func} is not supported")


def parse_components(text: str, variables=(X, Y)) -> list:
    """Parse infix text such as ``"(1 - x^2 - y^2, 0)"`` into sympy expressions."""
    local = {str(v): v for v in variables}
    local.update(_ALLOWED_FUNCS)
    local["pi"] = sp.pi
    local["e"] = sp.E
    try:
        parsed = parse_expr(text, local_dict=local, transformations=_TRANSFORMS,
                            evaluate=True)
    except (SyntaxError, TypeError, sp.SympifyError, TokenError) as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc}") from exc
    comps = list(parsed) if isinstance(parsed, (tuple, list, sp.Tuple)) else [parsed]
    comps = [sp.sympify(c) for c in comps]
    for c in comps:
        _check_tree(c, variables)
    return comps


def _to_expr(c) -> sp.Expr:
    if isinstance(c, str):
        (e,) = parse_components(c)
        return e
    return sp.sympify(c)


class FieldExpr:
    """A map R^2 -> R^m (m >= 1) given by closed-form component expressions."""

    def __init__(self, components: Union[str, Sequence]):
        if isinstance(components, str):
            exprs = parse_components(components)
        elif isinstance(components, (sp.Expr, int, float)):
            exprs = [sp.sympify(components)]
        else:
            exprs = [_to_expr(c) for c in components]
        if not exprs:
            raise ArityError("a field needs at least one component")
        for e in exprs:
            _check_tree(e, (X, Y))
        self.exprs = tuple(exprs)

    @classmethod
    def parse(cls, text: str) -> "FieldExpr":
        return cls(text)

    @property
    def m(self) -> int:
        return len(self.exprs)

    def __repr__(self):
        return f"FieldExpr({self.text!r})"

    @property
    def text(self) -> str:
        parts = [str(e).replace("**", "^") for e in self.exprs]
        return parts[0] if self.m == 1 else "(" + ", ".join(parts) + ")"

    def __eq__(self, other):
        return isinstance(other, FieldExpr) and self.exprs == other.exprs

    def __hash__(self):
        return hash(self.exprs)

    # -- algebra -----------------------------------------------------------
    def _coerce(self, other) -> "FieldExpr":
        if isinstance(other, FieldExpr):
            if other.m != self.m:
                raise ArityError(f"cannot combine fields of arity {self.m} and {other.m}")
            return other
        return FieldExpr([sp.sympify(other)] * self.m)

    def __add__(self, other):
        o = self._coerce(other)
        return FieldExpr([a + b for a, b in zip(self.exprs, o.exprs)])

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return FieldExpr([a - b for a, b in zip(self.exprs, o.exprs)])

    def __mul__(self, c):
        c = sp.sympify(c)
        return FieldExpr([c * e for e in self.exprs])

    __rmul__ = __mul__

    def __neg__(self):
        return FieldExpr([-e for e in self.exprs])

    def component(self, k: int) -> "FieldExpr":
        return FieldExpr([self.exprs[k]])

    def compose(self, outer: Union[str, sp.Expr]) -> "FieldExpr":
        """Scalar composition ``outer(self)`` where ``outer`` is written in ``t``."""
        if self.m != 1:
            raise ArityError("compose needs a scalar inner field")
        F = parse_components(outer, variables=(T,))[0] if isinstance(outer, str) else sp.sympify(outer)
        _check_tree(F, (T,))
        return FieldExpr([F.subs(T, self.exprs[0])])

    def gradient(self) -> "FieldExpr":
        if self.m != 1:
            raise ArityError("gradient needs a scalar field")
        e = self.exprs[0]
        return FieldExpr([sp.diff(e, X), sp.diff(e, Y)])

    def stack(self, other: "FieldExpr") -> "FieldExpr":
        return FieldExpr(list(self.exprs) + list(other.exprs))

    # -- compiled kernels ----------------------------------------------------
    @cached_property
    def _values_fn(self):
        return [sp.lambdify((X, Y), e, modules="numpy") for e in self.exprs]

    @cached_property
    def partials(self):
        """Symbolic partials as an (m, 2) nested tuple ``((d e_k/dx, d e_k/dy), ...)``."""
        return tuple((sp.diff(e, X), sp.diff(e, Y)) for e in self.exprs)

    @cached_property
    def _partials_fn(self):
        return [[sp.lambdify((X, Y), d, modules="numpy") for d in row] for row in self.partials]

    @staticmethod
    def _split(pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[-1] != 2:
            raise ArityError(f"points must have 2 coordinates, got shape {pts.shape}")
        return pts[:, 0], pts[:, 1], single

    @staticmethod
    def _call(fn, x, y):
        with np.errstate(all="ignore"):
            v = fn(x, y)
        return np.broadcast_to(np.asarray(v, dtype=float), x.shape)

    def _guard(self, arr, x, y, what="value"):
        bad = ~np.isfinite(arr)
        if bad.any():
            idx = int(np.flatnonzero(bad.reshape(len(x), -1).any(axis=1))[0])
            pt = (float(x[idx]), float(y[idx]))
            raise FieldEvaluationError(f"non-finite {what} of {self.text} at {pt}", point=pt)
        return arr

    def __call__(self, pts) -> np.ndarray:
        """Evaluate at points of shape (2,) or (n, 2); returns (m,) or (n, m)."""
        x, y, single = self._split(pts)
        out = np.stack([self._call(f, x, y) for f in self._values_fn], axis=-1)
        self._guard(out, x, y)
        return out[0] if single else out

    evaluate = __call__

    def scalar(self, pts) -> np.ndarray:
        if self.m != 1:
            raise ArityError("scalar() needs a scalar field")
        v = self(pts)
        return v[..., 0]

    def jacobians(self, pts) -> np.ndarray:
        """Analytic Jacobians, shape (n, m, 2) (or (m, 2) for one point)."""
        x, y, single = self._split(pts)
        out = np.stack(
            [np.stack([self._call(f, x, y) for f in row], axis=-1) for row in self._partials_fn],
            axis=-2,
        )
        self._guard(out, x, y, "derivative")
        return out[0] if single else out

    def lipschitz(self, pts) -> float:
        """Largest Jacobian operator norm over the sample points."""
        J = self.jacobians(np.atleast_2d(pts))
        if len(J) == 0:
            return 0.0
        return float(np.linalg.norm(J, ord=2, axis=(-2, -1)).max())


def as_field(f) -> FieldExpr:
    if isinstance(f, FieldExpr):
        return f
    return FieldExpr(f)


def combine(g: FieldExpr, f: FieldExpr, lam: float) -> FieldExpr:
    """The field ``g + lam * f``."""
    return as_field(g) + as_field(f) * lam


def zero_field(m: int = 2) -> FieldExpr:
    return FieldExpr([0] * m)


def det2(mats: np.ndarray) -> np.ndarray:
    mats = np.asarray(mats, dtype=float)
    return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
