"""
Closed-form expressions for sources, jumps and exact solutions

Expressions are sympy objects in the coordinates x, y (and z in 3D); 2D interface data
may also use the curve parameter s. Derivatives are taken symbolically and compiled to
numpy with lambdify, so every manufactured quantity is exact up to rounding.
"""
from typing import Callable, List, Optional, Sequence, Tuple
import re
from tokenize import TokenError

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .errors import ExpressionError

X, Y, Z, S = sp.symbols("x y z s", real=True)
COORDS = (X, Y, Z)

_FUNCTIONS = {
    "exp": sp.exp,
    "sin": sp.sin,
    "cos": sp.cos,
    "sqrt": sp.sqrt,
    "Abs": sp.Abs,
    "abs": sp.Abs,
}
_CONSTANTS = {"pi": sp.pi, "E": sp.E}
_ALLOWED_FUNCS = (sp.exp, sp.sin, sp.cos, sp.Abs)
_ALLOWED_CHARS = re.compile(r"^[\w\s+\-*/^().]*$")
_NUMBER = re.compile(r"(?<![\w.])(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_]\w*")
_TRANSFORMS = standard_transformations + (convert_xor,)


def coords(dim: int):
    """Coordinate symbols for dimension dim"""
    return COORDS[:dim]


def _check_terms(expr: sp.Expr, text: str):
    """Every node must be arithmetic, an allowed function or a finite real constant"""
    for node in sp.preorder_traversal(expr):
        if isinstance(node, (sp.Add, sp.Mul, sp.Pow, sp.Symbol) + _ALLOWED_FUNCS):
            continue
        if node in (sp.pi, sp.E):
            continue
        if isinstance(node, (sp.Rational, sp.Float)) and node.is_finite:
            continue
        raise ExpressionError(f"'{text}' evaluates to an unsupported term: {node}")


def parse_expression(text: str, dim: int, allow_s: bool = False) -> sp.Expr:
    """
    Parse a user expression string

    Names are checked against the grammar before anything is evaluated, and the parsed
    tree is checked again, so complex, infinite or undefined values are rejected.

    Args:
        text: Arithmetic in + - * / ^ ** with exp, sin, cos, sqrt, Abs and pi
        dim: Spatial dimension (selects which of x, y, z are allowed)
        allow_s: Whether the interface parameter s may appear

    Returns:
        sympy expression
    """
    symbols = {str(c): c for c in coords(dim)}
    if allow_s:
        symbols["s"] = S
    if not _ALLOWED_CHARS.match(text) or "__" in text:
        raise ExpressionError(f"'{text}' contains characters outside the expression grammar")
    names = set(_NAME.findall(_NUMBER.sub(" ", text)))
    unknown = names - set(symbols) - set(_FUNCTIONS) - set(_CONSTANTS)
    if unknown:
        raise ExpressionError(f"unknown names in '{text}': {', '.join(sorted(unknown))}")

    namespace = dict(_FUNCTIONS, **_CONSTANTS, **symbols)
    global_dict = {"__builtins__": {}, "Integer": sp.Integer, "Float": sp.Float,
                   "Rational": sp.Rational, "Symbol": sp.Symbol, "Function": sp.Function}
    try:
        expr = parse_expr(text, local_dict=namespace, global_dict=global_dict,
                          transformations=_TRANSFORMS)
    except (SyntaxError, TypeError, ValueError, NameError, AttributeError, TokenError,
            sp.SympifyError) as exc:
        raise ExpressionError(f"cannot parse expression '{text}': {exc}") from exc

    if not isinstance(expr, sp.Expr):
        raise ExpressionError(f"'{text}' is not an arithmetic expression")
    stray = expr.free_symbols - set(symbols.values())
    if stray:
        raise ExpressionError(f"unknown names in '{text}': {', '.join(sorted(map(str, stray)))}")
    _check_terms(expr, text)
    return expr


class ScalarField:
    """A closed-form scalar function of position, evaluated on (N, d) point arrays"""

    def __init__(self, expr, dim: int, param_of: Optional[Callable] = None):
        self.expr = sp.sympify(expr)
        self.dim = dim
        self.param_of = param_of
        self.uses_s = S in self.expr.free_symbols
        args = list(coords(dim)) + ([S] if self.uses_s else [])
        self._fn = sp.lambdify(args, self.expr, "numpy")

    def __call__(self, points: np.ndarray, params: Optional[np.ndarray] = None) -> np.ndarray:
        """Values at (N, d) points; expressions in s use params, else recover s from the points"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        args = [points[:, i] for i in range(self.dim)]
        if self.uses_s:
            if params is None:
                if self.param_of is None:
                    raise ExpressionError("expression uses s but no curve parameter is available")
                params = self.param_of(points)
            args.append(np.asarray(params, dtype=float))
        values = self._fn(*args)
        return np.broadcast_to(np.asarray(values, dtype=float), (points.shape[0],)).copy()

    def diff(self, axis: int) -> "ScalarField":
        """Partial derivative along axis"""
        if self.uses_s:
            raise ExpressionError("cannot differentiate an expression of s in space")
        return ScalarField(sp.diff(self.expr, COORDS[axis]), self.dim)

    def gradient(self) -> List["ScalarField"]:
        return [self.diff(axis) for axis in range(self.dim)]

    def laplacian(self) -> "ScalarField":
        if self.uses_s:
            raise ExpressionError("cannot differentiate an expression of s in space")
        lap = sum(sp.diff(self.expr, c, 2) for c in coords(self.dim))
        return ScalarField(lap, self.dim)

    def __repr__(self):
        return f"ScalarField({self.expr})"


def evaluate_gradient(fields: List[ScalarField], points: np.ndarray) -> np.ndarray:
    """Stack component fields into an (N, d) array"""
    return np.column_stack([f(points) for f in fields])


class ClosedFormField:
    """
    Vector-valued closed form with the evaluation interface of ShallowNet

    Stands in for a trained network when the singular part is known exactly, so the
    grid stages can be run with the training error removed.
    """

    def __init__(self, exprs: Sequence, dim: int):
        self.components = [ScalarField(e, dim) for e in exprs]
        if not self.components:
            raise ExpressionError("need at least one component")
        if any(c.uses_s for c in self.components):
            raise ExpressionError("a spatial field cannot depend on s")
        self.dim = dim
        self._gradients = [c.gradient() for c in self.components]
        self._laplacians = [c.laplacian() for c in self.components]

    @property
    def input_dim(self) -> int:
        return self.dim

    @property
    def n_outputs(self) -> int:
        return len(self.components)

    def _points(self, x) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        return np.atleast_2d(x), single

    def eval(self, x) -> np.ndarray:
        x, single = self._points(x)
        value = np.column_stack([c(x) for c in self.components])
        return value[0] if single else value

    def gradient(self, x) -> np.ndarray:
        x, single = self._points(x)
        grad = np.stack([evaluate_gradient(g, x) for g in self._gradients], axis=1)
        return grad[0] if single else grad

    def laplacian(self, x) -> np.ndarray:
        x, single = self._points(x)
        lap = np.column_stack([f(x) for f in self._laplacians])
        return lap[0] if single else lap

    def spatial_derivatives(self, x):
        """Value (N, k), gradient (N, k, d), Laplacian (N, k)"""
        return self.eval(x), self.gradient(x), self.laplacian(x)

    def __repr__(self):
        return f"ClosedFormField({[str(c.expr) for c in self.components]})"
