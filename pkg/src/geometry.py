"""
Interface geometry: level sets, parameterizations, normals and interface sampling
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional, Sequence, Tuple
import logging

import numpy as np
import sympy as sp

from .errors import DegenerateGradientError, UnsupportedGeometryError, DimensionMismatchError
from .expressions import S, coords, parse_expression

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
MIN_GRADIENT = 1e-14
ON_INTERFACE_TOL = 1e-10


class Region(Enum):
    """Side of the interface a point lies on"""
    INSIDE = "inside"    # phi < 0
    OUTSIDE = "outside"  # phi >= 0


@dataclass(frozen=True, eq=False)
class InterfaceGeometry:
    """
    An embedded interface described by a level set and, optionally, a parameterization

    The level set is negative inside (Omega-), positive outside (Omega+) and zero on the
    interface. The parameterization maps parameter values to points on the interface;
    2D curves use a single parameter s, the 3D ellipsoid uses spherical angles.
    """

    name: str
    dim: int
    level_set: Callable[[np.ndarray], np.ndarray]
    level_set_gradient: Callable[[np.ndarray], np.ndarray]
    parametric: Optional[Callable[[np.ndarray], np.ndarray]] = None
    param_domain: Tuple[Tuple[float, float], ...] = ()
    parameter_of: Optional[Callable[[np.ndarray], np.ndarray]] = None
    parametric_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def phi(self, points: np.ndarray) -> np.ndarray:
        """Level-set values at (N, d) points"""
        return self.level_set(_as_points(points, self.dim))

    def grad_phi(self, points: np.ndarray) -> np.ndarray:
        return self.level_set_gradient(_as_points(points, self.dim))


@dataclass(frozen=True)
class InterfaceSample:
    """One training point on the interface"""
    point: np.ndarray
    normal: np.ndarray
    tangent: Optional[np.ndarray] = None
    param: Optional[float] = None


@dataclass(frozen=True, eq=False)
class InterfaceSampleSet:
    """M interface samples stored as arrays"""

    points: np.ndarray               # (M, d)
    normals: np.ndarray              # (M, d)
    tangents: Optional[np.ndarray]   # (M, 2) in 2D, None in 3D
    params: Optional[np.ndarray]     # (M,) in 2D, (M, 2) for the ellipsoid

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __getitem__(self, i: int) -> InterfaceSample:
        tangent = None if self.tangents is None else self.tangents[i]
        param = None
        if self.params is not None and self.params.ndim == 1:
            param = float(self.params[i])
        return InterfaceSample(self.points[i], self.normals[i], tangent, param)

    def __iter__(self) -> Iterator[InterfaceSample]:
        for i in range(len(self)):
            yield self[i]


def _as_points(points, dim: int) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != dim:
        raise DimensionMismatchError(f"expected {dim}-D points, got shape {points.shape}")
    return points


def classify(geom: InterfaceGeometry, x) -> Region:
    """
    Classify a single point

    Args:
        geom: Interface geometry
        x: Point in the domain

    Returns:
        Region.INSIDE if phi(x) < 0, otherwise Region.OUTSIDE (phi = 0 counts as outside)
    """
    return Region.INSIDE if geom.phi(x)[0] < 0 else Region.OUTSIDE


def inside_mask(geom: InterfaceGeometry, points: np.ndarray) -> np.ndarray:
    """Vectorized classify: True where phi < 0"""
    return geom.phi(points) < 0


def unit_normals(geom: InterfaceGeometry, points: np.ndarray) -> np.ndarray:
    """Normalized level-set gradients at (N, d) points"""
    grad = geom.grad_phi(points)
    norm = np.linalg.norm(grad, axis=1)
    if np.any(norm < MIN_GRADIENT):
        bad = np.atleast_2d(points)[np.argmin(norm)]
        raise DegenerateGradientError(
            f"level-set gradient vanishes near {bad} on '{geom.name}'"
        )
    return grad / norm[:, None]


def unit_normal(geom: InterfaceGeometry, x) -> np.ndarray:
    """
    Outward unit normal (pointing from Omega- to Omega+) at a point on the interface

    Args:
        geom: Interface geometry
        x: Point with |phi(x)| <= ON_INTERFACE_TOL

    Returns:
        grad(phi) / |grad(phi)|
    """
    normal = unit_normals(geom, x)[0]
    level = float(geom.phi(np.atleast_2d(np.asarray(x, dtype=float)))[0])
    if abs(level) > ON_INTERFACE_TOL:
        raise ValueError(f"point {x} is not on '{geom.name}' (phi = {level:.2e})")
    return normal


def tangents_from_normals(normals: np.ndarray) -> np.ndarray:
    """2D unit tangent (-n_y, n_x), counterclockwise along the curve"""
    return np.column_stack([-normals[:, 1], normals[:, 0]])


def curve_tangents(geom: InterfaceGeometry, params: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """
    2D unit tangents X'(s) / |X'(s)| in the direction of the parameterization

    Falls back to the rotated normal when the curve has no derivative.
    """
    if geom.parametric_derivative is None:
        return tangents_from_normals(normals)
    velocity = geom.parametric_derivative(params)
    speed = np.linalg.norm(velocity, axis=1)
    if np.any(speed < MIN_GRADIENT):
        raise DegenerateGradientError(f"curve '{geom.name}' has a stationary point")
    return velocity / speed[:, None]


def sample_interface(geom: InterfaceGeometry, M: int, seed: int) -> InterfaceSampleSet:
    """
    Draw M random training points on the interface

    Parameter values are i.i.d. uniform over the parameter domain, so the result depends
    only on (geom, M, seed).

    Args:
        geom: Geometry with a parameterization
        M: Number of samples
        seed: Random seed

    Returns:
        InterfaceSampleSet with points, normals, tangents (2D) and parameters
    """
    if M < 1:
        raise ValueError(f"need at least one sample, got M={M}")
    if geom.parametric is None:
        raise UnsupportedGeometryError(f"geometry '{geom.name}' has no parameterization")

    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in geom.param_domain])
    highs = np.array([hi for _, hi in geom.param_domain])
    params = rng.uniform(lows, highs, size=(M, len(geom.param_domain)))
    if params.shape[1] == 1:
        params = params[:, 0]

    points = geom.parametric(params)
    normals = unit_normals(geom, points)
    tangents = curve_tangents(geom, params, normals) if geom.dim == 2 else None
    logger.debug(f"sampled {M} points on '{geom.name}' (seed {seed})")
    return InterfaceSampleSet(points, normals, tangents, params)


# Catalog ---------------------------------------------------------------------------

def ellipse(a: float, b: float, name: Optional[str] = None) -> InterfaceGeometry:
    """(x/a)^2 + (y/b)^2 = 1, parameterized counterclockwise by s in [0, 2pi)"""

    def level_set(p):
        return (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2 - 1.0

    def gradient(p):
        return np.column_stack([2 * p[:, 0] / a ** 2, 2 * p[:, 1] / b ** 2])

    def parametric(s):
        return np.column_stack([a * np.cos(s), b * np.sin(s)])

    def derivative(s):
        return np.column_stack([-a * np.sin(s), b * np.cos(s)])

    def parameter_of(p):
        return np.mod(np.arctan2(p[:, 1] / b, p[:, 0] / a), TWO_PI)

    return InterfaceGeometry(
        name or f"ellipse({a:g},{b:g})", 2, level_set, gradient,
        parametric, ((0.0, TWO_PI),), parameter_of, derivative,
    )


def circle(radius: float = 1.0) -> InterfaceGeometry:
    """Circle of given radius centered at the origin"""
    return ellipse(radius, radius, name=f"circle({radius:g})")


def superellipse(a: float, b: float) -> InterfaceGeometry:
    """(x/a)^4 + (y/b)^4 = 1, with X(s) = (a sgn(cos s)|cos s|^1/2, b sgn(sin s)|sin s|^1/2)"""

    def level_set(p):
        return (p[:, 0] / a) ** 4 + (p[:, 1] / b) ** 4 - 1.0

    def gradient(p):
        return np.column_stack([4 * p[:, 0] ** 3 / a ** 4, 4 * p[:, 1] ** 3 / b ** 4])

    def parametric(s):
        c, sn = np.cos(s), np.sin(s)
        return np.column_stack([
            a * np.sign(c) * np.sqrt(np.abs(c)),
            b * np.sign(sn) * np.sqrt(np.abs(sn)),
        ])

    def parameter_of(p):
        u, v = p[:, 0] / a, p[:, 1] / b
        return np.mod(np.arctan2(np.sign(v) * v ** 2, np.sign(u) * u ** 2), TWO_PI)

    return InterfaceGeometry(
        f"superellipse({a:g},{b:g})", 2, level_set, gradient,
        parametric, ((0.0, TWO_PI),), parameter_of,
    )


def ellipsoid(a: float, b: float, c: float) -> InterfaceGeometry:
    """(x/a)^2 + (y/b)^2 + (z/c)^2 = 1, parameterized by polar angle and azimuth"""

    def level_set(p):
        return (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2 + (p[:, 2] / c) ** 2 - 1.0

    def gradient(p):
        return np.column_stack([
            2 * p[:, 0] / a ** 2, 2 * p[:, 1] / b ** 2, 2 * p[:, 2] / c ** 2,
        ])

    def parametric(angles):
        theta, azim = angles[:, 0], angles[:, 1]
        return np.column_stack([
            a * np.sin(theta) * np.cos(azim),
            b * np.sin(theta) * np.sin(azim),
            c * np.cos(theta),
        ])

    def parameter_of(p):
        theta = np.arccos(np.clip(p[:, 2] / c, -1.0, 1.0))
        azim = np.mod(np.arctan2(p[:, 1] / b, p[:, 0] / a), TWO_PI)
        return np.column_stack([theta, azim])

    return InterfaceGeometry(
        f"ellipsoid({a:g},{b:g},{c:g})", 3, level_set, gradient,
        parametric, ((0.0, np.pi), (0.0, TWO_PI)), parameter_of,
    )


_CATALOG = {
    "ellipse": (ellipse, 2),
    "superellipse": (superellipse, 2),
    "circle": (circle, 1),
    "ellipsoid": (ellipsoid, 3),
}


def catalog(name: str, *params: float) -> InterfaceGeometry:
    """
    Build a named interface

    Args:
        name: ellipse, superellipse, circle or ellipsoid
        params: Semi-axes (radius for the circle)
    """
    if name not in _CATALOG:
        raise UnsupportedGeometryError(
            f"unknown geometry '{name}', expected one of {sorted(_CATALOG)}"
        )
    factory, n_params = _CATALOG[name]
    if len(params) != n_params:
        raise UnsupportedGeometryError(
            f"geometry '{name}' takes {n_params} parameters, got {len(params)}"
        )
    return factory(*params)


def geometry_from_expressions(
    level_set: str,
    dim: int,
    parametric: Optional[Sequence[str]] = None,
    param_domain: Tuple[float, float] = (0.0, TWO_PI),
    name: str = "custom",
) -> InterfaceGeometry:
    """
    User-defined interface from expression strings

    Args:
        level_set: phi(x, y[, z]), negative inside
        dim: 2 or 3
        parametric: Optional 2D curve components X(s), Y(s) as strings in s
        param_domain: Range of s
        name: Label used in logs and tables

    Returns:
        InterfaceGeometry with a symbolically differentiated gradient
    """
    phi_expr = parse_expression(level_set, dim)
    syms = coords(dim)
    phi_fn = sp.lambdify(syms, phi_expr, "numpy")
    grad_fns = [sp.lambdify(syms, sp.diff(phi_expr, c), "numpy") for c in syms]

    def level_set_fn(p):
        return np.broadcast_to(phi_fn(*p.T), (p.shape[0],)).astype(float)

    def gradient_fn(p):
        return np.column_stack([
            np.broadcast_to(g(*p.T), (p.shape[0],)).astype(float) for g in grad_fns
        ])

    parametric_fn = derivative_fn = None
    domain: Tuple[Tuple[float, float], ...] = ()
    if parametric is not None:
        if dim != 2 or len(parametric) != 2:
            raise UnsupportedGeometryError("parametric expressions are supported for 2D curves only")
        comps = [parse_expression(text, 0, allow_s=True) for text in parametric]
        comp_fns = [sp.lambdify(S, e, "numpy") for e in comps]
        dcomp_fns = [sp.lambdify(S, sp.diff(e, S), "numpy") for e in comps]

        def parametric_fn(s):
            s = np.asarray(s, dtype=float)
            return np.column_stack([np.broadcast_to(f(s), s.shape) for f in comp_fns])

        def derivative_fn(s):
            s = np.asarray(s, dtype=float)
            return np.column_stack([np.broadcast_to(f(s), s.shape) for f in dcomp_fns])

        domain = (tuple(param_domain),)

    return InterfaceGeometry(
        name, dim, level_set_fn, gradient_fn, parametric_fn, domain,
        None, derivative_fn,
    )
