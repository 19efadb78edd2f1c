"""
2D Stokes flow with interfacial singular forces on a MAC grid

The delta-function force F = F_tau tau + F_n n is replaced by jump conditions. The
pressure solves  Laplacian p = div g  with [[p]] = F_n and
[[dp/dn]] = dF_tau/ds + [[g]].n, then each velocity component solves
Laplacian u_i = (d_i p - g_i) / mu  with [[u]] = 0 and [[du/dn]] = -F_tau tau / mu.
One three-output network (u1, u2, p) carries all singular parts.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple
import logging

import numpy as np
import sympy as sp

from .config import LMConfig, NetConfig
from .errors import UnsupportedGeometryError
from .expressions import S, X, Y, ClosedFormField, ScalarField
from .fast_poisson import (
    CELL,
    NODE,
    GridField,
    GridSpec,
    Walls,
    solve_dirichlet_staggered,
    solve_neumann_cell,
    wall_values,
)
from .geometry import InterfaceGeometry, InterfaceSampleSet, circle, inside_mask, sample_interface
from .problems import ExactSolution, _piecewise
from .shallow_net import ShallowNet
from .training import JumpDataset, TrainReport, train_network

logger = logging.getLogger(__name__)

U1, U2, P = 0, 1, 2  # network output channels
ParamFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(eq=False)
class StokesProblem:
    """Viscosity, forces and boundary data of an interfacial Stokes problem"""

    name: str
    mu: float
    geometry: InterfaceGeometry
    bounds: Tuple[Tuple[float, float], ...]
    F_tau: ParamFunction        # of the curve parameter
    F_n: ParamFunction
    dF_tau_ds: ParamFunction    # derivatives in the curve parameter
    dF_n_ds: ParamFunction
    g_minus: List[ScalarField]
    g_plus: List[ScalarField]
    div_g_minus: ScalarField
    div_g_plus: ScalarField
    u_b: List[Callable[[np.ndarray], np.ndarray]]
    grad_p_boundary: Optional[List[Callable[[np.ndarray], np.ndarray]]] = None
    exact: Optional[Dict[str, ExactSolution]] = None  # keys u1, u2, p

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"viscosity must be positive, got {self.mu}")
        if self.geometry.dim != 2:
            raise UnsupportedGeometryError("Stokes problems are two-dimensional")
        if self.geometry.parametric_derivative is None:
            raise UnsupportedGeometryError("interface forces need a parameterized curve")

    def g(self, component: int, points: np.ndarray, inside: np.ndarray) -> np.ndarray:
        return _piecewise(self.g_minus[component], self.g_plus[component], points, inside)

    def div_g(self, points: np.ndarray, inside: np.ndarray) -> np.ndarray:
        return _piecewise(self.div_g_minus, self.div_g_plus, points, inside)

    def g_jump(self, points: np.ndarray) -> np.ndarray:
        """[[g]] = g+ - g- at interface points, (M, 2)"""
        return np.column_stack([
            self.g_plus[c](points) - self.g_minus[c](points) for c in (0, 1)
        ])

    def arclength_speed(self, params: np.ndarray) -> np.ndarray:
        """|X'(s)|, converts parameter derivatives to arclength derivatives"""
        return np.linalg.norm(self.geometry.parametric_derivative(params), axis=1)


@dataclass(frozen=True)
class MACLayout:
    """Staggered grids: p at cell centers, u1 on vertical edges, u2 on horizontal edges"""

    bounds: Tuple[Tuple[float, float], ...]
    n: int

    @property
    def pressure(self) -> GridSpec:
        return GridSpec(self.bounds, self.n, (CELL, CELL))

    @property
    def u1(self) -> GridSpec:
        return GridSpec(self.bounds, self.n, (NODE, CELL))

    @property
    def u2(self) -> GridSpec:
        return GridSpec(self.bounds, self.n, (CELL, NODE))

    def velocity(self, component: int) -> GridSpec:
        return self.u1 if component == U1 else self.u2

    @property
    def h(self) -> float:
        return self.pressure.h


@dataclass(eq=False)
class PressureSolution:
    p: GridField      # cell centers
    w: GridField      # regular part
    v: GridField      # singular part
    dpdx: GridField   # on the u1 grid
    dpdy: GridField   # on the u2 grid
    defect: float

    def gradient(self, component: int) -> GridField:
        return self.dpdx if component == U1 else self.dpdy


@dataclass(eq=False)
class StokesSolution:
    layout: MACLayout
    net: ShallowNet
    report: TrainReport
    pressure: PressureSolution
    u1: GridField
    u2: GridField
    div: GridField


# Jump data ---------------------------------------------------------------------------

def pressure_jump_data(problem: StokesProblem, samples: InterfaceSampleSet) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pressure jumps at the samples

    Returns:
        (gamma_p, rho_p) with gamma_p = F_n and rho_p = dF_tau/ds + [[g]].n,
        s being arclength
    """
    s = samples.params
    gamma_p = problem.F_n(s)
    rho_p = (problem.dF_tau_ds(s) / problem.arclength_speed(s)
             + np.sum(problem.g_jump(samples.points) * samples.normals, axis=1))
    return gamma_p, rho_p


def velocity_jump_data(problem: StokesProblem, samples: InterfaceSampleSet,
                       rho_p: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Velocity jumps per component, each (M, 2)

    [[grad p]] comes from  d/ds [[p]] tau + [[dp/dn]] n  with d/ds [[p]] = dF_n/ds.

    Returns:
        (gamma_u = 0, rho_u = -F_tau tau / mu, [[rhs]] = ([[grad p]] - [[g]]) / mu)
    """
    s = samples.params
    if rho_p is None:
        _, rho_p = pressure_jump_data(problem, samples)
    tau, normal = samples.tangents, samples.normals
    gamma_u = np.zeros((len(samples), 2))
    rho_u = -problem.F_tau(s)[:, None] * tau / problem.mu
    dpn_ds = problem.dF_n_ds(s) / problem.arclength_speed(s)
    grad_p_jump = dpn_ds[:, None] * tau + rho_p[:, None] * normal
    rhs_jump = (grad_p_jump - problem.g_jump(samples.points)) / problem.mu
    return gamma_u, rho_u, rhs_jump


def stokes_dataset(problem: StokesProblem, samples: InterfaceSampleSet) -> JumpDataset:
    """Three-channel dataset ordered (u1, u2, p)"""
    gamma_p, rho_p = pressure_jump_data(problem, samples)
    gamma_u, rho_u, rhs_u = velocity_jump_data(problem, samples, rho_p)
    div_jump = problem.div_g_plus(samples.points) - problem.div_g_minus(samples.points)
    return JumpDataset(
        samples,
        np.column_stack([gamma_u, gamma_p]),
        np.column_stack([rho_u, rho_p]),
        np.column_stack([rhs_u, div_jump]),
    )


# Pressure ----------------------------------------------------------------------------

def pressure_poisson_rhs(problem: StokesProblem, layout: MACLayout) -> Tuple[GridField, Walls]:
    """
    div g per cell (by region) and the outward pressure flux on the walls

    The flux is the exact dp/dn of the supplied boundary pressure gradient.
    """
    if problem.grad_p_boundary is None:
        raise ValueError(f"problem '{problem.name}' has no boundary pressure gradient")
    spec = layout.pressure
    points = spec.points()
    inside = inside_mask(problem.geometry, points)
    rhs = GridField(spec, problem.div_g(points, inside).reshape(spec.shape))

    flux: Walls = {}
    for axis in (0, 1):
        for side, sign in ((0, -1.0), (1, 1.0)):
            face = spec.face_points(axis, side)
            flux[(axis, side)] = sign * problem.grad_p_boundary[axis](face).reshape(spec.face_shape(axis))
    return rhs, flux


def _singular(net: ShallowNet, points: np.ndarray, inside: np.ndarray, channel: int):
    """V, grad V and Laplacian V of one channel at inside points, zero elsewhere"""
    n_pts = points.shape[0]
    value, grad, lap = np.zeros(n_pts), np.zeros((n_pts, 2)), np.zeros(n_pts)
    if inside.any():
        val_in, grad_in, lap_in = net.spatial_derivatives(points[inside])
        value[inside] = val_in[:, channel]
        grad[inside] = grad_in[:, channel, :]
        lap[inside] = lap_in[:, channel]
    return value, grad, lap


def solve_pressure(problem: StokesProblem, layout: MACLayout, net: ShallowNet) -> PressureSolution:
    """
    Pressure at cell centers and its gradient at the velocity nodes

    The regular part comes from the Neumann solver; the constant is matched to the mean
    of the exact pressure when one is known. Edge gradients are the two-cell difference
    of the regular part plus the analytic network gradient on inside edges; boundary
    edges take the prescribed normal derivative.
    """
    spec = layout.pressure
    h = spec.h
    points = spec.points()
    inside = inside_mask(problem.geometry, points)
    v_vals, _, v_lap = _singular(net, points, inside, P)

    rhs, flux = pressure_poisson_rhs(problem, layout)
    rhs_values = rhs.values.ravel() - v_lap
    w, defect = solve_neumann_cell(spec, rhs_values.reshape(spec.shape), flux)

    p_vals = v_vals + w.values.ravel()
    if problem.exact is not None:
        shift = np.mean(problem.exact["p"].u(points, inside)) - np.mean(p_vals)
        w = GridField(spec, w.values + shift)
        p_vals = p_vals + shift

    wv = w.values
    gradients = []
    for axis in (0, 1):
        edge_spec = layout.velocity(axis)
        edge_points = edge_spec.points()
        edge_inside = inside_mask(problem.geometry, edge_points)
        _, v_grad, _ = _singular(net, edge_points, edge_inside, P)

        values = np.zeros(edge_spec.shape)
        lower = [slice(None), slice(None)]
        upper = [slice(None), slice(None)]
        lower[axis], upper[axis] = slice(None, -1), slice(1, None)
        interior = edge_spec.interior
        values[interior] = (wv[tuple(upper)] - wv[tuple(lower)]) / h
        first = [slice(None), slice(None)]
        last = [slice(None), slice(None)]
        first[axis], last[axis] = 0, -1
        values[tuple(first)] = -flux[(axis, 0)]
        values[tuple(last)] = flux[(axis, 1)]
        values += v_grad[:, axis].reshape(edge_spec.shape)
        gradients.append(GridField(edge_spec, values))

    v = GridField(spec, v_vals.reshape(spec.shape))
    p = GridField(spec, p_vals.reshape(spec.shape))
    return PressureSolution(p, w, v, gradients[0], gradients[1], defect)


# Velocity ----------------------------------------------------------------------------

def solve_velocity(problem: StokesProblem, layout: MACLayout, net: ShallowNet,
                   pressure: PressureSolution) -> Tuple[GridField, GridField]:
    """
    Both velocity components on their staggered grids

    Returns:
        (u1, u2), each equal to V_i on inside nodes plus the regular part
    """
    components = []
    for c in (U1, U2):
        spec = layout.velocity(c)
        points = spec.points()
        inside = inside_mask(problem.geometry, points)
        v_vals, _, v_lap = _singular(net, points, inside, c)
        rhs = (pressure.gradient(c).values.ravel() - problem.g(c, points, inside)) / problem.mu - v_lap
        walls = wall_values(spec, problem.u_b[c])
        w = solve_dirichlet_staggered(spec, rhs.reshape(spec.shape), walls)
        components.append(GridField(spec, w.values + v_vals.reshape(spec.shape)))
    return components[0], components[1]


def divergence(u1: GridField, u2: GridField, layout: MACLayout) -> GridField:
    """Discrete divergence at cell centers"""
    h = layout.h
    div = (u1.values[1:, :] - u1.values[:-1, :]) / h + (u2.values[:, 1:] - u2.values[:, :-1]) / h
    return GridField(layout.pressure, div)


def hybrid_divergence(u1: GridField, u2: GridField, layout: MACLayout, net: ShallowNet,
                      geom: InterfaceGeometry) -> GridField:
    """
    div u with the singular part split off

    The MAC difference is applied to the regular parts w_i = u_i - v_i only and the
    analytic divergence of the network is added at inside cells; differencing u itself
    is O(1) wrong in cells cut by the interface, where the velocity has a kink.
    """
    regular = []
    for c, field in ((U1, u1), (U2, u2)):
        spec = field.spec
        points = spec.points()
        v_vals, _, _ = _singular(net, points, inside_mask(geom, points), c)
        regular.append(GridField(spec, field.values - v_vals.reshape(spec.shape)))
    div = divergence(regular[0], regular[1], layout).values.ravel()

    points = layout.pressure.points()
    inside = inside_mask(geom, points)
    if inside.any():
        grad = net.gradient(points[inside])
        div[inside] += grad[:, U1, 0] + grad[:, U2, 1]
    return GridField(layout.pressure, div.reshape(layout.pressure.shape))


# Manufactured example ------------------------------------------------------------------

# (coefficient, a, b, trig) for r^a trig(b theta), inside and outside the unit circle
_VELOCITY_TERMS = {
    "u1": {
        "minus": ((sp.Rational(1, 8), 2, 2, "cos"), (sp.Rational(1, 16), 4, 4, "cos"),
                  (sp.Rational(-1, 4), 4, 2, "cos")),
        "plus": ((sp.Rational(-1, 8), -2, 2, "cos"), (sp.Rational(5, 16), -4, 4, "cos"),
                 (sp.Rational(-1, 4), -2, 4, "cos")),
    },
    "u2": {
        "minus": ((sp.Rational(-1, 8), 2, 2, "sin"), (sp.Rational(1, 16), 4, 4, "sin"),
                  (sp.Rational(1, 4), 4, 2, "sin")),
        "plus": ((sp.Rational(1, 8), -2, 2, "sin"), (sp.Rational(5, 16), -4, 4, "sin"),
                 (sp.Rational(-1, 4), -2, 4, "sin")),
    },
}


def _harmonic(b: int, trig: str) -> sp.Expr:
    """Re or Im of (x + i y)^b, i.e. r^b cos(b theta) or r^b sin(b theta)"""
    z = sp.expand((X + sp.I * Y) ** b)
    return sp.expand(sp.re(z) if trig == "cos" else sp.im(z))


def _polar(a: int, b: int, trig: str) -> sp.Expr:
    """r^a cos(b theta) or r^a sin(b theta) as a rational function of x, y"""
    return _harmonic(b, trig) * (X ** 2 + Y ** 2) ** sp.Rational(a - b, 2)


def _polar_matched(a: int, b: int, trig: str) -> sp.Expr:
    """
    Polynomial equal to r^a trig(b theta) up to second derivatives on r = 1

    The radial factor rho^c (rho = r^2) is replaced by its second-order Taylor
    polynomial about rho = 1.
    """
    c = sp.Rational(a - b, 2)
    d = X ** 2 + Y ** 2 - 1
    return sp.expand(_harmonic(b, trig) * (1 + c * d + c * (c - 1) / 2 * d ** 2))


def _combine(terms, basis) -> sp.Expr:
    return sp.Add(*[coef * basis(a, b, trig) for coef, a, b, trig in terms])


def _stokes_exact_expressions():
    velocity = tuple(
        (_combine(_VELOCITY_TERMS[key]["minus"], _polar), _combine(_VELOCITY_TERMS[key]["plus"], _polar))
        for key in ("u1", "u2")
    )
    p_out = sp.cos(sp.pi * X) * sp.cos(sp.pi * Y)
    p_in = X ** 3 + p_out
    return velocity[0], velocity[1], (p_in, p_out)


def manufactured_singular_part() -> ClosedFormField:
    """
    Smooth closed form (u1, u2, p) that satisfies every jump of the manufactured example

    Velocity channels are u- minus a polynomial that matches u+ to second order on the
    circle, so they stay smooth at the origin where u+ is singular; the pressure channel
    is p- - p+ = x^3.
    """
    _, _, (p_in, p_out) = _stokes_exact_expressions()
    channels = [
        _combine(terms["minus"], _polar) - _combine(terms["plus"], _polar_matched)
        for terms in (_VELOCITY_TERMS["u1"], _VELOCITY_TERMS["u2"])
    ]
    return ClosedFormField(channels + [p_in - p_out], 2)


def manufactured_stokes_example(mu: float = 1.0) -> StokesProblem:
    """
    Unit circle in [-2, 2]^2 with F = 2 mu sin(3s) tau - cos^3(s) n

    g = grad p - mu Laplacian u is derived symbolically on each side; boundary data and
    the pressure flux come from the outer closed forms.
    """
    (u1m, u1p), (u2m, u2p), (pm, pp) = _stokes_exact_expressions()
    mu_s = sp.nsimplify(mu)

    def lap(e):
        return sp.diff(e, X, 2) + sp.diff(e, Y, 2)

    g_exprs = {
        side: [sp.diff(p, X) - mu_s * lap(u1), sp.diff(p, Y) - mu_s * lap(u2)]
        for side, (u1, u2, p) in (("minus", (u1m, u2m, pm)), ("plus", (u1p, u2p, pp)))
    }
    div_g = {side: sp.diff(g[0], X) + sp.diff(g[1], Y) for side, g in g_exprs.items()}

    F_tau = 2 * mu_s * sp.sin(3 * S)  # [[du/dn]] = -F_tau tau / mu for the fixed velocity
    F_n = -sp.cos(S) ** 3

    def param_fn(expr):
        fn = sp.lambdify(S, expr, "numpy")
        return lambda s: np.broadcast_to(np.asarray(fn(np.asarray(s, dtype=float)), dtype=float),
                                         np.shape(s)).copy()

    u1_plus, u2_plus, p_plus = ScalarField(u1p, 2), ScalarField(u2p, 2), ScalarField(pp, 2)
    exact = {
        "u1": ExactSolution(ScalarField(u1m, 2), u1_plus),
        "u2": ExactSolution(ScalarField(u2m, 2), u2_plus),
        "p": ExactSolution(ScalarField(pm, 2), p_plus),
    }
    return StokesProblem(
        name="stokes",
        mu=float(mu),
        geometry=circle(1.0),
        bounds=((-2.0, 2.0), (-2.0, 2.0)),
        F_tau=param_fn(F_tau),
        F_n=param_fn(F_n),
        dF_tau_ds=param_fn(sp.diff(F_tau, S)),
        dF_n_ds=param_fn(sp.diff(F_n, S)),
        g_minus=[ScalarField(e, 2) for e in g_exprs["minus"]],
        g_plus=[ScalarField(e, 2) for e in g_exprs["plus"]],
        div_g_minus=ScalarField(div_g["minus"], 2),
        div_g_plus=ScalarField(div_g["plus"], 2),
        u_b=[u1_plus, u2_plus],
        grad_p_boundary=p_plus.gradient(),
        exact=exact,
    )


# Errors and driver -------------------------------------------------------------------

def stokes_errors(sol: StokesSolution, problem: StokesProblem) -> Dict[str, float]:
    """
    Max-norm errors of u1, u2 (interior nodes), p and div u (all cells) and grad p
    (interior edges)
    """
    if problem.exact is None:
        raise ValueError(f"problem '{problem.name}' has no exact solution")
    layout = sol.layout
    errors = {}
    for key, field in (("u1", sol.u1), ("u2", sol.u2)):
        spec = field.spec
        points = spec.points()
        exact = problem.exact[key].u(points, inside_mask(problem.geometry, points)).reshape(spec.shape)
        errors[key] = float(np.max(np.abs(field.values - exact)[spec.interior]))

    spec = layout.pressure
    points = spec.points()
    exact_p = problem.exact["p"].u(points, inside_mask(problem.geometry, points))
    errors["p"] = float(np.max(np.abs(sol.pressure.p.values.ravel() - exact_p)))
    errors["divu"] = sol.div.max_abs()

    err_grad = 0.0
    for axis in (0, 1):
        field = sol.pressure.gradient(axis)
        spec = field.spec
        points = spec.points()
        exact = problem.exact["p"].grad(points, inside_mask(problem.geometry, points))[:, axis]
        diff = np.abs(field.values - exact.reshape(spec.shape))[spec.interior]
        err_grad = max(err_grad, float(np.max(diff)))
    errors["gradp"] = err_grad
    return errors


class StokesSolver:
    """Train the three-channel network once and solve on any MAC grid"""

    def __init__(self, problem: StokesProblem, net_config: NetConfig, lm_config: LMConfig,
                 net: Optional[ShallowNet] = None, report: Optional[TrainReport] = None):
        self.problem = problem
        self.net_config = net_config
        self.lm_config = lm_config
        self.net = net
        self.report = report

    def train(self, seed_offset: int = 0) -> TrainReport:
        net_cfg, lm_cfg = self.net_config, LMConfig(**self.lm_config.to_dict())
        lm_cfg.seed += seed_offset
        samples = sample_interface(self.problem.geometry, net_cfg.n_samples, net_cfg.seed + seed_offset)
        self.net, self.report = train_network(stokes_dataset(self.problem, samples), net_cfg.width, lm_cfg)
        logger.info(f"Stokes network: loss={self.report.final_loss:.3e} epochs={self.report.epochs_used}")
        return self.report

    def solve_on(self, n: int, retrain: bool = False) -> StokesSolution:
        if retrain:
            self.train(seed_offset=n)
        elif self.net is None:
            self.train()
        layout = MACLayout(self.problem.bounds, n)
        pressure = solve_pressure(self.problem, layout, self.net)
        u1, u2 = solve_velocity(self.problem, layout, self.net, pressure)
        logger.info(f"solved Stokes at n={n}")
        div = hybrid_divergence(u1, u2, layout, self.net, self.problem.geometry)
        return StokesSolution(layout, self.net, self.report, pressure, u1, u2, div)
