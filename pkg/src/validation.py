"""
Oracle checks that do not depend on training quality

Each check returns a Check(name, value, tolerance); run_all collects them into a
DataFrame for the `validate` command.
"""
from dataclasses import dataclass
from typing import Callable, List
import logging

import numpy as np
import pandas as pd

from .config import LMConfig, NetConfig
from .fast_poisson import (
    CELL,
    NODE,
    GridField,
    GridSpec,
    apply_laplacian,
    solve_dirichlet,
    solve_dirichlet_staggered,
    solve_neumann_cell,
    wall_values,
)
from .geometry import sample_interface
from .hybrid_solver import HybridSolver, boundary_error
from .problems import example1
from .shallow_net import ShallowNet
from .stokes import MACLayout, divergence, manufactured_stokes_example, pressure_jump_data

logger = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


def _linear(points: np.ndarray) -> np.ndarray:
    return 1.0 + 2.0 * points[:, 0] - 3.0 * points[:, 1]


# Fast Poisson ------------------------------------------------------------------------

def solver_round_trips(n: int = 64, seed: int = 0) -> List[Check]:
    """Solve with random data, apply the Laplacian, compare with the rhs"""
    rng = np.random.default_rng(seed)
    checks = []

    spec = GridSpec.square(-1.0, 1.0, n, 2, NODE)
    rhs = rng.standard_normal(spec.shape)
    boundary = rng.standard_normal(spec.shape)
    w = solve_dirichlet(spec, rhs, boundary)
    residual = np.max(np.abs(apply_laplacian(w).values[spec.interior] - rhs[spec.interior]))
    checks.append(Check("dirichlet round trip", residual, 1e-10 * max(1.0, np.abs(rhs).max())))

    for name, alignment in (("staggered x-node", (NODE, CELL)), ("staggered y-node", (CELL, NODE))):
        spec = GridSpec(((-2.0, 2.0), (-2.0, 2.0)), n, alignment)
        rhs = rng.standard_normal(spec.shape)
        walls = {(a, s): rng.standard_normal(spec.face_shape(a)) for a in (0, 1) for s in (0, 1)}
        w = solve_dirichlet_staggered(spec, rhs, walls)
        lap = apply_laplacian(w, walls).values
        residual = np.max(np.abs(lap[spec.interior] - rhs[spec.interior]))
        checks.append(Check(f"{name} round trip", residual, 1e-10 * max(1.0, np.abs(rhs).max())))

    spec = GridSpec.square(-2.0, 2.0, n, 2, CELL)
    rhs = rng.standard_normal(spec.shape)
    flux = {(a, s): rng.standard_normal(spec.face_shape(a)) for a in (0, 1) for s in (0, 1)}
    w, defect = solve_neumann_cell(spec, rhs, flux)
    lap = apply_laplacian(w, flux).values
    residual = np.max(np.abs(lap - (rhs - defect / spec.volume)))
    checks.append(Check("neumann round trip", residual, 1e-10 * max(1.0, np.abs(rhs).max())))
    return checks


def linear_exactness(n: int = 32) -> List[Check]:
    """Every solver and the MAC divergence reproduce linear functions exactly"""
    checks = []
    spec = GridSpec.square(-1.0, 1.0, n, 2, NODE)
    exact = GridField.from_function(spec, _linear)
    w = solve_dirichlet(spec, np.zeros(spec.shape), exact)
    checks.append(Check("dirichlet linear", np.abs(w.values - exact.values).max(), 1e-11))

    for alignment in ((NODE, CELL), (CELL, NODE)):
        spec = GridSpec(((-2.0, 2.0), (-2.0, 2.0)), n, alignment)
        exact = GridField.from_function(spec, _linear)
        w = solve_dirichlet_staggered(spec, np.zeros(spec.shape), wall_values(spec, _linear))
        checks.append(Check(f"staggered {alignment} linear", np.abs(w.values - exact.values).max(), 1e-11))

    spec = GridSpec.square(-2.0, 2.0, n, 2, CELL)
    slopes = {0: 2.0, 1: -3.0}
    flux = {(a, s): np.full(spec.face_shape(a), slopes[a] * (1.0 if s else -1.0))
            for a in (0, 1) for s in (0, 1)}
    w, _ = solve_neumann_cell(spec, np.zeros(spec.shape), flux)
    exact = GridField.from_function(spec, _linear).values
    exact = exact - exact.mean()
    checks.append(Check("neumann linear", np.abs(w.values - exact).max(), 1e-11))

    layout = MACLayout(((-2.0, 2.0), (-2.0, 2.0)), n)
    u1 = GridField.from_function(layout.u1, lambda p: p[:, 0])
    u2 = GridField.from_function(layout.u2, lambda p: np.zeros(p.shape[0]))
    checks.append(Check("MAC divergence linear", np.abs(divergence(u1, u2, layout).values - 1.0).max(), 1e-11))
    return checks


# Shallow network ---------------------------------------------------------------------

def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def net_derivative_checks(instances: int = 100, seed: int = 0) -> List[Check]:
    """Closed-form derivatives and Jacobians against central differences"""
    rng = np.random.default_rng(seed)
    worst_grad = worst_lap = worst_jac = 0.0
    for i in range(instances):
        d = 2 if i % 2 == 0 else 3
        m, k = 6, 1 + i % 3
        net = ShallowNet.from_parameters(d, m, k, rng.uniform(-1, 1, size=m * d + m + k * m + k))
        x = rng.uniform(-1, 1, size=d)
        normal = rng.standard_normal(d)
        normal /= np.linalg.norm(normal)
        _, grad, lap = net.spatial_derivatives(x)

        step = 1e-5
        fd_grad = np.column_stack([
            (net.eval(x + step * e) - net.eval(x - step * e)) / (2 * step) for e in np.eye(d)
        ])
        worst_grad = max(worst_grad, _relative(grad, fd_grad))

        step = 1e-4
        fd_lap = sum(
            (net.eval(x + step * e) - 2 * net.eval(x) + net.eval(x - step * e)) / step ** 2
            for e in np.eye(d)
        )
        worst_lap = max(worst_lap, _relative(lap, fd_lap))

        def quantities(p):
            trial = net.with_parameters(p)
            v, g, l = trial.spatial_derivatives(x)
            return np.stack([v, g @ normal, l], axis=-1)  # (k, 3)

        J = net.residual_jacobian(x[None, :], normal[None, :])[0]  # (k, 3, P)
        p0 = net.parameters()
        step = 1e-6
        fd = np.stack([
            (quantities(p0 + step * e) - quantities(p0 - step * e)) / (2 * step)
            for e in np.eye(p0.size)
        ], axis=-1)
        worst_jac = max(worst_jac, _relative(J, fd))

    return [
        Check("net gradient vs FD", worst_grad, 1e-5),
        Check("net laplacian vs FD", worst_lap, 1e-5),
        Check("net jacobian vs FD", worst_jac, 1e-5),
    ]


# Stokes ------------------------------------------------------------------------------

def stokes_consistency(n_samples: int = 100, seed: int = 0) -> List[Check]:
    """Jump conditions of the manufactured Stokes example hold at the interface"""
    problem = manufactured_stokes_example()
    samples = sample_interface(problem.geometry, n_samples, seed)
    pts, normals, tangents, s = samples.points, samples.normals, samples.tangents, samples.params
    ex = problem.exact

    p_jump = ex["p"].u_plus(pts) - ex["p"].u_minus(pts)
    u_jump = max(np.abs(ex[c].u_plus(pts) - ex[c].u_minus(pts)).max() for c in ("u1", "u2"))
    dn_jump = np.column_stack([
        np.sum((_grad(ex[c].grad_plus, pts) - _grad(ex[c].grad_minus, pts)) * normals, axis=1)
        for c in ("u1", "u2")
    ])
    expected_dn = -problem.F_tau(s)[:, None] * tangents / problem.mu

    _, rho_p = pressure_jump_data(problem, samples)
    dpn_jump = np.sum((_grad(ex["p"].grad_plus, pts) - _grad(ex["p"].grad_minus, pts)) * normals, axis=1)

    return [
        Check("[[p]] = F_n", np.abs(p_jump - problem.F_n(s)).max(), 1e-8),
        Check("[[u]] = 0", u_jump, 1e-8),
        Check("[[du/dn]] = -F_tau tau / mu", np.abs(dn_jump - expected_dn).max(), 1e-8),
        Check("[[dp/dn]] = dF_tau/ds + [[g]].n", np.abs(dpn_jump - rho_p).max(), 1e-8),
        Check("tangential jump identity", tangential_identity(n_samples, seed), 1e-6),
    ]


def _grad(fields, points: np.ndarray) -> np.ndarray:
    return np.column_stack([f(points) for f in fields])


def tangential_identity(n_samples: int = 100, seed: int = 0, step: float = 1e-5) -> float:
    """max |[[grad q]].tau - d/ds [[q]](X(s))| for the manufactured pressure"""
    problem = manufactured_stokes_example()
    geom = problem.geometry
    q = problem.exact["p"]
    samples = sample_interface(geom, n_samples, seed)
    s = samples.params

    def jump_along(params):
        pts = geom.parametric(params)
        return q.u_plus(pts) - q.u_minus(pts)

    speed = problem.arclength_speed(s)
    fd = (jump_along(s + step) - jump_along(s - step)) / (2 * step) / speed
    grad_jump = _grad(q.grad_plus, samples.points) - _grad(q.grad_minus, samples.points)
    return float(np.abs(np.sum(grad_jump * samples.tangents, axis=1) - fd).max())


# Hybrid boundary ---------------------------------------------------------------------

def boundary_exactness(n: int = 32, max_epochs: int = 20) -> List[Check]:
    """u = u_b on the boundary whatever the training quality"""
    problem = example1()
    solver = HybridSolver(problem, NetConfig(width=10, n_samples=40), LMConfig(max_epochs=max_epochs))
    sol = solver.solve_on(n)
    return [Check("hybrid boundary = u_b", boundary_error(sol, problem), 1e-12)]


SUITES: List[Callable[[], List[Check]]] = [
    solver_round_trips,
    linear_exactness,
    net_derivative_checks,
    stokes_consistency,
    boundary_exactness,
]


def run_all() -> pd.DataFrame:
    """Run every suite; columns check, value, tolerance, passed"""
    rows = []
    for suite in SUITES:
        logger.info(f"running {suite.__name__}")
        for check in suite():
            rows.append({
                "check": check.name,
                "value": check.value,
                "tolerance": check.tolerance,
                "passed": check.passed,
            })
    return pd.DataFrame(rows)
