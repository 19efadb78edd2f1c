"""
Hybrid network / finite-difference solver for Poisson interface problems

Step 1 fits a shallow network V to the interface jumps. Step 2 solves the regular
problem  Laplacian w = f - Laplacian V (inside), f (outside),  w = u_b on the boundary,
with a fast direct solver. Step 3 recovers u = v + w where v = V inside and 0 outside.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np

from .config import LMConfig, NetConfig
from .errors import AlignmentError, NonNestedGridError
from .fast_poisson import NODE, GridField, GridSpec, solve_dirichlet
from .geometry import InterfaceGeometry, inside_mask, sample_interface
from .problems import PoissonInterfaceProblem
from .shallow_net import ShallowNet
from .training import TrainReport, constraint_residuals, train_network

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class HybridSolution:
    """u = v + w on one node-aligned grid"""

    spec: GridSpec
    net: ShallowNet
    w: GridField
    v: GridField
    u: GridField
    report: TrainReport
    inside: np.ndarray  # bool, grid shape


def _require_nodes(spec: GridSpec):
    if spec.cell_axes:
        raise AlignmentError("the hybrid Poisson solver works on node-aligned grids")


def build_singular_field(net: ShallowNet, spec: GridSpec, geom: InterfaceGeometry,
                         output: int = 0) -> GridField:
    """
    v = V at inside nodes, 0 at outside nodes

    Args:
        net: Trained network
        spec: Node-aligned grid
        geom: Interface geometry (phi = 0 counts as outside)
        output: Network output channel

    Returns:
        GridField of the singular part
    """
    _require_nodes(spec)
    points = spec.points()
    inside = inside_mask(geom, points)
    values = np.zeros(points.shape[0])
    if inside.any():
        values[inside] = net.eval(points[inside])[:, output]
    return GridField(spec, values.reshape(spec.shape))


def assemble_regular_rhs(problem: PoissonInterfaceProblem, net: ShallowNet,
                         spec: GridSpec) -> Tuple[GridField, GridField]:
    """
    Right-hand side and boundary data of the regular problem

    Returns:
        (rhs, boundary): rhs = f - Laplacian V inside and f outside, with the network
        Laplacian taken analytically; boundary = u_b at boundary nodes, 0 elsewhere
    """
    _require_nodes(spec)
    points = spec.points()
    inside = inside_mask(problem.geometry, points)
    rhs = problem.source(points, inside)
    if inside.any():
        rhs[inside] -= net.laplacian(points[inside])[:, 0]

    on_boundary = spec.boundary_mask().ravel()
    boundary = np.zeros(points.shape[0])
    boundary[on_boundary] = problem.u_b(points[on_boundary])
    return GridField(spec, rhs.reshape(spec.shape)), GridField(spec, boundary.reshape(spec.shape))


def train_for_problem(problem: PoissonInterfaceProblem, net_cfg: NetConfig,
                      lm_cfg: LMConfig) -> Tuple[ShallowNet, TrainReport]:
    """Step 1: sample the interface and fit the jump network"""
    net_cfg.validate()
    samples = sample_interface(problem.geometry, net_cfg.n_samples, net_cfg.seed)
    data = problem.jump_dataset(samples)
    net, report = train_network(data, net_cfg.width, lm_cfg)
    logger.info(
        f"trained m={net_cfg.width} on {net_cfg.n_samples} samples of '{problem.name}': "
        f"loss={report.final_loss:.3e} epochs={report.epochs_used}"
    )
    return net, report


def solve_with_net(problem: PoissonInterfaceProblem, net: ShallowNet, spec: GridSpec,
                   report: Optional[TrainReport] = None) -> HybridSolution:
    """Steps 2 and 3 for an already trained network"""
    _require_nodes(spec)
    inside = inside_mask(problem.geometry, spec.points()).reshape(spec.shape)
    v = build_singular_field(net, spec, problem.geometry)
    rhs, boundary = assemble_regular_rhs(problem, net, spec)
    w = solve_dirichlet(spec, rhs, boundary)
    u = GridField(spec, v.values + w.values)
    if report is None:
        report = TrainReport(float("nan"), 0, [], False)
    return HybridSolution(spec, net, w, v, u, report, inside)


def solve(problem: PoissonInterfaceProblem, net_cfg: NetConfig, lm_cfg: LMConfig,
          spec: GridSpec) -> HybridSolution:
    """
    Train, assemble, solve and sum on one grid

    A report with converged=False is kept on the solution; it never aborts the solve.
    """
    net, report = train_for_problem(problem, net_cfg, lm_cfg)
    return solve_with_net(problem, net, spec, report)


def gradient(sol: HybridSolution, geom: InterfaceGeometry) -> List[GridField]:
    """
    Gradient of u at interior nodes

    Central differences of w plus the analytic network gradient at inside nodes.
    Boundary entries of the returned fields are zero.
    """
    spec = sol.spec
    h = spec.h
    interior = spec.interior
    points = spec.points()
    inside = sol.inside.ravel()

    net_grad = np.zeros(points.shape)
    if inside.any():
        net_grad[inside] = sol.net.gradient(points[inside])[:, 0, :]
    net_grad = net_grad.reshape(spec.shape + (spec.dim,))

    fields = []
    for axis in range(spec.dim):
        forward = list(interior)
        backward = list(interior)
        forward[axis] = slice(2, None)
        backward[axis] = slice(None, -2)
        values = np.zeros(spec.shape)
        values[interior] = (sol.w.values[tuple(forward)] - sol.w.values[tuple(backward)]) / (2.0 * h)
        values[interior] += net_grad[interior + (axis,)]
        fields.append(GridField(spec, values))
    return fields


def error_report(sol: HybridSolution, problem: PoissonInterfaceProblem) -> Dict[str, float]:
    """
    Max-norm errors against the exact solution

    Returns:
        {'u': max over all nodes, 'gradu': max over interior nodes and components}
    """
    if problem.exact is None:
        raise ValueError(f"problem '{problem.name}' has no exact solution, use successive_error")
    spec = sol.spec
    points = spec.points()
    inside = sol.inside.ravel()
    err_u = np.max(np.abs(sol.u.values.ravel() - problem.exact.u(points, inside)))

    exact_grad = problem.exact.grad(points, inside).reshape(spec.shape + (spec.dim,))
    grads = gradient(sol, problem.geometry)
    err_grad = max(
        np.max(np.abs(g.values[spec.interior] - exact_grad[spec.interior + (axis,)]))
        for axis, g in enumerate(grads)
    )
    return {"u": float(err_u), "gradu": float(err_grad)}


def _check_nested(coarse: GridSpec, fine: GridSpec):
    if fine.n != 2 * coarse.n or fine.bounds != coarse.bounds or fine.alignment != coarse.alignment:
        raise NonNestedGridError(
            f"grid n={fine.n} does not refine n={coarse.n} by a factor of two on the same domain"
        )


def successive_error(coarse: HybridSolution, fine: HybridSolution,
                     geom: InterfaceGeometry) -> Dict[str, float]:
    """
    ||u_h - u_h/2|| on the coarse nodes (every other fine node)

    Gradient differences are taken over the coarse interior nodes.
    """
    _check_nested(coarse.spec, fine.spec)
    every_other = (slice(None, None, 2),) * coarse.spec.dim
    err_u = np.max(np.abs(fine.u.values[every_other] - coarse.u.values))

    interior = coarse.spec.interior
    err_grad = 0.0
    for g_coarse, g_fine in zip(gradient(coarse, geom), gradient(fine, geom)):
        diff = g_fine.values[every_other][interior] - g_coarse.values[interior]
        err_grad = max(err_grad, float(np.max(np.abs(diff))))
    return {"u": float(err_u), "gradu": err_grad}


def boundary_error(sol: HybridSolution, problem: PoissonInterfaceProblem) -> float:
    """max |u - u_b| over the boundary nodes"""
    points = sol.spec.points()
    mask = sol.spec.boundary_mask().ravel()
    return float(np.max(np.abs(sol.u.values.ravel()[mask] - problem.u_b(points[mask]))))


def save_fields(path: str, sol: HybridSolution):
    """Dump u, v, w and the grid coordinates to an .npz file"""
    coords = {f"x{axis}": sol.spec.axis_coords(axis) for axis in range(sol.spec.dim)}
    np.savez(path, u=sol.u.values, v=sol.v.values, w=sol.w.values,
             inside=sol.inside, **coords)


class HybridSolver:
    """
    Train once, then solve the same problem at any resolution

    Example:
        solver = HybridSolver(example1(), NetConfig(40, 200), LMConfig())
        sol = solver.solve_on(128)
    """

    def __init__(self, problem: PoissonInterfaceProblem, net_config: NetConfig,
                 lm_config: LMConfig, net: Optional[ShallowNet] = None,
                 report: Optional[TrainReport] = None):
        self.problem = problem
        self.net_config = net_config
        self.lm_config = lm_config
        self.net = net
        self.report = report

    def grid(self, n: int) -> GridSpec:
        return GridSpec(self.problem.bounds, n, (NODE,) * self.problem.dim)

    def train(self, seed_offset: int = 0) -> TrainReport:
        """Fit the jump network; seed_offset shifts both the sampling and init seeds"""
        net_cfg = NetConfig(**self.net_config.to_dict())
        lm_cfg = LMConfig(**self.lm_config.to_dict())
        net_cfg.seed += seed_offset
        lm_cfg.seed += seed_offset
        self.net, self.report = train_for_problem(self.problem, net_cfg, lm_cfg)
        return self.report

    def generalization(self, n_points: int = 1000, seed: int = 12345) -> Dict[str, float]:
        """Max jump residuals of the trained net at fresh interface points"""
        if self.net is None:
            self.train()
        samples = sample_interface(self.problem.geometry, n_points, seed)
        return constraint_residuals(self.net, self.problem.jump_dataset(samples))

    def solve_on(self, grid, retrain: bool = False) -> HybridSolution:
        """
        Solve on a grid

        Args:
            grid: GridSpec or number of cells per axis
            retrain: Refit the network for this grid, seeded with seed + n
        """
        spec = grid if isinstance(grid, GridSpec) else self.grid(int(grid))
        samples = sample_interface(self.problem.geometry, self.net_config.n_samples,
                                   self.net_config.seed)
        self.problem.check_clearance(samples, spec.h)
        if retrain:
            self.train(seed_offset=spec.n)
        elif self.net is None:
            self.train()
        sol = solve_with_net(self.problem, self.net, spec, self.report)
        logger.info(f"solved '{self.problem.name}' at n={spec.n}")
        return sol
