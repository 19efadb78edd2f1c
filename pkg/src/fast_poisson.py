"""
Fast direct Poisson solvers on uniform Cartesian grids

The discrete Laplacian (five-point in 2D, seven-point in 3D) is diagonalized axis by
axis with fast trigonometric transforms:

    node-aligned Dirichlet axis   DST-I,  eigenvalues -(2 - 2 cos(pi k / n)) / h^2, k = 1..n-1
    cell-aligned Dirichlet axis   DST-II, eigenvalues -(2 - 2 cos(pi k / n)) / h^2, k = 1..n
    cell-aligned Neumann axis     DCT-II, eigenvalues -(2 - 2 cos(pi k / n)) / h^2, k = 0..n-1

Boundary data are moved to the right-hand side (lifting), so every solve costs
O(N log N).
"""
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple, Union
import logging

import numpy as np
import scipy.fft

from .errors import AlignmentError

logger = logging.getLogger(__name__)

NODE = "node"
CELL = "cell"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"

# (axis, side) -> values on that face, side 0 = lower bound, 1 = upper bound
Walls = Dict[Tuple[int, int], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with the same spacing h on every axis"""

    bounds: Tuple[Tuple[float, float], ...]
    n: int  # cells per axis
    alignment: Tuple[str, ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "alignment", tuple(self.alignment))
        if len(bounds) not in (2, 3):
            raise ValueError(f"grids must be 2D or 3D, got {len(bounds)} axes")
        if len(self.alignment) != len(bounds):
            raise AlignmentError("one alignment per axis is required")
        if any(a not in (NODE, CELL) for a in self.alignment):
            raise AlignmentError(f"alignment must be '{NODE}' or '{CELL}', got {self.alignment}")
        if self.n < 2:
            raise ValueError(f"need at least 2 cells per axis, got n={self.n}")
        widths = np.array([hi - lo for lo, hi in bounds])
        if np.any(widths <= 0):
            raise ValueError("bounds must be increasing")
        if not np.allclose(widths, widths[0], rtol=1e-12, atol=0.0):
            raise ValueError("all axes must share the same mesh size h")

    @classmethod
    def square(cls, lo: float, hi: float, n: int, dim: int = 2, alignment=NODE) -> "GridSpec":
        """Cube [lo, hi]^dim with one alignment for all axes (or a tuple per axis)"""
        if isinstance(alignment, str):
            alignment = (alignment,) * dim
        return cls(((lo, hi),) * dim, n, tuple(alignment))

    def with_n(self, n: int) -> "GridSpec":
        return GridSpec(self.bounds, n, self.alignment)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def h(self) -> float:
        lo, hi = self.bounds[0]
        return (hi - lo) / self.n

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.n + 1 if a == NODE else self.n for a in self.alignment)

    @property
    def interior(self) -> Tuple[slice, ...]:
        """Index of the unknowns: node axes without their boundary nodes, cell axes whole"""
        return tuple(slice(1, -1) if a == NODE else slice(None) for a in self.alignment)

    @property
    def cell_axes(self) -> Tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.alignment) if a == CELL)

    def axis_coords(self, axis: int) -> np.ndarray:
        lo, _ = self.bounds[axis]
        if self.alignment[axis] == NODE:
            return lo + self.h * np.arange(self.n + 1)
        return lo + self.h * (np.arange(self.n) + 0.5)

    def mesh(self):
        return np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points as an (N, d) array in row-major order"""
        return np.column_stack([c.ravel() for c in self.mesh()])

    def boundary_mask(self) -> np.ndarray:
        """True at grid points on the domain boundary (node axes only)"""
        mask = np.ones(self.shape, dtype=bool)
        mask[self.interior] = False
        return mask

    def face_points(self, axis: int, side: int) -> np.ndarray:
        """Points on one face, at the grid coordinates of the other axes"""
        others = [self.axis_coords(a) for a in range(self.dim) if a != axis]
        grids = np.meshgrid(*others, indexing="ij")
        cols = [g.ravel() for g in grids]
        fixed = np.full(cols[0].shape, self.bounds[axis][side])
        cols.insert(axis, fixed)
        return np.column_stack(cols)

    def face_shape(self, axis: int) -> Tuple[int, ...]:
        return tuple(s for a, s in enumerate(self.shape) if a != axis)


@dataclass(eq=False)
class GridField:
    """Scalar values on every point of a GridSpec"""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.shape:
            if self.values.size == int(np.prod(self.spec.shape)):
                self.values = self.values.reshape(self.spec.shape)
            else:
                raise AlignmentError(
                    f"field shape {self.values.shape} does not match grid {self.spec.shape}"
                )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid field values must be finite")

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "GridField":
        return cls(spec, np.asarray(fn(spec.points()), dtype=float).reshape(spec.shape))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridField":
        return cls(spec, np.zeros(spec.shape))

    def max_abs(self, region: Optional[Tuple[slice, ...]] = None) -> float:
        values = self.values if region is None else self.values[region]
        return float(np.max(np.abs(values))) if values.size else 0.0


def wall_values(spec: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> Walls:
    """Evaluate fn on every face of the grid (both sides of every axis)"""
    return {
        (axis, side): np.asarray(fn(spec.face_points(axis, side)), dtype=float).reshape(
            spec.face_shape(axis)
        )
        for axis in range(spec.dim)
        for side in (0, 1)
    }


def _values(data: Union[GridField, np.ndarray], spec: GridSpec, name: str) -> np.ndarray:
    values = data.values if isinstance(data, GridField) else np.asarray(data, dtype=float)
    if values.shape != spec.shape:
        raise AlignmentError(f"{name} has shape {values.shape}, grid expects {spec.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite values")
    return values


def _slab(axis: int, index, others: Tuple[slice, ...]) -> Tuple:
    sl = list(others)
    sl[axis] = index
    return tuple(sl)


def _ghost_pad(values: np.ndarray, spec: GridSpec, walls: Optional[Walls], cell_bc: str) -> np.ndarray:
    """
    Pad cell-aligned axes with one ghost layer per side

    Dirichlet walls use the linear reflection u_ghost = 2 u_wall - u_first, Neumann walls
    u_ghost = u_first + h * flux with flux the outward normal derivative.
    """
    cell_axes = spec.cell_axes
    if not cell_axes:
        return values
    if walls is None:
        raise AlignmentError("cell-aligned axes need wall data")
    pad = [(1, 1) if a in cell_axes else (0, 0) for a in range(spec.dim)]
    padded = np.pad(values, pad)
    # tangential index into the padded array: skip ghost layers of other cell axes
    others = tuple(slice(1, -1) if a in cell_axes else slice(None) for a in range(spec.dim))
    for axis in cell_axes:
        for side, ghost, first in ((0, 0, 1), (1, -1, -2)):
            face = np.asarray(walls[(axis, side)], dtype=float)
            inner = padded[_slab(axis, first, others)]
            if cell_bc == DIRICHLET:
                padded[_slab(axis, ghost, others)] = 2.0 * face - inner
            else:
                padded[_slab(axis, ghost, others)] = inner + spec.h * face
    return padded


def _stencil(padded: np.ndarray, h: float) -> np.ndarray:
    """(2d+1)-point Laplacian at every point that has all its neighbours"""
    d = padded.ndim
    center = (slice(1, -1),) * d
    out = -2.0 * d * padded[center]
    for axis in range(d):
        for start in (0, 2):
            sl = list(center)
            sl[axis] = slice(start, padded.shape[axis] - 2 + start)
            out = out + padded[tuple(sl)]
    return out / h ** 2


def _transform_plan(spec: GridSpec, cell_bc: str):
    """Per axis: (forward, inverse, transform type, eigenvalues)"""
    n, h = spec.n, spec.h
    plan = []
    for alignment in spec.alignment:
        if alignment == NODE:
            k = np.arange(1, n)
            plan.append((scipy.fft.dst, scipy.fft.idst, 1, k))
        elif cell_bc == DIRICHLET:
            k = np.arange(1, n + 1)
            plan.append((scipy.fft.dst, scipy.fft.idst, 2, k))
        else:
            k = np.arange(n)
            plan.append((scipy.fft.dct, scipy.fft.idct, 2, k))
    eigs = [-(2.0 - 2.0 * np.cos(np.pi * k / n)) / h ** 2 for *_, k in plan]
    return plan, eigs


def _diagonal_solve(rhs: np.ndarray, spec: GridSpec, cell_bc: str) -> np.ndarray:
    """Solve L u = rhs for the homogeneous problem on the unknowns"""
    plan, eigs = _transform_plan(spec, cell_bc)
    coef = rhs
    for axis, (forward, _, kind, _) in enumerate(plan):
        coef = forward(coef, type=kind, axis=axis, norm="ortho")

    denom = np.zeros(coef.shape)
    for axis, lam in enumerate(eigs):
        shape = [1] * spec.dim
        shape[axis] = lam.size
        denom = denom + lam.reshape(shape)

    singular = denom == 0.0  # only the constant mode of the all-Neumann problem
    denom[singular] = 1.0
    coef = coef / denom
    coef[singular] = 0.0

    for axis, (_, inverse, kind, _) in enumerate(plan):
        coef = inverse(coef, type=kind, axis=axis, norm="ortho")
    return coef


def apply_laplacian(field: GridField, boundary=None, bc: Optional[str] = None) -> GridField:
    """
    Discrete Laplacian of a grid field

    Args:
        field: Values on the grid; node-aligned boundary entries act as Dirichlet data
        boundary: None for node grids (or a full array overriding the boundary entries);
            a Walls dict for grids with cell-aligned axes (Dirichlet wall values, or
            outward fluxes when bc is neumann)
        bc: 'dirichlet' or 'neumann' for cell-aligned axes; defaults to neumann when
            every axis is cell-aligned and dirichlet otherwise

    Returns:
        GridField with the Laplacian at the unknowns and zeros at node boundary points
    """
    spec = field.spec
    values = field.values.copy()
    cell_bc = bc or (NEUMANN if len(spec.cell_axes) == spec.dim else DIRICHLET)
    if cell_bc == NEUMANN and len(spec.cell_axes) != spec.dim:
        raise AlignmentError("Neumann data require every axis to be cell-aligned")

    if not spec.cell_axes:
        if isinstance(boundary, dict):
            raise AlignmentError("node-aligned grids take boundary values in the field itself")
        if boundary is not None:
            bvals = _values(boundary, spec, "boundary")
            mask = spec.boundary_mask()
            values[mask] = bvals[mask]
    elif not isinstance(boundary, dict):
        raise AlignmentError("grids with cell-aligned axes need a wall dictionary")
    else:
        _set_node_walls(values, spec, boundary)

    out = np.zeros(spec.shape)
    out[spec.interior] = _stencil(_ghost_pad(values, spec, boundary, cell_bc), spec.h)
    return GridField(spec, out)


def _set_node_walls(values: np.ndarray, spec: GridSpec, walls: Walls):
    """Write Dirichlet wall data into the boundary slabs of node-aligned axes"""
    everything = (slice(None),) * spec.dim
    for axis, alignment in enumerate(spec.alignment):
        if alignment != NODE:
            continue
        for side, index in ((0, 0), (1, -1)):
            if (axis, side) in walls:
                values[_slab(axis, index, everything)] = walls[(axis, side)]


def solve_dirichlet(spec: GridSpec, rhs, boundary) -> GridField:
    """
    Dirichlet Poisson solve on a node-aligned grid

    Args:
        spec: Node-aligned grid
        rhs: Right-hand side on the grid (interior entries used)
        boundary: Values on the grid (boundary entries used)

    Returns:
        w with Laplacian_h w = rhs at interior nodes and w = boundary on the boundary
    """
    if spec.cell_axes:
        raise AlignmentError("solve_dirichlet needs a node-aligned grid")
    rhs_values = _values(rhs, spec, "rhs")
    u = _values(boundary, spec, "boundary").copy()
    u[spec.interior] = 0.0
    lifted = rhs_values[spec.interior] - _stencil(u, spec.h)
    u[spec.interior] = _diagonal_solve(lifted, spec, DIRICHLET)
    return GridField(spec, u)


def solve_dirichlet_staggered(spec: GridSpec, rhs, walls: Walls) -> GridField:
    """
    Dirichlet Poisson solve on a 2D grid with one node axis and one cell axis

    Node-axis walls are imposed at their boundary nodes; cell-axis walls lie half a cell
    outside the first unknowns and are imposed through ghost values 2 u_wall - u_first.

    Args:
        spec: 2D grid with exactly one cell-aligned axis
        rhs: Right-hand side on the grid
        walls: Wall values for all four faces (see wall_values)

    Returns:
        Solution with node-axis boundary entries equal to the wall data
    """
    if spec.dim != 2 or len(spec.cell_axes) != 1:
        raise AlignmentError("staggered solve needs a 2D grid with exactly one cell-aligned axis")
    rhs_values = _values(rhs, spec, "rhs")
    u = np.zeros(spec.shape)
    _set_node_walls(u, spec, walls)
    lifted = rhs_values[spec.interior] - _stencil(_ghost_pad(u, spec, walls, DIRICHLET), spec.h)
    u[spec.interior] = _diagonal_solve(lifted, spec, DIRICHLET)
    return GridField(spec, u)


def solve_neumann_cell(spec: GridSpec, rhs, flux: Walls) -> Tuple[GridField, float]:
    """
    Neumann Poisson solve on a cell-centered grid

    The compatibility defect D = h^d sum(rhs) - h^(d-1) sum(flux) is removed by shifting
    rhs uniformly by D / volume before solving, and the zero-mean solution is returned.

    Args:
        spec: Grid with every axis cell-aligned
        rhs: Right-hand side at cell centers
        flux: Outward normal derivative at the boundary face centers

    Returns:
        (zero-mean solution, compatibility defect D)
    """
    if len(spec.cell_axes) != spec.dim:
        raise AlignmentError("solve_neumann_cell needs a cell-aligned grid")
    rhs_values = _values(rhs, spec, "rhs")
    h = spec.h
    total_flux = sum(float(np.sum(flux[(axis, side)])) for axis in range(spec.dim) for side in (0, 1))
    defect = h ** spec.dim * float(np.sum(rhs_values)) - h ** (spec.dim - 1) * total_flux
    scale = max(1.0, h ** spec.dim * float(np.sum(np.abs(rhs_values))))
    if abs(defect) > 1e-2 * scale:
        logger.warning(f"large Neumann compatibility defect {defect:.3e} removed from rhs")
    elif abs(defect) > 1e-6 * scale:
        logger.debug(f"Neumann compatibility defect {defect:.3e} removed from rhs")

    shifted = rhs_values - defect / spec.volume
    zero = np.zeros(spec.shape)
    lifted = shifted - _stencil(_ghost_pad(zero, spec, flux, NEUMANN), h)
    u = _diagonal_solve(lifted, spec, NEUMANN)
    u = u - u.mean()
    return GridField(spec, u), defect
