"""
Unit tests for the fast direct Poisson solvers
"""
import pytest
import numpy as np
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.errors import AlignmentError
from src.fast_poisson import (
    CELL, NODE, GridField, GridSpec, apply_laplacian, solve_dirichlet,
    solve_dirichlet_staggered, solve_neumann_cell, wall_values,
)


def quadratic(points):
    return np.sum(points ** 2, axis=1) + points[:, 0] - 0.5 * points[:, 1]


def test_grid_spec_shapes():
    spec = GridSpec.square(-1.0, 1.0, 8, 2, NODE)
    assert spec.shape == (9, 9)
    assert spec.h == pytest.approx(0.25)
    np.testing.assert_allclose(spec.axis_coords(0), np.linspace(-1, 1, 9))

    cell = GridSpec.square(-2.0, 2.0, 4, 2, CELL)
    assert cell.shape == (4, 4)
    np.testing.assert_allclose(cell.axis_coords(1), [-1.5, -0.5, 0.5, 1.5])

    mixed = GridSpec(((-2, 2), (-2, 2)), 4, (NODE, CELL))
    assert mixed.shape == (5, 4)
    assert mixed.points().shape == (20, 2)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(((0, 1), (0, 2)), 4, (NODE, NODE))
    with pytest.raises(AlignmentError):
        GridSpec(((0, 1), (0, 1)), 4, (NODE, "edge"))
    with pytest.raises(ValueError):
        GridSpec(((0, 1), (0, 1)), 1, (NODE, NODE))


def test_grid_field_rejects_non_finite():
    spec = GridSpec.square(0.0, 1.0, 4)
    values = np.zeros(spec.shape)
    values[1, 1] = np.inf
    with pytest.raises(ValueError):
        GridField(spec, values)
    with pytest.raises(AlignmentError):
        GridField(spec, np.zeros((3, 3)))


@pytest.mark.parametrize("dim", [2, 3])
def test_dirichlet_exact_on_quadratics(dim):
    """The (2d+1)-point Laplacian is exact for quadratics"""
    spec = GridSpec.square(-1.0, 1.0, 8, dim, NODE)
    exact = GridField.from_function(spec, quadratic)
    rhs = np.full(spec.shape, 2.0 * dim)
    w = solve_dirichlet(spec, rhs, exact)
    np.testing.assert_allclose(w.values, exact.values, atol=1e-11)


def test_dirichlet_boundary_is_imposed_exactly():
    spec = GridSpec.square(-1.0, 1.0, 16)
    rng = np.random.default_rng(0)
    boundary = rng.standard_normal(spec.shape)
    w = solve_dirichlet(spec, rng.standard_normal(spec.shape), boundary)
    mask = spec.boundary_mask()
    assert np.array_equal(w.values[mask], boundary[mask])


def test_dirichlet_round_trip():
    spec = GridSpec.square(-1.0, 1.0, 64)
    rng = np.random.default_rng(1)
    rhs = rng.standard_normal(spec.shape)
    w = solve_dirichlet(spec, rhs, rng.standard_normal(spec.shape))
    residual = apply_laplacian(w).values[spec.interior] - rhs[spec.interior]
    assert np.abs(residual).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_dirichlet_second_order():
    errors = []
    for n in (16, 32, 64):
        spec = GridSpec.square(0.0, 1.0, n)
        exact = GridField.from_function(
            spec, lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1]))
        w = solve_dirichlet(spec, -2 * np.pi ** 2 * exact.values, exact)
        errors.append(np.abs(w.values - exact.values).max())
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all((orders > 1.9) & (orders < 2.1))


@pytest.mark.parametrize("alignment", [(NODE, CELL), (CELL, NODE)])
def test_staggered_exact_on_linears(alignment):
    spec = GridSpec(((-2.0, 2.0), (-2.0, 2.0)), 16, alignment)
    linear = lambda p: 1.0 + 2.0 * p[:, 0] - 3.0 * p[:, 1]
    w = solve_dirichlet_staggered(spec, np.zeros(spec.shape), wall_values(spec, linear))
    np.testing.assert_allclose(w.values, GridField.from_function(spec, linear).values, atol=1e-11)


@pytest.mark.parametrize("alignment", [(NODE, CELL), (CELL, NODE)])
def test_staggered_round_trip(alignment):
    spec = GridSpec(((-2.0, 2.0), (-2.0, 2.0)), 64, alignment)
    rng = np.random.default_rng(2)
    rhs = rng.standard_normal(spec.shape)
    walls = {(a, s): rng.standard_normal(spec.face_shape(a)) for a in (0, 1) for s in (0, 1)}
    w = solve_dirichlet_staggered(spec, rhs, walls)
    residual = apply_laplacian(w, walls).values[spec.interior] - rhs[spec.interior]
    assert np.abs(residual).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_staggered_second_order():
    errors = []
    for n in (16, 32, 64):
        spec = GridSpec(((0.0, 1.0), (0.0, 1.0)), n, (NODE, CELL))
        u = lambda p: np.sin(np.pi * p[:, 0]) * np.cos(2 * p[:, 1])
        exact = GridField.from_function(spec, u)
        rhs = -(np.pi ** 2 + 4.0) * exact.values
        w = solve_dirichlet_staggered(spec, rhs, wall_values(spec, u))
        errors.append(np.abs(w.values - exact.values).max())
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_neumann_round_trip_and_defect():
    spec = GridSpec.square(-2.0, 2.0, 64, 2, CELL)
    rng = np.random.default_rng(3)
    rhs = rng.standard_normal(spec.shape)
    flux = {(a, s): rng.standard_normal(spec.face_shape(a)) for a in (0, 1) for s in (0, 1)}
    w, defect = solve_neumann_cell(spec, rhs, flux)

    total_flux = sum(f.sum() for f in flux.values())
    assert defect == pytest.approx(spec.h ** 2 * rhs.sum() - spec.h * total_flux, rel=1e-12)
    assert abs(w.values.mean()) < 1e-12

    lap = apply_laplacian(w, flux).values
    residual = lap - (rhs - defect / spec.volume)
    assert np.abs(residual).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_neumann_exact_on_linears():
    spec = GridSpec.square(-2.0, 2.0, 16, 2, CELL)
    flux = {(0, 0): np.full(16, -2.0), (0, 1): np.full(16, 2.0),
            (1, 0): np.full(16, 3.0), (1, 1): np.full(16, -3.0)}
    w, defect = solve_neumann_cell(spec, np.zeros(spec.shape), flux)
    exact = GridField.from_function(spec, lambda p: 2.0 * p[:, 0] - 3.0 * p[:, 1]).values
    assert defect == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(w.values, exact - exact.mean(), atol=1e-11)


def test_neumann_second_order():
    errors = []
    for n in (16, 32, 64):
        spec = GridSpec.square(0.0, 1.0, n, 2, CELL)
        exact = GridField.from_function(
            spec, lambda p: np.cos(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1])).values
        flux = {(a, s): np.zeros(n) for a in (0, 1) for s in (0, 1)}
        w, _ = solve_neumann_cell(spec, -2 * np.pi ** 2 * exact, flux)
        errors.append(np.abs(w.values - (exact - exact.mean())).max())
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_neumann_3d_round_trip():
    spec = GridSpec.square(0.0, 1.0, 8, 3, CELL)
    rng = np.random.default_rng(4)
    rhs = rng.standard_normal(spec.shape)
    flux = {(a, s): rng.standard_normal(spec.face_shape(a)) for a in range(3) for s in (0, 1)}
    w, defect = solve_neumann_cell(spec, rhs, flux)
    residual = apply_laplacian(w, flux).values - (rhs - defect / spec.volume)
    assert np.abs(residual).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_alignment_errors():
    node = GridSpec.square(0.0, 1.0, 8, 2, NODE)
    cell = GridSpec.square(0.0, 1.0, 8, 2, CELL)
    with pytest.raises(AlignmentError):
        solve_dirichlet(cell, np.zeros(cell.shape), np.zeros(cell.shape))
    with pytest.raises(AlignmentError):
        solve_neumann_cell(node, np.zeros(node.shape), {})
    with pytest.raises(AlignmentError):
        solve_dirichlet_staggered(node, np.zeros(node.shape), {})
    with pytest.raises(AlignmentError):
        solve_dirichlet(node, np.zeros((4, 4)), np.zeros(node.shape))


def test_non_finite_rhs():
    spec = GridSpec.square(0.0, 1.0, 8)
    rhs = np.zeros(spec.shape)
    rhs[3, 3] = np.nan
    with pytest.raises(ValueError):
        solve_dirichlet(spec, rhs, np.zeros(spec.shape))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
