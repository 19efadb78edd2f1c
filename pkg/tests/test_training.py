"""
Unit tests for the interface loss and the Levenberg-Marquardt trainer
"""
import pytest
import numpy as np
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.config import LMConfig, NetConfig
from src.errors import ConfigError, DimensionMismatchError
from src.geometry import circle, ellipse, sample_interface
from src.hybrid_solver import HybridSolver, train_for_problem
from src.problems import example1
from src.shallow_net import ShallowNet
from src.training import (
    JumpDataset, build_dataset, constraint_residuals, jacobian, lm_fit, loss, residuals,
    sample_box, train_network,
)


def constant_dataset(M=20, gamma=1.0, rho=0.5, fjump=2.0, seed=0):
    samples = sample_interface(circle(0.5), M, seed)
    return JumpDataset(samples, np.full(M, gamma), np.full(M, rho), np.full(M, fjump))


def test_initial_loss_of_zero_net():
    """V = 0, so the loss is the mean of gamma^2 + rho^2 + [[f]]^2"""
    data = constant_dataset()
    net = ShallowNet.zeros(2, 5)
    assert loss(net, data) == pytest.approx(1.0 + 0.25 + 4.0)
    assert residuals(net, data).shape == (3 * 20,)


def test_jacobian_vs_finite_differences():
    data = constant_dataset(M=4)
    rng = np.random.default_rng(0)
    net = ShallowNet.initialize(2, 4, 1, seed=1).with_parameters(rng.uniform(-1, 1, 17))
    J = jacobian(net, data)
    p0 = net.parameters()
    step = 1e-6
    fd = np.column_stack([
        (residuals(net.with_parameters(p0 + step * e), data)
         - residuals(net.with_parameters(p0 - step * e), data)) / (2 * step)
        for e in np.eye(p0.size)
    ])
    np.testing.assert_allclose(J, fd, rtol=1e-5, atol=1e-8)


def test_single_sample_fit_reaches_machine_precision():
    data = constant_dataset(M=1)
    cfg = LMConfig(max_epochs=200, loss_tol=1e-20, seed=0)
    net, report = train_network(data, 10, cfg)
    assert report.converged
    assert report.final_loss <= 1e-20
    assert loss(net, data) == pytest.approx(report.final_loss, abs=1e-20)


def test_loss_history_is_non_increasing():
    data = constant_dataset(M=30)
    _, report = train_network(data, 8, LMConfig(max_epochs=30, seed=2))
    history = np.array(report.loss_history)
    assert history[0] == pytest.approx(1.0 + 0.25 + 4.0)
    assert np.all(np.diff(history) <= 0)
    assert report.epochs_used >= len(history) - 1


def test_plain_mode_history_is_non_increasing():
    data = constant_dataset(M=30)
    _, report = train_network(data, 8, LMConfig(max_epochs=30, seed=2, separable=False))
    history = np.array(report.loss_history)
    assert history[0] == pytest.approx(1.0 + 0.25 + 4.0)
    assert np.all(np.diff(history) <= 0)
    assert history[-1] < history[0]


def test_first_epoch_solves_output_layer():
    """Targets produced by the starting hidden layer are matched in one epoch"""
    samples = sample_interface(ellipse(0.8, 0.2), 20, 1)
    net0 = ShallowNet.initialize(2, 6, 1, seed=3)
    rng = np.random.default_rng(4)
    target = ShallowNet(net0.hidden_weights, net0.hidden_biases,
                        rng.uniform(-1, 1, (1, 6)), rng.uniform(-1, 1, 1))
    value, grad, lap = target.spatial_derivatives(samples.points)
    data = JumpDataset(samples, -value, -np.einsum("nkd,nd->nk", grad, samples.normals), -lap)

    net, report = lm_fit(net0, data, LMConfig(max_epochs=1, loss_tol=1e-30))
    assert report.epochs_used == 1
    assert report.final_loss <= 1e-24
    np.testing.assert_array_equal(net.hidden_weights, net0.hidden_weights)
    np.testing.assert_allclose(net.output_weights, target.output_weights, atol=1e-8)
    np.testing.assert_allclose(net.output_biases, target.output_biases, atol=1e-8)


def test_sample_box():
    samples = sample_interface(ellipse(0.8, 0.2), 50, 0)
    center, half_widths = sample_box(samples.points)
    assert np.all(np.abs(center) < 0.2)
    assert 0.6 < half_widths[0] <= 0.8
    assert 0.15 < half_widths[1] <= 0.2

    single = sample_box(np.array([[0.3, -0.4]]))
    np.testing.assert_array_equal(single[0], [0.3, -0.4])
    np.testing.assert_array_equal(single[1], [0.25, 0.25])


def test_epoch_budget_reports_unconverged():
    data = constant_dataset(M=30)
    _, report = train_network(data, 8, LMConfig(max_epochs=1, loss_tol=1e-30))
    assert report.epochs_used == 1
    assert not report.converged
    assert len(report.loss_history) <= 2


def test_training_is_deterministic():
    data = constant_dataset(M=15)
    cfg = LMConfig(max_epochs=20, seed=5)
    net_a, _ = train_network(data, 6, cfg)
    net_b, _ = train_network(data, 6, cfg)
    assert np.array_equal(net_a.parameters(), net_b.parameters())


def test_already_converged_start_does_nothing():
    data = constant_dataset(gamma=0.0, rho=0.0, fjump=0.0)
    net0 = ShallowNet.initialize(2, 5, 1, seed=0)
    net, report = lm_fit(net0, data, LMConfig())
    assert report.epochs_used == 0
    assert report.converged
    assert report.loss_history == [0.0]
    assert np.array_equal(net.parameters(), net0.parameters())


def test_dimension_mismatch():
    data = constant_dataset()
    with pytest.raises(DimensionMismatchError):
        lm_fit(ShallowNet.zeros(3, 4), data, LMConfig())
    with pytest.raises(DimensionMismatchError):
        lm_fit(ShallowNet.zeros(2, 4, k=2), data, LMConfig())


def test_invalid_config():
    with pytest.raises(ConfigError):
        lm_fit(ShallowNet.zeros(2, 4), constant_dataset(), LMConfig(lambda0=0.0))


def test_dataset_validation():
    samples = sample_interface(circle(0.5), 5, 0)
    with pytest.raises(ValueError):
        JumpDataset(samples, np.array([1, 2, np.nan, 4, 5.0]), np.zeros(5), np.zeros(5))
    with pytest.raises(DimensionMismatchError):
        JumpDataset(samples, np.zeros(4), np.zeros(5), np.zeros(5))
    with pytest.raises(DimensionMismatchError):
        JumpDataset(samples, np.zeros((5, 2)), np.zeros(5), np.zeros(5))


def test_build_dataset_and_constraint_residuals():
    samples = sample_interface(ellipse(0.8, 0.2), 10, 0)
    data = build_dataset(
        samples,
        lambda s: s.points[:, 0],
        lambda s: s.normals[:, 1],
        lambda s: np.ones(len(s)),
    )
    assert data.n_outputs == 1
    res = constraint_residuals(ShallowNet.zeros(2, 3), data)
    assert set(res) == {"value", "normal", "laplacian"}
    assert res["laplacian"] == pytest.approx(1.0)
    assert res["value"] == pytest.approx(np.abs(samples.points[:, 0]).max())


def test_report_frame():
    _, report = train_network(constant_dataset(M=10), 4, LMConfig(max_epochs=3))
    df = report.to_frame()
    assert list(df.columns) == ["epoch", "loss"]
    assert len(df) == len(report.loss_history)
    assert df["epoch"].iloc[0] == 0


@pytest.mark.slow
def test_example1_training_floor():
    """Loss <= 1e-11 within 1000 epochs for most seeds"""
    problem = example1()
    reached = 0
    for seed in range(5):
        net, report = train_for_problem(problem, NetConfig(40, 200, 1, seed), LMConfig(seed=seed))
        reached += report.final_loss <= 1e-11
    assert reached >= 3


@pytest.mark.slow
def test_example1_generalization():
    solver = HybridSolver(example1(), NetConfig(40, 200), LMConfig())
    report = solver.train()
    assert report.final_loss <= 1e-11
    residuals = solver.generalization(n_points=1000)
    assert max(residuals.values()) <= 1e-4


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
