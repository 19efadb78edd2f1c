"""
Unit tests for the shallow network and its closed-form derivatives
"""
import pytest
import numpy as np
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.errors import DimensionMismatchError, NetFormatError
from src.geometry import InterfaceSample
from src.shallow_net import ShallowNet, load_net, param_count, save_net, sigmoid_derivatives


def random_net(d=2, m=8, k=1, seed=0):
    rng = np.random.default_rng(seed)
    return ShallowNet.from_parameters(d, m, k, rng.uniform(-1, 1, size=param_count(d, m, k)))


def test_param_count():
    assert param_count(2, 40, 1) == 161
    assert param_count(2, 50, 3) == 50 * 2 + 50 + 3 * 50 + 3
    assert random_net(3, 5, 2).n_params == param_count(3, 5, 2)


def test_sigmoid_derivatives_at_zero():
    s, s1, s2, s3 = sigmoid_derivatives(np.array([0.0]))
    assert s[0] == pytest.approx(0.5)
    assert s1[0] == pytest.approx(0.25)
    assert s2[0] == pytest.approx(0.0, abs=1e-15)
    assert s3[0] == pytest.approx(-0.125)


def test_zero_net_is_zero():
    net = ShallowNet.zeros(2, 4)
    value, grad, lap = net.spatial_derivatives(np.array([[0.3, -0.2], [1.0, 2.0]]))
    assert np.all(value == 0)
    assert np.all(grad == 0)
    assert np.all(lap == 0)


def test_constant_net():
    net = ShallowNet.zeros(2, 3)
    net.output_biases[:] = 1.0
    np.testing.assert_array_equal(net.eval(np.array([[0.1, 0.2], [5.0, -3.0]])), [[1.0], [1.0]])


def test_initialize():
    """Unit-box start: directions of length 0.7 m^(1/d), transitions cross the box"""
    net = ShallowNet.initialize(2, 40, 1, seed=0)
    beta = 0.7 * np.sqrt(40)
    np.testing.assert_allclose(np.linalg.norm(net.hidden_weights, axis=1), beta)
    assert np.all(np.abs(net.hidden_biases) <= beta)
    assert np.all(net.output_weights == 0)
    assert np.all(net.output_biases == 0)

    again = ShallowNet.initialize(2, 40, 1, seed=0)
    assert np.array_equal(net.parameters(), again.parameters())


def test_initialize_follows_sample_box():
    center, half_widths = np.array([0.3, -0.2, 0.1]), np.array([0.8, 0.2, 0.5])
    net = ShallowNet.initialize(3, 27, 2, seed=3, center=center, half_widths=half_widths)
    beta = 0.7 * 3.0
    np.testing.assert_allclose(np.linalg.norm(net.hidden_weights * half_widths, axis=1), beta)
    # the transition A x + b = 0 lies within one box radius of the center
    offsets = net.hidden_weights @ center + net.hidden_biases
    assert np.all(np.abs(offsets) <= beta)
    assert net.eval(center).shape == (2,)
    assert np.all(net.eval(center) == 0)

    with pytest.raises(ValueError):
        ShallowNet.initialize(2, 4, 1, seed=0, half_widths=np.array([1.0, 0.0]))


def test_parameter_round_trip():
    net = random_net(3, 6, 2)
    copy = net.with_parameters(net.parameters())
    assert np.array_equal(copy.parameters(), net.parameters())
    np.testing.assert_array_equal(copy.hidden_weights, net.hidden_weights)


def test_invalid_shapes():
    with pytest.raises(ValueError):
        ShallowNet.zeros(2, 0)
    with pytest.raises(DimensionMismatchError):
        ShallowNet.from_parameters(2, 4, 1, np.zeros(5))
    with pytest.raises(DimensionMismatchError):
        random_net(2).eval(np.zeros((3, 3)))


def test_single_neuron_value():
    net = ShallowNet(np.array([[1.0, 0.0]]), np.zeros(1), np.array([[2.0]]), np.zeros(1))
    assert net.eval(np.array([0.0, 5.0]))[0] == pytest.approx(1.0)
    _, grad, lap = net.spatial_derivatives(np.array([0.0, 0.0]))
    np.testing.assert_allclose(grad[0], [0.5, 0.0])
    assert lap[0] == pytest.approx(0.0, abs=1e-15)


def test_eval_matches_two_loop_formula():
    net = random_net(2, 7, 2, seed=3)
    x = np.array([0.3, -0.7])
    expected = np.zeros(2)
    for o in range(2):
        total = net.output_biases[o]
        for j in range(7):
            z = net.hidden_weights[j] @ x + net.hidden_biases[j]
            total += net.output_weights[o, j] / (1.0 + np.exp(-z))
        expected[o] = total
    np.testing.assert_allclose(net.eval(x), expected, rtol=1e-14, atol=1e-15)


def test_large_inputs_stay_finite():
    net = random_net(2, 5, 1, seed=7)
    x = np.array([[1e4, -1e4], [-800.0, 900.0]])
    value, grad, lap = net.spatial_derivatives(x)
    assert np.all(np.isfinite(value))
    assert np.all(np.isfinite(grad))
    assert np.all(np.isfinite(lap))


def test_multi_output_matches_slices():
    net = random_net(2, 6, 3, seed=9)
    x = np.random.default_rng(1).uniform(-1, 1, size=(5, 2))
    value, grad, lap = net.spatial_derivatives(x)
    for o in range(3):
        v_o, g_o, l_o = net.output_slice(o).spatial_derivatives(x)
        np.testing.assert_allclose(v_o[:, 0], value[:, o], rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(g_o[:, 0], grad[:, o], rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(l_o[:, 0], lap[:, o], rtol=1e-13, atol=1e-15)


def test_batch_matches_single_point():
    net = random_net(2, 8, 3)
    points = np.random.default_rng(2).uniform(-1, 1, size=(4, 2))
    batch = net.eval(points)
    for i, p in enumerate(points):
        np.testing.assert_allclose(net.eval(p), batch[i], rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("d", [2, 3])
def test_gradient_and_laplacian_vs_finite_differences(d):
    net = random_net(d, 10, 2, seed=d)
    x = np.full(d, 0.3)
    _, grad, lap = net.spatial_derivatives(x)

    step = 1e-5
    fd_grad = np.column_stack([
        (net.eval(x + step * e) - net.eval(x - step * e)) / (2 * step) for e in np.eye(d)
    ])
    np.testing.assert_allclose(grad, fd_grad, rtol=1e-6, atol=1e-8)

    step = 1e-4
    fd_lap = sum(
        (net.eval(x + step * e) - 2 * net.eval(x) + net.eval(x - step * e)) / step ** 2
        for e in np.eye(d)
    )
    np.testing.assert_allclose(lap, fd_lap, rtol=1e-5, atol=1e-6)


def test_normal_derivative():
    net = random_net(2, 6, 2)
    x = np.array([[0.2, -0.4]])
    n = np.array([[0.6, 0.8]])
    expected = np.einsum("nkd,nd->nk", net.gradient(x), n)
    np.testing.assert_allclose(net.normal_derivative(x, n), expected, rtol=1e-14)


def test_parameter_jacobian_rows_vs_finite_differences():
    net = random_net(2, 5, 2, seed=4)
    sample = InterfaceSample(np.array([0.4, 0.1]), np.array([0.8, 0.6]))
    p0 = net.parameters()

    def quantities(p, o):
        v, g, l = net.with_parameters(p).spatial_derivatives(sample.point)
        return np.array([v[o], g[o] @ sample.normal, l[o]])

    step = 1e-6
    for o in range(2):
        rows = net.parameter_jacobian_rows(sample, o)
        assert rows.shape == (3, net.n_params)
        fd = np.column_stack([
            (quantities(p0 + step * e, o) - quantities(p0 - step * e, o)) / (2 * step)
            for e in np.eye(p0.size)
        ])
        np.testing.assert_allclose(rows, fd, rtol=1e-5, atol=1e-7)


def test_output_slice():
    net = random_net(2, 6, 3)
    x = np.array([[0.1, 0.2]])
    np.testing.assert_allclose(net.output_slice(1).eval(x)[:, 0], net.eval(x)[:, 1])


def test_save_load_is_exact(tmp_path):
    net = ShallowNet.initialize(2, 7, 3, seed=11)
    net = net.with_parameters(np.random.default_rng(0).standard_normal(net.n_params))
    path = tmp_path / "net.txt"
    save_net(str(path), net)

    first_line = path.read_text().splitlines()[0]
    assert first_line == "# hybrid-net v1 2 7 3 11"

    loaded = load_net(str(path))
    assert np.array_equal(loaded.parameters(), net.parameters())
    assert loaded.seed == 11


def test_load_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# not-a-net v1 2 3 1 0\n1.0\n")
    with pytest.raises(NetFormatError):
        load_net(str(path))

    path.write_text("# hybrid-net v1 2 3 1 0\n1.0\n2.0\n")
    with pytest.raises(NetFormatError):
        load_net(str(path))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
