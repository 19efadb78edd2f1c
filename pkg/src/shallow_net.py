"""
Single-hidden-layer sigmoid network with closed-form derivatives

The network is V(x) = C sigma(A x + b) + c0 with k outputs. Spatial derivatives
(gradient, normal derivative, Laplacian) and the parameter Jacobians of the three
interface residual families are written out analytically through sigma and its first
three derivatives.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from .config import NET_FILE_VERSION
from .errors import DimensionMismatchError, NetFormatError

NET_FILE_MAGIC = "hybrid-net"
INIT_SCALE = 0.7


def sigmoid_derivatives(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Sigmoid and its first three derivatives

    Returns:
        (sigma, sigma', sigma'', sigma''') evaluated elementwise
    """
    s = expit(z)
    s1 = s * (1.0 - s)
    s2 = s1 * (1.0 - 2.0 * s)
    s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 ** 2
    return s, s1, s2, s3


@dataclass(eq=False)
class ShallowNet:
    """
    Shallow fully-connected network R^d -> R^k

    Parameter vector order: hidden weights A (m x d, row-major), hidden biases b (m),
    output weights C (k x m, row-major), output biases c0 (k).
    """

    hidden_weights: np.ndarray  # A, (m, d)
    hidden_biases: np.ndarray   # b, (m,)
    output_weights: np.ndarray  # C, (k, m)
    output_biases: np.ndarray   # c0, (k,)
    seed: Optional[int] = None

    def __post_init__(self):
        self.hidden_weights = np.atleast_2d(np.asarray(self.hidden_weights, dtype=float))
        self.hidden_biases = np.asarray(self.hidden_biases, dtype=float).reshape(-1)
        self.output_weights = np.atleast_2d(np.asarray(self.output_weights, dtype=float))
        self.output_biases = np.asarray(self.output_biases, dtype=float).reshape(-1)
        m, _ = self.hidden_weights.shape
        k = self.output_biases.shape[0]
        if m < 1:
            raise ValueError("network needs at least one hidden neuron")
        if self.hidden_biases.shape != (m,) or self.output_weights.shape != (k, m):
            raise DimensionMismatchError("inconsistent layer shapes")

    # Shapes ----------------------------------------------------------------------

    @property
    def input_dim(self) -> int:
        return self.hidden_weights.shape[1]

    @property
    def width(self) -> int:
        return self.hidden_weights.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.output_biases.shape[0]

    @property
    def n_params(self) -> int:
        return param_count(self.input_dim, self.width, self.n_outputs)

    # Construction ----------------------------------------------------------------

    @classmethod
    def zeros(cls, d: int, m: int, k: int = 1) -> "ShallowNet":
        return cls(np.zeros((m, d)), np.zeros(m), np.zeros((k, m)), np.zeros(k))

    @classmethod
    def initialize(cls, d: int, m: int, k: int, seed: int,
                   center: Optional[np.ndarray] = None,
                   half_widths: Optional[np.ndarray] = None) -> "ShallowNet":
        """
        Random start for training

        Works in box coordinates xi = (x - center) / half_widths. Each neuron gets a
        random direction of length beta = INIT_SCALE * m^(1/d) and a bias uniform in
        [-beta, beta], so every sigmoid transition crosses the box. The output layer is
        zero, so the initial network is identically zero.

        Args:
            d, m, k: Input dimension, width, outputs
            seed: RNG seed
            center: Box center (default origin)
            half_widths: Box half widths per axis (default ones)
        """
        rng = np.random.default_rng(seed)
        center = np.zeros(d) if center is None else np.asarray(center, dtype=float).reshape(d)
        half_widths = np.ones(d) if half_widths is None else np.asarray(half_widths, dtype=float).reshape(d)
        if np.any(half_widths <= 0):
            raise ValueError("half widths must be positive")

        beta = INIT_SCALE * m ** (1.0 / d)
        directions = rng.uniform(-1.0, 1.0, size=(m, d))
        lengths = np.linalg.norm(directions, axis=1, keepdims=True)
        directions = np.where(lengths > 0, directions / np.maximum(lengths, 1e-300), 1.0 / np.sqrt(d))
        A = beta * directions / half_widths
        b = rng.uniform(-beta, beta, size=m) - A @ center
        return cls(A, b, np.zeros((k, m)), np.zeros(k), seed=seed)

    def parameters(self) -> np.ndarray:
        """Flatten to the parameter vector p"""
        return np.concatenate([
            self.hidden_weights.ravel(),
            self.hidden_biases,
            self.output_weights.ravel(),
            self.output_biases,
        ])

    @classmethod
    def from_parameters(cls, d: int, m: int, k: int, p: np.ndarray,
                        seed: Optional[int] = None) -> "ShallowNet":
        p = np.asarray(p, dtype=float)
        if p.shape != (param_count(d, m, k),):
            raise DimensionMismatchError(
                f"expected {param_count(d, m, k)} parameters, got {p.shape}"
            )
        i_b, i_c, i_c0 = _offsets(d, m, k)
        return cls(
            p[:i_b].reshape(m, d).copy(),
            p[i_b:i_c].copy(),
            p[i_c:i_c0].reshape(k, m).copy(),
            p[i_c0:].copy(),
            seed=seed,
        )

    def with_parameters(self, p: np.ndarray) -> "ShallowNet":
        return ShallowNet.from_parameters(self.input_dim, self.width, self.n_outputs, p, self.seed)

    def output_slice(self, o: int) -> "ShallowNet":
        """Single-output network sharing the hidden layer"""
        return ShallowNet(
            self.hidden_weights, self.hidden_biases,
            self.output_weights[o:o + 1], self.output_biases[o:o + 1], self.seed,
        )

    # Evaluation ------------------------------------------------------------------

    def _points(self, x) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"network takes {self.input_dim}-D input, got shape {x.shape}"
            )
        return x, single

    def _pre_activation(self, x: np.ndarray) -> np.ndarray:
        return x @ self.hidden_weights.T + self.hidden_biases

    def eval(self, x) -> np.ndarray:
        """
        Network output

        Args:
            x: One point (d,) or a batch (N, d)

        Returns:
            (k,) for one point, (N, k) for a batch
        """
        x, single = self._points(x)
        value = expit(self._pre_activation(x)) @ self.output_weights.T + self.output_biases
        return value[0] if single else value

    def spatial_derivatives(self, x):
        """
        Value, gradient and Laplacian in closed form

        Returns:
            value (N, k), gradient (N, k, d), laplacian (N, k); leading axis dropped
            for a single point
        """
        x, single = self._points(x)
        s, s1, s2, _ = sigmoid_derivatives(self._pre_activation(x))
        A, C = self.hidden_weights, self.output_weights
        value = s @ C.T + self.output_biases
        gradient = np.einsum("nj,kj,jd->nkd", s1, C, A)
        laplacian = (s2 * np.sum(A ** 2, axis=1)) @ C.T
        if single:
            return value[0], gradient[0], laplacian[0]
        return value, gradient, laplacian

    def gradient(self, x) -> np.ndarray:
        return self.spatial_derivatives(x)[1]

    def laplacian(self, x) -> np.ndarray:
        return self.spatial_derivatives(x)[2]

    def normal_derivative(self, x, normals) -> np.ndarray:
        """n . grad V, (N, k)"""
        x, single = self._points(x)
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        _, s1, _, _ = sigmoid_derivatives(self._pre_activation(x))
        a_n = normals @ self.hidden_weights.T
        out = (s1 * a_n) @ self.output_weights.T
        return out[0] if single else out

    # Parameter Jacobians ---------------------------------------------------------

    def residual_jacobian(self, x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """
        d/dp of [V_o, n . grad V_o, Laplacian V_o] at every point and output

        Args:
            x: (N, d) interface points
            normals: (N, d) unit normals

        Returns:
            (N, k, 3, P) array in parameter-vector order
        """
        x, _ = self._points(x)
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        n_pts, d = x.shape
        m, k, P = self.width, self.n_outputs, self.n_params
        A, C = self.hidden_weights, self.output_weights
        i_b, i_c, i_c0 = _offsets(d, m, k)

        s, s1, s2, s3 = sigmoid_derivatives(self._pre_activation(x))
        a_n = normals @ A.T            # (N, m)
        a_sq = np.sum(A ** 2, axis=1)  # (m,)

        J = np.zeros((n_pts, k, 3, P))

        # value row
        g = s1[:, None, :] * C[None, :, :]                       # (N, k, m)
        J[:, :, 0, :i_b] = (g[..., None] * x[:, None, None, :]).reshape(n_pts, k, m * d)
        J[:, :, 0, i_b:i_c] = g

        # normal-derivative row
        g = (s2 * a_n)[:, None, :] * C[None, :, :]
        h = s1[:, None, :] * C[None, :, :]
        dA = g[..., None] * x[:, None, None, :] + h[..., None] * normals[:, None, None, :]
        J[:, :, 1, :i_b] = dA.reshape(n_pts, k, m * d)
        J[:, :, 1, i_b:i_c] = g

        # Laplacian row
        g = (s3 * a_sq)[:, None, :] * C[None, :, :]
        h = 2.0 * s2[:, None, :] * C[None, :, :]
        dA = g[..., None] * x[:, None, None, :] + h[..., None] * A[None, None, :, :]
        J[:, :, 2, :i_b] = dA.reshape(n_pts, k, m * d)
        J[:, :, 2, i_b:i_c] = g

        # output layer: each output only sees its own row of C and its own bias
        for o in range(k):
            cols = slice(i_c + o * m, i_c + (o + 1) * m)
            J[:, o, 0, cols] = s
            J[:, o, 1, cols] = s1 * a_n
            J[:, o, 2, cols] = s2 * a_sq
            J[:, o, 0, i_c0 + o] = 1.0
        return J

    def parameter_jacobian_rows(self, sample, output_index: int = 0) -> np.ndarray:
        """
        Jacobian rows of the three residual quantities at one interface sample

        Args:
            sample: InterfaceSample (uses .point and .normal)
            output_index: Which output o

        Returns:
            (3, P): d/dp of V_o, n . grad V_o and Laplacian V_o
        """
        J = self.residual_jacobian(np.atleast_2d(sample.point), np.atleast_2d(sample.normal))
        return J[0, output_index]


def param_count(d: int, m: int, k: int) -> int:
    """P = m d + m + k m + k"""
    return m * d + m + k * m + k


def _offsets(d: int, m: int, k: int) -> Tuple[int, int, int]:
    i_b = m * d
    i_c = i_b + m
    return i_b, i_c, i_c + k * m


# Persistence -------------------------------------------------------------------------

def save_net(path: str, net: ShallowNet) -> None:
    """
    Write a network file: one header line then one parameter per line

    %.17e keeps every float64 bit, so load_net(save_net(net)) reproduces net exactly.
    """
    seed = -1 if net.seed is None else int(net.seed)
    header = (f"{NET_FILE_MAGIC} v{NET_FILE_VERSION} "
              f"{net.input_dim} {net.width} {net.n_outputs} {seed}")
    np.savetxt(path, net.parameters(), fmt="%.17e", header=header, comments="# ")


def load_net(path: str) -> ShallowNet:
    """Read a file written by save_net"""
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
        if len(header) != 6 or header[0] != NET_FILE_MAGIC:
            raise NetFormatError(f"'{path}' is not a network file")
        if header[1] != f"v{NET_FILE_VERSION}":
            raise NetFormatError(f"unsupported network file version {header[1]}")
        try:
            d, m, k, seed = (int(tok) for tok in header[2:])
        except ValueError as exc:
            raise NetFormatError(f"bad header in '{path}'") from exc
        p = np.array([float(line) for line in fh if line.strip()])
    if p.shape != (param_count(d, m, k),):
        raise NetFormatError(f"'{path}' holds {p.size} parameters, header says {param_count(d, m, k)}")
    return ShallowNet.from_parameters(d, m, k, p, seed=None if seed < 0 else seed)
