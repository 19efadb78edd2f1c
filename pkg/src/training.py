"""
Interface-jump least squares and the Levenberg-Marquardt trainer
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple
import logging

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq, orth

from .config import LMConfig
from .errors import DimensionMismatchError
from .geometry import InterfaceSampleSet
from .shallow_net import ShallowNet

logger = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-20
FAMILIES = ("value", "normal", "laplacian")

JumpFunction = Callable[[InterfaceSampleSet], np.ndarray]


@dataclass(eq=False)
class JumpDataset:
    """Interface samples with jump targets gamma, rho and [[f]] per output channel"""

    samples: InterfaceSampleSet
    gamma: np.ndarray   # (M, k)
    rho: np.ndarray     # (M, k)
    fjump: np.ndarray   # (M, k)

    def __post_init__(self):
        M = len(self.samples)
        if M < 1:
            raise ValueError("dataset needs at least one sample")
        for name in ("gamma", "rho", "fjump"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.ndim == 1:
                values = values[:, None]
            if values.shape[0] != M:
                raise DimensionMismatchError(f"{name} has {values.shape[0]} rows for {M} samples")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{name} targets must be finite")
            setattr(self, name, values)
        if not (self.gamma.shape == self.rho.shape == self.fjump.shape):
            raise DimensionMismatchError("gamma, rho and fjump need the same channel count")

    def __len__(self):
        return len(self.samples)

    @property
    def n_outputs(self) -> int:
        return self.gamma.shape[1]


@dataclass
class TrainReport:
    """Outcome of one LM fit"""

    final_loss: float
    epochs_used: int
    loss_history: List[float] = field(default_factory=list)  # entry 0 is the initial loss
    converged: bool = False
    final_lambda: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        """Loss history as a DataFrame with columns epoch, loss"""
        return pd.DataFrame({
            "epoch": np.arange(len(self.loss_history)),
            "loss": self.loss_history,
        })

    def to_dict(self) -> Dict:
        return {
            "final_loss": self.final_loss,
            "epochs_used": self.epochs_used,
            "converged": self.converged,
            "final_lambda": self.final_lambda,
        }


def build_dataset(samples: InterfaceSampleSet, gamma: JumpFunction, rho: JumpFunction,
                  fjump: JumpFunction) -> JumpDataset:
    """Evaluate jump functions at the samples"""
    return JumpDataset(samples, gamma(samples), rho(samples), fjump(samples))


def _check(net: ShallowNet, data: JumpDataset):
    if net.input_dim != data.samples.dim:
        raise DimensionMismatchError(
            f"network input dimension {net.input_dim} != sample dimension {data.samples.dim}"
        )
    if net.n_outputs != data.n_outputs:
        raise DimensionMismatchError(
            f"network has {net.n_outputs} outputs, dataset has {data.n_outputs} channels"
        )


def _raw_residuals(net: ShallowNet, data: JumpDataset) -> np.ndarray:
    """Unscaled residuals, (M, k, 3)"""
    points, normals = data.samples.points, data.samples.normals
    value, grad, lap = net.spatial_derivatives(points)
    normal_deriv = np.einsum("nkd,nd->nk", grad, normals)
    return np.stack([value + data.gamma, normal_deriv + data.rho, lap + data.fjump], axis=-1)


def residuals(net: ShallowNet, data: JumpDataset) -> np.ndarray:
    """
    Scaled residual vector whose squared norm is the training loss

    For every sample i and output o the entries are
    [V_o + gamma_o, dV_o/dn + rho_o, Laplacian V_o + [[f]]_o] / sqrt(M).

    Returns:
        Vector of length 3 M k
    """
    _check(net, data)
    return _raw_residuals(net, data).ravel() / np.sqrt(len(data))


def loss(net: ShallowNet, data: JumpDataset) -> float:
    r = residuals(net, data)
    return float(r @ r)


def jacobian(net: ShallowNet, data: JumpDataset) -> np.ndarray:
    """
    d residuals / d parameters in closed form

    Returns:
        (3 M k, P) matrix with rows ordered as in residuals()
    """
    _check(net, data)
    J = net.residual_jacobian(data.samples.points, data.samples.normals)
    return J.reshape(-1, net.n_params) / np.sqrt(len(data))


def constraint_residuals(net: ShallowNet, data: JumpDataset) -> Dict[str, float]:
    """Max absolute unscaled residual per family (value, normal, laplacian)"""
    _check(net, data)
    raw = np.abs(_raw_residuals(net, data))
    return {name: float(raw[..., i].max()) for i, name in enumerate(FAMILIES)}


def _output_step(J: np.ndarray, r: np.ndarray, n_hidden: int) -> np.ndarray:
    """Least-squares change of the output layer; the residual is linear in C and c0"""
    step, *_ = lstsq(J[:, n_hidden:], -r, lapack_driver="gelsd")
    return step


def _fit_output_layer(net: ShallowNet, data: JumpDataset) -> Tuple[ShallowNet, np.ndarray]:
    """Best output layer for the current hidden layer"""
    n_hidden = net.width * (net.input_dim + 1)
    r = residuals(net, data)
    p = net.parameters()
    p[n_hidden:] += _output_step(jacobian(net, data), r, n_hidden)
    fitted = net.with_parameters(p)
    return fitted, residuals(fitted, data)


def _normal_equations(J: np.ndarray, r: np.ndarray, n_hidden: int,
                      separable: bool) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Newton matrix and gradient

    In separable mode the hidden-layer columns are projected onto the complement of
    the output-layer column space, which is the Jacobian of the residual left after an
    exact output-layer fit.
    """
    if not separable:
        return J.T @ J, J.T @ r
    J_hidden = J[:, :n_hidden]
    Q = orth(J[:, n_hidden:])
    J_reduced = J_hidden - Q @ (Q.T @ J_hidden)
    return J_reduced.T @ J_reduced, J_reduced.T @ r


def lm_fit(net0: ShallowNet, data: JumpDataset, cfg: LMConfig) -> Tuple[ShallowNet, TrainReport]:
    """
    Minimize the interface loss with full-batch Levenberg-Marquardt

    Each epoch solves (H + lambda I) delta = -g by Cholesky. A step that lowers the loss
    is accepted and lambda is divided by down_factor; otherwise lambda is multiplied by
    up_factor and the step retried. An epoch that cannot find a decreasing step before
    lambda exceeds lambda_max ends training unconverged.

    With cfg.separable the output layer, in which the residual is linear, is solved
    exactly by least squares: the first epoch is that solve, and every later trial
    moves only the hidden layer (with the projected Jacobian) and refits the output
    layer before its loss is compared.

    Args:
        net0: Starting network
        data: Interface dataset
        cfg: Optimizer settings

    Returns:
        (trained network, TrainReport)
    """
    cfg.validate()
    _check(net0, data)

    n_hidden = net0.width * (net0.input_dim + 1)
    net = net0
    r = residuals(net, data)
    current = float(r @ r)
    history = [current]
    lam = cfg.lambda0
    epochs = 0
    n_step = n_hidden if cfg.separable else net0.n_params
    eye = np.eye(n_step)

    while current > cfg.loss_tol and epochs < cfg.max_epochs:
        J = jacobian(net, data)
        epochs += 1

        if cfg.separable and epochs == 1:
            p = net.parameters()
            p[n_hidden:] += _output_step(J, r, n_hidden)
            fitted = net.with_parameters(p)
            r_fit = residuals(fitted, data)
            fit_loss = float(r_fit @ r_fit)
            if np.isfinite(fit_loss) and fit_loss < current:
                net, r, current = fitted, r_fit, fit_loss
                history.append(current)
                logger.debug(f"epoch 1: output layer fit, loss={current:.3e}")
                continue

        H, g = _normal_equations(J, r, n_hidden, cfg.separable)
        p = net.parameters()
        accepted = False
        while lam <= cfg.lambda_max:
            try:
                delta = -cho_solve(cho_factor(H + lam * eye), g)
            except LinAlgError:
                logger.debug(f"epoch {epochs}: factorization failed at lambda={lam:.1e}")
                lam *= cfg.up_factor
                continue

            trial_p = p.copy()
            trial_p[:n_step] += delta
            trial_net = net.with_parameters(trial_p)
            if cfg.separable:
                try:
                    trial_net, r_trial = _fit_output_layer(trial_net, data)
                except (LinAlgError, ValueError):
                    lam *= cfg.up_factor
                    continue
            else:
                r_trial = residuals(trial_net, data)
            trial = float(r_trial @ r_trial)
            if np.isfinite(trial) and trial < current:
                net, r, current = trial_net, r_trial, trial
                lam = max(lam / cfg.down_factor, LAMBDA_FLOOR)
                accepted = True
                break
            lam *= cfg.up_factor

        if not accepted:
            logger.warning(
                f"LM stalled at epoch {epochs}: no decreasing step up to lambda={cfg.lambda_max:.0e}"
            )
            break
        history.append(current)
        logger.debug(f"epoch {epochs}: loss={current:.3e} lambda={lam:.1e}")

    converged = current <= cfg.loss_tol
    report = TrainReport(current, epochs, history, converged, lam)
    if converged:
        logger.info(f"LM converged: loss={current:.3e} after {epochs} epochs")
    else:
        logger.warning(f"LM did not reach loss_tol={cfg.loss_tol:.0e}: loss={current:.3e}")
    return net, report


def sample_box(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Center and half widths of the sample bounding box; no axis thinner than a quarter of the widest"""
    lo, hi = points.min(axis=0), points.max(axis=0)
    half = 0.5 * (hi - lo)
    scale = half.max() if half.max() > 0 else 1.0
    return 0.5 * (lo + hi), np.maximum(half, 0.25 * scale)


def train_network(data: JumpDataset, width: int, cfg: LMConfig) -> Tuple[ShallowNet, TrainReport]:
    """Initialize a network over the sample box and fit it"""
    center, half_widths = sample_box(data.samples.points)
    net0 = ShallowNet.initialize(data.samples.dim, width, data.n_outputs, cfg.seed,
                                 center=center, half_widths=half_widths)
    return lm_fit(net0, data, cfg)
