"""Exact Gaussian-process regression with a zero prior mean.

Observation noise is kept out of the kernel tree: it is either a scalar
variance (the `noise.var` parameter) or, for the heteroscedastic model, a
per-point diagonal.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from src.dataset import Dataset, Inputs
from src.errors import ConfigError, GPError
from src.kernels import (
    KernelExpr,
    ParamEntry,
    ParamVector,
    eval_kernel,
    jittered_cholesky,
    kernel_diag,
    kernel_value_and_grad,
    positive,
    switches,
)
from src.kernels.ops import check_bindings
from src.optim import FitReport, OptConfig, ValueAndGrad, minimize

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
NOISE_NAME = "noise.var"

__all__ = [
    "Dataset",
    "GPState",
    "Inputs",
    "Posterior",
    "condition",
    "default_noise",
    "fit_gp",
    "loo_residuals",
    "nlml",
    "nlml_and_grad",
    "nlml_grad",
    "nlml_objective",
    "predict",
    "sample_prior",
    "scan_switches",
]


def default_noise(value: float = 0.1, lower: float = 1e-6, upper: float = 10.0) -> ParamEntry:
    return positive(NOISE_NAME, value, lower, upper)


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    var_latent: np.ndarray
    var_noisy: np.ndarray

    @property
    def std_latent(self) -> np.ndarray:
        return np.sqrt(self.var_latent)

    @property
    def std_total(self) -> np.ndarray:
        return np.sqrt(self.var_noisy)


@dataclass(frozen=True)
class GPState:
    expr: KernelExpr
    params: ParamVector
    noise: ParamEntry | None  # None when the diagonal is per-point
    noise_diag: np.ndarray
    L: np.ndarray
    alpha: np.ndarray
    jitter: float
    train: Dataset

    @property
    def noise_var(self) -> float:
        return self.noise.value if self.noise is not None else float(np.mean(self.noise_diag))


def _noise_diag(noise, n: int) -> np.ndarray:
    if isinstance(noise, ParamEntry):
        noise = noise.value
    diag = np.broadcast_to(np.asarray(noise, dtype=float), (n,)).copy()
    if np.any(diag < 0) or not np.all(np.isfinite(diag)):
        raise ConfigError("noise variance must be finite and non-negative")
    return diag


def _factor(K: np.ndarray, diag: np.ndarray, y: np.ndarray):
    Ky = K + np.diag(diag)
    L, jitter = jittered_cholesky(Ky)
    alpha = cho_solve((L, True), y)
    return L, alpha, jitter


def _nlml_from_factor(L, alpha, y) -> float:
    return 0.5 * float(y @ alpha) + float(np.sum(np.log(np.diag(L)))) + 0.5 * len(y) * LOG_2PI


def nlml(expr: KernelExpr, params: ParamVector, noise_var, data: Dataset) -> float:
    """Negative log marginal likelihood of data.y under K + noise."""
    K = eval_kernel(expr, params, data.inputs)
    L, alpha, _ = _factor(K, _noise_diag(noise_var, len(data)), data.y)
    return _nlml_from_factor(L, alpha, data.y)


def nlml_and_grad(expr: KernelExpr, params: ParamVector, noise_var, data: Dataset) -> tuple[float, np.ndarray]:
    """NLML and its gradient w.r.t. the free kernel parameters then log noise variance."""
    K, dKs = kernel_value_and_grad(expr, params, data.inputs)
    n = len(data)
    diag = _noise_diag(noise_var, n)
    L, alpha, jitter = _factor(K, diag, data.y)
    value = _nlml_from_factor(L, alpha, data.y)
    W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n))
    # jitter is proportional to the mean diagonal, so it moves with every parameter
    scale = float(np.mean(np.diag(K) + diag))
    rel = jitter / scale if scale > 0 else 0.0
    trW = float(np.trace(W))
    grad = [-0.5 * (float(np.sum(W * dK)) + rel * trW * float(np.mean(np.diag(dK)))) for dK in dKs]
    # d K_y / d log(sigma_n^2) = sigma_n^2 I
    grad.append(-0.5 * (float(np.sum(np.diag(W) * diag)) + rel * trW * float(np.mean(diag))))
    return value, np.array(grad)


def nlml_grad(expr: KernelExpr, params: ParamVector, noise_var, data: Dataset) -> np.ndarray:
    return nlml_and_grad(expr, params, noise_var, data)[1]


def condition(expr: KernelExpr, params: ParamVector, noise, data: Dataset) -> GPState:
    """Factorise the training covariance for fixed hyperparameters.

    `noise` is a ParamEntry (homoscedastic), a scalar variance, or a per-point
    variance vector.
    """
    diag = _noise_diag(noise, len(data))
    K = eval_kernel(expr, params, data.inputs)
    L, alpha, jitter = _factor(K, diag, data.y)
    entry = noise if isinstance(noise, ParamEntry) else None
    if entry is None and np.ndim(noise) == 0:
        value = float(noise)
        entry = ParamEntry(NOISE_NAME, value, value, value, "identity")
    return GPState(expr, params, entry, diag, L, alpha, jitter, data)


def predict(state: GPState, Xstar: Inputs, Xstar_noise: np.ndarray | float | None = None) -> Posterior:
    """Posterior at Xstar; the noisy variance adds the noise variance (or Xstar_noise)."""
    check_bindings(state.expr, Xstar)
    Ks = eval_kernel(state.expr, state.params, state.train.inputs, Xstar)
    mean = Ks.T @ state.alpha
    v = solve_triangular(state.L, Ks, lower=True)
    latent = np.maximum(kernel_diag(state.expr, state.params, Xstar) - np.sum(v * v, axis=0), 0.0)
    extra = state.noise_var if Xstar_noise is None else Xstar_noise
    return Posterior(mean, latent, latent + extra)


def loo_residuals(state: GPState) -> np.ndarray:
    """Leave-one-out residuals y_i - mu_{-i} = alpha_i / [K_y^-1]_ii."""
    Kinv = cho_solve((state.L, True), np.eye(len(state.train)))
    return state.alpha / np.diag(Kinv)


def sample_prior(expr: KernelExpr, params: ParamVector, Xstar: Inputs, n_draws: int, seed: int) -> np.ndarray:
    """(len(Xstar), n_draws) draws from the zero-mean prior, reproducible by seed."""
    K = eval_kernel(expr, params, Xstar)
    L, _ = jittered_cholesky(K)
    rng = np.random.default_rng(seed)
    return L @ rng.standard_normal((len(Xstar), n_draws))


def nlml_objective(expr: KernelExpr, params: ParamVector, data: Dataset, noise: ParamEntry | None = None):
    """Joint (kernel + noise) vector and theta -> (NLML, gradient) over its free entries."""
    noise = noise or default_noise()
    joint = params.concat(ParamVector((noise,)))
    kernel_names = params.names

    def fun(theta):
        pv = joint.with_free(theta)
        value, grad = nlml_and_grad(expr, pv.select(kernel_names), pv[NOISE_NAME], data)
        return value, grad if not noise.fixed else grad[:-1]

    return joint, fun


def scan_switches(
    expr: KernelExpr,
    params: ParamVector,
    data: Dataset,
    noise: ParamEntry | None = None,
    points: int = 9,
) -> ParamVector:
    """Moves each free switch location to the best of `points` evenly spaced interior candidates.

    Switches are visited in order of appearance, each scan keeping the earlier
    choices; steepness and all other parameters stay at their current values.
    """
    noise = noise or default_noise()
    for tag in switches(expr):
        entry = params.entry(f"{tag}.x0")
        if entry.fixed or points < 1:
            continue
        candidates = np.linspace(entry.lower, entry.upper, points + 2)[1:-1]
        scores = np.full(points, np.inf)
        for i, x0 in enumerate(candidates):
            trial = params.updated(**{entry.name: {"value": float(x0)}})
            try:
                scores[i] = nlml(expr, trial, noise.value, data)
            except GPError as exc:
                logger.debug("Switch scan %s=%.4g failed: %s", entry.name, x0, exc)
        if not np.any(np.isfinite(scores)):
            continue
        best = float(candidates[int(np.argmin(scores))])
        logger.info("Switch scan: %s start %.4g (NLML %.6f)", entry.name, best, float(np.min(scores)))
        params = params.updated(**{entry.name: {"value": best}})
    return params


def fit_gp(
    expr: KernelExpr,
    params: ParamVector,
    data: Dataset,
    noise: ParamEntry | None = None,
    config: OptConfig | None = None,
) -> tuple[GPState, FitReport]:
    """Multi-start NLML minimisation over kernel parameters and noise variance."""
    config = config or OptConfig()
    if config.switch_scan:
        params = scan_switches(expr, params, data, noise, config.switch_scan)
    joint, fun = nlml_objective(expr, params, data, noise)
    vg = ValueAndGrad(fun)
    logger.info("Fitting GP: %d points, %d free parameters", len(data), len(joint.free_names))
    report = minimize(vg.value, vg.grad, joint, config)
    best_kernel = report.params.select(params.names)
    state = condition(expr, best_kernel, report.params.entry(NOISE_NAME), data)
    logger.info("GP fit done: NLML=%.6f noise=%.4g", report.best_value, state.noise_var)
    return state, report
