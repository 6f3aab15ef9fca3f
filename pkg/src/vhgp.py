"""Variational heteroscedastic GP.

The observation noise variance is exp(g(x)) with g a second GP (SE kernel,
linear mean). Training maximises the marginalised variational bound

    F = log N(y | 0, K_f + R) - 1/4 tr(Sigma) - KL(N(mu, Sigma) || N(m_g, K_g))

with R = diag(exp(mu_i - Sigma_ii / 2)) and Sigma = (K_g^-1 + 2 diag(Lambda))^-1.
Gradients are analytic for mu, log Lambda, the signal kernel and the linear
mean; the noise-GP kernel hyperparameters use central differences.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import digamma

from src.dataset import Dataset, Inputs
from src.errors import FitError, NumericalError
from src.gp import GPState, Posterior, condition, default_noise, fit_gp, loo_residuals, predict
from src.kernels import (
    SE,
    Binding,
    KernelExpr,
    ParamEntry,
    ParamVector,
    Sigmoid,
    Transform,
    eval_kernel,
    jittered_cholesky,
    kernel_value_and_grad,
    logdet_from_cholesky,
    positive,
    real,
    standardize_inputs,
)
from src.optim import FitReport, OptConfig, ValueAndGrad, minimize

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
# Mean and variance of log(chi^2_1): corrects log squared residuals
LOG_CHI2_MEAN = float(digamma(0.5) + math.log(2.0))
LOG_CHI2_VAR = math.pi**2 / 2.0

NOISE_LABEL = "ngp"
MU_PREFIX = "q.mu."
LAM_PREFIX = "q.lam."
MU_BOUNDS = (-30.0, 30.0)
LAM_BOUNDS = (1e-8, 1e8)
COEF_BOUNDS = (-50.0, 50.0)
FD_STEP = 1e-6


@dataclass(frozen=True)
class VHGPConfig:
    prefit: OptConfig = field(default_factory=lambda: OptConfig())
    max_iter: int = 500
    gtol: float = 1e-5
    ftol: float = 1e-10
    lengthscale_bounds: tuple[float, float] = (0.1, 10.0)
    variance_bounds: tuple[float, float] = (1e-3, 1e2)
    residual_floor: float = 1e-6
    lam_init: float = 0.5


@dataclass(frozen=True)
class NoiseModel:
    """SE covariance plus linear mean over the standardised noise inputs."""

    kernel: SE
    params: ParamVector

    @property
    def coef_names(self) -> list[str]:
        return [f"{NOISE_LABEL}.w.{b.key}" for b in self.kernel.binds] + [f"{NOISE_LABEL}.b"]

    def features(self, X: Inputs) -> np.ndarray:
        return self.kernel.standardized(X)

    def mean(self, X: Inputs) -> np.ndarray:
        coef = np.array([self.params[n] for n in self.coef_names])
        return self.features(X) @ coef[:-1] + coef[-1]

    def cov(self, X: Inputs, X2: Inputs | None = None) -> np.ndarray:
        return eval_kernel(self.kernel, self.params, X, X2)

    def diag(self, X: Inputs) -> np.ndarray:
        return self.kernel.diag(self.params, X)

    def with_params(self, params: ParamVector) -> "NoiseModel":
        return NoiseModel(self.kernel, params)


@dataclass(frozen=True)
class VariationalState:
    mu: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        if self.mu.shape != self.lam.shape:
            raise NumericalError("variational mean and precision sizes differ")
        if np.any(self.lam <= 0):
            raise NumericalError("variational precisions must be positive")


@dataclass(frozen=True)
class _NoiseFactors:
    Kg: np.ndarray  # jittered noise-GP covariance
    LK: np.ndarray
    sqrt_s: np.ndarray
    LB: np.ndarray
    Sigma: np.ndarray
    m: np.ndarray


@dataclass(frozen=True)
class HGPState:
    expr: KernelExpr
    params: ParamVector
    noise_model: NoiseModel
    variational: VariationalState
    train: Dataset
    signal: GPState
    factors: _NoiseFactors
    bound: float
    report: FitReport | None = None
    prefit: GPState | None = None

    @property
    def pointwise_noise(self) -> np.ndarray:
        """exp(mu_i - Sigma_ii / 2) at the training inputs."""
        return np.exp(self.variational.mu - 0.5 * np.diag(self.factors.Sigma))


def noise_bindings(expr: KernelExpr) -> tuple[Binding, ...]:
    """Inputs of the noise GP: the switch and SE inputs of the signal kernel."""
    found: list[Binding] = []
    leaves = list(expr.leaves())
    preferred = [leaf for leaf in leaves if isinstance(leaf, (Sigmoid, SE))] or leaves
    for leaf in preferred:
        for b in leaf.bindings():
            # switch inputs enter the noise GP untransformed by negation
            b = Binding(b.column) if b.transform is Transform.NEGATE else b
            if b not in found:
                found.append(b)
    return tuple(found)


def _noise_factors(nm: NoiseModel, lam: np.ndarray, X: Inputs) -> _NoiseFactors:
    n = len(X)
    Kg = nm.cov(X)
    LK, jitter = jittered_cholesky(Kg)
    Kg = Kg + jitter * np.eye(n)
    sq = np.sqrt(2.0 * lam)
    B = np.eye(n) + sq[:, None] * Kg * sq[None, :]
    try:
        LB = cholesky(B, lower=True)
    except LinAlgError as exc:
        raise NumericalError(f"variational factorization failed: {exc}") from exc
    V = solve_triangular(LB, sq[:, None] * Kg, lower=True)
    Sigma = Kg - V.T @ V
    return _NoiseFactors(Kg, LK, sq, LB, Sigma, nm.mean(X))


def _bound(expr, sparams, nm, mu, lam, data: Dataset, with_grad: bool):
    """Bound value and (optionally) a dict of analytic gradient blocks."""
    X, y, n = data.inputs, data.y, len(data)
    fac = _noise_factors(nm, lam, X)
    r = np.exp(mu - 0.5 * np.diag(fac.Sigma))
    if with_grad:
        Kf, dKf = kernel_value_and_grad(expr, sparams, X)
    else:
        Kf, dKf = eval_kernel(expr, sparams, X), []
    LA, jitter = jittered_cholesky(Kf + np.diag(r))
    beta = cho_solve((LA, True), y)
    log_evidence = -0.5 * float(y @ beta) - 0.5 * logdet_from_cholesky(LA) - 0.5 * n * LOG_2PI
    d = mu - fac.m
    Kinv_d = cho_solve((fac.LK, True), d)
    LBinv = solve_triangular(fac.LB, np.eye(n), lower=True)
    kl = 0.5 * (float(np.sum(LBinv**2)) + float(d @ Kinv_d) - n + logdet_from_cholesky(fac.LB))
    value = log_evidence - 0.25 * float(np.trace(fac.Sigma)) - kl
    if not with_grad:
        return value, None, fac
    Ainv = cho_solve((LA, True), np.eye(n))
    W = np.outer(beta, beta) - Ainv
    trW = float(np.trace(W))
    # jitter follows the mean diagonal of K_f + R
    rel = jitter / float(np.mean(np.diag(Kf) + r))
    g = 0.5 * r * (beta**2 - np.diag(Ainv) + rel * trW / n)
    c = -0.5 * g - 0.25
    dlam = -2.0 * (fac.Sigma**2) @ (c + lam)
    Z = nm.features(X)
    grads = {
        "signal": np.array(
            [0.5 * (float(np.sum(W * dK)) + rel * trW * float(np.mean(np.diag(dK)))) for dK in dKf]
        ),
        "mu": g - Kinv_d,
        "loglam": lam * dlam,
        "coef": np.concatenate([Z.T @ Kinv_d, [np.sum(Kinv_d)]]),
    }
    return value, grads, fac


def mv_bound(hgp: HGPState, data: Dataset | None = None) -> float:
    data = data or hgp.train
    value, _, _ = _bound(
        hgp.expr, hgp.params, hgp.noise_model, hgp.variational.mu, hgp.variational.lam, data, False
    )
    return value


def _nudged(params: ParamVector, entry: ParamEntry, theta: float) -> ParamVector:
    """Move one entry to transformed value theta, widening its bounds if needed."""
    value = entry.from_free(theta)
    lower, upper = min(entry.lower, value), max(entry.upper, value)
    return params.updated(**{entry.name: {"value": value, "lower": lower, "upper": upper}})


def _initial_noise(expr, data: Dataset, prefit: GPState, config: VHGPConfig):
    kernel = standardize_inputs(SE(NOISE_LABEL, noise_bindings(expr)), data.inputs)
    res = loo_residuals(prefit)
    target = np.log(np.maximum(res**2, config.residual_floor)) - LOG_CHI2_MEAN
    Z = kernel.standardized(data.inputs)
    design = np.column_stack([Z, np.ones(len(data))])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    coef = np.clip(coef, *COEF_BOUNDS)
    spread = float(np.var(target - design @ coef))
    entries: list[ParamEntry] = [positive(f"{NOISE_LABEL}.var", max(spread, 0.1), *config.variance_bounds)]
    entries += [positive(name, 1.0, *config.lengthscale_bounds) for name in kernel.ls_names()]
    names = [f"{NOISE_LABEL}.w.{b.key}" for b in kernel.binds] + [f"{NOISE_LABEL}.b"]
    entries += [real(name, value, *COEF_BOUNDS) for name, value in zip(names, coef)]
    nm = NoiseModel(kernel, ParamVector(tuple(entries)))
    m = nm.mean(data.inputs)
    Kg = nm.cov(data.inputs)
    L, _ = jittered_cholesky(Kg + LOG_CHI2_VAR * np.eye(len(data)))
    mu = m + Kg @ cho_solve((L, True), target - m)
    return nm, np.clip(mu, *MU_BOUNDS)


class BoundObjective:
    """Negative bound over one joint vector: signal, noise-GP, then mu and log Lambda.

    Calling it with a transformed free vector returns (-F, -dF/dtheta).
    """

    def __init__(self, expr, params, nm: NoiseModel, variational: VariationalState, data: Dataset):
        n = len(data)
        q = [real(f"{MU_PREFIX}{i}", variational.mu[i], *MU_BOUNDS) for i in range(n)]
        q += [positive(f"{LAM_PREFIX}{i}", variational.lam[i], *LAM_BOUNDS) for i in range(n)]
        self.expr, self.nm, self.data, self.n = expr, nm, data, n
        self.signal_names, self.noise_names = params.names, nm.params.names
        self.joint = params.concat(nm.params).concat(ParamVector(tuple(q)))
        position = {name: i for i, name in enumerate(self.joint.names)}
        self._position = position
        self._free = np.array([position[name] for name in self.joint.free_names], dtype=int)
        self._signal = [position[name] for name in params.free_names]
        self._coef = [position[name] for name in nm.coef_names]
        self._mu = [position[f"{MU_PREFIX}{i}"] for i in range(n)]
        self._lam = [position[f"{LAM_PREFIX}{i}"] for i in range(n)]
        self._fd = [name for name in nm.params.free_names if name not in nm.coef_names]

    def split(self, joint: ParamVector):
        signal = joint.select(self.signal_names)
        noise = joint.select(self.noise_names)
        mu = np.array([joint[f"{MU_PREFIX}{i}"] for i in range(self.n)])
        lam = np.array([joint[f"{LAM_PREFIX}{i}"] for i in range(self.n)])
        return signal, self.nm.with_params(noise), VariationalState(mu, lam)

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        signal, model, q = self.split(self.joint.with_free(theta))
        value, grads, _ = _bound(self.expr, signal, model, q.mu, q.lam, self.data, True)
        full = np.zeros(len(self.joint))
        full[self._signal] = grads["signal"]
        full[self._coef] = grads["coef"]
        full[self._mu] = grads["mu"]
        full[self._lam] = grads["loglam"]
        for name in self._fd:
            entry = model.params.entry(name)
            t = entry.free_value
            h = FD_STEP * max(1.0, abs(t))
            up, down = (
                _bound(self.expr, signal, model.with_params(_nudged(model.params, entry, t + s)), q.mu, q.lam, self.data, False)[0]
                for s in (h, -h)
            )
            full[self._position[name]] = (up - down) / (2 * h)
        return -value, -full[self._free]


def init_vhgp(expr, params, data: Dataset, config: VHGPConfig | None = None, noise: ParamEntry | None = None):
    """Homoscedastic pre-fit and the residual-based starting point of the bound ascent."""
    config = config or VHGPConfig()
    prefit, _ = fit_gp(expr, params, data, noise or default_noise(), config.prefit)
    nm, mu0 = _initial_noise(expr, data, prefit, config)
    variational = VariationalState(mu0, np.full(len(data), config.lam_init))
    return prefit, BoundObjective(expr, prefit.params, nm, variational, data)


def build_state(expr, params, nm, variational, data, report=None, prefit=None) -> HGPState:
    value, _, fac = _bound(expr, params, nm, variational.mu, variational.lam, data, False)
    if not np.isfinite(value):
        raise NumericalError("variational bound is not finite for the given state")
    r = np.exp(variational.mu - 0.5 * np.diag(fac.Sigma))
    signal = condition(expr, params, r, data)
    return HGPState(expr, params, nm, variational, data, signal, fac, value, report, prefit)


def fit_vhgp(
    expr: KernelExpr,
    params: ParamVector,
    data: Dataset,
    config: VHGPConfig | None = None,
    noise: ParamEntry | None = None,
) -> HGPState:
    """Homoscedastic pre-fit, residual-based initialisation, then joint bound ascent."""
    config = config or VHGPConfig()
    prefit, objective = init_vhgp(expr, params, data, config, noise)
    vg = ValueAndGrad(objective)
    start = -vg.value(objective.joint.free_vector())
    logger.info("Variational bound at initialisation: %.6f", start)
    opt = OptConfig(
        restarts=1,
        max_iter=config.max_iter,
        gtol=config.gtol,
        ftol=config.ftol,
        seed=config.prefit.seed,
    )
    try:
        report = minimize(vg.value, vg.grad, objective.joint, opt)
    except FitError as exc:
        raise FitError(f"variational bound diverged: {exc}", [-v for v in exc.trace]) from exc
    trace = [-v for v in report.restarts[0].trajectory] if report.restarts else []
    if not np.isfinite(report.best_value):
        raise FitError("variational bound diverged", trace)
    signal, nm, variational = objective.split(report.params)
    try:
        state = build_state(expr, signal, nm, variational, data, report=report, prefit=prefit)
    except NumericalError as exc:
        raise FitError(f"variational bound not finite at the optimum: {exc}", trace) from exc
    logger.info("Variational bound after fit: %.6f (start %.6f)", state.bound, start)
    return state


def predict_noise(hgp: HGPState, Xstar: Inputs) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of the log-noise process at Xstar."""
    fac = hgp.factors
    nm = hgp.noise_model
    kx = nm.cov(hgp.train.inputs, Xstar)
    Kinv_d = cho_solve((fac.LK, True), hgp.variational.mu - fac.m)
    mean = nm.mean(Xstar) + kx.T @ Kinv_d
    v = solve_triangular(fac.LB, fac.sqrt_s[:, None] * kx, lower=True)
    var = np.maximum(nm.diag(Xstar) - np.sum(v * v, axis=0), 0.0)
    return mean, var


def predict_vhgp(hgp: HGPState, Xstar: Inputs) -> Posterior:
    g_mean, g_var = predict_noise(hgp, Xstar)
    expected_noise = np.exp(g_mean + 0.5 * g_var)
    return predict(hgp.signal, Xstar, Xstar_noise=expected_noise)
