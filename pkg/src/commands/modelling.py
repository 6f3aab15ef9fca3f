"""fit, predict, gradcheck and sample."""

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from src.commands.router import Router
from src.dataset import Dataset, Inputs
from src.dsl import KernelSpec, build_kernel, format_kernel_spec, parse_kernel_spec
from src.errors import ConfigError, DataError, NumericalError
from src.gp import NOISE_NAME, GPState, Posterior, condition, default_noise, fit_gp, nlml_objective, predict, sample_prior
from src.ingest import read_dataset, read_frame, write_frame, write_json
from src.kernels import SE, KernelExpr, ParamEntry, ParamVector, default_params, standardize_inputs, switches
from src.optim import OptConfig, ValueAndGrad, fd_check
from src.runconfig import RunConfig
from src.store.repositories import StoredModel, read_container, write_container
from src.vhgp import (
    LAM_PREFIX,
    MU_PREFIX,
    NOISE_LABEL,
    HGPState,
    NoiseModel,
    VariationalState,
    VHGPConfig,
    build_state,
    fit_vhgp,
    init_vhgp,
    noise_bindings,
    predict_vhgp,
)

logger = logging.getLogger(__name__)

router = Router()

GRADCHECK_TOLERANCE = 1e-3


def require(value, key: str):
    if value is None or value == "":
        raise ConfigError(f"{key} is not set in the run config")
    return value


def opt_config(config: RunConfig) -> OptConfig:
    return OptConfig(
        restarts=config.restarts,
        max_iter=config.max_iter,
        gtol=config.gtol,
        ftol=config.ftol,
        seed=config.seed,
        workers=config.workers,
        switch_scan=config.switch_scan,
    )


def vhgp_config(config: RunConfig) -> VHGPConfig:
    return VHGPConfig(
        prefit=opt_config(config),
        max_iter=config.max_iter,
        lengthscale_bounds=config.noise_gp_lengthscale_bounds,
    )


def noise_entry(config: RunConfig) -> ParamEntry:
    """Homoscedastic noise variance with INIT_/BOUNDS_ overrides applied."""
    entry = default_noise()
    fields = {}
    if NOISE_NAME in config.bounds:
        lo, hi = config.bounds[NOISE_NAME]
        fields.update(lower=lo, upper=hi, value=float(np.clip(entry.value, lo, hi)))
    if NOISE_NAME in config.init:
        fields["value"] = config.init[NOISE_NAME]
    return replace(entry, **fields) if fields else entry


def build_expr(kernel: str, columns, groups, inputs: Inputs | None = None, standardize: bool = False):
    spec = parse_kernel_spec(kernel)
    expr = build_kernel(spec, columns, groups)
    switches(expr)
    if standardize and inputs is not None:
        expr = standardize_inputs(expr, inputs)
    return spec, expr


# --- Training ---


@dataclass
class Training:
    spec: KernelSpec
    expr: KernelExpr
    params: ParamVector
    noise: ParamEntry
    data: Dataset  # targets standardised
    y_mean: float
    y_scale: float


def prepare_training(config: RunConfig) -> Training:
    """Read TRAIN, build the kernel and its default parameters on standardised targets."""
    raw = read_dataset(require(config.train, "TRAIN"), config.target)
    spec, expr = build_expr(
        require(config.kernel, "KERNEL"), raw.columns, config.groups, raw.inputs, config.standardize
    )
    y_mean, y_scale = float(np.mean(raw.y)), float(np.std(raw.y))
    if y_scale <= 0:
        raise DataError("training targets are constant")
    data = Dataset(raw.inputs, (raw.y - y_mean) / y_scale, raw.target)
    init = {k: v for k, v in config.init.items() if k != NOISE_NAME}
    bounds = {k: v for k, v in config.bounds.items() if k != NOISE_NAME}
    params = default_params(expr, raw.inputs, init, bounds)
    return Training(spec, expr, params, noise_entry(config), data, y_mean, y_scale)


def stored_model(training: Training, state: GPState | HGPState, config: RunConfig) -> StoredModel:
    common = dict(
        kernel=format_kernel_spec(training.spec),
        target=training.data.target,
        columns=training.data.columns,
        train_x=training.data.inputs.values,
        train_y=training.data.y,
        groups=config.groups,
        standardize=config.standardize,
        y_mean=training.y_mean,
        y_scale=training.y_scale,
    )
    if isinstance(state, HGPState):
        return StoredModel(
            noise_model="heteroscedastic",
            params=state.params,
            noise_gp=state.noise_model.params,
            arrays={"q_mu": state.variational.mu, "q_lam": state.variational.lam},
            **common,
        )
    return StoredModel(noise_model="homoscedastic", params=state.params, noise=state.noise, **common)


# --- Fitted models ---


@dataclass
class FittedModel:
    stored: StoredModel
    expr: KernelExpr
    state: GPState | HGPState

    @property
    def heteroscedastic(self) -> bool:
        return isinstance(self.state, HGPState)

    def predict(self, X: Inputs) -> Posterior:
        """Posterior in the original target units."""
        if self.heteroscedastic:
            post = predict_vhgp(self.state, X)
        else:
            post = predict(self.state, X)
        s2 = self.stored.y_scale**2
        return Posterior(
            post.mean * self.stored.y_scale + self.stored.y_mean,
            post.var_latent * s2,
            post.var_noisy * s2,
        )


def restore(stored: StoredModel) -> FittedModel:
    inputs = Inputs(stored.columns, stored.train_x)
    data = Dataset(inputs, stored.train_y, stored.target)
    _, expr = build_expr(stored.kernel, stored.columns, stored.groups, inputs, stored.standardize)
    if stored.noise_model == "heteroscedastic":
        if stored.noise_gp is None or "q_mu" not in stored.arrays or "q_lam" not in stored.arrays:
            raise ConfigError("model container is missing the noise model")
        kernel = standardize_inputs(SE(NOISE_LABEL, noise_bindings(expr)), inputs)
        variational = VariationalState(stored.arrays["q_mu"], stored.arrays["q_lam"])
        state = build_state(expr, stored.params, NoiseModel(kernel, stored.noise_gp), variational, data)
    else:
        if stored.noise is None:
            raise ConfigError("model container is missing the noise variance")
        state = condition(expr, stored.params, stored.noise, data)
    return FittedModel(stored, expr, state)


def load_fitted(path) -> FittedModel:
    return restore(read_container(path))


def read_test_inputs(config: RunConfig, columns) -> tuple[pd.DataFrame, Inputs]:
    frame = read_frame(require(config.test, "TEST"))
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"test data lacks model column(s): {', '.join(missing)}")
    return frame, Inputs(tuple(columns), frame[list(columns)].to_numpy())


# --- Commands ---


@router.command("fit", help="fit a model; writes the model container and fit_report.json")
def fit(config: RunConfig, args) -> int:
    training = prepare_training(config)
    if config.heteroscedastic:
        state = fit_vhgp(training.expr, training.params, training.data, vhgp_config(config), training.noise)
        report, objective, value = state.report, "bound", state.bound
    else:
        state, report = fit_gp(training.expr, training.params, training.data, training.noise, opt_config(config))
        objective, value = "nlml", report.best_value
    write_container(config.model_path, stored_model(training, state, config))
    fit_dict = report.to_dict()
    fit_dict["params"] = [
        p for p in fit_dict["params"] if not p["name"].startswith((MU_PREFIX, LAM_PREFIX))
    ]
    write_json(
        {
            "kernel": format_kernel_spec(training.spec),
            "noise_model": config.noise_model,
            "n_train": len(training.data),
            "objective": objective,
            "value": value,
            "target": {"name": training.data.target, "mean": training.y_mean, "scale": training.y_scale},
            "fit": fit_dict,
        },
        config.out / "fit_report.json",
    )
    logger.info("Fit finished: %s=%.6f", objective, value)
    return 0


@router.command("predict", help="predict TEST inputs with the stored model")
def predict_command(config: RunConfig, args) -> int:
    model = load_fitted(config.model_path)
    columns = list(model.stored.columns)
    frame, X = read_test_inputs(config, columns)
    post = model.predict(X)
    out = frame[columns].copy()
    out["mean"] = post.mean
    out["std_latent"] = post.std_latent
    out["std_total"] = post.std_total
    write_frame(out, config.predictions or config.out / "predictions.csv")
    return 0


@router.command("gradcheck", help="compare analytic and finite-difference objective gradients")
def gradcheck(config: RunConfig, args) -> int:
    training = prepare_training(config)
    if config.heteroscedastic:
        _, objective = init_vhgp(
            training.expr, training.params, training.data, vhgp_config(config), training.noise
        )
        joint, fun = objective.joint, objective
    else:
        joint, fun = nlml_objective(training.expr, training.params, training.data, training.noise)
    vg = ValueAndGrad(fun)
    check = fd_check(vg.value, vg.grad, joint)
    for name, error in check.errors.items():
        print(f"{name:40s} {error:.3e}")
    print(f"{'max':40s} {check.max_error:.3e}")
    write_json(
        {
            "max_error": check.max_error,
            "tolerance": GRADCHECK_TOLERANCE,
            "errors": check.errors,
            "analytic": dict(zip(joint.free_names, check.analytic)),
            "numeric": dict(zip(joint.free_names, check.numeric)),
        },
        config.out / "gradcheck.json",
    )
    if check.max_error > GRADCHECK_TOLERANCE:
        worst = max(check.errors, key=check.errors.get)
        logger.error("Gradient check failed: %s off by %.3e", worst, check.max_error)
        return NumericalError.exit_code
    return 0


@router.command("sample", help="draw functions from the kernel prior over SAMPLE_GRID")
def sample(config: RunConfig, args) -> int:
    column = require(config.sample_column, "SAMPLE_COLUMN")
    lo, hi, n = require(config.sample_grid, "SAMPLE_GRID")
    grid = np.linspace(lo, hi, n)
    X = Inputs((column,), grid[:, None])
    _, expr = build_expr(require(config.kernel, "KERNEL"), X.columns, config.groups)
    params = default_params(expr, X, config.init, config.bounds)
    draws = sample_prior(expr, params, X, config.n_draws, config.seed)
    frame = pd.DataFrame({column: grid})
    for k in range(config.n_draws):
        frame[f"draw_{k + 1}"] = draws[:, k]
    write_frame(frame, config.out / "samples.csv")
    return 0
