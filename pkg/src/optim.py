"""Bounded multi-start quasi-Newton minimisation and gradient verification."""

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize as scipy_minimize

from src.config import DEFAULT_MAX_ITER, DEFAULT_RESTARTS, DEFAULT_SEED
from src.errors import ConfigError, FitError, GPError, OptimizationError
from src.kernels.params import ParamVector

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]

# Returned to L-BFGS-B for points where the objective cannot be evaluated,
# so the line search backs off.
PENALTY = 1e25
BOUND_TOL = 1e-8


@dataclass(frozen=True)
class OptConfig:
    restarts: int = DEFAULT_RESTARTS
    max_iter: int = DEFAULT_MAX_ITER
    gtol: float = 1e-6
    ftol: float = 1e-12
    max_linesearch: int = 20
    history: int = 10
    seed: int = DEFAULT_SEED
    workers: int = 1
    # candidate locations per switch scanned before the restarts; 0 disables
    switch_scan: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if not (self.gtol > 0 and self.ftol > 0):
            raise ConfigError("tolerances must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.switch_scan < 0:
            raise ConfigError("switch_scan must not be negative")


@dataclass
class RestartResult:
    index: int
    start: np.ndarray
    x: np.ndarray
    value: float
    trajectory: list[float] = field(default_factory=list)
    converged: bool = False
    message: str = ""
    n_iter: int = 0


@dataclass
class FitReport:
    best_value: float
    params: ParamVector
    restarts: list[RestartResult]
    duration_s: float
    converged: bool
    active_bounds: list[str] = field(default_factory=list)

    @property
    def trajectories(self) -> list[list[float]]:
        return [r.trajectory for r in self.restarts]

    def to_dict(self) -> dict:
        return {
            "best_value": self.best_value,
            "converged": self.converged,
            "active_bounds": self.active_bounds,
            "params": [
                {
                    "name": e.name,
                    "value": e.value,
                    "lower": e.lower,
                    "upper": e.upper,
                    "transform": e.transform.value,
                }
                for e in self.params
            ],
            "restarts": [
                {
                    "index": r.index,
                    "value": r.value,
                    "converged": r.converged,
                    "iterations": r.n_iter,
                    "message": r.message,
                    "trajectory": r.trajectory,
                }
                for r in self.restarts
            ],
            "meta": {"duration_s": self.duration_s},
        }


class ValueAndGrad:
    """Splits a combined f(x) -> (value, grad) into cached value/grad callables.

    The one-point cache is per thread so restarts may run concurrently.
    """

    def __init__(self, fun: Callable[[np.ndarray], tuple[float, np.ndarray]]):
        self.fun = fun
        self._local = threading.local()

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        cached = getattr(self._local, "x", None)
        if cached is None or not np.array_equal(x, cached):
            self._local.result = self.fun(x)
            self._local.x = x.copy()
        return self._local.result

    def value(self, x) -> float:
        return self._eval(x)[0]

    def grad(self, x) -> np.ndarray:
        return self._eval(x)[1]


def _starts(params: ParamVector, config: OptConfig) -> list[np.ndarray]:
    """Restart 0 is the given point; later ones are uniform in the transformed box.

    Starts are drawn sequentially from one seeded stream, so the first k starts
    do not depend on the total number of restarts.
    """
    x0 = params.free_vector()
    bounds = np.array(params.free_bounds(), dtype=float).reshape(-1, 2)
    rng = np.random.default_rng(config.seed)
    starts = [x0]
    for _ in range(config.restarts - 1):
        u = rng.uniform(size=x0.shape)
        lo, hi = bounds[:, 0], bounds[:, 1]
        finite = np.isfinite(lo) & np.isfinite(hi)
        starts.append(np.where(finite, lo + u * (hi - lo), x0))
    return starts


def _run_restart(index, start, objective, gradient, bounds, config) -> RestartResult:
    seen: dict[bytes, float] = {}
    trajectory: list[float] = []

    def fun(x):
        try:
            value = float(objective(x))
        except GPError as exc:
            logger.debug("Restart %d: objective failed at %s: %s", index, x, exc)
            value = PENALTY
        if not np.isfinite(value):
            value = PENALTY
        seen[x.tobytes()] = value
        return value

    def jac(x):
        try:
            g = np.asarray(gradient(x), dtype=float)
        except GPError:
            return np.zeros_like(x)
        return np.where(np.isfinite(g), g, 0.0)

    def record(xk):
        value = seen.get(np.asarray(xk).tobytes())
        if value is None:
            value = fun(np.asarray(xk, dtype=float))
        trajectory.append(value)

    first = fun(np.asarray(start, dtype=float))
    if first >= PENALTY:
        return RestartResult(index, start, start, np.inf, [np.inf], False, "objective not finite at start")
    trajectory.append(first)
    res = scipy_minimize(
        fun,
        start,
        jac=jac,
        method="L-BFGS-B",
        bounds=bounds,
        callback=record,
        options={
            "maxiter": config.max_iter,
            "gtol": config.gtol,
            "ftol": config.ftol,
            "maxls": config.max_linesearch,
            "maxcor": config.history,
        },
    )
    value = float(res.fun)
    if value >= PENALTY:
        value = np.inf
    logger.info("Restart %d finished: value=%.6f iterations=%d (%s)", index, value, res.nit, res.message)
    return RestartResult(
        index=index,
        start=np.asarray(start),
        x=np.asarray(res.x),
        value=value,
        trajectory=trajectory,
        converged=bool(res.success),
        message=str(res.message),
        n_iter=int(res.nit),
    )


def minimize(objective: Objective, gradient: Gradient, params: ParamVector, config: OptConfig) -> FitReport:
    """Minimise objective over the free, transformed entries of params."""
    t0 = time.perf_counter()
    bounds = params.free_bounds()
    if not bounds:
        value = float(objective(params.free_vector()))
        if not np.isfinite(value):
            raise OptimizationError("objective not finite and no free parameters to move")
        return FitReport(value, params, [], time.perf_counter() - t0, True)
    starts = _starts(params, config)

    # Threads share the objective closure; results come back in restart order
    results = Parallel(n_jobs=config.workers, prefer="threads")(
        delayed(_run_restart)(i, start, objective, gradient, bounds, config) for i, start in enumerate(starts)
    )

    finite = [r for r in results if np.isfinite(r.value)]
    if not finite:
        raise FitError(
            f"all {len(results)} restarts failed to produce a finite objective", results[0].trajectory
        )
    # Ties resolve to the lowest restart index
    best = min(finite, key=lambda r: (r.value, r.index))
    best_params = params.with_free(best.x)
    active = [
        name
        for name, x, (lo, hi) in zip(best_params.free_names, best.x, bounds)
        if abs(x - lo) <= BOUND_TOL * max(1.0, abs(lo)) or abs(x - hi) <= BOUND_TOL * max(1.0, abs(hi))
    ]
    if active:
        logger.info("Parameters at bounds: %s", ", ".join(active))
    return FitReport(
        best_value=best.value,
        params=best_params,
        restarts=results,
        duration_s=time.perf_counter() - t0,
        converged=best.converged,
        active_bounds=active,
    )


@dataclass
class GradCheck:
    max_error: float
    errors: dict[str, float]
    analytic: np.ndarray
    numeric: np.ndarray


def fd_check(objective: Objective, gradient: Gradient, params: ParamVector, h: float = 1e-5) -> GradCheck:
    """Central differences per transformed coordinate against the analytic gradient.

    Relative error per component is |fd - an| / max(|fd|, |an|, floor) where
    floor = 1e-6 * max(1, |f(x)|); components smaller than the floor are
    below the rounding noise of the differences and are judged against it.
    """
    if not h > 0:
        raise ConfigError("finite-difference step must be positive")
    x = params.free_vector()
    analytic = np.asarray(gradient(x), dtype=float)
    floor = 1e-6 * max(1.0, abs(float(objective(x))))
    numeric = np.empty_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        up, down = x.copy(), x.copy()
        up[i] += step
        down[i] -= step
        numeric[i] = (objective(up) - objective(down)) / (2 * step)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = np.abs(analytic - numeric) / scale
    errors = dict(zip(params.free_names, rel.tolist()))
    return GradCheck(float(rel.max(initial=0.0)), errors, analytic, numeric)
