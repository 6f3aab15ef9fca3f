"""Leaf covariance functions.

SE is the ARD squared exponential, Poly2 the second order polynomial used for
quadratic lift, SDOF the covariance of a damped single-degree-of-freedom
oscillator under white-noise forcing, and Sigmoid/SigmoidNeg the rank-one
gates that build change-point kernels. A Sigmoid and a SigmoidNeg with the
same tag share one (a, x0) pair.
"""

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from src.dataset import Inputs
from src.errors import InvalidArgumentError, KernelDomainError
from src.kernels.expr import Binding, Grads, KernelExpr
from src.kernels.params import ParamVector, positive, real

MAX_EXPONENT = 700.0

# Default bounds
SIGMOID_A_BOUNDS = (0.01, 100.0)
LENGTHSCALE_BOUNDS = (1e-3, 1e3)
VARIANCE_BOUNDS = (1e-6, 1e4)
ZETA_BOUNDS = (1e-3, 0.99)


def sigmoid(x, a, x0):
    """1 / (1 + exp(-a (x - x0))) with the exponent clamped to +-700."""
    x = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(a)) and np.all(np.isfinite(x0))):
        raise InvalidArgumentError("sigmoid arguments must be finite")
    out = expit(np.clip(a * (x - x0), -MAX_EXPONENT, MAX_EXPONENT))
    return float(out) if out.ndim == 0 else out


def _stack(bindings: tuple[Binding, ...], inputs: Inputs) -> np.ndarray:
    return np.column_stack([b.resolve(inputs) for b in bindings])


@dataclass(frozen=True)
class SE(KernelExpr):
    label: str
    binds: tuple[Binding, ...]
    center: tuple[float, ...] | None = None
    scale: tuple[float, ...] | None = None
    kind: ClassVar[str] = "se"

    def __post_init__(self):
        object.__setattr__(self, "binds", tuple(self.binds))

    def bindings(self):
        return self.binds

    @property
    def var_name(self) -> str:
        return f"{self.label}.var"

    def ls_names(self) -> list[str]:
        return [f"{self.label}.ls.{b.key}" for b in self.binds]

    def standardized(self, X: Inputs) -> np.ndarray:
        Z = _stack(self.binds, X)
        if self.center is not None:
            Z = (Z - np.asarray(self.center)) / np.asarray(self.scale)
        return Z

    def _lengthscales(self, params: ParamVector) -> np.ndarray:
        return np.array([params[n] for n in self.ls_names()])

    def evaluate(self, params, X1, X2):
        ls = self._lengthscales(params)
        d2 = cdist(self.standardized(X1) / ls, self.standardized(X2) / ls, "sqeuclidean")
        return params[self.var_name] * np.exp(-0.5 * d2)

    def diag(self, params, X):
        return np.full(len(X), params[self.var_name])

    def gradients(self, params, X):
        Z = self.standardized(X)
        ls = self._lengthscales(params)
        K = self.evaluate(params, X, X)
        var = params.entry(self.var_name)
        grads: Grads = {}
        if not var.fixed:
            grads[var.name] = K / var.value * var.jacobian()
        for d, name in enumerate(self.ls_names()):
            entry = params.entry(name)
            if entry.fixed:
                continue
            r2 = (Z[:, d, None] - Z[None, :, d]) ** 2
            grads[name] = K * r2 / ls[d] ** 3 * entry.jacobian()
        return K, grads

    def default_params(self, inputs, hints):
        entries = [positive(self.var_name, 1.0, *VARIANCE_BOUNDS)]
        Z = self.standardized(inputs)
        for d, name in enumerate(self.ls_names()):
            spread = 1.0 if self.center is not None else float(np.std(Z[:, d])) or 1.0
            lo, hi = LENGTHSCALE_BOUNDS
            entries.append(positive(name, spread, lo * spread, hi * spread))
        return entries


@dataclass(frozen=True)
class Poly2(KernelExpr):
    label: str
    binds: tuple[Binding, ...]
    kind: ClassVar[str] = "poly2"

    def __post_init__(self):
        object.__setattr__(self, "binds", tuple(self.binds))

    def bindings(self):
        return self.binds

    def _base(self, params, X1, X2):
        return _stack(self.binds, X1) @ _stack(self.binds, X2).T + params[f"{self.label}.c"]

    def evaluate(self, params, X1, X2):
        return params[f"{self.label}.var"] * self._base(params, X1, X2) ** 2

    def diag(self, params, X):
        U = _stack(self.binds, X)
        return params[f"{self.label}.var"] * (np.sum(U * U, axis=1) + params[f"{self.label}.c"]) ** 2

    def gradients(self, params, X):
        G = self._base(params, X, X)
        var = params.entry(f"{self.label}.var")
        c = params.entry(f"{self.label}.c")
        K = var.value * G**2
        grads: Grads = {}
        if not var.fixed:
            grads[var.name] = G**2 * var.jacobian()
        if not c.fixed:
            grads[c.name] = 2.0 * var.value * G * c.jacobian()
        return K, grads

    def default_params(self, inputs, hints):
        U = _stack(self.binds, inputs)
        c = hints.get(f"{self.label}.c", 1.0)
        level = float(np.mean((np.sum(U * U, axis=1) + c) ** 2)) or 1.0
        # Prior variance of the leaf starts near one in target units
        init = 1.0 / level
        return [
            positive(f"{self.label}.var", init, init * 1e-6, init * 1e4),
            real(f"{self.label}.c", c, 0.0, 1e4),
        ]


def sdof_covariance(tau, sigma2: float, m: float, zeta: float, wn: float) -> np.ndarray:
    if not 0.0 < zeta < 1.0:
        raise KernelDomainError(f"SDOF damping ratio must lie in (0, 1), got {zeta}")
    wd = wn * math.sqrt(1.0 - zeta**2)
    atau = np.abs(tau)
    amplitude = sigma2 / (4.0 * m**2 * zeta * wn**3)
    return amplitude * np.exp(-zeta * wn * atau) * (
        np.cos(wd * tau) + (zeta * wn / wd) * np.sin(wd * atau)
    )


@dataclass(frozen=True)
class SDOF(KernelExpr):
    label: str
    input: Binding
    kind: ClassVar[str] = "sdof"
    fd_step: ClassVar[float] = 1e-6

    def bindings(self):
        return (self.input,)

    @property
    def names(self) -> tuple[str, str, str, str]:
        return tuple(f"{self.label}.{p}" for p in ("sigma2", "m", "zeta", "wn"))

    def _values(self, params) -> list[float]:
        return [params[n] for n in self.names]

    def _tau(self, X1, X2):
        return self.input.resolve(X1)[:, None] - self.input.resolve(X2)[None, :]

    def evaluate(self, params, X1, X2):
        return sdof_covariance(self._tau(X1, X2), *self._values(params))

    def diag(self, params, X):
        return np.full(len(X), float(sdof_covariance(0.0, *self._values(params))))

    def gradients(self, params, X):
        tau = self._tau(X, X)
        values = self._values(params)
        K = sdof_covariance(tau, *values)
        grads: Grads = {}
        s_entry, m_entry = params.entry(self.names[0]), params.entry(self.names[1])
        if not s_entry.fixed:
            grads[s_entry.name] = K / s_entry.value * s_entry.jacobian()
        if not m_entry.fixed:
            grads[m_entry.name] = -2.0 * K / m_entry.value * m_entry.jacobian()
        # zeta and wn by central differences on the transformed value
        for slot in (2, 3):
            entry = params.entry(self.names[slot])
            if entry.fixed:
                continue
            theta = entry.free_value
            h = self.fd_step * max(1.0, abs(theta))
            up, down = list(values), list(values)
            up[slot] = entry.from_free(theta + h)
            down[slot] = entry.from_free(theta - h)
            grads[entry.name] = (sdof_covariance(tau, *up) - sdof_covariance(tau, *down)) / (2 * h)
        return K, grads

    def default_params(self, inputs, hints):
        sigma2, m, zeta, wn = self.names
        m0 = hints.get(m, 1.0)
        z0 = hints.get(zeta, 0.05)
        w0 = hints.get(wn, 2.0 * math.pi)
        # sigma2 such that the stationary variance starts at one
        s0 = hints.get(sigma2, 4.0 * m0**2 * z0 * w0**3)
        return [
            positive(sigma2, s0, s0 * 1e-10, s0 * 1e6),
            positive(m, m0, m0, m0),
            positive(zeta, z0, *ZETA_BOUNDS),
            positive(wn, w0, w0 / 4.0, w0 * 4.0),
        ]


@dataclass(frozen=True)
class Sigmoid(KernelExpr):
    tag: str
    input: Binding
    kind: ClassVar[str] = "sw"
    sign: ClassVar[float] = 1.0

    def bindings(self):
        return (self.input,)

    @property
    def a_name(self) -> str:
        return f"{self.tag}.a"

    @property
    def x0_name(self) -> str:
        return f"{self.tag}.x0"

    def gate(self, params: ParamVector, X: Inputs) -> np.ndarray:
        return sigmoid(self.input.resolve(X), self.sign * params[self.a_name], params[self.x0_name])

    def evaluate(self, params, X1, X2):
        return np.outer(self.gate(params, X1), self.gate(params, X2))

    def diag(self, params, X):
        return self.gate(params, X) ** 2

    def gradients(self, params, X):
        z = self.input.resolve(X)
        a, x0 = params.entry(self.a_name), params.entry(self.x0_name)
        s = sigmoid(z, self.sign * a.value, x0.value)
        slope = s * (1.0 - s)
        grads: Grads = {}
        if not a.fixed:
            ds = self.sign * slope * (z - x0.value) * a.jacobian()
            grads[a.name] = np.outer(ds, s) + np.outer(s, ds)
        if not x0.fixed:
            ds = -self.sign * a.value * slope * x0.jacobian()
            grads[x0.name] = np.outer(ds, s) + np.outer(s, ds)
        return np.outer(s, s), grads

    def default_params(self, inputs, hints):
        z = self.input.resolve(inputs)
        lo, hi = float(np.min(z)), float(np.max(z))
        if hi - lo < 1e-12:
            lo, hi = lo - 1.0, hi + 1.0
        return [
            real(self.a_name, hints.get(self.a_name, 1.0), *SIGMOID_A_BOUNDS),
            real(self.x0_name, hints.get(self.x0_name, 0.5 * (lo + hi)), lo, hi),
        ]


@dataclass(frozen=True)
class SigmoidNeg(Sigmoid):
    kind: ClassVar[str] = "swneg"
    sign: ClassVar[float] = -1.0


LEAF_TYPES: dict[str, type[KernelExpr]] = {
    cls.kind: cls for cls in (SE, Poly2, SDOF, Sigmoid, SigmoidNeg)
}
