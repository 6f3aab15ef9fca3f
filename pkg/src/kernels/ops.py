"""Whole-tree kernel operations: evaluation, gradients and parameter defaults."""

import logging
from dataclasses import replace
from typing import Callable

import numpy as np

from src.dataset import Inputs
from src.errors import ConfigError
from src.kernels.expr import Binding, KernelExpr, Product, Sum
from src.kernels.leaves import SE, Sigmoid
from src.kernels.params import ParamVector

logger = logging.getLogger(__name__)


def _mirror(K: np.ndarray) -> np.ndarray:
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def check_bindings(expr: KernelExpr, inputs: Inputs) -> None:
    missing = sorted({b.column for leaf in expr.leaves() for b in leaf.bindings()} - set(inputs.columns))
    if missing:
        raise ConfigError(f"kernel binds missing column(s): {', '.join(missing)}")


def eval_kernel(expr: KernelExpr, params: ParamVector, X: Inputs, X2: Inputs | None = None) -> np.ndarray:
    """K(X, X2); with X2 omitted the result is the exactly symmetric training covariance."""
    check_bindings(expr, X)
    if X2 is None:
        return _mirror(expr.evaluate(params, X, X))
    check_bindings(expr, X2)
    return expr.evaluate(params, X, X2)


def kernel_diag(expr: KernelExpr, params: ParamVector, X: Inputs) -> np.ndarray:
    check_bindings(expr, X)
    return expr.diag(params, X)


def kernel_value_and_grad(expr: KernelExpr, params: ParamVector, X: Inputs) -> tuple[np.ndarray, list[np.ndarray]]:
    """Training covariance plus dK/dtheta for every free entry of params, in order."""
    check_bindings(expr, X)
    K, grads = expr.gradients(params, X)
    zero = None
    out = []
    for name in params.free_names:
        g = grads.get(name)
        if g is None:
            if zero is None:
                zero = np.zeros_like(K)
            g = zero
        out.append(_mirror(g))
    return _mirror(K), out


def kernel_grad(expr: KernelExpr, params: ParamVector, X: Inputs) -> list[np.ndarray]:
    return kernel_value_and_grad(expr, params, X)[1]


def map_leaves(expr: KernelExpr, fn: Callable[[KernelExpr], KernelExpr]) -> KernelExpr:
    if isinstance(expr, Sum):
        return Sum(tuple(map_leaves(t, fn) for t in expr.terms))
    if isinstance(expr, Product):
        return Product(tuple(map_leaves(f, fn) for f in expr.factors))
    return fn(expr)


def standardize_inputs(expr: KernelExpr, inputs: Inputs) -> KernelExpr:
    """Fix z-scoring of every SE leaf's columns from the given (training) inputs.

    Physical leaves keep raw units so their hyperparameters stay interpretable.
    """

    def fit(leaf: KernelExpr) -> KernelExpr:
        if not isinstance(leaf, SE):
            return leaf
        Z = np.column_stack([b.resolve(inputs) for b in leaf.binds])
        scale = Z.std(axis=0)
        scale[scale < 1e-12] = 1.0
        return replace(leaf, center=tuple(Z.mean(axis=0)), scale=tuple(scale))

    return map_leaves(expr, fit)


def switches(expr: KernelExpr) -> dict[str, Binding]:
    """Switch tag -> bound input, in order of first appearance."""
    found: dict[str, Binding] = {}
    for leaf in expr.leaves():
        if isinstance(leaf, Sigmoid):
            seen = found.setdefault(leaf.tag, leaf.input)
            if seen != leaf.input:
                raise ConfigError(f"switch {leaf.tag!r} bound to both {seen.key} and {leaf.input.key}")
    return found


def default_params(
    expr: KernelExpr,
    inputs: Inputs,
    init: dict[str, float] | None = None,
    bounds: dict[str, tuple[float, float]] | None = None,
) -> ParamVector:
    """Data-adaptive defaults for every parameter the tree references, then overrides.

    `bounds` with lower == upper fixes a parameter at that value.
    """
    init = dict(init or {})
    bounds = dict(bounds or {})
    entries = {}
    for leaf in expr.leaves():
        for entry in leaf.default_params(inputs, init):
            entries.setdefault(entry.name, entry)
    params = ParamVector(tuple(entries.values()))
    unknown = sorted((set(init) | set(bounds)) - set(entries))
    if unknown:
        raise ConfigError(f"overrides for unknown parameter(s): {', '.join(unknown)}")
    changes = {}
    for name, entry in entries.items():
        fields = {}
        if name in bounds:
            fields["lower"], fields["upper"] = map(float, bounds[name])
        if name in init:
            fields["value"] = float(init[name])
        elif name in bounds:
            lo, hi = fields["lower"], fields["upper"]
            fields["value"] = float(np.clip(entry.value, lo, hi))
        if fields:
            changes[name] = fields
    if changes:
        params = params.updated(**changes)
    logger.debug("Kernel parameters: %s", params.as_dict())
    return params
