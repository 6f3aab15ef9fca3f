"""Covariance expression tree: column bindings and the Sum/Product combinators."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import ClassVar, Iterator

import numpy as np

from src.dataset import Inputs
from src.errors import ConfigError
from src.kernels.params import ParamEntry, ParamVector

Grads = dict[str, np.ndarray]


class Transform(str, Enum):
    IDENTITY = "identity"
    COS2 = "cos2"
    NEGATE = "negate"


@dataclass(frozen=True)
class Binding:
    """A dataset column consumed by a leaf, with an optional feature transform."""

    column: str
    transform: Transform = Transform.IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "transform", Transform(self.transform))

    @property
    def key(self) -> str:
        if self.transform is Transform.IDENTITY:
            return self.column
        return f"{self.transform.value}_{self.column}"

    def resolve(self, inputs: Inputs) -> np.ndarray:
        values = inputs.column(self.column)
        if self.transform is Transform.COS2:
            return np.cos(2.0 * values)
        if self.transform is Transform.NEGATE:
            return -values
        return values


class KernelExpr(ABC):
    kind: ClassVar[str]

    def children(self) -> tuple["KernelExpr", ...]:
        return ()

    def leaves(self) -> Iterator["KernelExpr"]:
        kids = self.children()
        if not kids:
            yield self
        for child in kids:
            yield from child.leaves()

    def bindings(self) -> tuple[Binding, ...]:
        return ()

    @abstractmethod
    def evaluate(self, params: ParamVector, X1: Inputs, X2: Inputs) -> np.ndarray:
        ...

    @abstractmethod
    def diag(self, params: ParamVector, X: Inputs) -> np.ndarray:
        ...

    @abstractmethod
    def gradients(self, params: ParamVector, X: Inputs) -> tuple[np.ndarray, Grads]:
        """Training covariance and its derivatives w.r.t. transformed parameters."""

    def default_params(self, inputs: Inputs, hints: dict[str, float]) -> list[ParamEntry]:
        return []


def _accumulate(total: Grads, name: str, value: np.ndarray) -> None:
    if name in total:
        total[name] = total[name] + value
    else:
        total[name] = value


@dataclass(frozen=True)
class Sum(KernelExpr):
    terms: tuple[KernelExpr, ...]
    kind: ClassVar[str] = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if len(self.terms) < 2:
            raise ConfigError("a sum needs at least two terms")

    def children(self):
        return self.terms

    def evaluate(self, params, X1, X2):
        return reduce(np.add, (t.evaluate(params, X1, X2) for t in self.terms))

    def diag(self, params, X):
        return reduce(np.add, (t.diag(params, X) for t in self.terms))

    def gradients(self, params, X):
        K = None
        grads: Grads = {}
        for term in self.terms:
            Kt, gt = term.gradients(params, X)
            K = Kt if K is None else K + Kt
            for name, g in gt.items():
                _accumulate(grads, name, g)
        return K, grads


@dataclass(frozen=True)
class Product(KernelExpr):
    factors: tuple[KernelExpr, ...]
    kind: ClassVar[str] = "product"

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 2:
            raise ConfigError("a product needs at least two factors")

    def children(self):
        return self.factors

    def evaluate(self, params, X1, X2):
        return reduce(np.multiply, (f.evaluate(params, X1, X2) for f in self.factors))

    def diag(self, params, X):
        return reduce(np.multiply, (f.diag(params, X) for f in self.factors))

    def gradients(self, params, X):
        parts = [f.gradients(params, X) for f in self.factors]
        mats = [K for K, _ in parts]
        grads: Grads = {}
        for i, (_, gi) in enumerate(parts):
            if not gi:
                continue
            others = reduce(np.multiply, (m for j, m in enumerate(mats) if j != i))
            for name, g in gi.items():
                _accumulate(grads, name, g * others)
        return reduce(np.multiply, mats), grads
