"""Flat, named, bounded hyperparameter vectors.

Optimisation happens in the transformed space: `log` entries are optimised as
log(value), `identity` entries as the value itself. Entries whose lower and
upper bounds coincide are fixed and never appear in the free vector.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from src.errors import ConfigError


class ParamTransform(str, Enum):
    LOG = "log"
    IDENTITY = "identity"


@dataclass(frozen=True)
class ParamEntry:
    name: str
    value: float
    lower: float
    upper: float
    transform: ParamTransform = ParamTransform.IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "transform", ParamTransform(self.transform))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if not self.lower <= self.upper:
            raise ConfigError(f"{self.name}: lower bound {self.lower} exceeds upper {self.upper}")
        if not self.lower <= self.value <= self.upper:
            raise ConfigError(
                f"{self.name}: value {self.value} outside bounds [{self.lower}, {self.upper}]"
            )
        if self.transform is ParamTransform.LOG and not self.lower > 0:
            raise ConfigError(f"{self.name}: log-transformed parameter needs a positive lower bound")

    @property
    def fixed(self) -> bool:
        return self.lower == self.upper

    def to_free(self, value: float) -> float:
        return float(np.log(value)) if self.transform is ParamTransform.LOG else float(value)

    def from_free(self, theta: float) -> float:
        return float(np.exp(theta)) if self.transform is ParamTransform.LOG else float(theta)

    @property
    def free_value(self) -> float:
        return self.to_free(self.value)

    @property
    def free_bounds(self) -> tuple[float, float]:
        return self.to_free(self.lower), self.to_free(self.upper)

    def jacobian(self) -> float:
        """d value / d theta at the current value."""
        return self.value if self.transform is ParamTransform.LOG else 1.0


def positive(name: str, value: float, lower: float, upper: float) -> ParamEntry:
    return ParamEntry(name, float(np.clip(value, lower, upper)), lower, upper, ParamTransform.LOG)


def real(name: str, value: float, lower: float, upper: float) -> ParamEntry:
    return ParamEntry(name, float(np.clip(value, lower, upper)), lower, upper, ParamTransform.IDENTITY)


@dataclass(frozen=True)
class ParamVector:
    entries: tuple[ParamEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ConfigError(f"duplicate parameter names: {', '.join(dupes)}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> float:
        return self.entry(name).value

    def entry(self, name: str) -> ParamEntry:
        try:
            return self.entries[self._index[name]]
        except KeyError:
            raise ConfigError(f"unknown parameter {name!r}") from None

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def free_names(self) -> list[str]:
        return [e.name for e in self.entries if not e.fixed]

    def free_vector(self) -> np.ndarray:
        return np.array([e.free_value for e in self.entries if not e.fixed], dtype=float)

    def free_bounds(self) -> list[tuple[float, float]]:
        return [e.free_bounds for e in self.entries if not e.fixed]

    def free_jacobian(self) -> np.ndarray:
        return np.array([e.jacobian() for e in self.entries if not e.fixed], dtype=float)

    def with_free(self, theta) -> "ParamVector":
        """New vector with free entries set from transformed values, clipped into bounds."""
        theta = np.asarray(theta, dtype=float)
        free = [e for e in self.entries if not e.fixed]
        if theta.shape != (len(free),):
            raise ConfigError(f"expected {len(free)} free values, got shape {theta.shape}")
        it = iter(theta)
        entries = []
        for e in self.entries:
            if e.fixed:
                entries.append(e)
                continue
            value = float(np.clip(e.from_free(next(it)), e.lower, e.upper))
            entries.append(replace(e, value=value))
        return ParamVector(tuple(entries))

    def updated(self, **changes: dict) -> "ParamVector":
        """Replace fields of named entries, e.g. updated(**{"se1.var": {"value": 2.0}})."""
        entries = list(self.entries)
        for name, fields in changes.items():
            i = self._index.get(name)
            if i is None:
                raise ConfigError(f"unknown parameter {name!r}")
            entries[i] = replace(entries[i], **fields)
        return ParamVector(tuple(entries))

    def concat(self, other: "ParamVector") -> "ParamVector":
        return ParamVector(self.entries + other.entries)

    def select(self, names) -> "ParamVector":
        return ParamVector(tuple(self.entry(n) for n in names))

    def as_dict(self) -> dict[str, float]:
        return {e.name: e.value for e in self.entries}
