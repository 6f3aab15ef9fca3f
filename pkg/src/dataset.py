"""Named-column input matrices and regression datasets."""

from dataclasses import dataclass, field

import numpy as np

from src.errors import ConfigError, DataError


@dataclass(frozen=True)
class Inputs:
    columns: tuple[str, ...]
    values: np.ndarray  # (N, D)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise DataError(
                f"input matrix shape {values.shape} does not match {len(self.columns)} columns"
            )
        if len(set(self.columns)) != len(self.columns):
            raise DataError(f"duplicate column names: {self.columns}")
        if not np.all(np.isfinite(values)):
            raise DataError("inputs contain non-finite entries")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise ConfigError(f"unknown column {name!r}; available: {', '.join(self.columns)}") from None

    def take(self, idx) -> "Inputs":
        return Inputs(self.columns, self.values[np.asarray(idx)])

    @classmethod
    def from_columns(cls, **columns) -> "Inputs":
        names = tuple(columns)
        return cls(names, np.column_stack([np.asarray(columns[n], dtype=float) for n in names]))


@dataclass(frozen=True)
class Dataset:
    inputs: Inputs
    y: np.ndarray
    target: str = "y"
    train_idx: np.ndarray | None = field(default=None, compare=False)
    test_idx: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.shape[0] != len(self.inputs):
            raise DataError(f"{y.shape[0]} targets for {len(self.inputs)} input rows")
        if y.shape[0] < 1:
            raise DataError("dataset is empty")
        if not np.all(np.isfinite(y)):
            raise DataError("targets contain non-finite entries")
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def columns(self) -> tuple[str, ...]:
        return self.inputs.columns

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.inputs.take(idx), self.y[idx], self.target)

    def train(self) -> "Dataset":
        if self.train_idx is None:
            return self
        return self.take(self.train_idx)

    def test(self) -> "Dataset":
        if self.test_idx is None:
            return self
        return self.take(self.test_idx)
