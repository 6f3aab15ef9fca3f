"""CSV ingestion and emission, JSON reports."""

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from src.dataset import Dataset, Inputs
from src.errors import ConfigError, DataError

logger = logging.getLogger(__name__)


def read_frame(path: str | Path) -> pd.DataFrame:
    """Header row required; every cell must be a finite number."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"data file not found: {path}")
    try:
        header = pd.read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False).iloc[0]
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: unreadable CSV ({exc})") from exc
    # pandas renames repeated headers to "x.1", so check the raw row
    repeated = sorted(set(header[header.duplicated()]))
    if repeated:
        raise DataError(f"{path}: duplicate column name(s) {', '.join(map(repr, repeated))}")
    if frame.empty:
        raise DataError(f"{path}: no data rows")
    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        raise DataError(
            f"{path}: row {row + 1}, column {frame.columns[col]!r}: "
            f"non-numeric or non-finite value {frame.iat[row, col]!r}"
        )
    logger.info("Read %s: %d rows, %d columns", path, len(numeric), numeric.shape[1])
    return numeric.astype(float)


def frame_to_dataset(frame: pd.DataFrame, target: str) -> Dataset:
    if target not in frame.columns:
        raise ConfigError(f"target column {target!r} missing; available: {', '.join(frame.columns)}")
    inputs = frame.drop(columns=[target])
    if inputs.shape[1] == 0:
        raise DataError("dataset has no input columns")
    return Dataset(Inputs(tuple(inputs.columns), inputs.to_numpy()), frame[target].to_numpy(), target)


def read_dataset(path: str | Path, target: str = "y") -> Dataset:
    return frame_to_dataset(read_frame(path), target)


def dataset_frame(data: Dataset) -> pd.DataFrame:
    frame = pd.DataFrame(data.inputs.values, columns=list(data.columns))
    frame[data.target] = data.y
    return frame


def write_frame(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(obj, path: str | Path) -> Path:
    """Sorted keys and fixed indent; non-finite numbers become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")
    logger.info("Wrote %s", path)
    return path
