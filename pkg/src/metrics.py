"""Prediction scores: NMSE in percent and mean standardised log loss."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from src.errors import DataError, InvalidArgumentError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


def _vectors(*arrays) -> list[np.ndarray]:
    out = [np.asarray(a, dtype=float).ravel() for a in arrays]
    n = out[0].size
    if any(a.size != n for a in out):
        raise InvalidArgumentError("score inputs must have equal lengths")
    if not all(np.all(np.isfinite(a)) for a in out):
        raise InvalidArgumentError("score inputs must be finite")
    return out


def nmse(y_true, y_pred) -> float:
    """100 * SSE / (N * var(y_true)), population variance."""
    y, yhat = _vectors(y_true, y_pred)
    if y.size < 2:
        raise InvalidArgumentError("NMSE needs at least two points")
    var = float(np.var(y))
    if var <= 0:
        raise DataError("NMSE undefined for constant targets")
    return 100.0 * float(np.sum((y - yhat) ** 2)) / (y.size * var)


def _neg_log_density(y, mean, var) -> np.ndarray:
    return 0.5 * (LOG_2PI + np.log(var) + (y - mean) ** 2 / var)


def msll(y_true, pred_mean, pred_var, train_mean: float, train_var: float) -> float:
    """Mean of -log N(y; mu, v) + log N(y; train_mean, train_var)."""
    y, mu, v = _vectors(y_true, pred_mean, pred_var)
    if np.any(v <= 0) or not train_var > 0:
        raise InvalidArgumentError("predictive and training variances must be positive")
    model = _neg_log_density(y, mu, v)
    trivial = _neg_log_density(y, float(train_mean), float(train_var))
    return float(np.mean(model - trivial))


@dataclass
class RegionScore:
    name: str
    n: int
    nmse: float | None
    msll: float | None


@dataclass
class ScoreReport:
    nmse: float
    msll: float
    n: int
    regions: list[RegionScore] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "nmse": self.nmse,
            "msll": self.msll,
            "n": self.n,
            "regions": {
                r.name: {"n": r.n, "nmse": r.nmse, "msll": r.msll} for r in self.regions
            },
            # regional NMSE uses the variance of the targets inside the region
            "region_nmse_normalisation": "regional",
        }


def score(
    y_true,
    pred_mean,
    pred_var,
    train_mean: float,
    train_var: float,
    regions: dict[str, np.ndarray] | None = None,
) -> ScoreReport:
    """Full-set scores plus one entry per named boolean region mask."""
    y, mu, v = _vectors(y_true, pred_mean, pred_var)
    report = ScoreReport(nmse(y, mu), msll(y, mu, v, train_mean, train_var), int(y.size))
    for name, mask in (regions or {}).items():
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != y.shape:
            raise InvalidArgumentError(f"region {name!r} mask has the wrong length")
        n = int(mask.sum())
        if n < 2 or float(np.var(y[mask])) <= 0:
            logger.warning("Region %s has %d usable points, scores left empty", name, n)
            report.regions.append(RegionScore(name, n, None, None))
            continue
        report.regions.append(
            RegionScore(
                name,
                n,
                nmse(y[mask], mu[mask]),
                msll(y[mask], mu[mask], v[mask], train_mean, train_var),
            )
        )
    return report
