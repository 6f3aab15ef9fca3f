"""evaluate: score a predictions CSV against TEST targets."""

import logging

import numpy as np
import pandas as pd

from src.commands.modelling import load_fitted, require
from src.commands.router import Router
from src.errors import ConfigError, DataError
from src.ingest import read_dataset, read_frame, write_frame, write_json
from src.kernels import sigmoid, switches
from src.metrics import score
from src.runconfig import RunConfig

logger = logging.getLogger(__name__)

router = Router()

CURVE_POINTS = 200


def training_moments(config: RunConfig) -> tuple[float, float]:
    """Mean and population variance of the training targets (TRAIN, else the stored model)."""
    if config.train is not None:
        y = read_dataset(config.train, config.target).y
        return float(np.mean(y)), float(np.var(y))
    if config.model_path.is_file():
        model = load_fitted(config.model_path)
        return model.stored.y_mean, model.stored.y_scale**2
    raise ConfigError("evaluate needs TRAIN or a fitted MODEL for the trivial-predictor baseline")


def region_masks(config: RunConfig, frame: pd.DataFrame) -> dict[str, np.ndarray]:
    masks = {}
    for name, region in sorted(config.regions.items()):
        if region.column not in frame.columns:
            raise ConfigError(f"region {name}: column {region.column!r} not in test data")
        values = frame[region.column].to_numpy()
        masks[name] = (values >= region.lower) & (values <= region.upper)
    return masks


def sigmoid_curves(config: RunConfig) -> list[str]:
    """Write sigma+ and sigma- over the observed range of each switch input."""
    model = load_fitted(config.model_path)
    written = []
    for tag, binding in switches(model.expr).items():
        z = binding.resolve(model.state.train.inputs)
        grid = np.linspace(float(np.min(z)), float(np.max(z)), CURVE_POINTS)
        a, x0 = model.stored.params[f"{tag}.a"], model.stored.params[f"{tag}.x0"]
        frame = pd.DataFrame(
            {"z": grid, "sigma_pos": sigmoid(grid, a, x0), "sigma_neg": sigmoid(grid, -a, x0)}
        )
        written.append(write_frame(frame, config.out / f"sigmoid_{tag}.csv").name)
    return written


@router.command("evaluate", help="NMSE/MSLL of PREDICTIONS against TEST, with optional regions")
def evaluate(config: RunConfig, args) -> int:
    test = read_frame(require(config.test, "TEST"))
    if config.target not in test.columns:
        raise ConfigError(f"test data lacks target column {config.target!r}")
    predictions = read_frame(config.predictions or config.out / "predictions.csv")
    for column in ("mean", "std_total"):
        if column not in predictions.columns:
            raise ConfigError(f"predictions lack column {column!r}")
    if len(predictions) != len(test):
        raise DataError(f"{len(predictions)} predictions for {len(test)} test rows")
    train_mean, train_var = training_moments(config)
    report = score(
        test[config.target].to_numpy(),
        predictions["mean"].to_numpy(),
        predictions["std_total"].to_numpy() ** 2,
        train_mean,
        train_var,
        region_masks(config, test),
    )
    result = report.to_dict()
    if config.sigmoid_curves:
        result["sigmoid_curves"] = sigmoid_curves(config)
    write_json(result, config.out / "score_report.json")
    logger.info("Scores: NMSE=%.4f%% MSLL=%.4f over %d points", report.nmse, report.msll, report.n)
    return 0
