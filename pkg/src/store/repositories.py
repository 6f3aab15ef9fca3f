import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sqlalchemy import inspect, select
from sqlalchemy.exc import DatabaseError
from sqlalchemy.orm import Session

from src import __version__
from src.errors import ConfigError
from src.kernels import ParamEntry, ParamVector
from src.store.models import SCHEMA_VERSION, Array, Base, Column, ModelMeta, Parameter
from src.store.session import make_engine, make_session

logger = logging.getLogger(__name__)


@dataclass
class StoredModel:
    """Everything needed to rebuild a fitted model; factorizations are recomputed."""

    kernel: str
    noise_model: str
    target: str
    columns: tuple[str, ...]
    train_x: np.ndarray
    train_y: np.ndarray  # standardised targets the model was fitted on
    params: ParamVector
    noise: ParamEntry | None = None
    noise_gp: ParamVector | None = None
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)
    standardize: bool = True
    y_mean: float = 0.0
    y_scale: float = 1.0
    library_version: str = __version__


# --- Parameters ---

def add_params(session: Session, model_id: int, block: str, params) -> None:
    for position, e in enumerate(params):
        session.add(
            Parameter(
                model_id=model_id,
                block=block,
                position=position,
                name=e.name,
                value=e.value,
                lower=e.lower,
                upper=e.upper,
                transform=e.transform.value,
            )
        )


def get_params(session: Session, model_id: int, block: str) -> ParamVector:
    rows = session.execute(
        select(Parameter)
        .where(Parameter.model_id == model_id, Parameter.block == block)
        .order_by(Parameter.position)
    ).scalars()
    return ParamVector(tuple(ParamEntry(r.name, r.value, r.lower, r.upper, r.transform) for r in rows))


# --- Arrays ---

def add_array(session: Session, model_id: int, name: str, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    session.add(
        Array(
            model_id=model_id,
            name=name,
            shape=",".join(str(s) for s in values.shape),
            data=values.tobytes(),
        )
    )


def get_arrays(session: Session, model_id: int) -> dict[str, np.ndarray]:
    rows = session.execute(select(Array).where(Array.model_id == model_id).order_by(Array.id)).scalars()
    out = {}
    for r in rows:
        shape = tuple(int(s) for s in r.shape.split(",") if s)
        out[r.name] = np.frombuffer(r.data, dtype="<f8").reshape(shape).copy()
    return out


# --- Models ---

def save_model(session: Session, model: StoredModel) -> int:
    meta = ModelMeta(
        schema_version=SCHEMA_VERSION,
        library_version=model.library_version,
        kernel=model.kernel,
        groups=json.dumps({k: list(v) for k, v in model.groups.items()}, sort_keys=True),
        noise_model=model.noise_model,
        target=model.target,
        standardize=model.standardize,
        y_mean=model.y_mean,
        y_scale=model.y_scale,
    )
    session.add(meta)
    session.flush()
    for position, name in enumerate(model.columns):
        session.add(Column(model_id=meta.id, position=position, name=name))
    add_params(session, meta.id, "signal", model.params)
    if model.noise is not None:
        add_params(session, meta.id, "noise", (model.noise,))
    if model.noise_gp is not None:
        add_params(session, meta.id, "noise_gp", model.noise_gp)
    add_array(session, meta.id, "train_x", model.train_x)
    add_array(session, meta.id, "train_y", model.train_y)
    for name, values in model.arrays.items():
        add_array(session, meta.id, name, values)
    session.commit()
    return meta.id


def load_model(session: Session) -> StoredModel:
    meta = session.execute(select(ModelMeta).order_by(ModelMeta.id.desc())).scalars().first()
    if meta is None:
        raise ConfigError("model container holds no model")
    if meta.schema_version != SCHEMA_VERSION:
        raise ConfigError(
            f"model container schema {meta.schema_version} is not supported (expected {SCHEMA_VERSION})"
        )
    columns = session.execute(
        select(Column.name).where(Column.model_id == meta.id).order_by(Column.position)
    ).scalars()
    arrays = get_arrays(session, meta.id)
    noise = get_params(session, meta.id, "noise")
    noise_gp = get_params(session, meta.id, "noise_gp")
    return StoredModel(
        kernel=meta.kernel,
        noise_model=meta.noise_model,
        target=meta.target,
        columns=tuple(columns),
        train_x=arrays.pop("train_x"),
        train_y=arrays.pop("train_y"),
        params=get_params(session, meta.id, "signal"),
        noise=noise.entries[0] if len(noise) else None,
        noise_gp=noise_gp if len(noise_gp) else None,
        arrays=arrays,
        groups={k: tuple(v) for k, v in json.loads(meta.groups).items()},
        standardize=meta.standardize,
        y_mean=meta.y_mean,
        y_scale=meta.y_scale,
        library_version=meta.library_version,
    )


def write_container(path: str | Path, model: StoredModel) -> Path:
    """Write a fresh container file (an existing one is replaced)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.unlink(missing_ok=True)
    engine = make_engine(path)
    Base.metadata.create_all(engine)
    with make_session(engine)() as session:
        save_model(session, model)
    engine.dispose()
    logger.info("Saved model container %s", path)
    return path


def read_container(path: str | Path) -> StoredModel:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"model container not found: {path}")
    engine = make_engine(path)
    try:
        if not inspect(engine).has_table(ModelMeta.__tablename__):
            raise ConfigError(f"{path} is not a model container")
        with make_session(engine)() as session:
            model = load_model(session)
    except DatabaseError as exc:
        raise ConfigError(f"{path} is not a model container") from exc
    finally:
        engine.dispose()
    if model.library_version != __version__:
        logger.warning("Model written by version %s, running %s", model.library_version, __version__)
    return model
