import numpy as np
import pytest
from sqlalchemy import update

from src.dsl import build_kernel, parse_kernel_spec
from src.errors import ConfigError
from src.gp import default_noise
from src.kernels import ParamVector, default_params, positive, real
from src.store.models import Base, ModelMeta
from src.store.repositories import StoredModel, read_container, write_container
from src.store.session import make_engine, make_session
from tests.conftest import REGIME_KERNEL, regime_inputs


def _stored(rng, heteroscedastic: bool) -> StoredModel:
    X = regime_inputs(rng, 15)
    params = default_params(build_kernel(parse_kernel_spec(REGIME_KERNEL), X.columns), X)
    model = StoredModel(
        kernel=REGIME_KERNEL,
        noise_model="heteroscedastic" if heteroscedastic else "homoscedastic",
        target="y",
        columns=X.columns,
        train_x=X.values,
        train_y=rng.standard_normal(15),
        params=params,
        y_mean=1.25,
        y_scale=0.5,
    )
    if heteroscedastic:
        model.noise_gp = ParamVector(
            (
                positive("ngp.var", 0.3, 1e-3, 1e2),
                positive("ngp.ls.U", 2.0, 0.1, 10.0),
                real("ngp.b", -2.0, -50.0, 50.0),
            )
        )
        model.arrays = {"mu": rng.standard_normal(15), "lam": rng.uniform(0.1, 1.0, 15)}
    else:
        model.noise = default_noise(0.1, 1e-6, 10.0)
    return model


@pytest.mark.parametrize("heteroscedastic", [False, True])
def test_round_trip(tmp_path, rng, heteroscedastic):
    model = _stored(rng, heteroscedastic)
    path = write_container(tmp_path / "m" / "model.sqlite", model)
    back = read_container(path)
    assert back.kernel == model.kernel and back.noise_model == model.noise_model
    assert back.columns == model.columns
    assert back.params == model.params
    assert back.noise == model.noise
    assert back.noise_gp == model.noise_gp
    assert np.array_equal(back.train_x, model.train_x)
    assert np.array_equal(back.train_y, model.train_y)
    assert set(back.arrays) == set(model.arrays)
    for name, values in model.arrays.items():
        assert np.array_equal(back.arrays[name], values)
    assert (back.y_mean, back.y_scale) == (1.25, 0.5)


def test_rewrite_replaces_previous_model(tmp_path, rng):
    path = tmp_path / "model.sqlite"
    write_container(path, _stored(rng, True))
    write_container(path, _stored(rng, False))
    assert read_container(path).noise_model == "homoscedastic"


def test_unsupported_schema(tmp_path, rng):
    path = write_container(tmp_path / "model.sqlite", _stored(rng, False))
    engine = make_engine(path)
    with make_session(engine)() as session:
        session.execute(update(ModelMeta).values(schema_version=99))
        session.commit()
    engine.dispose()
    with pytest.raises(ConfigError, match="schema"):
        read_container(path)


def test_empty_container(tmp_path):
    path = tmp_path / "model.sqlite"
    engine = make_engine(path)
    Base.metadata.create_all(engine)
    engine.dispose()
    with pytest.raises(ConfigError, match="no model"):
        read_container(path)


@pytest.mark.parametrize("content", [b"x,y\n1,2\n", b""])
def test_not_a_container(tmp_path, content):
    path = tmp_path / "model.sqlite"
    path.write_bytes(content)
    with pytest.raises(ConfigError):
        read_container(path)
