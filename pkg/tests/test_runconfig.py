from pathlib import Path

import pytest

from src.config import DEFAULT_RESTARTS
from src.errors import ConfigError
from src.runconfig import Region, load_run_config
from tests.conftest import REGIME_KERNEL, write_config


def test_full_config(tmp_path):
    path = write_config(
        tmp_path / "run.env",
        TRAIN="data/train.csv",
        TEST="/abs/test.csv",
        KERNEL=f'"{REGIME_KERNEL}"',
        NOISE_MODEL="Heteroscedastic",
        RESTARTS=7,
        SWITCH_SCAN=9,
        GTOL="1e-8",
        GROUP_flight="flight_1, flight_2,flight_3",
        **{"INIT_se1.ls.U": 4.0, "BOUNDS_S.a": "0.1,50", "REGION_calm": "U:0:10"},
        SIGMOID_CURVES="yes",
        SAMPLE_GRID="0:8:201",
    )
    config = load_run_config(path)
    assert config.train == tmp_path.resolve() / "data" / "train.csv"
    assert config.test == Path("/abs/test.csv")
    assert config.kernel == REGIME_KERNEL
    assert config.heteroscedastic
    assert config.restarts == 7 and config.gtol == 1e-8
    assert config.switch_scan == 9
    assert config.groups == {"flight": ("flight_1", "flight_2", "flight_3")}
    assert config.init == {"se1.ls.U": 4.0}
    assert config.bounds == {"S.a": (0.1, 50.0)}
    assert config.regions == {"calm": Region("U", 0.0, 10.0)}
    assert config.sigmoid_curves
    assert config.sample_grid == (0.0, 8.0, 201)


def test_defaults(tmp_path):
    config = load_run_config(write_config(tmp_path / "run.env", KERNEL="se(x)"))
    assert config.restarts == DEFAULT_RESTARTS
    assert config.noise_model == "homoscedastic"
    assert config.out == tmp_path.resolve() / "out"
    assert config.model_path == tmp_path.resolve() / "out" / "model.sqlite"
    assert config.standardize
    assert config.switch_scan == 0


def test_command_line_overrides(tmp_path):
    config = load_run_config(write_config(tmp_path / "run.env", SEED=1, OUT="results"), seed=9, out=tmp_path / "x")
    assert config.seed == 9
    assert config.out == tmp_path / "x"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.env")


@pytest.mark.parametrize(
    "entries,match",
    [
        ({"KERNLE": "se(x)"}, "KERNLE"),
        ({"RESTARTS": "many"}, "RESTARTS"),
        ({"GTOL": "tiny"}, "GTOL"),
        ({"BOUNDS_se1.var": "5,1"}, "exceeds"),
        ({"NOISE_MODEL": "student"}, "NOISE_MODEL"),
        ({"REGION_a": "U:0"}, "REGION_a"),
        ({"SAMPLE_GRID": "0:1:1"}, "two points"),
        ({"TRAIN_FRAC": "1.5"}, "TRAIN_FRAC"),
        ({"STANDARDIZE": "maybe"}, "STANDARDIZE"),
    ],
)
def test_invalid_entries(tmp_path, entries, match):
    with pytest.raises(ConfigError, match=match):
        load_run_config(write_config(tmp_path / "run.env", **entries))
