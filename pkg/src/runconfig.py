"""Run configuration files (dotenv KEY=value format)."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from dotenv import dotenv_values

from src.config import DEFAULT_MAX_ITER, DEFAULT_RESTARTS, DEFAULT_SEED
from src.errors import ConfigError

logger = logging.getLogger(__name__)

NOISE_MODELS = ("homoscedastic", "heteroscedastic")
SYNTH_KINDS = ("regime", "oscillator")
PREFIXED = ("GROUP_", "INIT_", "BOUNDS_", "REGION_")
KEYS = {
    "TRAIN", "TEST", "TARGET", "KERNEL", "NOISE_MODEL", "RESTARTS", "MAX_ITER", "GTOL",
    "FTOL", "WORKERS", "SWITCH_SCAN", "SEED", "OUT", "MODEL", "PREDICTIONS", "STANDARDIZE",
    "NOISE_GP_LENGTHSCALE_BOUNDS", "SIGMOID_CURVES", "SAMPLE_COLUMN", "SAMPLE_GRID",
    "N_DRAWS", "SYNTH", "SYNTH_NOISE", "SYNTH_N", "TRAIN_FRAC", "DECIMATE",
}


@dataclass(frozen=True)
class Region:
    column: str
    lower: float
    upper: float


@dataclass(frozen=True)
class RunConfig:
    train: Path | None = None
    test: Path | None = None
    target: str = "y"
    kernel: str | None = None
    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)
    init: dict[str, float] = field(default_factory=dict)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    noise_model: str = "homoscedastic"
    restarts: int = DEFAULT_RESTARTS
    max_iter: int = DEFAULT_MAX_ITER
    gtol: float = 1e-6
    ftol: float = 1e-12
    workers: int = 1
    switch_scan: int = 0
    seed: int = DEFAULT_SEED
    out: Path = Path("out")
    model: Path | None = None
    predictions: Path | None = None
    standardize: bool = True
    noise_gp_lengthscale_bounds: tuple[float, float] = (0.1, 10.0)
    regions: dict[str, Region] = field(default_factory=dict)
    sigmoid_curves: bool = False
    sample_column: str | None = None
    sample_grid: tuple[float, float, int] | None = None
    n_draws: int = 3
    synth: str = "regime"
    synth_noise: str = "constant"
    synth_n: int | None = None
    train_frac: float | None = None
    decimate: int = 2

    @property
    def heteroscedastic(self) -> bool:
        return self.noise_model == "heteroscedastic"

    @property
    def model_path(self) -> Path:
        return self.model or self.out / "model.sqlite"


def _float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _bool(key: str, raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _pair(key: str, raw: str) -> tuple[float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'lo,hi', got {raw!r}")
    lo, hi = (_float(key, p) for p in parts)
    if lo > hi:
        raise ConfigError(f"{key}: lower bound {lo} exceeds upper {hi}")
    return lo, hi


def _region(key: str, raw: str) -> Region:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected 'column:lo:hi', got {raw!r}")
    lo, hi = _float(key, parts[1]), _float(key, parts[2])
    return Region(parts[0].strip(), lo, hi)


def _grid(key: str, raw: str) -> tuple[float, float, int]:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected 'lo:hi:n', got {raw!r}")
    n = _int(key, parts[2])
    if n < 2:
        raise ConfigError(f"{key}: grid needs at least two points")
    return _float(key, parts[0]), _float(key, parts[1]), n


def _choice(key: str, raw: str, options) -> str:
    value = raw.strip().lower()
    if value not in options:
        raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {raw!r}")
    return value


def load_run_config(path: str | Path, seed: int | None = None, out: str | Path | None = None) -> RunConfig:
    """Read a run config; relative paths resolve against the file's directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    base = path.resolve().parent
    raw = {k: (v if v is not None else "") for k, v in dotenv_values(path).items()}
    unknown = sorted(k for k in raw if k not in KEYS and not k.startswith(PREFIXED))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    def resolve(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    fields: dict = {}
    for key, value in raw.items():
        if key.startswith("GROUP_"):
            columns = tuple(c.strip() for c in value.split(",") if c.strip())
            if not columns:
                raise ConfigError(f"{key}: empty column group")
            fields.setdefault("groups", {})[key[6:]] = columns
        elif key.startswith("INIT_"):
            fields.setdefault("init", {})[key[5:]] = _float(key, value)
        elif key.startswith("BOUNDS_"):
            fields.setdefault("bounds", {})[key[7:]] = _pair(key, value)
        elif key.startswith("REGION_"):
            fields.setdefault("regions", {})[key[7:]] = _region(key, value)
        elif key in ("TRAIN", "TEST", "OUT", "MODEL", "PREDICTIONS"):
            fields[key.lower()] = resolve(value)
        elif key in ("TARGET", "KERNEL", "SAMPLE_COLUMN"):
            fields[key.lower()] = value.strip()
        elif key in ("RESTARTS", "MAX_ITER", "WORKERS", "SWITCH_SCAN", "SEED", "N_DRAWS", "SYNTH_N", "DECIMATE"):
            fields[key.lower()] = _int(key, value)
        elif key in ("GTOL", "FTOL", "TRAIN_FRAC"):
            fields[key.lower()] = _float(key, value)
        elif key in ("STANDARDIZE", "SIGMOID_CURVES"):
            fields[key.lower()] = _bool(key, value)
        elif key == "NOISE_MODEL":
            fields["noise_model"] = _choice(key, value, NOISE_MODELS)
        elif key == "SYNTH":
            fields["synth"] = _choice(key, value, SYNTH_KINDS)
        elif key == "SYNTH_NOISE":
            fields["synth_noise"] = _choice(key, value, ("constant", "linear"))
        elif key == "NOISE_GP_LENGTHSCALE_BOUNDS":
            fields["noise_gp_lengthscale_bounds"] = _pair(key, value)
        elif key == "SAMPLE_GRID":
            fields["sample_grid"] = _grid(key, value)
    if "OUT" not in raw:
        fields["out"] = base / "out"
    config = RunConfig(**fields)
    if seed is not None:
        config = replace(config, seed=seed)
    if out is not None:
        config = replace(config, out=Path(out))
    if config.train_frac is not None and not 0.0 < config.train_frac < 1.0:
        raise ConfigError("TRAIN_FRAC must lie in (0, 1)")
    logger.info("Loaded run config %s (kernel=%s, noise=%s)", path, config.kernel, config.noise_model)
    return config
