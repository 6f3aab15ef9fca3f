import math

import numpy as np
import pytest

from src.dataset import Dataset, Inputs

# Wind-gated lift blended with a smooth background
REGIME_KERNEL = "sw(cos2(theta),S)*sw(U,W)*poly2(U) + swneg(cos2(theta),S)*swneg(U,W)*se(U)"
# Quasi-static flight response plus rudder-gated modal bursts
BURST_KERNEL = "se(flight) + sw(rudd,R)*(sdof(t)+sdof(t))"
BURST_GROUPS = {"flight": ("flight_1", "flight_2", "flight_3")}
BURST_INIT = {"sdof1.wn": 2 * math.pi * 11.0, "sdof2.wn": 2 * math.pi * 32.5}


def regime_inputs(rng: np.random.Generator, n: int) -> Inputs:
    return Inputs.from_columns(U=rng.uniform(0.0, 35.0, n), theta=rng.uniform(0.0, 2 * math.pi, n))


def burst_inputs(rng: np.random.Generator, n: int) -> Inputs:
    t = np.sort(rng.uniform(0.0, 1.0, n))
    return Inputs.from_columns(
        t=t,
        flight_1=np.sin(t) + 0.1 * rng.standard_normal(n),
        flight_2=np.cos(3 * t) + 0.1 * rng.standard_normal(n),
        flight_3=rng.standard_normal(n),
        rudd=rng.uniform(0.0, 40.0, n),
    )


def line_inputs(rng: np.random.Generator, n: int, lo: float = 0.0, hi: float = 10.0) -> Inputs:
    return Inputs.from_columns(x=rng.uniform(lo, hi, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def smooth_data(rng) -> Dataset:
    """Noisy samples of a sine on [0, 10]."""
    X = line_inputs(rng, 40)
    y = np.sin(X.column("x")) + 0.1 * rng.standard_normal(40)
    return Dataset(X, y)


def write_config(path, **entries) -> str:
    path.write_text("".join(f"{k}={v}\n" for k, v in entries.items()))
    return str(path)
