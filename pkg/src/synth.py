"""Synthetic datasets with known ground truth.

`gen_regime` emulates a wind-driven structure: a quadratic lift term that only
acts for near north/south wind directions at high speed, blended with a smooth
background response. `gen_oscillator` emulates a strain record: a quasi-static
response to slow flight channels plus damped modal bursts, forced only while
a rudder trajectory is past its switching angle.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.linalg import expm

from src.dataset import Dataset, Inputs
from src.errors import ConfigError
from src.kernels import sigmoid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundTruth:
    """Noiseless components (summed in order to give the noiseless target)."""

    components: dict[str, np.ndarray]
    noise_std: np.ndarray
    gates: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def noiseless(self) -> np.ndarray:
        total = np.zeros_like(self.noise_std)
        for values in self.components.values():
            total = total + values
        return total

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.components)
        frame["noiseless"] = self.noiseless
        frame["noise_std"] = self.noise_std
        return frame


def _rff_draw(rng: np.random.Generator, Z: np.ndarray, lengthscales, variance: float, n_features: int = 256):
    """Approximate draw from a zero-mean SE GP via random Fourier features."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float).T).T
    ls = np.broadcast_to(np.asarray(lengthscales, dtype=float), (Z.shape[1],))
    W = rng.standard_normal((Z.shape[1], n_features)) / ls[:, None]
    b = rng.uniform(0.0, 2.0 * math.pi, n_features)
    w = rng.standard_normal(n_features)
    return math.sqrt(2.0 * variance / n_features) * np.cos(Z @ W + b) @ w


def random_split(n: int, n_train: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted random train/test index split."""
    if not 0 < n_train < n:
        raise ConfigError(f"training size must lie in (0, {n}), got {n_train}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def decimation_split(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Every k-th sample for training, the rest for testing."""
    if k < 2:
        raise ConfigError("decimation factor must be at least 2")
    mask = np.zeros(n, dtype=bool)
    mask[::k] = True
    return np.flatnonzero(mask), np.flatnonzero(~mask)


# --- Regime switching ---


@dataclass(frozen=True)
class RegimeSpec:
    n: int = 2500
    n_train: int = 500
    u_range: tuple[float, float] = (0.0, 35.0)
    # angle gate acts on cos(2 theta): lift near 0 and pi
    angle_gate: tuple[float, float] = (8.0, 0.6)
    speed_gate: tuple[float, float] = (0.6, 15.0)
    alpha: float = 0.02
    smooth_variance: float = 1.0
    smooth_lengthscale: float = 6.0
    noise: str = "constant"  # or "linear"
    noise_std: float = 0.3
    noise_std_high: float = 1.5
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.u_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ConfigError(f"invalid speed range {self.u_range}")
        if self.n < 10:
            raise ConfigError("regime data needs at least 10 points")
        if self.noise not in ("constant", "linear"):
            raise ConfigError(f"unknown noise model {self.noise!r}")
        if not (self.noise_std > 0 and self.noise_std_high > 0):
            raise ConfigError("noise std must be positive")


def gen_regime(spec: RegimeSpec) -> tuple[Dataset, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.u_range
    U = rng.uniform(lo, hi, spec.n)
    theta = rng.uniform(0.0, 2.0 * math.pi, spec.n)
    c2 = np.cos(2.0 * theta)
    (a_t, x0_t), (a_u, x0_u) = spec.angle_gate, spec.speed_gate
    on = sigmoid(c2, a_t, x0_t) * sigmoid(U, a_u, x0_u)
    off = sigmoid(c2, -a_t, x0_t) * sigmoid(U, -a_u, x0_u)
    lift = on * spec.alpha * U**2
    smooth = off * _rff_draw(rng, U, spec.smooth_lengthscale, spec.smooth_variance)
    if spec.noise == "linear":
        std = spec.noise_std + (spec.noise_std_high - spec.noise_std) * (U - lo) / (hi - lo)
    else:
        std = np.full(spec.n, spec.noise_std)
    truth = GroundTruth(
        {"lift": lift, "smooth": smooth},
        std,
        {"S": (a_t, x0_t), "W": (a_u, x0_u)},
    )
    y = truth.noiseless + std * rng.standard_normal(spec.n)
    train_idx, test_idx = random_split(spec.n, spec.n_train, spec.seed)
    data = Dataset(Inputs.from_columns(U=U, theta=theta), y, "y", train_idx, test_idx)
    logger.info("Generated regime data: %d points (%s noise)", spec.n, spec.noise)
    return data, truth


# --- Oscillator bursts ---


@dataclass(frozen=True)
class Mode:
    freq_hz: float
    zeta: float = 0.05
    m: float = 1.0
    std: float = 1.0  # stationary std under continuous forcing


@dataclass(frozen=True)
class OscillatorSpec:
    sample_rate: float = 128.0
    duration: float = 60.0
    modes: tuple[Mode, ...] = (Mode(11.0), Mode(32.5))
    forcing_scale: float = 1.0
    gate: tuple[float, float] = (3.099, 22.59)
    burst_centers: tuple[float, ...] = (10.0, 30.0, 50.0)
    burst_width: float = 2.5
    rudder_base: float = 2.0
    rudder_peak: float = 32.0
    window_half_width: float = 5.0
    quasi_static_std: float = 1.0
    flight_lengthscale: float = 12.0
    noise_std: float = 0.1
    oversample: int = 4
    decimate: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.modes:
            raise ConfigError("at least one mode is required")
        for mode in self.modes:
            if not 0.0 < mode.zeta < 1.0:
                raise ConfigError(f"mode damping must lie in (0, 1), got {mode.zeta}")
            if mode.freq_hz <= 0 or mode.m <= 0:
                raise ConfigError("mode frequency and mass must be positive")
        top = max(mode.freq_hz for mode in self.modes)
        if self.sample_rate * self.oversample < 4.0 * top:
            raise ConfigError(
                f"simulation rate {self.sample_rate * self.oversample} Hz below 4x the {top} Hz mode"
            )
        if self.sample_rate <= 2.0 * top:
            raise ConfigError(f"sample rate {self.sample_rate} Hz aliases the {top} Hz mode")
        if self.duration * self.sample_rate < 10:
            raise ConfigError("oscillator record needs at least 10 samples")
        if self.noise_std <= 0:
            raise ConfigError("noise std must be positive")


def rudder_trajectory(spec: OscillatorSpec, t: np.ndarray) -> np.ndarray:
    angle = np.full_like(t, spec.rudder_base)
    for center in spec.burst_centers:
        angle = angle + (spec.rudder_peak - spec.rudder_base) * np.exp(-0.5 * ((t - center) / spec.burst_width) ** 2)
    return angle


def _discretize(mode: Mode, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretisation of x'' + 2 zeta wn x' + wn^2 x = f / m."""
    wn = 2.0 * math.pi * mode.freq_hz
    M = np.zeros((3, 3))
    M[0, 1] = 1.0
    M[1, 0] = -(wn**2)
    M[1, 1] = -2.0 * mode.zeta * wn
    M[1, 2] = 1.0 / mode.m
    E = expm(M * dt)
    return E[:2, :2], E[:2, 2]


def simulate_mode(mode: Mode, forcing: np.ndarray, dt: float) -> np.ndarray:
    Ad, Bd = _discretize(mode, dt)
    state = np.zeros(2)
    out = np.empty(forcing.size)
    for i, f in enumerate(forcing):
        state = Ad @ state + Bd * f
        out[i] = state[0]
    return out


def gen_oscillator(spec: OscillatorSpec) -> tuple[Dataset, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration * spec.sample_rate))
    t = np.arange(n) / spec.sample_rate
    fine_dt = 1.0 / (spec.sample_rate * spec.oversample)
    t_fine = np.arange(n * spec.oversample) * fine_dt
    a, x0 = spec.gate
    gate_fine = sigmoid(rudder_trajectory(spec, t_fine), a, x0)

    flights = {
        f"flight_{k}": _rff_draw(rng, t, spec.flight_lengthscale, 1.0) for k in (1, 2, 3)
    }
    channels = np.column_stack(list(flights.values()))
    components = {
        "quasi_static": _rff_draw(rng, channels, 1.0, spec.quasi_static_std**2)
    }
    for k, mode in enumerate(spec.modes, start=1):
        wn = 2.0 * math.pi * mode.freq_hz
        # white forcing whose continuous intensity gives the requested stationary std
        intensity = 4.0 * mode.m**2 * mode.zeta * wn**3 * mode.std**2
        white = rng.standard_normal(t_fine.size) * math.sqrt(intensity / fine_dt)
        response = simulate_mode(mode, spec.forcing_scale * gate_fine * white, fine_dt)
        components[f"mode_{k}"] = response[:: spec.oversample]

    rudder = rudder_trajectory(spec, t)
    window = np.zeros(n)
    for k, center in enumerate(spec.burst_centers, start=1):
        window[np.abs(t - center) <= spec.window_half_width] = k
    std = np.full(n, spec.noise_std)
    truth = GroundTruth(components, std, {"R": (a, x0)})
    y = truth.noiseless + std * rng.standard_normal(n)
    train_idx, test_idx = decimation_split(n, spec.decimate)
    inputs = Inputs.from_columns(t=t, **flights, rudder=rudder, window=window)
    logger.info(
        "Generated oscillator data: %d samples at %.1f Hz, %d modes", n, spec.sample_rate, len(spec.modes)
    )
    return Dataset(inputs, y, "y", train_idx, test_idx), truth
