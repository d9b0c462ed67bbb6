"""Feature circuits modelled as first-order leaky integrators, plus batch equivalents.

The streaming evaluators emulate an analog RC "decaying integration" with
time constant ``tau_s``; the pole is ``alpha = exp(-1 / (tau_s * fs))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError

# Below this leaky variance (squared signal units) mobility is reported as 0.
HJORTH_EPS = 1e-12


class FeatureKind(str, enum.Enum):
    MEAN = "MEAN"
    MEAN_ABS = "MEAN_ABS"
    MEAN_ENERGY = "MEAN_ENERGY"  # square of the leaky mean
    ENERGY_MEAN = "ENERGY_MEAN"  # leaky mean of x**2
    LINE_LENGTH = "LINE_LENGTH"
    HJORTH_MOBILITY = "HJORTH_MOBILITY"

    @classmethod
    def parse(cls, text: str) -> "FeatureKind":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ConfigError(f"unknown feature {text!r}; choose from {[k.value for k in cls]}") from None


@dataclass(frozen=True)
class FeatureConfig:
    tau_s: float = 5.0
    sample_rate_hz: float = 1000.0

    def __post_init__(self):
        if not self.tau_s > 0:
            raise ConfigError("tau_s must be positive")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")

    @property
    def alpha(self) -> float:
        return math.exp(-1.0 / (self.tau_s * self.sample_rate_hz))


@dataclass(frozen=True)
class FeatureTrace:
    kind: FeatureKind
    channel_index: int
    values: np.ndarray
    sample_rate_hz: float

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) / self.sample_rate_hz

    def to_csv(self, path) -> Path:
        path = Path(path)
        np.savetxt(path, np.column_stack([self.times, self.values]), delimiter=",",
                   header="time_s,value", comments="", fmt="%.17g")
        return path


def leaky_average(x, cfg: FeatureConfig) -> np.ndarray:
    """``y[n] = alpha*y[n-1] + (1-alpha)*x[n]`` starting from rest."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.zeros(0)
    a = cfg.alpha
    return lfilter([1.0 - a], [1.0, -a], x)


def _diff(x: np.ndarray, fs: float) -> np.ndarray:
    # x[-1] taken equal to x[0], so the first derivative sample is 0
    d = np.empty_like(x)
    d[0] = 0.0
    d[1:] = np.diff(x)
    return d * fs


def _leaky_var(u: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    return leaky_average(u * u, cfg) - leaky_average(u, cfg) ** 2


def evaluate_streaming(x, kind: FeatureKind, cfg: FeatureConfig = FeatureConfig(),
                       channel_index: int = 0) -> FeatureTrace:
    """Run one feature circuit over a whole channel, sample by sample."""
    samples = getattr(x, "samples", x)
    x = np.asarray(samples, dtype=float)
    kind = FeatureKind(kind)
    fs = cfg.sample_rate_hz
    if x.size == 0:
        values = np.zeros(0)
    elif kind is FeatureKind.MEAN:
        values = leaky_average(x, cfg)
    elif kind is FeatureKind.MEAN_ABS:
        values = leaky_average(np.abs(x), cfg)
    elif kind is FeatureKind.ENERGY_MEAN:
        values = leaky_average(x * x, cfg)
    elif kind is FeatureKind.MEAN_ENERGY:
        values = leaky_average(x, cfg) ** 2
    elif kind is FeatureKind.LINE_LENGTH:
        values = leaky_average(np.abs(_diff(x, fs)), cfg)
    else:
        var_x = _leaky_var(x, cfg)
        var_dx = np.maximum(_leaky_var(_diff(x, fs), cfg), 0.0)
        values = np.zeros_like(x)
        ok = var_x >= HJORTH_EPS
        values[ok] = np.sqrt(var_dx[ok] / var_x[ok])
    return FeatureTrace(kind, channel_index, values, fs)


def evaluate_windowed(w, kind: FeatureKind, sample_rate_hz: float = 1000.0) -> float:
    """Ideal batch value of a feature over one window of samples."""
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        raise ValueError("empty window")
    kind = FeatureKind(kind)
    if kind is FeatureKind.MEAN:
        return float(w.mean())
    if kind is FeatureKind.MEAN_ABS:
        return float(np.abs(w).mean())
    if kind is FeatureKind.ENERGY_MEAN:
        return float(np.mean(w * w))
    if kind is FeatureKind.MEAN_ENERGY:
        return float(w.mean() ** 2)
    if w.size < 2:
        return 0.0
    dx = np.diff(w) * sample_rate_hz
    if kind is FeatureKind.LINE_LENGTH:
        return float(np.abs(dx).mean())
    var_x = w.var()
    if var_x < HJORTH_EPS:
        return 0.0
    return float(math.sqrt(dx.var() / var_x))
