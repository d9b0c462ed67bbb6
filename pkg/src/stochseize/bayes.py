"""Exact naive Bayesian fusion of P* evidences, accumulated in log-odds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .signal_io import State


def _check_open_unit(name: str, p: float):
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {p}")


@dataclass(frozen=True)
class Evidence:
    p_star: float
    source: tuple | None = None  # (feature kind, channel index)

    def __post_init__(self):
        _check_open_unit("p_star", self.p_star)


@dataclass(frozen=True)
class Prior:
    p_seizure: float = 0.5

    def __post_init__(self):
        _check_open_unit("p_seizure", self.p_seizure)


ProbLike = Union[float, Evidence, Prior]


def _p(x: ProbLike) -> float:
    if isinstance(x, Evidence):
        return x.p_star
    if isinstance(x, Prior):
        return x.p_seizure
    return float(x)


def logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def expit(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def posterior(prior: ProbLike, evidences: Iterable[ProbLike] = ()) -> float:
    """P(seizure | evidences) for conditionally independent evidences.

    Equivalent to ``P(V) prod p / (P(V) prod p + (1-P(V)) prod (1-p))`` but
    computed as a sum of logits so long evidence lists cannot underflow.
    """
    p0 = _p(prior)
    _check_open_unit("prior", p0)
    z = logit(p0)
    for ev in evidences:
        p = _p(ev)
        _check_open_unit("p_star", p)
        z += logit(p)
    return expit(z)


def posterior_batch(prior: float, p_star: np.ndarray) -> np.ndarray:
    """Vectorised :func:`posterior`; ``p_star`` has shape ``(n_cases, n_evidences)``."""
    p_star = np.asarray(p_star, dtype=float)
    z = math.log(prior) - math.log1p(-prior) + np.sum(np.log(p_star) - np.log1p(-p_star), axis=-1)
    return 1.0 / (1.0 + np.exp(-z))


def classify(posterior: float, threshold: float = 0.5) -> State:
    """ICTAL only when the posterior strictly exceeds the threshold."""
    _check_open_unit("threshold", threshold)
    return State.ICTAL if posterior > threshold else State.INTERICTAL
