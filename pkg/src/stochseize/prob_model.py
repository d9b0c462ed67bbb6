"""Binned class-conditional likelihood tables and the P* lookup that drives the RNGs.

Bins are closed on the right: edges ``e_0 < ... < e_{m-1}`` define the bins
``(-inf, e_0], (e_0, e_1], ..., (e_{m-1}, +inf)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError
from .signal_io import State


@dataclass(frozen=True)
class BinEdges:
    edges: np.ndarray

    def __post_init__(self):
        e = np.array(self.edges, dtype=float).reshape(-1)
        if np.any(np.diff(e) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def n_bins(self) -> int:
        return len(self.edges) + 1

    def index(self, values) -> np.ndarray:
        """Bin index of each value (values on an edge go to the left bin)."""
        return np.searchsorted(self.edges, values, side="left")

    def counts(self, values) -> np.ndarray:
        return np.bincount(self.index(np.asarray(values, dtype=float)), minlength=self.n_bins)


def fit_bins(values, target_bins: int = 40, min_count: int = 5) -> BinEdges:
    """Equal-frequency edges, then merge adjacent bins until each holds ``min_count``.

    The sparsest bin is repeatedly merged into its sparser neighbour, so the
    result never has more than ``target_bins`` bins.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InsufficientDataError("insufficient training data: no values")
    if target_bins < 2:
        raise ValueError("target_bins must be at least 2")
    if values.size < 2 * min_count:
        raise InsufficientDataError(
            f"insufficient training data: {values.size} values for min_count {min_count}")
    qs = np.quantile(values, np.arange(1, target_bins) / target_bins)
    edges = list(np.unique(qs))
    bins = BinEdges(np.asarray(edges))
    counts = list(bins.counts(values))
    while len(counts) > 1:
        small = min(range(len(counts)), key=lambda i: (counts[i], i))
        if counts[small] >= min_count:
            break
        if small == 0:
            nb = 1
        elif small == len(counts) - 1:
            nb = small - 1
        else:
            nb = small - 1 if counts[small - 1] <= counts[small + 1] else small + 1
        lo = min(small, nb)
        counts[lo] += counts[lo + 1]
        del counts[lo + 1]
        del edges[lo]
    return BinEdges(np.asarray(edges))


@dataclass(frozen=True)
class LikelihoodTable:
    bins: BinEdges
    count_ictal: np.ndarray
    count_interictal: np.ndarray
    p_given_ictal: np.ndarray
    p_given_interictal: np.ndarray
    smoothing: float = 1.0

    def __post_init__(self):
        for name in ("count_ictal", "count_interictal", "p_given_ictal", "p_given_interictal"):
            arr = np.array(getattr(self, name))
            if arr.shape != (self.bins.n_bins,):
                raise ValueError(f"{name} must have one entry per bin")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def p_star(self) -> np.ndarray:
        return self.p_given_ictal / (self.p_given_ictal + self.p_given_interictal)

    @property
    def n_bins(self) -> int:
        return self.bins.n_bins

    @property
    def n_train(self) -> int:
        return int(self.count_ictal.sum() + self.count_interictal.sum())

    def to_dict(self) -> dict:
        return {
            "edges": self.bins.edges.tolist(),
            "p_star": self.p_star.tolist(),
            "counts": {"ictal": self.count_ictal.tolist(), "interictal": self.count_interictal.tolist()},
            "p_given": {"ictal": self.p_given_ictal.tolist(), "interictal": self.p_given_interictal.tolist()},
            "smoothing": self.smoothing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LikelihoodTable":
        bins = BinEdges(np.asarray(d["edges"], dtype=float))
        ci = np.asarray(d["counts"]["ictal"])
        cn = np.asarray(d["counts"]["interictal"])
        s = float(d.get("smoothing", 1.0))
        if "p_given" in d:
            pi = np.asarray(d["p_given"]["ictal"], dtype=float)
            pn = np.asarray(d["p_given"]["interictal"], dtype=float)
        else:
            pi, pn = _smoothed(ci, s), _smoothed(cn, s)
        return cls(bins, ci, cn, pi, pn, s)

    def save(self, path) -> Path:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return Path(path)

    @classmethod
    def load(cls, path) -> "LikelihoodTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _smoothed(counts: np.ndarray, smoothing: float) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    return (counts + smoothing) / (counts.sum() + smoothing * len(counts))


def fit_table(values, states: Sequence, bins: BinEdges, smoothing: float = 1.0) -> LikelihoodTable:
    """Per-class histograms with additive smoothing.

    ``P(bin | class) = (count + smoothing) / (class_total + smoothing * n_bins)``.
    """
    if not smoothing > 0:
        raise ValueError("smoothing must be positive")
    values = np.asarray(values, dtype=float)
    if isinstance(states, np.ndarray) and states.dtype == bool:
        ictal = states
    else:
        ictal = np.array([s if isinstance(s, (bool, np.bool_)) else State(s) is State.ICTAL for s in states],
                         dtype=bool)
    if len(ictal) != len(values):
        raise ValueError("values and states differ in length")
    if ictal.all() or not ictal.any():
        raise InsufficientDataError("both states required in training data")
    ci = bins.counts(values[ictal])
    cn = bins.counts(values[~ictal])
    return LikelihoodTable(bins, ci, cn, _smoothed(ci, smoothing), _smoothed(cn, smoothing), smoothing)


def lookup_p_star(table: LikelihoodTable, value):
    """P* of the bin holding ``value``; works on scalars and arrays."""
    idx = table.bins.index(value)
    out = table.p_star[idx]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LutQuantization:
    level_count: int = 40

    def __post_init__(self):
        if self.level_count < 1:
            raise ValueError("level_count must be positive")


def quantize_lut(table: LikelihoodTable, q: LutQuantization) -> LikelihoodTable:
    """Greedily merge the adjacent bin pair with the closest P* until ``level_count`` remain.

    Merged bins pool their counts and their class-conditional probability mass,
    so both likelihood vectors still sum to one.
    """
    levels = q.level_count
    if levels > table.n_bins:
        raise ValueError(f"cannot quantize {table.n_bins} bins to {levels} levels")
    edges = list(table.bins.edges)
    ci, cn = list(table.count_ictal), list(table.count_interictal)
    pi, pn = list(table.p_given_ictal), list(table.p_given_interictal)
    while len(pi) > levels:
        ps = [a / (a + b) for a, b in zip(pi, pn)]
        j = min(range(len(ps) - 1), key=lambda i: (abs(ps[i + 1] - ps[i]), i))
        ci[j] += ci.pop(j + 1)
        cn[j] += cn.pop(j + 1)
        pi[j] += pi.pop(j + 1)
        pn[j] += pn.pop(j + 1)
        del edges[j]
    return LikelihoodTable(BinEdges(np.asarray(edges)), np.asarray(ci), np.asarray(cn),
                           np.asarray(pi), np.asarray(pn), table.smoothing)
