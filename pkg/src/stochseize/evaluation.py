"""Cross-validated window classification, confusion matrices and Youden's J."""

from __future__ import annotations

import csv
import enum
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bayes import posterior_batch
from .errors import ConfigError, InsufficientDataError
from .features import FeatureConfig, FeatureKind, evaluate_streaming, evaluate_windowed
from .prob_model import LikelihoodTable, LutQuantization, fit_bins, fit_table, lookup_p_star, quantize_lut
from .signal_io import SignalRecording, State, Window, extract_windows
from .stochastic import DEFAULT_STREAM_BITS, stochastic_posterior

Member = tuple  # (FeatureKind, channel index)


class Backend(str, enum.Enum):
    EXACT = "exact"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_predictions(cls, predicted_ictal, actual_ictal) -> "ConfusionMatrix":
        p = np.asarray(predicted_ictal, dtype=bool)
        a = np.asarray(actual_ictal, dtype=bool)
        return cls(int(np.sum(p & a)), int(np.sum(p & ~a)), int(np.sum(~p & ~a)), int(np.sum(~p & a)))

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def j_statistic(cm: ConfusionMatrix) -> float:
    """Sensitivity + specificity - 1."""
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        raise ValueError("undefined J: a class is absent from the evaluated windows")
    return cm.tp / (cm.tp + cm.fn) + cm.tn / (cm.tn + cm.fp) - 1.0


@dataclass(frozen=True)
class CvPlan:
    fold_count: int
    assignment: np.ndarray
    seed: int

    def test_mask(self, fold: int) -> np.ndarray:
        return self.assignment == fold

    def train_mask(self, fold: int) -> np.ndarray:
        if self.fold_count == 1:
            return np.ones_like(self.assignment, dtype=bool)
        return self.assignment != fold


def make_folds(windows: Sequence, fold_count: int = 5, seed: int = 0) -> CvPlan:
    """Stratified, shuffled fold assignment; per-state fold sizes differ by at most one."""
    states = np.array([_is_ictal(w) for w in windows], dtype=bool)
    if fold_count < 1:
        raise ConfigError("fold_count must be positive")
    if len(states) < fold_count:
        raise InsufficientDataError(f"{len(states)} windows cannot fill {fold_count} folds")
    if fold_count == 1:
        warnings.warn("single fold: training and testing on the same windows", stacklevel=2)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(states), dtype=int)
    offset = 0
    for cls in (True, False):
        idx = np.flatnonzero(states == cls)
        idx = rng.permutation(idx)
        assignment[idx] = (offset + np.arange(len(idx))) % fold_count
        offset += len(idx)
    return CvPlan(fold_count, assignment, seed)


def _is_ictal(w) -> bool:
    if isinstance(w, Window):
        return w.state is State.ICTAL
    if isinstance(w, (bool, np.bool_)):
        return bool(w)
    return State(w) is State.ICTAL


@dataclass(frozen=True)
class EvalConfig:
    """Knobs for one cross-validated evaluation.

    ``feature_mode`` picks how a window gets its feature value: ``"streaming"``
    samples the leaky circuit's level at the window's last sample, ``"windowed"``
    computes the ideal batch feature over the window. ``prior=None`` uses the
    training-set ictal fraction.
    """

    window_s: float = 5.0
    tau_s: float = 5.0
    feature_mode: str = "streaming"
    target_bins: int = 40
    min_count: int = 5
    smoothing: float = 1.0
    prior: float | None = None
    threshold: float = 0.5
    n_bits: int = DEFAULT_STREAM_BITS
    lut_levels: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.feature_mode not in ("streaming", "windowed"):
            raise ConfigError("feature_mode must be 'streaming' or 'windowed'")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.prior is not None and not 0.0 < self.prior < 1.0:
            raise ConfigError("prior must lie in (0, 1)")


class WindowedDataset:
    """A labelled recording cut into windows, with per-(feature, channel) values cached.

    Fitted tables are cached too, keyed by the training mask, so repeated combo
    evaluations over one plan fit each (member, fold) table once.
    """

    def __init__(self, rec: SignalRecording, cfg: EvalConfig = EvalConfig()):
        self.rec = rec
        self.cfg = cfg
        self.windows = extract_windows(rec, cfg.window_s)
        if not self.windows:
            raise InsufficientDataError("recording has no labelled windows")
        self.ictal = np.array([w.state is State.ICTAL for w in self.windows], dtype=bool)
        self.feature_cfg = FeatureConfig(cfg.tau_s, rec.sample_rate_hz)
        self._values: dict = {}
        self._tables: dict = {}

    def __len__(self):
        return len(self.windows)

    @property
    def n_channels(self) -> int:
        return len(self.rec.channels)

    def values(self, kind: FeatureKind, channel: int) -> np.ndarray:
        key = (FeatureKind(kind), int(channel))
        if key not in self._values:
            x = self.rec.channels[key[1]].samples
            fs = self.rec.sample_rate_hz
            slices = [w.sample_slice(fs) for w in self.windows]
            if self.cfg.feature_mode == "streaming":
                trace = evaluate_streaming(x, key[0], self.feature_cfg, key[1]).values
                vals = np.array([trace[min(s.stop, len(trace)) - 1] for s in slices])
            else:
                vals = np.array([evaluate_windowed(x[s], key[0], fs) for s in slices])
            self._values[key] = vals
        return self._values[key]

    def table(self, member: Member, train: np.ndarray) -> LikelihoodTable:
        cfg = self.cfg
        key = (FeatureKind(member[0]), int(member[1]), train.tobytes(),
               cfg.target_bins, cfg.min_count, cfg.smoothing, cfg.lut_levels)
        if key not in self._tables:
            v = self.values(*key[:2])[train]
            bins = fit_bins(v, cfg.target_bins, cfg.min_count)
            table = fit_table(v, self.ictal[train], bins, cfg.smoothing)
            if cfg.lut_levels is not None and cfg.lut_levels < table.n_bins:
                table = quantize_lut(table, LutQuantization(cfg.lut_levels))
            self._tables[key] = table
        return self._tables[key]


@dataclass
class EvaluationReport:
    combo: tuple
    j_statistic: float
    per_fold_j: list
    confusion: ConfusionMatrix
    per_fold_confusion: list = field(default_factory=list)
    backend: Backend = Backend.EXACT
    predictions: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_fold_j(self) -> float:
        js = [j for j in self.per_fold_j if j is not None]
        return float(np.mean(js)) if js else float("nan")

    def to_dict(self) -> dict:
        return {
            "combo": [[FeatureKind(k).value, int(c)] for k, c in self.combo],
            "backend": Backend(self.backend).value,
            "j_statistic": self.j_statistic,
            "mean_fold_j": self.mean_fold_j,
            "per_fold_j": self.per_fold_j,
            "confusion": self.confusion.as_dict(),
            "per_fold_confusion": [cm.as_dict() for cm in self.per_fold_confusion],
        }


def normalize_combo(combo: Iterable) -> tuple:
    members = tuple((FeatureKind(k), int(c)) for k, c in combo)
    if not members:
        raise ConfigError("combo must contain at least one (feature, channel) member")
    if len(set(members)) != len(members):
        raise ConfigError("combo members must be unique")
    return members


def _as_dataset(data, cfg: EvalConfig | None) -> WindowedDataset:
    if isinstance(data, WindowedDataset):
        if cfg is not None and cfg != data.cfg:
            raise ConfigError("dataset was built with a different EvalConfig")
        return data
    return WindowedDataset(data, cfg or EvalConfig())


def evaluate_combo(data, combo, plan: CvPlan, backend: Backend = Backend.EXACT,
                   cfg: EvalConfig | None = None) -> EvaluationReport:
    """Train tables on each fold's training windows and classify its test windows."""
    ds = _as_dataset(data, cfg)
    cfg = ds.cfg
    backend = Backend(backend)
    members = normalize_combo(combo)
    if len(plan.assignment) != len(ds):
        raise ConfigError("CV plan does not match the dataset's windows")
    for _, ch in members:
        if not 0 <= ch < ds.n_channels:
            raise ConfigError(f"channel {ch} out of range")

    predicted = np.zeros(len(ds), dtype=bool)
    fold_js, fold_cms = [], []
    for fold in range(plan.fold_count):
        test = plan.test_mask(fold)
        train = plan.train_mask(fold)
        if not test.any():
            fold_js.append(None)
            fold_cms.append(ConfusionMatrix())
            continue
        prior = cfg.prior if cfg.prior is not None else float(np.mean(ds.ictal[train]))
        cols = []
        for m in members:
            table = ds.table(m, train)
            # leakage guard: the table must have seen exactly the training windows
            assert table.n_train == int(train.sum()), "likelihood table saw non-training windows"
            cols.append(lookup_p_star(table, ds.values(*m)[test]))
        p_star = np.column_stack(cols)
        if backend is Backend.EXACT:
            post = posterior_batch(prior, p_star)
        else:
            test_idx = np.flatnonzero(test)
            post = np.array([
                stochastic_posterior(prior, row, cfg.n_bits, np.random.SeedSequence([cfg.seed, fold, int(i)]))
                for i, row in zip(test_idx, p_star)
            ])
        pred = post > cfg.threshold
        predicted[test] = pred
        cm = ConfusionMatrix.from_predictions(pred, ds.ictal[test])
        fold_cms.append(cm)
        try:
            fold_js.append(j_statistic(cm))
        except ValueError:
            fold_js.append(None)

    evaluated = np.zeros(len(ds), dtype=bool)
    for fold in range(plan.fold_count):
        evaluated |= plan.test_mask(fold)
    total = ConfusionMatrix.from_predictions(predicted[evaluated], ds.ictal[evaluated])
    return EvaluationReport(members, j_statistic(total), fold_js, total, fold_cms, backend, predicted)


@dataclass
class SweepResult:
    reports: list
    best_by_feature: dict

    def heatmap(self) -> tuple[list, list, np.ndarray]:
        """``(features, channels, J matrix)`` with NaN where a pair was not evaluated."""
        feats = list(dict.fromkeys(r.combo[0][0] for r in self.reports))
        chans = sorted({r.combo[0][1] for r in self.reports})
        mat = np.full((len(feats), len(chans)), np.nan)
        for r in self.reports:
            k, c = r.combo[0]
            mat[feats.index(k), chans.index(c)] = r.j_statistic
        return feats, chans, mat


def _run_all(jobs: list, fn, workers: int) -> list:
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def sweep_single(data, features: Sequence, channels: Sequence[int], plan: CvPlan,
                 cfg: EvalConfig | None = None, backend: Backend = Backend.EXACT, workers: int = 1) -> SweepResult:
    """Evaluate every single (feature, channel) pair and keep each feature's best channel."""
    if not features or not channels:
        raise ConfigError("features and channels must be non-empty")
    ds = _as_dataset(data, cfg)
    jobs = [((FeatureKind(f), int(c)),) for f in features for c in channels]
    reports = _run_all(jobs, lambda combo: evaluate_combo(ds, combo, plan, backend), workers)
    best: dict = {}
    for r in reports:
        kind = r.combo[0][0]
        if kind not in best or r.j_statistic > best[kind].j_statistic:
            best[kind] = r
    return SweepResult(reports, best)


# ---------------------------------------------------------------------------
# report emission


def write_reports_json(reports: Sequence[EvaluationReport], path, extra: dict | None = None) -> Path:
    doc = dict(extra or {})
    doc["reports"] = [r.to_dict() for r in reports]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return Path(path)


def write_reports_csv(reports: Sequence[EvaluationReport], path) -> Path:
    """One row per fold plus an ``all`` row with the aggregated confusion."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "channel", "fold", "J", "tp", "fp", "tn", "fn"])
        for r in reports:
            feat = "+".join(FeatureKind(k).value for k, _ in r.combo)
            chan = "+".join(str(c) for _, c in r.combo)
            rows = [(str(i), j, cm) for i, (j, cm) in enumerate(zip(r.per_fold_j, r.per_fold_confusion))]
            rows.append(("all", r.j_statistic, r.confusion))
            for fold, j, cm in rows:
                w.writerow([feat, chan, fold, "" if j is None else repr(float(j)), cm.tp, cm.fp, cm.tn, cm.fn])
    return Path(path)


def write_heatmap_csv(sweep: SweepResult, path) -> Path:
    feats, chans, mat = sweep.heatmap()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature"] + [str(c) for c in chans])
        for f, row in zip(feats, mat):
            w.writerow([FeatureKind(f).value] + ["" if np.isnan(v) else repr(float(v)) for v in row])
    return Path(path)
