"""(feature, channel) combination search: exhaustive pairs, then a set-genome GA."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .evaluation import Backend, CvPlan, EvalConfig, EvaluationReport, _as_dataset, _run_all, evaluate_combo
from .features import FeatureKind

_KIND_ORDER = {k: i for i, k in enumerate(FeatureKind)}

MAX_COMBO = 8


def member_key(member) -> tuple:
    kind, ch = member
    return _KIND_ORDER[FeatureKind(kind)], int(ch)


@dataclass(frozen=True)
class Combo:
    """A set of distinct (feature, channel) members, stored in canonical order."""

    members: tuple

    def __post_init__(self):
        ms = [(FeatureKind(k), int(c)) for k, c in self.members]
        if len(set(ms)) != len(ms):
            raise ConfigError("combo members must be unique")
        if not 1 <= len(ms) <= MAX_COMBO:
            raise ConfigError(f"combo size must be 1..{MAX_COMBO}, got {len(ms)}")
        object.__setattr__(self, "members", tuple(sorted(ms, key=member_key)))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def sort_key(self) -> tuple:
        return tuple(member_key(m) for m in self.members)

    def to_list(self) -> list:
        return [[k.value, c] for k, c in self.members]


def candidate_members(features: Sequence, channels: Sequence[int]) -> list:
    return [(FeatureKind(f), int(c)) for f in features for c in channels]


def exhaustive_pairs(data, features: Sequence, channels: Sequence[int], plan: CvPlan,
                     cfg: EvalConfig | None = None, workers: int = 1) -> list[tuple[Combo, EvaluationReport]]:
    """Score every two-member combo; best J first, ties broken by member order."""
    ds = _as_dataset(data, cfg)
    members = candidate_members(features, channels)
    if len(members) < 2:
        raise ConfigError("need at least two candidate members for pair search")
    combos = [Combo(p) for p in itertools.combinations(members, 2)]
    reports = _run_all(combos, lambda c: evaluate_combo(ds, c.members, plan), workers)
    ranked = sorted(zip(combos, reports), key=lambda cr: (-cr[1].j_statistic, cr[0].sort_key))
    return ranked


@dataclass
class GaConfig:
    combo_size: int = 3
    population: int = 24
    generations: int = 30
    mutation_rate: float = 0.2
    elitism: int = 2
    tournament_k: int = 3
    seed: int = 0

    def validate(self):
        if self.population < 1 or self.generations < 1:
            raise ConfigError("population and generations must be positive")
        if not 0 <= self.elitism < self.population:
            raise ConfigError("elitism must be smaller than the population")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1]")
        if not 1 <= self.combo_size <= MAX_COMBO:
            raise ConfigError(f"combo_size must be 1..{MAX_COMBO}")


@dataclass
class GaResult:
    best: Combo
    report: EvaluationReport
    history: list
    log: list = field(default_factory=list)
    stochastic_report: EvaluationReport | None = None

    def write_log(self, path) -> Path:
        with Path(path).open("w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec) + "\n")
        return Path(path)


def ga_search(data, features: Sequence, channels: Sequence[int], plan: CvPlan, cfg: GaConfig,
              seed_combo: Iterable, eval_cfg: EvalConfig | None = None, rescore_stochastic: bool = True,
              workers: int = 1) -> GaResult:
    """Genetic search for a ``cfg.combo_size`` combo, seeded with ``seed_combo``.

    Fitness is the mean per-fold J with the exact backend; each distinct combo
    is evaluated once. The returned history holds the best fitness seen up to
    each generation.
    """
    cfg.validate()
    ds = _as_dataset(data, eval_cfg)
    pool = candidate_members(features, channels)
    seed_combo = Combo(seed_combo)
    size = cfg.combo_size
    if size > len(pool):
        raise ConfigError(f"combo_size {size} exceeds the {len(pool)} available members")
    if size <= len(seed_combo):
        raise ConfigError("combo_size must exceed the seed combo size")
    if any(m not in pool for m in seed_combo):
        raise ConfigError("seed combo uses members outside the candidate pool")
    rng = np.random.default_rng(cfg.seed)
    cache: dict = {}
    log: list = []

    def fitness_of(combos: list, generation: int) -> list:
        fresh = [c for c in dict.fromkeys(combos) if c not in cache]
        for c, rep in zip(fresh, _run_all(fresh, lambda c: evaluate_combo(ds, c.members, plan), workers)):
            cache[c] = rep
            log.append({"members": c.to_list(), "J": rep.mean_fold_j, "generation": generation})
        return [cache[c].mean_fold_j for c in combos]

    def fill(members: list) -> Combo:
        unused = [m for m in pool if m not in members]
        extra = rng.choice(len(unused), size=size - len(members), replace=False)
        return Combo(members + [unused[i] for i in sorted(extra)])

    def tournament(pop, fit):
        picks = rng.integers(0, len(pop), size=cfg.tournament_k)
        return pop[min(picks, key=lambda i: (-fit[i], pop[i].sort_key))]

    def crossover(a: Combo, b: Combo) -> Combo:
        union = sorted(set(a.members) | set(b.members), key=member_key)
        keep = [m for m in union if rng.random() < 0.5]
        if len(keep) > size:
            drop = rng.choice(len(keep), size=len(keep) - size, replace=False)
            keep = [m for i, m in enumerate(keep) if i not in set(drop)]
        rest = [m for m in union if m not in keep]
        while len(keep) < size and rest:
            keep.append(rest.pop(int(rng.integers(len(rest)))))
        return fill(keep) if len(keep) < size else Combo(keep)

    def mutate(c: Combo) -> Combo:
        unused = [m for m in pool if m not in c.members]
        if not unused:
            return c
        members = list(c.members)
        members[int(rng.integers(len(members)))] = unused[int(rng.integers(len(unused)))]
        return Combo(members)

    population = [fill(list(seed_combo.members)) for _ in range(cfg.population)]
    history: list = []
    best_combo, best_fit = None, -np.inf
    for gen in range(cfg.generations):
        fit = fitness_of(population, gen)
        order = sorted(range(len(population)), key=lambda i: (-fit[i], population[i].sort_key))
        top = order[0]
        if fit[top] > best_fit or (fit[top] == best_fit and population[top].sort_key < best_combo.sort_key):
            best_combo, best_fit = population[top], fit[top]
        history.append(best_fit)
        if gen == cfg.generations - 1:
            break
        nxt = [population[i] for i in order[: cfg.elitism]]
        while len(nxt) < cfg.population:
            child = crossover(tournament(population, fit), tournament(population, fit))
            if rng.random() < cfg.mutation_rate:
                child = mutate(child)
            nxt.append(child)
        population = nxt

    result = GaResult(best_combo, cache[best_combo], history, log)
    if rescore_stochastic:
        result.stochastic_report = evaluate_combo(ds, best_combo.members, plan, Backend.STOCHASTIC)
    return result
