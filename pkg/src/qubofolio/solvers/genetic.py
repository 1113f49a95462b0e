"""Genetic search over selection masks.

Scores the whole population by exact net score each generation, carries
the elite block forward unchanged, and refills the rest with uniform-
crossover children and bit-flip mutations of elites in a fixed ratio.
Elitism makes the per-generation best monotone non-increasing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import ceil

import numpy as np

from ..errors import EmptySeedPopulation
from ..market_data import MarketModel
from ..scoring import DEFAULT_ALPHA, Portfolio, batch_cqns, score
from .records import SampleRecord, make_record


@dataclass(frozen=True)
class GaConfig:
    population: int = 456
    generations: int = 40
    elites: int = 40
    children_ratio: tuple = (3, 2)   # children : mutations in the refill
    seed_population: tuple | None = None

    def __post_init__(self):
        if self.elites > self.population:
            raise ValueError("elites cannot exceed the population")
        if self.children_ratio[0] <= 0 or self.children_ratio[1] <= 0:
            raise ValueError("ratio parts must be positive")
        if self.seed_population is not None and len(self.seed_population) == 0:
            raise EmptySeedPopulation("seed population provided but empty")


@dataclass(frozen=True)
class GaResult:
    best: object                  # ScoredPortfolio
    generation_best: list         # best net score per generation
    records: list                 # final elites as SampleRecords
    scored: int
    population_sizes: list
    elapsed: float


def refill_counts(population: int, elites: int, ratio: tuple) -> tuple[int, int]:
    """Split the non-elite slots children:mutations, children rounded up."""
    open_slots = population - elites
    children = ceil(open_slots * ratio[0] / (ratio[0] + ratio[1]))
    return children, open_slots - children


def genetic(model: MarketModel, alpha: float = DEFAULT_ALPHA,
            cfg: GaConfig = GaConfig(), seed: int = 0) -> GaResult:
    n = model.n
    rng = np.random.default_rng(seed)
    started = time.perf_counter()

    if cfg.seed_population is not None:
        pop = np.stack([np.asarray(p.bits, dtype=np.uint8) for p in cfg.seed_population])
        population = pop.shape[0]
        if cfg.elites > population:
            raise ValueError("elites cannot exceed the seeded population size")
    else:
        population = cfg.population
        pop = _random_population(rng, population, n)

    children, mutations = refill_counts(population, cfg.elites, cfg.children_ratio)
    generation_best = []
    population_sizes = []
    scored = 0

    for _ in range(cfg.generations):
        values = batch_cqns(pop.astype(np.float64), model, alpha)
        scored += population
        order = np.argsort(values, kind="stable")
        elite_rows = order[: cfg.elites]
        generation_best.append(float(values[order[0]]))
        population_sizes.append(int(pop.shape[0]))
        elites = pop[elite_rows]

        kids = _crossover(rng, elites, children, n)
        muts = _mutate(rng, elites, mutations, n)
        pop = np.concatenate([elites, kids, muts], axis=0)

    values = batch_cqns(pop.astype(np.float64), model, alpha)
    scored += population
    order = np.argsort(values, kind="stable")
    elite_rows = order[: cfg.elites]
    best_bits = pop[order[0]]
    best = score(Portfolio(best_bits), model, alpha)

    elapsed = time.perf_counter() - started
    per_record = elapsed / max(1, cfg.elites)
    records = [
        make_record(pop[row], values[row], solver="ga", seed=seed, elapsed=per_record)
        for row in elite_rows
    ]
    return GaResult(best=best, generation_best=generation_best, records=records,
                    scored=scored, population_sizes=population_sizes, elapsed=elapsed)


def _random_population(rng, count: int, n: int) -> np.ndarray:
    pop = (rng.random((count, n)) < 0.5).astype(np.uint8)
    while True:
        empty = np.flatnonzero(pop.sum(axis=1) == 0)
        if empty.size == 0:
            return pop
        pop[empty] = (rng.random((empty.size, n)) < 0.5).astype(np.uint8)


def _crossover(rng, elites: np.ndarray, count: int, n: int) -> np.ndarray:
    """Uniform crossover of two distinct random elites per child."""
    if count == 0:
        return np.zeros((0, n), dtype=np.uint8)
    kids = np.zeros((count, n), dtype=np.uint8)
    n_elites = elites.shape[0]
    for row in range(count):
        while True:
            if n_elites > 1:
                a, b = rng.choice(n_elites, size=2, replace=False)
            else:
                a = b = 0
            pick = rng.random(n) < 0.5
            kid = np.where(pick, elites[a], elites[b]).astype(np.uint8)
            if kid.any():
                kids[row] = kid
                break
    return kids


def _mutate(rng, elites: np.ndarray, count: int, n: int) -> np.ndarray:
    """Per-bit flips at rate 1/n with at least one flip forced."""
    if count == 0:
        return np.zeros((0, n), dtype=np.uint8)
    muts = np.zeros((count, n), dtype=np.uint8)
    n_elites = elites.shape[0]
    for row in range(count):
        while True:
            parent = elites[int(rng.integers(n_elites))]
            flips = rng.random(n) < (1.0 / n)
            if not flips.any():
                flips[int(rng.integers(n))] = True
            child = parent ^ flips.astype(np.uint8)
            if child.any():
                muts[row] = child
                break
    return muts
