"""Fat-tailed Monte Carlo sampling.

Two phases share the budget: sizes drawn from a binomial centered on
half the universe (the bulk of the landscape), then an equal per-size
quota of uniform masks so the extreme sizes are covered too.  The
per-size coverage is what finds optima hiding in the size tails, where
the binomial phase almost never lands.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..market_data import MarketModel
from ..qubo import random_mask_batch
from ..scoring import DEFAULT_ALPHA, batch_cqns
from .records import SampleRecord, SizeStats, make_record

_CHUNK = 16384


@dataclass(frozen=True)
class McResult:
    stats: SizeStats
    best: SampleRecord
    samples: int
    elapsed: float


def monte_carlo_fat_tailed(
    model: MarketModel,
    alpha: float = DEFAULT_ALPHA,
    total_samples: int = 221660,
    seed: int = 0,
    split: float = 0.5,
) -> McResult:
    """Sample masks, maintain per-size score statistics, return the best.

    Phase 1 draws sizes from binomial(n, 1/2) (zero sizes are redrawn);
    phase 2 walks sizes 1..n with an equal quota each, remainder going
    to the smallest sizes.  The budget split is ``split`` to phase 1.
    """
    n = model.n
    if total_samples < n:
        raise ValueError(f"total_samples {total_samples} below the asset count {n}")
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    stats = SizeStats(n)
    best_value = np.inf
    best_key = -1

    phase1 = int(total_samples * split)
    phase2 = total_samples - phase1

    for start in range(0, phase1, _CHUNK):
        count = min(_CHUNK, phase1 - start)
        sizes = rng.binomial(n, 0.5, count)
        while True:
            zero = sizes == 0
            if not zero.any():
                break
            sizes[zero] = rng.binomial(n, 0.5, int(zero.sum()))
        keys = rng.random((count, n))
        ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
        masks = (ranks < sizes[:, None]).astype(np.float64)
        best_value, best_key = _score_batch(
            model, alpha, masks, stats, best_value, best_key)

    quota = phase2 // n
    remainder = phase2 % n
    for m in range(1, n + 1):
        count = quota + (1 if m <= remainder else 0)
        for start in range(0, count, _CHUNK):
            batch = min(_CHUNK, count - start)
            masks = random_mask_batch(rng, n, m, batch)
            best_value, best_key = _score_batch(
                model, alpha, masks, stats, best_value, best_key)

    elapsed = time.perf_counter() - started
    bits = np.array([(best_key >> i) & 1 for i in range(n)], dtype=np.uint8)
    best = make_record(bits, best_value, solver="monte_carlo",
                       seed=seed, elapsed=elapsed)
    return McResult(stats=stats, best=best,
                    samples=phase1 + phase2, elapsed=elapsed)


def _score_batch(model, alpha, masks, stats, best_value, best_key):
    values = batch_cqns(masks, model, alpha)
    sizes = masks.sum(axis=1).astype(np.int64)
    stats.add_batch(sizes, values)
    low = float(values.min())
    if low < best_value:
        rows = np.flatnonzero(values == low)
        shifts = np.arange(model.n, dtype=np.uint64)
        keys = (masks[rows].astype(np.uint64) << shifts).sum(axis=1)
        key = int(keys.min())
        best_value, best_key = low, key
    return best_value, best_key
