"""Ground-truth enumeration.

Full enumeration is the oracle every metaheuristic is judged against;
it is capped by ``n_limit`` because the mask count doubles per asset.
Single-size enumeration stays exact far beyond that cap whenever the
binomial count is manageable (best pair out of 60 assets is 1770
evaluations, for example).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from ..errors import TooLarge
from ..market_data import MarketModel
from ..scoring import DEFAULT_ALPHA, Portfolio, batch_cqns, score

FULL_ENUM_LIMIT = 24
PER_SIZE_COMB_LIMIT = 10_000_000
_CHUNK = 1 << 16


@dataclass(frozen=True)
class ExhaustiveResult:
    best: object                    # ScoredPortfolio
    per_size: dict                  # size -> ScoredPortfolio
    n_scored: int
    elapsed: float


def _masks_from_ints(values: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n, dtype=np.uint64)
    return ((values[:, None] >> shifts) & 1).astype(np.float64)


def exhaustive_best(
    model: MarketModel,
    alpha: float = DEFAULT_ALPHA,
    n_limit: int = FULL_ENUM_LIMIT,
    sizes=None,
    comb_limit: int = PER_SIZE_COMB_LIMIT,
) -> ExhaustiveResult:
    """Exact global and per-size net-score minima.

    With ``sizes=None`` every nonempty mask is enumerated (requires
    n <= n_limit).  With explicit sizes, only those popcount slices are
    enumerated, each gated by ``comb_limit``.  Ties break toward the
    smallest mask key, so results are unique and reproducible.
    """
    n = model.n
    started = time.perf_counter()
    best_key: dict[int, tuple[float, int]] = {}
    scored = 0

    if sizes is None:
        if n > n_limit:
            raise TooLarge(f"full enumeration of {n} assets exceeds the {n_limit}-asset cap")
        total = (1 << n) - 1
        for start in range(1, total + 1, _CHUNK):
            stop = min(start + _CHUNK, total + 1)
            ints = np.arange(start, stop, dtype=np.uint64)
            masks = _masks_from_ints(ints, n)
            values = batch_cqns(masks, model, alpha)
            sizes_vec = masks.sum(axis=1).astype(np.int64)
            scored += len(ints)
            for m in np.unique(sizes_vec):
                rows = np.flatnonzero(sizes_vec == m)
                best_row = rows[np.argmin(values[rows])]
                cand = (float(values[best_row]), int(ints[best_row]))
                cur = best_key.get(int(m))
                if cur is None or cand < cur:
                    best_key[int(m)] = cand
    else:
        for k in sorted(set(int(s) for s in sizes)):
            if not 1 <= k <= n:
                raise TooLarge(f"size {k} outside [1, {n}]")
            count = comb(n, k)
            if count > comb_limit:
                raise TooLarge(f"C({n},{k}) = {count} exceeds the {comb_limit} cap")
            batch = []
            best_here: tuple[float, int] | None = None
            for combo in combinations(range(n), k):
                key = 0
                for i in combo:
                    key |= 1 << i
                batch.append(key)
                if len(batch) == _CHUNK:
                    best_here = _best_of(model, alpha, batch, n, best_here)
                    scored += len(batch)
                    batch = []
            if batch:
                best_here = _best_of(model, alpha, batch, n, best_here)
                scored += len(batch)
            best_key[k] = best_here

    per_size = {
        m: score(Portfolio.from_int(key, n), model, alpha)
        for m, (_, key) in sorted(best_key.items())
    }
    overall = min(per_size.values(), key=lambda sp: (sp.cqns, sp.portfolio.key))
    return ExhaustiveResult(
        best=overall,
        per_size=per_size,
        n_scored=scored,
        elapsed=time.perf_counter() - started,
    )


def _best_of(model, alpha, keys, n, current):
    ints = np.array(keys, dtype=np.uint64)
    masks = _masks_from_ints(ints, n)
    values = batch_cqns(masks, model, alpha)
    low = values.min()
    key = int(ints[np.flatnonzero(values == low)].min())
    cand = (float(low), key)
    if current is None or cand < current:
        return cand
    return current
