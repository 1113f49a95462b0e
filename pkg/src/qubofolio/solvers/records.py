"""Uniform solver outputs: sample records and per-size score statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..scoring import Portfolio


@dataclass(frozen=True)
class SampleRecord:
    """One solver output.

    ``energy`` is the generating objective's value for the mask (QUBO
    energy for matrix-driven solvers, net score otherwise) and is
    reproducible from the mask to 1e-9.  ``valid`` means the popcount
    hit the run's target size; solvers that search all sizes at once
    stamp the achieved size as the target, so their emissions are valid
    by construction.  ``elapsed`` is wall-clock seconds attributed to
    the record (averaged over reads for batched runs).
    """

    portfolio: Portfolio
    energy: float
    target_size: int | None
    valid: bool
    solver: str
    seed: int
    elapsed: float

    @property
    def size(self) -> int:
        return self.portfolio.size

    @property
    def mask_key(self) -> int:
        return self.portfolio.key


def make_record(bits, energy: float, solver: str, seed: int,
                elapsed: float = 0.0, target_size: int | None = None) -> SampleRecord:
    p = Portfolio(np.asarray(bits, dtype=np.uint8))
    if target_size is None:
        target_size = p.size
    return SampleRecord(
        portfolio=p,
        energy=float(energy),
        target_size=int(target_size),
        valid=p.size == target_size,
        solver=solver,
        seed=int(seed),
        elapsed=float(elapsed),
    )


@dataclass
class SizeStats:
    """Online min/mean/max net score per portfolio size.

    Index m runs over [0, n]; size-0 observations are counted but carry
    no score.  Means are tracked as sums so merges stay exact.
    """

    n: int
    counts: np.ndarray = field(default=None)
    sums: np.ndarray = field(default=None)
    mins: np.ndarray = field(default=None)
    maxs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.n + 1, dtype=np.int64)
            self.sums = np.zeros(self.n + 1)
            self.mins = np.full(self.n + 1, np.inf)
            self.maxs = np.full(self.n + 1, -np.inf)

    def add(self, size: int, value: float | None) -> None:
        self.counts[size] += 1
        if value is not None:
            self.sums[size] += value
            if value < self.mins[size]:
                self.mins[size] = value
            if value > self.maxs[size]:
                self.maxs[size] = value

    def add_batch(self, sizes: np.ndarray, values: np.ndarray) -> None:
        np.add.at(self.counts, sizes, 1)
        np.add.at(self.sums, sizes, values)
        np.minimum.at(self.mins, sizes, values)
        np.maximum.at(self.maxs, sizes, values)

    def mean(self, size: int) -> float:
        if self.counts[size] == 0:
            return float("nan")
        return float(self.sums[size] / self.counts[size])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def update_from(self, other: "SizeStats") -> None:
        if other.n != self.n:
            raise ValueError(f"size mismatch: {other.n} != {self.n}")
        self.counts += other.counts
        self.sums += other.sums
        np.minimum(self.mins, other.mins, out=self.mins)
        np.maximum(self.maxs, other.maxs, out=self.maxs)

    def copy(self) -> "SizeStats":
        clone = SizeStats(self.n)
        clone.update_from(self)
        return clone
