"""The two simulated annealers.

The custom annealer walks single-flip neighborhoods under a linear
cooling schedule and, by default, optimizes exact net scores across all
portfolio sizes at once; it can also be pointed at a per-size QUBO.
The geometric annealer is matrix-driven: an inverse-temperature ramp
(geometric progression) with one fixed-order sweep per step, reporting
the final state of each read, as an annealing sampler would.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..market_data import MarketModel
from ..qubo import ScaledQubo
from ..rng import derive_seed
from ..scoring import DEFAULT_ALPHA
from .records import SampleRecord, make_record

DEFAULT_BETA_RANGE = (1e-6, 9.0)
DEFAULT_GEO_SWEEPS = 200
DEFAULT_GEO_READS = 200


@dataclass(frozen=True)
class SaConfig:
    """Cooling schedule: temperature steps down by cooling_rate per
    cycle from t_max toward t_min, with `sweeps` proposals per cycle."""

    t_max: float = 0.05
    t_min: float = 0.0005
    cooling_rate: float = 0.001
    sweeps: int = 250

    def __post_init__(self):
        if not self.t_max > self.t_min > 0:
            raise ValueError(f"need t_max > t_min > 0, got {self.t_max}, {self.t_min}")
        if self.cooling_rate <= 0:
            raise ValueError("cooling_rate must be positive")
        if (self.t_max - self.t_min) / self.cooling_rate < 1:
            raise ValueError("schedule shorter than one cycle")
        if self.sweeps < 0:
            raise ValueError("sweeps must be >= 0")

    @property
    def cycles(self) -> int:
        return max(1, int(round((self.t_max - self.t_min) / self.cooling_rate)))


@dataclass(frozen=True)
class CqnsObjective:
    """Exact net score over the whole landscape (no size constraint)."""

    model: MarketModel
    alpha: float = DEFAULT_ALPHA


@dataclass(frozen=True)
class QuboObjective:
    """Scaled per-size matrix energy."""

    qubo: ScaledQubo


def simulated_anneal_custom(objective, cfg: SaConfig, restarts: int, seed: int) -> list[SampleRecord]:
    """Run `restarts` independent anneals; one record (the best-seen
    mask, honestly rescored) per restart."""
    records = []
    for r in range(restarts):
        run_seed = derive_seed(seed, "restart", r)
        started = time.perf_counter()
        if isinstance(objective, CqnsObjective):
            model = objective.model
            bits, energy, _, _ = _kernels.sa_custom_cqns(
                model.cov, model.expected_returns, objective.alpha,
                cfg.t_max, cfg.cooling_rate, cfg.cycles, cfg.sweeps, run_seed)
            target = None
        else:
            q = objective.qubo
            bits, energy, _, _ = _kernels.sa_custom_qubo(
                q.matrix, cfg.t_max, cfg.cooling_rate, cfg.cycles, cfg.sweeps, run_seed)
            target = q.target_size
        elapsed = time.perf_counter() - started
        records.append(make_record(bits, energy, solver="sa_custom",
                                   seed=run_seed, elapsed=elapsed,
                                   target_size=target))
    return records


def simulated_anneal_geometric(
    q: ScaledQubo,
    beta_range=DEFAULT_BETA_RANGE,
    sweeps: int = DEFAULT_GEO_SWEEPS,
    reads: int = DEFAULT_GEO_READS,
    seed: int = 0,
) -> list[SampleRecord]:
    """Geometric-schedule annealing sampler over a scaled matrix.

    Per read: beta ramps geometrically from beta_range[0] to
    beta_range[1] over `sweeps` steps, one full variable sweep of
    Metropolis proposals per step; the read reports its final mask and
    that mask's matrix energy.
    """
    lo, hi = float(beta_range[0]), float(beta_range[1])
    if not 0 < lo <= hi:
        raise ValueError(f"need 0 < beta_lo <= beta_hi, got {beta_range}")
    if sweeps < 1 or reads < 1:
        raise ValueError("sweeps and reads must be >= 1")
    schedule = np.geomspace(lo, hi, sweeps)
    started = time.perf_counter()
    masks, energies, _, _ = _kernels.sa_geometric(q.matrix, schedule, reads, seed)
    per_read = (time.perf_counter() - started) / reads
    return [
        make_record(masks[i], energies[i], solver="sa_geometric",
                    seed=seed, elapsed=per_read, target_size=q.target_size)
        for i in range(reads)
    ]
