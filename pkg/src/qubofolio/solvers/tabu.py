"""Multistart tabu search over a scaled matrix.

Steepest single-flip descent with a recency memory: a flipped variable
is forbidden for `tenure` iterations unless flipping it would beat the
read's best energy (aspiration).  Moves are taken even when worsening,
which is what carries the walk out of local minima.  A read stops after
n consecutive non-improving moves; the optional wall-clock cap is a
secondary stop that trades determinism for bounded latency.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .. import _kernels
from ..qubo import ScaledQubo
from .records import SampleRecord, make_record


@dataclass(frozen=True)
class TabuConfig:
    reads: int = 200
    tenure: int = 50
    time_cap: float | None = None   # seconds per run; None = no cap

    def __post_init__(self):
        if self.reads < 1:
            raise ValueError("reads must be >= 1")
        if self.tenure < 1:
            raise ValueError("tenure must be >= 1")


@dataclass(frozen=True)
class TabuResult:
    records: list
    trace: dict | None


def tabu_search(q: ScaledQubo, cfg: TabuConfig = TabuConfig(), seed: int = 0,
                collect_trace: bool = False) -> TabuResult:
    started = time.perf_counter()
    masks, energies, trace = _kernels.tabu_run(
        q.matrix, cfg.tenure, cfg.reads, q.n, cfg.time_cap, seed,
        collect_trace=collect_trace)
    per_read = (time.perf_counter() - started) / cfg.reads
    records = [
        make_record(masks[i], energies[i], solver="tabu", seed=seed,
                    elapsed=per_read, target_size=q.target_size)
        for i in range(cfg.reads)
    ]
    return TabuResult(records=records, trace=trace)
