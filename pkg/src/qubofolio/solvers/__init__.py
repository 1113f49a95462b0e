"""The classical search battery: exhaustive oracle, fat-tailed Monte
Carlo, two simulated annealers, genetic search, and tabu multistart.
Every solver emits uniform SampleRecords and is fully reproducible from
its inputs and seed."""

from .annealing import (
    CqnsObjective,
    QuboObjective,
    SaConfig,
    simulated_anneal_custom,
    simulated_anneal_geometric,
)
from .exhaustive import ExhaustiveResult, exhaustive_best
from .genetic import GaConfig, GaResult, genetic, refill_counts
from .monte_carlo import McResult, monte_carlo_fat_tailed
from .records import SampleRecord, SizeStats, make_record
from .tabu import TabuConfig, TabuResult, tabu_search

__all__ = [
    "CqnsObjective",
    "QuboObjective",
    "SaConfig",
    "simulated_anneal_custom",
    "simulated_anneal_geometric",
    "ExhaustiveResult",
    "exhaustive_best",
    "GaConfig",
    "GaResult",
    "genetic",
    "refill_counts",
    "McResult",
    "monte_carlo_fat_tailed",
    "SampleRecord",
    "SizeStats",
    "make_record",
    "TabuConfig",
    "TabuResult",
    "tabu_search",
]
