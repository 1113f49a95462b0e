"""Campaign orchestration and reporting.

A campaign runs the configured solver battery: the unconstrained
searchers (Monte Carlo, genetic, custom annealer) once each, and the
matrix-driven solvers (geometric annealer, tabu) against one calibrated
QUBO per target size, with optional graduated penalty re-tuning between
rounds.  Valid samples are deduplicated into a single accumulator keyed
by mask; every sample (valid or not) feeds the per-size score landscape.

All randomness derives from the campaign seed through
``rng.derive_seed(seed, tag...)`` with documented tags, so identically
configured runs are byte-identical.  Per-(solver, size) tasks may run on
a thread pool (capped by the ``CQNS_THREADS`` environment variable);
results are merged in task-submission order, so parallelism never
changes the outputs.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import IoError, QubofolioError
from .market_data import MarketModel
from .qubo import (
    DEFAULT_SAMPLES_PER_SIZE,
    DEFAULT_TUNE_ETA,
    Weighting,
    apply_shift,
    auto_end_energy,
    build_raw_qubo,
    estimate_size_energy,
    export_qubo,
    graduated_tune,
    scale,
    solve_shift,
)
from .rng import derive_seed
from .scoring import DEFAULT_ALPHA, Portfolio, batch_cqns, score
from .solvers import (
    CqnsObjective,
    GaConfig,
    SaConfig,
    SizeStats,
    TabuConfig,
    exhaustive_best,
    genetic,
    make_record,
    monte_carlo_fat_tailed,
    simulated_anneal_custom,
    simulated_anneal_geometric,
    tabu_search,
)
from .svg import write_scatter

KNOWN_SOLVERS = ("monte_carlo", "ga", "sa_custom", "sa_geometric", "tabu", "exhaustive")
QUBO_SOLVERS = ("sa_geometric", "tabu")

CONVENTIONS = {
    "returns": "simple daily returns",
    "covariance_divisor": "observations - 1 (unbiased)",
    "expected_returns": "annual fractions (CAPM over the input window)",
    "risk_scale": "daily (portfolio stdev is not annualized)",
    "float_format": "shortest round-trip decimal (bit-exact on re-parse)",
}


@dataclass(frozen=True)
class McSettings:
    total_samples: int = 221660
    split: float = 0.5


@dataclass(frozen=True)
class GeoSettings:
    beta_min: float = 1e-6
    beta_max: float = 9.0
    sweeps: int = 200
    reads: int = 200


@dataclass(frozen=True)
class SaSettings:
    config: SaConfig = field(default_factory=SaConfig)
    restarts: int = 20


@dataclass(frozen=True)
class QuboSettings:
    weighting: Weighting = Weighting.PER_SIZE
    lin_coeff: float | None = None
    samples_per_size: int = DEFAULT_SAMPLES_PER_SIZE
    end_energy: float | None = None    # None: auto-centered on the target size
    export: bool = True
    tune_eta: float = DEFAULT_TUNE_ETA


@dataclass(frozen=True)
class CampaignConfig:
    solvers: tuple = KNOWN_SOLVERS[:-1]          # exhaustive is opt-in
    size_range: tuple | None = None              # None: [2, n-1]
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    output_dir: str = "out"
    tuning_rounds: int = 1
    sharpe_excess: bool = True
    timing: bool = False     # write wall-clock columns (not byte-reproducible)
    mc: McSettings = field(default_factory=McSettings)
    ga: GaConfig = field(default_factory=GaConfig)
    sa: SaSettings = field(default_factory=SaSettings)
    geo: GeoSettings = field(default_factory=GeoSettings)
    tabu: TabuConfig = field(default_factory=TabuConfig)
    qubo: QuboSettings = field(default_factory=QuboSettings)

    def __post_init__(self):
        unknown = [s for s in self.solvers if s not in KNOWN_SOLVERS]
        if unknown:
            raise ValueError(f"unknown solvers {unknown}; known: {list(KNOWN_SOLVERS)}")
        if self.tuning_rounds < 1:
            raise ValueError("tuning_rounds must be >= 1")

    def sizes(self, n: int) -> list[int]:
        lo, hi = self.size_range if self.size_range else (2, n - 1)
        if not 2 <= lo <= hi <= n - 1:
            raise ValueError(f"size range [{lo}, {hi}] outside [2, {n - 1}]")
        return list(range(lo, hi + 1))


@dataclass
class SolverStats:
    samples: int = 0
    valid: int = 0
    duplicates: int = 0
    best_cqns: float = float("inf")
    best_key: int | None = None
    elapsed: float = 0.0


class CampaignAccumulator:
    """Deduplicated cross-solver archive plus per-size landscape stats.

    ``records`` keeps the first-seen record per mask; later duplicates
    are counted against their solver but not stored.  Invalid samples
    (matrix solvers missing their target size) are excluded from the
    archive but still scored into ``size_stats`` and tallied per size in
    ``invalid_counts``.
    """

    def __init__(self, n: int):
        self.n = n
        self.records: dict = {}
        self.size_stats = SizeStats(n)
        self.invalid_counts = np.zeros(n + 1, dtype=np.int64)
        self.per_solver: dict = {}
        self.errors: list = []
        self.qubos: dict = {}

    def solver_stats(self, solver: str) -> SolverStats:
        return self.per_solver.setdefault(solver, SolverStats())

    def note_samples(self, solver: str, count: int, elapsed: float) -> None:
        stats = self.solver_stats(solver)
        stats.samples += count
        stats.elapsed += elapsed

    def add_record(self, record, exact_cqns: float) -> None:
        stats = self.solver_stats(record.solver)
        stats.valid += 1
        if exact_cqns < stats.best_cqns:
            stats.best_cqns = exact_cqns
            stats.best_key = record.mask_key
        if record.mask_key in self.records:
            stats.duplicates += 1
        else:
            self.records[record.mask_key] = record

    def add_landscape(self, size: int, exact_cqns: float | None) -> None:
        self.size_stats.add(size, exact_cqns)

    def merge(self, other: "CampaignAccumulator") -> None:
        if other.n != self.n:
            raise ValueError("cannot merge accumulators over different universes")
        for key, record in other.records.items():
            if key not in self.records:
                self.records[key] = record
        self.size_stats.update_from(other.size_stats)
        self.invalid_counts += other.invalid_counts
        for solver, stats in other.per_solver.items():
            mine = self.solver_stats(solver)
            mine.samples += stats.samples
            mine.valid += stats.valid
            mine.duplicates += stats.duplicates
            mine.elapsed += stats.elapsed
            if stats.best_cqns < mine.best_cqns:
                mine.best_cqns = stats.best_cqns
                mine.best_key = stats.best_key
        self.errors.extend(other.errors)
        for k, q in other.qubos.items():
            self.qubos.setdefault(k, q)

    @property
    def mask_keys(self) -> set:
        return set(self.records)

    def best_record(self):
        if not self.records:
            return None
        return min(self.records.values(), key=lambda r: (r.energy, r.mask_key))


def validity_filter(records, k: int):
    """Split records into (popcount == k) and a per-size count of the rest."""
    kept = []
    invalid_counts: dict[int, int] = {}
    for record in records:
        if record.size == k:
            kept.append(record)
        else:
            invalid_counts[record.size] = invalid_counts.get(record.size, 0) + 1
    return kept, invalid_counts


def _exact_scores(records, model: MarketModel, alpha: float) -> np.ndarray:
    if not records:
        return np.zeros(0)
    masks = np.stack([r.portfolio.bits for r in records]).astype(np.float64)
    return batch_cqns(masks, model, alpha)


def _accumulate_records(acc, records, model, alpha):
    """Rescore records exactly and fold them into the accumulator."""
    nonempty = [r for r in records if r.size > 0]
    for record in records:
        if record.size == 0:
            acc.invalid_counts[0] += 1
            acc.add_landscape(0, None)
            acc.solver_stats(record.solver)
    scores = _exact_scores(nonempty, model, alpha)
    for record, exact in zip(nonempty, scores):
        acc.add_landscape(record.size, float(exact))
        if record.valid:
            acc.add_record(record, float(exact))
        else:
            acc.invalid_counts[record.size] += 1
            acc.solver_stats(record.solver)  # row appears even with 0 valid


def _run_unconstrained(name: str, cfg: CampaignConfig, model: MarketModel):
    acc = CampaignAccumulator(model.n)
    alpha = cfg.alpha
    if name == "monte_carlo":
        res = monte_carlo_fat_tailed(model, alpha, cfg.mc.total_samples,
                                     derive_seed(cfg.seed, "mc"), cfg.mc.split)
        acc.size_stats.update_from(res.stats)
        acc.note_samples("monte_carlo", res.samples, res.elapsed)
        acc.add_record(res.best, res.best.energy)
    elif name == "ga":
        res = genetic(model, alpha, cfg.ga, derive_seed(cfg.seed, "ga"))
        acc.note_samples("ga", res.scored, res.elapsed)
        _accumulate_records(acc, res.records, model, alpha)
    elif name == "sa_custom":
        records = simulated_anneal_custom(
            CqnsObjective(model, alpha), cfg.sa.config,
            cfg.sa.restarts, derive_seed(cfg.seed, "sa_custom"))
        acc.note_samples("sa_custom", len(records), sum(r.elapsed for r in records))
        _accumulate_records(acc, records, model, alpha)
    elif name == "exhaustive":
        res = exhaustive_best(model, alpha)
        acc.note_samples("exhaustive", res.n_scored, res.elapsed)
        best = res.best
        record = make_record(best.portfolio.bits, best.cqns, solver="exhaustive",
                             seed=cfg.seed, elapsed=res.elapsed)
        _accumulate_records(acc, [record], model, alpha)
    else:
        raise ValueError(f"not an unconstrained solver: {name}")
    return acc


def _run_qubo_size(cfg: CampaignConfig, model: MarketModel, k: int):
    """Build, calibrate, solve, and optionally re-tune one target size."""
    acc = CampaignAccumulator(model.n)
    alpha = cfg.alpha
    qs = cfg.qubo
    raw = build_raw_qubo(model, k, qs.weighting, qs.lin_coeff)
    e_bar = estimate_size_energy(raw, qs.samples_per_size,
                                 derive_seed(cfg.seed, "calibrate", k))
    end = qs.end_energy if qs.end_energy is not None else auto_end_energy(e_bar, k)
    shift = solve_shift(e_bar, k, end)
    scaled = scale(apply_shift(raw, shift), shift)

    for round_idx in range(cfg.tuning_rounds):
        round_records = []
        if "sa_geometric" in cfg.solvers:
            started = time.perf_counter()
            records = simulated_anneal_geometric(
                scaled, (cfg.geo.beta_min, cfg.geo.beta_max),
                cfg.geo.sweeps, cfg.geo.reads,
                derive_seed(cfg.seed, "sa_geometric", k, round_idx))
            acc.note_samples("sa_geometric", len(records),
                             time.perf_counter() - started)
            round_records.extend(records)
        if "tabu" in cfg.solvers:
            started = time.perf_counter()
            result = tabu_search(scaled, cfg.tabu,
                                 derive_seed(cfg.seed, "tabu", k, round_idx))
            acc.note_samples("tabu", len(result.records),
                             time.perf_counter() - started)
            round_records.extend(result.records)

        _accumulate_records(acc, round_records, model, alpha)

        if round_idx < cfg.tuning_rounds - 1 and round_records:
            observed = [r.size for r in round_records]
            shift = graduated_tune(shift, observed, k, qs.tune_eta)
            scaled = scale(apply_shift(raw, shift), shift)

    acc.qubos[k] = scaled
    return acc


def run_campaign(cfg: CampaignConfig, model: MarketModel) -> CampaignAccumulator:
    """Execute the configured battery and return the merged accumulator.

    Tasks run sequentially by default; set CQNS_THREADS=0 (auto) or a
    positive count to run per-(solver, size) tasks on a thread pool.
    Failures are recorded in the error manifest and do not abort the
    remaining tasks.
    """
    acc = CampaignAccumulator(model.n)
    tasks: list[tuple[str, object]] = []
    for name in cfg.solvers:
        if name in QUBO_SOLVERS:
            continue
        tasks.append((name, lambda name=name: _run_unconstrained(name, cfg, model)))
    if any(s in cfg.solvers for s in QUBO_SOLVERS):
        for k in cfg.sizes(model.n):
            tasks.append((f"qubo_k{k}", lambda k=k: _run_qubo_size(cfg, model, k)))

    workers = _worker_count()
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(name, pool.submit(job)) for name, job in tasks]
            results = []
            for name, future in futures:
                try:
                    results.append(future.result())
                except QubofolioError as exc:
                    results.append(None)
                    acc.errors.append({"task": name, "error": f"{type(exc).__name__}: {exc}"})
    else:
        results = []
        for name, job in tasks:
            try:
                results.append(job())
            except QubofolioError as exc:
                results.append(None)
                acc.errors.append({"task": name, "error": f"{type(exc).__name__}: {exc}"})

    for partial in results:
        if partial is not None:
            acc.merge(partial)
    return acc


def _worker_count() -> int:
    raw = os.environ.get("CQNS_THREADS", "").strip()
    if not raw:
        return 1
    count = int(raw)
    if count == 0:
        return os.cpu_count() or 1
    return max(1, count)


# --- reporting ---------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def frontier_report(acc: CampaignAccumulator, model: MarketModel, out_dir,
                    alpha: float = DEFAULT_ALPHA, sharpe_excess: bool = True,
                    meta: dict | None = None) -> dict:
    """Write frontier.csv, size_stats.csv, frontier.svg, and summary.json.

    Every numeric CSV field is recomputed from the stored mask through
    the scoring module, so the files can always be cross-checked against
    the model.  Returns the summary document.
    """
    if not acc.records:
        raise ValueError("empty accumulator: nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for key in sorted(acc.records):
        record = acc.records[key]
        sp = score(record.portfolio, model, alpha, sharpe_excess=sharpe_excess)
        rows.append((sp.size, key, record.solver, sp))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    try:
        with open(out / "frontier.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mask", "solver", "size", "expected_return",
                             "stdev", "sharpe", "cqr", "cqns"])
            for size, key, solver, sp in rows:
                writer.writerow([
                    sp.portfolio.to_literal(), solver, size,
                    _fmt(sp.expected_return), _fmt(sp.stdev), _fmt(sp.sharpe),
                    _fmt(sp.cqr), _fmt(sp.cqns),
                ])

        with open(out / "size_stats.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["size", "count", "invalid_count",
                             "min_cqns", "mean_cqns", "max_cqns"])
            stats = acc.size_stats
            for m in range(stats.n + 1):
                count = int(stats.counts[m])
                invalid = int(acc.invalid_counts[m])
                if count == 0 and invalid == 0:
                    continue
                has_scores = count > 0 and np.isfinite(stats.mins[m])
                writer.writerow([
                    m, count, invalid,
                    _fmt(stats.mins[m]) if has_scores else "",
                    _fmt(stats.mean(m)) if has_scores else "",
                    _fmt(stats.maxs[m]) if has_scores else "",
                ])

        write_scatter(
            out / "frontier.svg",
            [(sp.stdev, sp.expected_return, solver) for _, _, solver, sp in rows],
            xlabel="portfolio stdev (daily scale)",
            ylabel="expected annual return",
            title="accumulated portfolios by solver",
        )

        summary = {
            "n_assets": model.n,
            "as_of": model.as_of,
            "records": len(acc.records),
            "kernel_backend": _kernels.BACKEND,
            "conventions": dict(CONVENTIONS),
            "per_solver": {
                solver: {
                    "samples": stats.samples,
                    "valid": stats.valid,
                    "duplicates": stats.duplicates,
                    "best_cqns": stats.best_cqns if stats.valid else None,
                    "best_mask": (Portfolio.from_int(stats.best_key, model.n).to_literal()
                                  if stats.best_key is not None else None),
                }
                for solver, stats in sorted(acc.per_solver.items())
            },
            "errors": list(acc.errors),
        }
        if meta:
            summary.update(meta)
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write reports under {out}: {exc}") from exc
    return summary


def comparison_table(acc: CampaignAccumulator, oracle_best, out_dir,
                     timing: bool = False) -> None:
    """Write comparison.csv: per solver, the sample count, valid count,
    best net score, whether the oracle mask was found, and (optionally)
    elapsed wall-clock seconds.

    ``oracle_best`` is a ScoredPortfolio or None when the ground truth
    is unavailable; solvers with no valid samples keep their row with
    empty score cells.  Timing cells are written only on request because
    wall clock is not reproducible between runs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    oracle_key = oracle_best.portfolio.key if oracle_best is not None else None
    try:
        with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["solver", "samples", "valid", "best_cqns",
                             "found_ideal", "elapsed_seconds"])
            for solver in sorted(acc.per_solver):
                stats = acc.per_solver[solver]
                if stats.valid:
                    best = _fmt(stats.best_cqns)
                    found = ("" if oracle_key is None
                             else str(stats.best_key == oracle_key).lower())
                else:
                    best = ""
                    found = ""
                writer.writerow([
                    solver, stats.samples, stats.valid, best, found,
                    _fmt(stats.elapsed) if timing else "",
                ])
    except OSError as exc:
        raise IoError(f"cannot write comparison.csv under {out}: {exc}") from exc


def run_and_report(cfg: CampaignConfig, model: MarketModel) -> CampaignAccumulator:
    """Full pipeline: run the campaign, write reports and QUBO exports."""
    acc = run_campaign(cfg, model)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    oracle_best = None
    if "exhaustive" in cfg.solvers:
        stats = acc.per_solver.get("exhaustive")
        if stats is not None and stats.best_key is not None:
            oracle_best = score(Portfolio.from_int(stats.best_key, model.n),
                                model, cfg.alpha, sharpe_excess=cfg.sharpe_excess)

    meta = {
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "solvers": list(cfg.solvers),
        "tuning_rounds": cfg.tuning_rounds,
    }
    if cfg.timing:
        meta["elapsed_per_solver"] = {
            solver: acc.per_solver[solver].elapsed for solver in sorted(acc.per_solver)
        }
    if acc.records:
        frontier_report(acc, model, out, cfg.alpha, cfg.sharpe_excess, meta)
    else:
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump({"records": 0, "errors": list(acc.errors), **meta},
                      fh, indent=1, sort_keys=True)
            fh.write("\n")
    comparison_table(acc, oracle_best, out, cfg.timing)
    if cfg.qubo.export:
        for k in sorted(acc.qubos):
            export_qubo(acc.qubos[k], out / f"qubo_k{k}.json",
                        seed=cfg.seed, model_hash=model.content_hash())
    return acc
