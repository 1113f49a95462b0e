"""Command-line front door.

Subcommands bind ingestion, scoring, QUBO construction, solving, and
reporting into reproducible invocations.  Configuration is a JSON file
with flat dotted keys (``ga.population``), overridable per run with
``--set key=value``; command-line overrides beat file values, which beat
defaults.  Unknown keys are rejected.  Every run prints its resolved
configuration and seed first, so any output can be reproduced.

Exit codes: 0 success, 1 domain error (named diagnostic, no traceback),
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import _kernels, __version__
from .errors import BadSize, ConfigError, QubofolioError
from .harness import (
    CampaignConfig,
    CampaignAccumulator,
    GeoSettings,
    McSettings,
    QuboSettings,
    SaSettings,
    comparison_table,
    frontier_report,
    run_and_report,
)
from .market_data import build_market_model, load_prices, write_prices
from .qubo import (
    Weighting,
    apply_shift,
    auto_end_energy,
    build_raw_qubo,
    estimate_size_energy,
    export_qubo,
    scale,
    solve_shift,
)
from .rng import derive_seed
from .scoring import Portfolio, score
from .solvers import (
    CqnsObjective,
    GaConfig,
    SaConfig,
    TabuConfig,
    exhaustive_best,
    genetic,
    monte_carlo_fat_tailed,
    simulated_anneal_custom,
    simulated_anneal_geometric,
    tabu_search,
)

DEFAULTS = {
    "prices": None,
    "market_ticker": "MKT",
    "risk_free": 0.01,
    "market_return": None,
    "alpha": 1.0,
    "sharpe_excess": True,
    "seed": 0,
    "output_dir": "out",
    "size_range": None,
    "tuning_rounds": 1,
    "solvers": ["monte_carlo", "ga", "sa_custom", "sa_geometric", "tabu"],
    "timing": False,
    "mc.total_samples": 221660,
    "mc.split": 0.5,
    "ga.population": 456,
    "ga.generations": 40,
    "ga.elites": 40,
    "ga.children_ratio": [3, 2],
    "sa.t_max": 0.05,
    "sa.t_min": 0.0005,
    "sa.cooling_rate": 0.001,
    "sa.sweeps": 250,
    "sa.restarts": 20,
    "geo.beta_min": 1e-6,
    "geo.beta_max": 9.0,
    "geo.sweeps": 200,
    "geo.reads": 200,
    "tabu.reads": 200,
    "tabu.tenure": 50,
    "tabu.time_cap": None,
    "qubo.weighting": "per_size",
    "qubo.lin_coeff": None,
    "qubo.samples_per_size": 200,
    "qubo.end_energy": None,
    "qubo.export": True,
    "qubo.tune_eta": 0.5,
}


def resolve_config(config_path: str | None, overrides: list[str], seed: int | None) -> dict:
    """Defaults <- config file <- --set overrides <- --seed flag."""
    resolved = dict(DEFAULTS)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {config_path}: {exc}") from exc
        for key, value in file_values.items():
            if key not in resolved:
                raise ConfigError(f"unknown config key {key!r} in {config_path}")
            resolved[key] = value
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in resolved:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            resolved[key] = json.loads(raw)
        except json.JSONDecodeError:
            resolved[key] = raw
    if seed is not None:
        resolved["seed"] = seed
    return resolved


def campaign_config(cfg: dict) -> CampaignConfig:
    return CampaignConfig(
        solvers=tuple(cfg["solvers"]),
        size_range=tuple(cfg["size_range"]) if cfg["size_range"] else None,
        alpha=float(cfg["alpha"]),
        seed=int(cfg["seed"]),
        output_dir=str(cfg["output_dir"]),
        tuning_rounds=int(cfg["tuning_rounds"]),
        sharpe_excess=bool(cfg["sharpe_excess"]),
        timing=bool(cfg["timing"]),
        mc=McSettings(int(cfg["mc.total_samples"]), float(cfg["mc.split"])),
        ga=GaConfig(population=int(cfg["ga.population"]),
                    generations=int(cfg["ga.generations"]),
                    elites=int(cfg["ga.elites"]),
                    children_ratio=tuple(cfg["ga.children_ratio"])),
        sa=SaSettings(SaConfig(t_max=float(cfg["sa.t_max"]),
                               t_min=float(cfg["sa.t_min"]),
                               cooling_rate=float(cfg["sa.cooling_rate"]),
                               sweeps=int(cfg["sa.sweeps"])),
                      restarts=int(cfg["sa.restarts"])),
        geo=GeoSettings(beta_min=float(cfg["geo.beta_min"]),
                        beta_max=float(cfg["geo.beta_max"]),
                        sweeps=int(cfg["geo.sweeps"]),
                        reads=int(cfg["geo.reads"])),
        tabu=TabuConfig(reads=int(cfg["tabu.reads"]),
                        tenure=int(cfg["tabu.tenure"]),
                        time_cap=cfg["tabu.time_cap"]),
        qubo=QuboSettings(weighting=Weighting(cfg["qubo.weighting"]),
                          lin_coeff=cfg["qubo.lin_coeff"],
                          samples_per_size=int(cfg["qubo.samples_per_size"]),
                          end_energy=cfg["qubo.end_energy"],
                          export=bool(cfg["qubo.export"]),
                          tune_eta=float(cfg["qubo.tune_eta"])),
    )


def load_model(cfg: dict):
    if not cfg["prices"]:
        raise ConfigError("config key 'prices' is required (path to the price CSV)")
    universe = load_prices(cfg["prices"], cfg["market_ticker"])
    model = build_market_model(
        universe,
        risk_free=float(cfg["risk_free"]),
        market_return=None if cfg["market_return"] is None else float(cfg["market_return"]),
    )
    return universe, model


def parse_mask(text: str, model) -> Portfolio:
    """Accept a binary literal (asset 0 on the least-significant bit) or
    a comma-separated ticker list resolved against the universe."""
    text = text.strip()
    if text.startswith("0b") or set(text) <= {"0", "1"}:
        return Portfolio.from_literal(text, model.n)
    indices = []
    for ticker in text.split(","):
        ticker = ticker.strip()
        if ticker not in model.tickers:
            raise ConfigError(f"unknown ticker {ticker!r}")
        indices.append(model.index_of(ticker))
    return Portfolio.from_indices(indices, model.n)


def _print_resolved(cfg: dict, command: str) -> None:
    print(f"qubofolio {__version__} [{_kernels.BACKEND} kernels] command={command}")
    print("resolved config: " + json.dumps(cfg, sort_keys=True))
    print(f"seed: {cfg['seed']}")


def _cmd_ingest(cfg: dict, args) -> int:
    universe, model = load_model(cfg)
    print(f"assets: {universe.n}")
    print(f"dates: {universe.n_dates} ({universe.assets[0].dates[0]} .. {universe.as_of})")
    print(f"market_return: {model.market_return!r}")
    print(f"risk_free: {model.risk_free!r}")
    print(f"beta_range: [{float(model.betas.min())!r}, {float(model.betas.max())!r}]")
    print("tickers: " + ",".join(universe.tickers))
    if args.out:
        write_prices(universe, args.out)
        print(f"aligned prices written to {args.out}")
    return 0


def _cmd_score(cfg: dict, args) -> int:
    _, model = load_model(cfg)
    portfolio = parse_mask(args.mask, model)
    sp = score(portfolio, model, float(cfg["alpha"]),
               sharpe_excess=bool(cfg["sharpe_excess"]))
    print(f"mask: {portfolio.to_literal()}")
    print(f"size: {sp.size}")
    print(f"expected_return: {sp.expected_return!r}")
    print(f"stdev: {sp.stdev!r}")
    print(f"cqns: {sp.cqns!r}")
    print(f"cqr: {sp.cqr!r}")
    print(f"sharpe: {sp.sharpe!r}")
    return 0


def _build_scaled(cfg: dict, model, k: int):
    qubo_cfg = campaign_config(cfg).qubo
    raw = build_raw_qubo(model, k, qubo_cfg.weighting, qubo_cfg.lin_coeff)
    e_bar = estimate_size_energy(raw, qubo_cfg.samples_per_size,
                                 derive_seed(int(cfg["seed"]), "calibrate", k))
    end = qubo_cfg.end_energy if qubo_cfg.end_energy is not None else auto_end_energy(e_bar, k)
    shift = solve_shift(e_bar, k, end)
    return scale(apply_shift(raw, shift), shift), e_bar


def _cmd_build_qubo(cfg: dict, args) -> int:
    _, model = load_model(cfg)
    scaled, e_bar = _build_scaled(cfg, model, args.k)
    print(f"n: {scaled.n}")
    print(f"target_size: {scaled.target_size}")
    print(f"scale: {scaled.scale!r}")
    print(f"shift.lin: {scaled.shift.lin!r}")
    print(f"shift.quad: {scaled.shift.quad!r}")
    print(f"shift.end_energy: {scaled.shift.end_energy!r}")
    print(f"mean_energy_full_mask: {scaled.shift.ebar_n!r}")
    print(f"max_abs_entry: {np.abs(scaled.matrix).max()!r}")
    return 0


def _cmd_export_qubo(cfg: dict, args) -> int:
    _, model = load_model(cfg)
    scaled, _ = _build_scaled(cfg, model, args.k)
    export_qubo(scaled, args.out, seed=int(cfg["seed"]), model_hash=model.content_hash())
    print(f"exported size-{args.k} QUBO to {args.out}")
    return 0


def _cmd_solve(cfg: dict, args) -> int:
    _, model = load_model(cfg)
    campaign = campaign_config(cfg)
    seed = campaign.seed
    name = args.solver
    if name in ("sa_geometric", "tabu"):
        if args.k is None:
            raise ConfigError(f"solver {name} needs --k (it runs against one QUBO)")
        scaled, _ = _build_scaled(cfg, model, args.k)
        if name == "sa_geometric":
            records = simulated_anneal_geometric(
                scaled, (campaign.geo.beta_min, campaign.geo.beta_max),
                campaign.geo.sweeps, campaign.geo.reads,
                derive_seed(seed, "sa_geometric", args.k, 0))
        else:
            records = tabu_search(scaled, campaign.tabu,
                                  derive_seed(seed, "tabu", args.k, 0)).records
    elif name == "monte_carlo":
        result = monte_carlo_fat_tailed(model, campaign.alpha,
                                        campaign.mc.total_samples,
                                        derive_seed(seed, "mc"), campaign.mc.split)
        records = [result.best]
        print(f"samples: {result.samples}")
    elif name == "ga":
        result = genetic(model, campaign.alpha, campaign.ga, derive_seed(seed, "ga"))
        records = result.records
        print(f"scored: {result.scored}")
    elif name == "sa_custom":
        records = simulated_anneal_custom(CqnsObjective(model, campaign.alpha),
                                          campaign.sa.config, campaign.sa.restarts,
                                          derive_seed(seed, "sa_custom"))
    elif name == "exhaustive":
        result = exhaustive_best(model, campaign.alpha)
        best = result.best
        print(f"scored: {result.n_scored}")
        print(f"best_mask: {best.portfolio.to_literal()}")
        print(f"best_size: {best.size}")
        print(f"best_cqns: {best.cqns!r}")
        return 0
    else:
        raise ConfigError(f"unknown solver {name!r}")

    valid = [r for r in records if r.valid]
    print(f"records: {len(records)}  valid: {len(valid)}")
    pool = valid if valid else records
    best = min(pool, key=lambda r: (r.energy, r.mask_key))
    print(f"best_mask: {best.portfolio.to_literal()}")
    print(f"best_size: {best.size}")
    print(f"best_energy: {best.energy!r}")
    sp = score(best.portfolio, model, campaign.alpha,
               sharpe_excess=campaign.sharpe_excess)
    print(f"best_cqns: {sp.cqns!r}")
    if args.out:
        import csv as _csv
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["mask", "solver", "size", "target_size",
                             "valid", "energy", "seed"])
            for r in records:
                writer.writerow([r.portfolio.to_literal(), r.solver, r.size,
                                 r.target_size, str(r.valid).lower(),
                                 repr(r.energy), r.seed])
        print(f"records written to {args.out}")
    return 0


def _cmd_campaign(cfg: dict, args) -> int:
    _, model = load_model(cfg)
    campaign = campaign_config(cfg)
    acc = run_and_report(campaign, model)
    print(f"records: {len(acc.records)}")
    for solver in sorted(acc.per_solver):
        stats = acc.per_solver[solver]
        best = repr(stats.best_cqns) if stats.valid else "n/a"
        print(f"  {solver}: samples={stats.samples} valid={stats.valid} best_cqns={best}")
    if acc.errors:
        print(f"errors: {len(acc.errors)} (see summary.json)")
    print(f"reports under {campaign.output_dir}")
    return 0


def _cmd_report(cfg: dict, args) -> int:
    import csv as _csv

    _, model = load_model(cfg)
    campaign = campaign_config(cfg)
    source = Path(args.source) / "frontier.csv"
    acc = CampaignAccumulator(model.n)
    try:
        with open(source, newline="", encoding="utf-8") as fh:
            reader = _csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from exc
    for row in rows:
        portfolio = Portfolio.from_literal(row["mask"], model.n)
        sp = score(portfolio, model, campaign.alpha, sharpe_excess=campaign.sharpe_excess)
        from .solvers import make_record
        record = make_record(portfolio.bits, sp.cqns, solver=row["solver"],
                             seed=campaign.seed)
        acc.add_landscape(record.size, sp.cqns)
        acc.add_record(record, sp.cqns)
    oracle_best = None
    exhaustive = acc.per_solver.get("exhaustive")
    if exhaustive is not None and exhaustive.best_key is not None:
        oracle_best = score(Portfolio.from_int(exhaustive.best_key, model.n),
                            model, campaign.alpha, sharpe_excess=campaign.sharpe_excess)
    out = Path(campaign.output_dir)
    frontier_report(acc, model, out, campaign.alpha, campaign.sharpe_excess,
                    {"seed": campaign.seed, "rebuilt_from": str(source)})
    comparison_table(acc, oracle_best, out, campaign.timing)
    print(f"re-reported {len(acc.records)} records from {source} into {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubofolio",
        description="Cardinality-constrained portfolio selection via per-size "
                    "QUBOs and classical metaheuristics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flat dotted keys)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--seed", type=int, default=None, help="override the seed")

    p = sub.add_parser("ingest", help="load and align a price CSV")
    common(p)
    p.add_argument("--out", help="write the aligned universe back out")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("score", help="score one portfolio mask")
    common(p)
    p.add_argument("--mask", required=True,
                   help="binary literal (0b...) or comma-separated tickers")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("build-qubo", help="calibrate one per-size QUBO")
    common(p)
    p.add_argument("--k", type=int, required=True, help="target portfolio size")
    p.set_defaults(func=_cmd_build_qubo)

    p = sub.add_parser("export-qubo", help="write one calibrated QUBO as JSON")
    common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_qubo)

    p = sub.add_parser("solve", help="run one solver")
    common(p)
    p.add_argument("--solver", required=True,
                   choices=["monte_carlo", "ga", "sa_custom", "sa_geometric",
                            "tabu", "exhaustive"])
    p.add_argument("--k", type=int, default=None,
                   help="target size (matrix solvers only)")
    p.add_argument("--out", help="write all records to a CSV")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("campaign", help="run the full battery and write reports")
    common(p)
    p.set_defaults(func=_cmd_campaign)

    p = sub.add_parser("report", help="regenerate reports from a frontier.csv")
    common(p)
    p.add_argument("--source", required=True, help="directory holding frontier.csv")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.config, args.overrides, args.seed)
        _print_resolved(cfg, args.command)
        return args.func(cfg, args)
    except (ConfigError, BadSize) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except QubofolioError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
