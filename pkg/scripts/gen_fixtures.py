#!/usr/bin/env python3
"""Generate the bundled synthetic price fixtures (seeded, run once).

Three long-format CSVs land in src/qubofolio/fixtures/:

  synth60.csv   60 assets + market, 253 trading days
  synth12.csv   12 assets + market, generic landscape
  planted12.csv 12 assets + market, global optimum planted at size 2
                (two high-beta, low-noise assets the size tails hide)

Asset returns follow a one-factor model r_i = beta_i * r_m + eps_i, so
betas recovered by the market model match construction up to noise.
The script asserts the planted fixture's optimum before writing.
"""

import csv
import datetime as dt
import pathlib
import sys

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "src" / "qubofolio" / "fixtures"
SEED = 20231115
N_DATES = 253
MARKET = "MKT"


def trading_days(count: int, start=dt.date(2020, 1, 2)):
    days = []
    day = start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day.isoformat())
        day += dt.timedelta(days=1)
    return days


def simulate(rng, n_assets, betas, eps_sigmas, market_drift=0.0007, market_sigma=0.0125):
    # redraw the market path until the window return is a healthy positive
    # fraction; fixture quality should not depend on one lucky draw
    while True:
        r_m = market_drift + market_sigma * rng.standard_normal(N_DATES - 1)
        total = np.prod(1.0 + r_m) - 1.0
        if 0.10 < total < 0.35:
            break
    asset_returns = np.empty((n_assets, N_DATES - 1))
    for i in range(n_assets):
        eps = eps_sigmas[i] * rng.standard_normal(N_DATES - 1)
        asset_returns[i] = betas[i] * r_m + eps
    # keep prices comfortably positive
    asset_returns = np.clip(asset_returns, -0.15, 0.20)
    bases = rng.uniform(20.0, 180.0, size=n_assets)
    prices = bases[:, None] * np.cumprod(1.0 + np.hstack(
        [np.zeros((n_assets, 1)), asset_returns]), axis=1)
    market_prices = 100.0 * np.cumprod(1.0 + np.concatenate([[0.0], r_m]))
    return prices, market_prices


def simulate_planted(rng, n_assets, betas, eps_sigmas,
                     market_drift=0.0007, market_sigma=0.0125):
    while True:
        r_m = market_drift + market_sigma * rng.standard_normal(N_DATES - 1)
        total = np.prod(1.0 + r_m) - 1.0
        if 0.10 < total < 0.35:
            break
    cm = r_m - r_m.mean()

    def residualize(vec, against):
        vec = vec - vec.mean()
        for basis in against:
            vec = vec - (vec @ basis) / (basis @ basis) * basis
        return vec

    eps0 = residualize(eps_sigmas[0] * rng.standard_normal(N_DATES - 1), [cm])
    eps1 = residualize(eps_sigmas[1] * rng.standard_normal(N_DATES - 1), [cm, eps0])
    asset_returns = np.empty((n_assets, N_DATES - 1))
    asset_returns[0] = betas[0] * r_m + eps0
    asset_returns[1] = betas[1] * r_m + eps1
    for i in range(2, n_assets):
        noise = eps_sigmas[i] * rng.standard_normal(N_DATES - 1)
        asset_returns[i] = betas[i] * r_m + noise
    if asset_returns.min() <= -0.9:
        raise RuntimeError("pathological draw; adjust the seed")
    bases = rng.uniform(20.0, 180.0, size=n_assets)
    prices = bases[:, None] * np.cumprod(1.0 + np.hstack(
        [np.zeros((n_assets, 1)), asset_returns]), axis=1)
    market_prices = 100.0 * np.cumprod(1.0 + np.concatenate([[0.0], r_m]))
    return prices, market_prices


def write_csv(path, tickers, prices, market_prices, dates):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "ticker", "close"])
        for ticker, row in zip(tickers, prices):
            for date, close in zip(dates, row):
                writer.writerow([date, ticker, f"{close:.6f}"])
        for date, close in zip(dates, market_prices):
            writer.writerow([date, MARKET, f"{close:.6f}"])
    print(f"wrote {path}")


def main():
    sys.path.insert(0, str(ROOT / "src"))
    from qubofolio import build_market_model, load_prices
    from qubofolio.solvers import exhaustive_best

    OUT.mkdir(parents=True, exist_ok=True)
    dates = trading_days(N_DATES)
    rng = np.random.default_rng(SEED)

    # --- synth60: broad beta spread ---------------------------------------
    n = 60
    betas = rng.uniform(0.42, 2.1, size=n)
    eps = rng.uniform(0.006, 0.018, size=n)
    prices, market = simulate(rng, n, betas, eps)
    tickers = [f"SYN{i:02d}" for i in range(n)]
    write_csv(OUT / "synth60.csv", tickers, prices, market, dates)

    # --- synth12: generic desk-scale landscape ----------------------------
    n = 12
    betas = rng.uniform(0.5, 1.8, size=n)
    eps = rng.uniform(0.006, 0.018, size=n)
    prices, market = simulate(rng, n, betas, eps)
    tickers = [f"SYN{i:02d}" for i in range(n)]
    write_csv(OUT / "synth12.csv", tickers, prices, market, dates)

    # --- planted12: optimum forced into the size-2 tail -------------------
    # two high-beta assets whose idiosyncratic noise is orthogonalized
    # against the market path (and each other) in sample, so both recover
    # the same beta and expected return; the pair then strictly beats
    # either single on variance and every larger set on expected return
    n = 12
    betas = np.concatenate([[2.2, 2.2], rng.uniform(0.3, 0.7, size=n - 2)])
    eps = np.concatenate([[0.012, 0.012], rng.uniform(0.012, 0.02, size=n - 2)])
    prices, market = simulate_planted(rng, n, betas, eps)
    tickers = [f"SYN{i:02d}" for i in range(n)]
    write_csv(OUT / "planted12.csv", tickers, prices, market, dates)

    # sanity: market window return positive, planted optimum is the hot pair
    universe = load_prices(OUT / "planted12.csv", MARKET)
    model = build_market_model(universe)
    assert 0.05 < model.market_return < 0.45, f"market return {model.market_return}"
    result = exhaustive_best(model)
    assert result.best.portfolio.indices() == [0, 1], (
        f"planted optimum is {result.best.portfolio.indices()}, "
        f"size {result.best.size}")
    print(f"planted12 optimum confirmed at assets [0, 1], "
          f"cqns={result.best.cqns:.6f}, market_return={model.market_return:.4f}")

    universe = load_prices(OUT / "synth12.csv", MARKET)
    model = build_market_model(universe)
    best = exhaustive_best(model).best
    print(f"synth12 oracle best: size={best.size}, cqns={best.cqns:.6f}, "
          f"mask={best.portfolio.to_literal()}")


if __name__ == "__main__":
    main()
