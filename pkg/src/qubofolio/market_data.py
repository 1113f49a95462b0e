"""Price ingestion and the CAPM market model.

Input is a long-format CSV (``date,ticker,close``).  One ticker is the
market index; the rest form the asset universe.  From the aligned close
series we derive simple daily returns, an unbiased sample covariance,
per-asset betas against the market, and CAPM expected annual returns.

Conventions (fixed, recorded in report metadata):

* Returns are simple (arithmetic) daily returns, not log returns.
* Covariance uses the unbiased divisor (observations - 1).
* Expected returns are annual fractions (CAPM over the input window);
  portfolio risk numbers stay on the daily covariance scale.  The
  mixed annual/daily convention is deliberate and documented in the
  README because every downstream score depends on it.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateHistory,
    DuplicateRow,
    MissingMarket,
    NonPositivePrice,
    ShortHistory,
    ShortUniverse,
    ZeroMarketVariance,
)

logger = logging.getLogger(__name__)

DEFAULT_RISK_FREE = 0.01

# Assets missing more than this fraction of the market's dates are dropped
# instead of forward-filled; fabricated returns would poison the covariance.
MAX_MISSING_FRACTION = 0.10


@dataclass(frozen=True)
class PriceSeries:
    """Aligned close prices for one ticker."""

    ticker: str
    dates: tuple[str, ...]
    closes: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.closes):
            raise ValueError(f"{self.ticker}: dates and closes differ in length")
        if len(self.dates) < 2:
            raise ShortHistory(f"{self.ticker}: needs at least 2 dates, has {len(self.dates)}")
        if any(self.dates[i] >= self.dates[i + 1] for i in range(len(self.dates) - 1)):
            raise ValueError(f"{self.ticker}: dates must be strictly increasing")
        if np.any(np.asarray(self.closes) <= 0):
            raise NonPositivePrice(f"{self.ticker}: non-positive close price")


@dataclass(frozen=True)
class AssetUniverse:
    """Assets plus the market index, all on one shared date grid."""

    assets: tuple[PriceSeries, ...]
    market: PriceSeries
    as_of: str

    def __post_init__(self):
        if len(self.assets) < 2:
            raise ShortUniverse(f"need at least 2 assets, have {len(self.assets)}")
        tickers = [a.ticker for a in self.assets]
        if len(set(tickers)) != len(tickers):
            raise ValueError("duplicate asset tickers")
        dates = self.assets[0].dates
        for series in (*self.assets[1:], self.market):
            if series.dates != dates:
                raise ValueError(f"{series.ticker}: date grid differs from the universe")

    @property
    def n(self) -> int:
        return len(self.assets)

    @property
    def n_dates(self) -> int:
        return len(self.market.dates)

    @property
    def tickers(self) -> list[str]:
        return [a.ticker for a in self.assets]


@dataclass(frozen=True)
class MarketModel:
    """Everything downstream scoring and QUBO construction consume.

    ``expected_returns`` and ``market_return`` are annual fractions;
    ``cov``, ``market_var`` and ``market_cov`` are on the daily-return
    scale (see module docstring).
    """

    tickers: tuple[str, ...]
    daily_returns: np.ndarray      # N x (T-1)
    cov: np.ndarray                # N x N, bitwise symmetric
    market_var: float
    betas: np.ndarray
    expected_returns: np.ndarray   # annual fractions
    market_return: float           # annual fraction
    risk_free: float
    market_cov: np.ndarray         # Cov(r_i, r_m), daily scale
    as_of: str = ""

    @property
    def n(self) -> int:
        return len(self.tickers)

    def index_of(self, ticker: str) -> int:
        return self.tickers.index(ticker)

    def content_hash(self) -> str:
        """Stable hash of the model arrays, recorded in QUBO exports."""
        import hashlib

        h = hashlib.sha256()
        h.update(",".join(self.tickers).encode())
        for arr in (self.cov, self.expected_returns, self.market_cov):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        h.update(repr((self.market_var, self.market_return, self.risk_free)).encode())
        return h.hexdigest()[:16]


def load_prices(path, market_ticker: str) -> AssetUniverse:
    """Read a long-format CSV and return an aligned universe.

    Rows may arrive in any order.  All series are aligned to the
    intersection of their dates with the market's; assets missing more
    than 10% of the market's dates are dropped (logged) rather than
    filled.  Assets are sorted by ticker, the market series is kept
    separate.
    """
    by_ticker: dict[str, dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"date", "ticker", "close"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected header date,ticker,close")
        for row in reader:
            date, ticker = row["date"].strip(), row["ticker"].strip()
            close = float(row["close"])
            if close <= 0:
                raise NonPositivePrice(f"{ticker} @ {date}: close {close} <= 0")
            series = by_ticker.setdefault(ticker, {})
            if date in series:
                raise DuplicateRow(f"{ticker} @ {date} appears twice")
            series[date] = close

    if market_ticker not in by_ticker:
        raise MissingMarket(f"market ticker {market_ticker!r} not in {sorted(by_ticker)[:8]}...")

    market_raw = by_ticker.pop(market_ticker)
    market_dates = set(market_raw)
    if len(market_dates) < 2:
        raise ShortHistory(f"{market_ticker}: fewer than 2 market dates")

    # a file whose combined history cannot form even one return is broken
    # outright; the per-asset coverage gate below handles mere stragglers
    if by_ticker:
        shared_all = set(market_dates)
        for series in by_ticker.values():
            shared_all &= set(series)
        if len(shared_all) < 2:
            raise ShortHistory(
                f"only {len(shared_all)} date(s) shared across all series")

    kept: dict[str, dict[str, float]] = {}
    for ticker, series in by_ticker.items():
        missing = len(market_dates - set(series))
        if missing > MAX_MISSING_FRACTION * len(market_dates):
            logger.warning("dropping %s: missing %d of %d market dates",
                           ticker, missing, len(market_dates))
            continue
        kept[ticker] = series

    if len(kept) < 2:
        raise ShortUniverse(f"only {len(kept)} asset(s) left after alignment")

    shared = market_dates
    for series in kept.values():
        shared &= set(series)
    if len(shared) < 2:
        raise ShortHistory(f"only {len(shared)} shared date(s) across all series")
    grid = tuple(sorted(shared))

    def take(values: dict[str, float]) -> np.ndarray:
        return np.array([values[d] for d in grid], dtype=np.float64)

    assets = tuple(
        PriceSeries(ticker=t, dates=grid, closes=take(kept[t])) for t in sorted(kept)
    )
    market = PriceSeries(ticker=market_ticker, dates=grid, closes=take(market_raw))
    return AssetUniverse(assets=assets, market=market, as_of=grid[-1])


def compute_returns(universe: AssetUniverse) -> np.ndarray:
    """Simple daily returns, shape N x (T-1): r[t] = close[t+1]/close[t] - 1."""
    closes = np.stack([a.closes for a in universe.assets])
    return closes[:, 1:] / closes[:, :-1] - 1.0


def series_returns(closes: np.ndarray) -> np.ndarray:
    closes = np.asarray(closes, dtype=np.float64)
    return closes[1:] / closes[:-1] - 1.0


def covariance_matrix(returns: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance (divisor = observations - 1).

    Symmetrized so the result is bitwise equal across the diagonal.
    """
    returns = np.asarray(returns, dtype=np.float64)
    if returns.ndim != 2 or returns.shape[1] < 2:
        raise DegenerateHistory("need at least 2 return observations")
    raw = np.cov(returns, ddof=1)
    raw = np.atleast_2d(raw)
    return (raw + raw.T) / 2.0


def beta(asset_index: int, model: "MarketModel") -> float:
    """Cov(r_i, r_m) / Var(r_m)."""
    if model.market_var == 0:
        raise ZeroMarketVariance("market variance is zero")
    return float(model.market_cov[asset_index] / model.market_var)


def capm_expected_return(beta_value: float, risk_free: float, market_return: float) -> float:
    """rf + beta * (market_return - rf), an annual fraction."""
    return risk_free + beta_value * (market_return - risk_free)


def window_return(closes: np.ndarray) -> float:
    """Total simple return over the window: last/first - 1."""
    closes = np.asarray(closes, dtype=np.float64)
    return float(closes[-1] / closes[0] - 1.0)


def build_market_model(
    universe: AssetUniverse,
    risk_free: float = DEFAULT_RISK_FREE,
    market_return: float | None = None,
) -> MarketModel:
    """Assemble the full model from an aligned universe.

    ``market_return`` defaults to the market series' total return over
    the window; pass an override to inject an externally computed
    composite figure.
    """
    returns = compute_returns(universe)
    cov = covariance_matrix(returns)

    r_m = series_returns(universe.market.closes)
    n_obs = r_m.shape[0]
    if n_obs < 2:
        raise DegenerateHistory("need at least 2 market return observations")
    cm = r_m - r_m.mean()
    centered = returns - returns.mean(axis=1, keepdims=True)
    market_cov = centered @ cm / (n_obs - 1)
    market_var = float(cm @ cm / (n_obs - 1))
    if market_var == 0:
        raise ZeroMarketVariance("market variance is zero")

    if market_return is None:
        market_return = window_return(universe.market.closes)

    betas = market_cov / market_var
    expected = risk_free + betas * (market_return - risk_free)

    return MarketModel(
        tickers=tuple(universe.tickers),
        daily_returns=returns,
        cov=cov,
        market_var=market_var,
        betas=betas,
        expected_returns=expected,
        market_return=float(market_return),
        risk_free=float(risk_free),
        market_cov=market_cov,
        as_of=universe.as_of,
    )


def write_prices(universe: AssetUniverse, path) -> None:
    """Write the aligned universe back out in the long input format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "ticker", "close"])
        for series in (*universe.assets, universe.market):
            for date, close in zip(series.dates, series.closes):
                writer.writerow([date, series.ticker, repr(float(close))])
