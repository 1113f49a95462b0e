import json
import pathlib

import numpy as np
import pytest

from qubofolio import MarketModel, build_market_model, load_prices

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "src" / "qubofolio" / "fixtures"
DATA = pathlib.Path(__file__).resolve().parent / "data"

MARKET = "MKT"


@pytest.fixture(scope="session")
def universe12():
    return load_prices(FIXTURES / "synth12.csv", MARKET)


@pytest.fixture(scope="session")
def model12(universe12):
    return build_market_model(universe12)


@pytest.fixture(scope="session")
def planted12():
    return build_market_model(load_prices(FIXTURES / "planted12.csv", MARKET))


@pytest.fixture(scope="session")
def model60():
    return build_market_model(load_prices(FIXTURES / "synth60.csv", MARKET))


@pytest.fixture(scope="session")
def golden():
    with open(DATA / "oracle12.json") as fh:
        return json.load(fh)


def toy_model(cov, expected_returns, market_cov=None, market_var=1.0,
              risk_free=0.01, market_return=0.18) -> MarketModel:
    """Hand-built model for closed-form unit tests."""
    cov = np.asarray(cov, dtype=np.float64)
    expected = np.asarray(expected_returns, dtype=np.float64)
    n = len(expected)
    if market_cov is None:
        market_cov = np.zeros(n)
    market_cov = np.asarray(market_cov, dtype=np.float64)
    betas = market_cov / market_var
    return MarketModel(
        tickers=tuple(f"T{i:02d}" for i in range(n)),
        daily_returns=np.zeros((n, 2)),
        cov=cov,
        market_var=market_var,
        betas=betas,
        expected_returns=expected,
        market_return=market_return,
        risk_free=risk_free,
        market_cov=market_cov,
    )


@pytest.fixture
def fixtures_dir():
    return FIXTURES
