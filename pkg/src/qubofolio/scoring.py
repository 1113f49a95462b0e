"""Equal-weighted portfolio masks and their figures of merit.

A portfolio is an N-bit selection mask; every selected asset carries
weight 1/m.  The net score is ``Var(R_w) - E[R_w]**(2+alpha)`` (lower is
better), the ratio score is ``Cov_im(R_w) / sigma(R_w)``, and Sharpe
follows the annual-return-over-daily-sigma convention of the market
model.  All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPortfolio, ZeroVariance
from .market_data import MarketModel

DEFAULT_ALPHA = 1.0


def signed_power(x: float, exponent: float) -> float:
    """sign(x) * |x|**exponent.

    Integral exponents use repeated multiplication, so the default
    cubic case is exact: signed_power(x, 3) == x*x*x bit for bit.
    Fractional exponents stay sign-preserving, which keeps portfolios
    with more-negative expected returns strictly worse.
    """
    if float(exponent).is_integer():
        k = int(exponent)
        acc = 1.0
        base = x
        for _ in range(abs(k)):
            acc *= base
        if k < 0:
            acc = 1.0 / acc
        return acc
    mag = abs(x) ** exponent
    return -mag if x < 0 else mag


@dataclass(frozen=True)
class Portfolio:
    """An N-bit selection mask with implicit equal weights."""

    bits: np.ndarray  # uint8 vector of 0/1

    def __post_init__(self):
        bits = np.ascontiguousarray(np.asarray(self.bits, dtype=np.uint8))
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_indices(cls, indices, n: int) -> "Portfolio":
        bits = np.zeros(n, dtype=np.uint8)
        bits[list(indices)] = 1
        return cls(bits)

    @classmethod
    def from_int(cls, value: int, n: int) -> "Portfolio":
        """Bit i of ``value`` (LSB first) selects asset i."""
        bits = np.array([(value >> i) & 1 for i in range(n)], dtype=np.uint8)
        return cls(bits)

    @property
    def n(self) -> int:
        return int(self.bits.shape[0])

    @property
    def size(self) -> int:
        return int(self.bits.sum())

    @property
    def key(self) -> int:
        """Integer encoding (asset i on bit i); dedup and hashing key."""
        return int(sum(int(b) << i for i, b in enumerate(self.bits)))

    def indices(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.bits)]

    def to_literal(self) -> str:
        """Full-width binary literal, asset 0 on the rightmost bit."""
        return "0b" + "".join("1" if b else "0" for b in self.bits[::-1])

    @classmethod
    def from_literal(cls, text: str, n: int) -> "Portfolio":
        value = int(text, 2)
        if value < 0 or value >= (1 << n):
            raise ValueError(f"mask {text} does not fit a {n}-asset universe")
        return cls.from_int(value, n)

    def __eq__(self, other):
        return isinstance(other, Portfolio) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.n, self.key))


@dataclass(frozen=True)
class ScoredPortfolio:
    portfolio: Portfolio
    expected_return: float   # annual fraction
    variance: float          # daily scale
    stdev: float
    cqns: float
    cqr: float
    sharpe: float
    alpha: float

    @property
    def size(self) -> int:
        return self.portfolio.size


def portfolio_return(p: Portfolio, model: MarketModel) -> float:
    """Mean expected annual return over the selected assets."""
    m = p.size
    if m == 0:
        raise EmptyPortfolio("cannot score an empty mask")
    idx = np.flatnonzero(p.bits)
    return float(model.expected_returns[idx].sum() / m)


def portfolio_variance(p: Portfolio, model: MarketModel) -> float:
    """(1/m^2) * sum of the covariance block over the selected assets."""
    m = p.size
    if m == 0:
        raise EmptyPortfolio("cannot score an empty mask")
    idx = np.flatnonzero(p.bits)
    block = model.cov[np.ix_(idx, idx)]
    return float(block.sum() / (m * m))


def cqns(p: Portfolio, model: MarketModel, alpha: float = DEFAULT_ALPHA) -> float:
    """variance - signed_power(expected_return, 2 + alpha); lower is better."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    var = portfolio_variance(p, model)
    ret = portfolio_return(p, model)
    return var - signed_power(ret, 2.0 + alpha)


def cqr(p: Portfolio, model: MarketModel) -> float:
    """Mean market covariance of the constituents over portfolio stdev."""
    m = p.size
    if m == 0:
        raise EmptyPortfolio("cannot score an empty mask")
    var = portfolio_variance(p, model)
    if var <= 0:
        raise ZeroVariance("portfolio variance is zero")
    idx = np.flatnonzero(p.bits)
    num = float(model.market_cov[idx].sum() / m)
    return num / float(np.sqrt(var))


def sharpe(expected_return: float, stdev: float, risk_free: float) -> float:
    """(E - rf) / sigma under the model's mixed annual/daily convention."""
    if stdev <= 0:
        raise ZeroVariance("portfolio stdev is zero")
    return (expected_return - risk_free) / stdev


def score(
    p: Portfolio,
    model: MarketModel,
    alpha: float = DEFAULT_ALPHA,
    risk_free: float | None = None,
    sharpe_excess: bool = True,
) -> ScoredPortfolio:
    """Compute every figure of merit for one mask.

    ``sharpe_excess=False`` drops the risk-free subtraction (E/sigma),
    matching the alternative Sharpe convention; the default keeps it.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    ret = portfolio_return(p, model)
    var = portfolio_variance(p, model)
    std = float(np.sqrt(var))
    rf = model.risk_free if risk_free is None else risk_free
    if not sharpe_excess:
        rf = 0.0
    return ScoredPortfolio(
        portfolio=p,
        expected_return=ret,
        variance=var,
        stdev=std,
        cqns=var - signed_power(ret, 2.0 + alpha),
        cqr=cqr(p, model),
        sharpe=sharpe(ret, std, rf),
        alpha=alpha,
    )


# Batch helpers shared by the samplers. These vectorize over a mask matrix;
# agreement with the single-mask path is covered by the oracle tests.

def batch_returns(masks: np.ndarray, model: MarketModel) -> np.ndarray:
    sizes = masks.sum(axis=1)
    return (masks @ model.expected_returns) / sizes


def batch_variances(masks: np.ndarray, model: MarketModel) -> np.ndarray:
    sizes = masks.sum(axis=1)
    quad = np.einsum("si,si->s", masks @ model.cov, masks)
    return quad / (sizes * sizes)


def batch_cqns(masks: np.ndarray, model: MarketModel, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Net scores for a (S, N) 0/1 float matrix of nonempty masks."""
    rets = batch_returns(masks, model)
    var = batch_variances(masks, model)
    q = 2.0 + alpha
    if float(q).is_integer() and int(q) == 3:
        powered = rets * rets * rets
    else:
        powered = np.sign(rets) * np.abs(rets) ** q
    return var - powered
