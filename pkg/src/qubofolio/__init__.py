"""Cardinality-constrained portfolio selection via per-size QUBOs.

Pipeline: price CSV -> CAPM market model -> net-score (CQNS) and ratio
(CQR) portfolio scoring -> per-size QUBOs with an affine size penalty ->
classical solver battery -> frontier and comparison reports.

The hot solver loops run on a compiled kernel backend when available and
on a bit-identical pure-Python fallback otherwise; ``KERNEL_BACKEND``
names the one in use.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .market_data import (
    AssetUniverse,
    MarketModel,
    PriceSeries,
    beta,
    build_market_model,
    capm_expected_return,
    compute_returns,
    covariance_matrix,
    load_prices,
)
from .qubo import (
    BigMatrix,
    IsingModel,
    RawQubo,
    ScaledQubo,
    ShiftParams,
    Weighting,
    apply_shift,
    auto_end_energy,
    build_bigmatrix,
    build_raw_qubo,
    build_scaled_qubo,
    estimate_size_energy,
    export_qubo,
    graduated_tune,
    import_qubo,
    refactor_energy,
    scale,
    solve_shift,
    to_ising,
)
from .scoring import (
    Portfolio,
    ScoredPortfolio,
    cqns,
    cqr,
    portfolio_return,
    portfolio_variance,
    score,
    sharpe,
    signed_power,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "AssetUniverse",
    "MarketModel",
    "PriceSeries",
    "beta",
    "build_market_model",
    "capm_expected_return",
    "compute_returns",
    "covariance_matrix",
    "load_prices",
    "BigMatrix",
    "IsingModel",
    "RawQubo",
    "ScaledQubo",
    "ShiftParams",
    "Weighting",
    "apply_shift",
    "auto_end_energy",
    "build_bigmatrix",
    "build_raw_qubo",
    "build_scaled_qubo",
    "estimate_size_energy",
    "export_qubo",
    "graduated_tune",
    "import_qubo",
    "refactor_energy",
    "scale",
    "solve_shift",
    "to_ising",
    "Portfolio",
    "ScoredPortfolio",
    "cqns",
    "cqr",
    "portfolio_return",
    "portfolio_variance",
    "score",
    "sharpe",
    "signed_power",
    "__version__",
]
