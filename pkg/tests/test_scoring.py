import numpy as np
import pytest
from hypothesis import given, strategies as st

from qubofolio import Portfolio, cqns, cqr, portfolio_return, portfolio_variance, score, sharpe, signed_power
from qubofolio.errors import EmptyPortfolio, ZeroVariance
from qubofolio.scoring import batch_cqns

from conftest import toy_model


class TestSignedPower:
    @given(st.floats(min_value=-10, max_value=10, allow_nan=False))
    def test_cube_exact(self, x):
        assert signed_power(x, 3) == x * x * x

    def test_fractional_preserves_sign(self):
        assert signed_power(-0.3, 2.5) == -(0.3 ** 2.5)
        assert signed_power(0.3, 2.5) == 0.3 ** 2.5

    def test_more_negative_is_worse(self):
        # penalty term: var - signed_power(E, q); E more negative -> higher score
        assert signed_power(-0.4, 2.5) < signed_power(-0.2, 2.5)

    def test_zero(self):
        assert signed_power(0.0, 2.7) == 0.0


class TestPortfolioMask:
    def test_literal_round_trip(self):
        p = Portfolio.from_indices([0, 3, 5], 8)
        assert p.to_literal() == "0b00101001"
        assert Portfolio.from_literal(p.to_literal(), 8) == p
        assert p.key == 0b101001
        assert p.size == 3

    def test_from_int(self):
        p = Portfolio.from_int(0b1010, 4)
        assert p.indices() == [1, 3]

    def test_literal_too_wide(self):
        with pytest.raises(ValueError):
            Portfolio.from_literal("0b10000", 4)


class TestReturnAndVariance:
    def test_single_asset(self):
        model = toy_model([[0.0004, 0.0], [0.0, 0.0009]], [0.1, 0.3])
        p = Portfolio.from_indices([0], 2)
        assert portfolio_return(p, model) == 0.1
        assert portfolio_variance(p, model) == 0.0004

    def test_two_asset_midpoint(self):
        model = toy_model([[0.0004, 0.0], [0.0, 0.0004]], [0.1, 0.3])
        p = Portfolio.from_indices([0, 1], 2)
        assert portfolio_return(p, model) == pytest.approx(0.2, abs=1e-15)

    def test_uncorrelated_diversification(self):
        v = 0.0008
        model = toy_model([[v, 0.0], [0.0, v]], [0.1, 0.1])
        p = Portfolio.from_indices([0, 1], 2)
        assert portfolio_variance(p, model) == pytest.approx(v / 2, rel=1e-15)

    def test_all_in_mean(self, model12):
        p = Portfolio.from_indices(range(12), 12)
        oracle = sum(model12.expected_returns) / 12
        assert portfolio_return(p, model12) == pytest.approx(oracle, rel=1e-14)

    def test_first_ten_against_quadratic_form_oracle(self, model12):
        p = Portfolio.from_indices(range(10), 12)
        acc = 0.0
        for i in range(10):
            for j in range(10):
                acc += model12.cov[i, j]
        oracle = acc / 100.0
        assert abs(portfolio_variance(p, model12) - oracle) < 1e-12

    def test_empty_errors(self, model12):
        p = Portfolio(np.zeros(12, dtype=np.uint8))
        with pytest.raises(EmptyPortfolio):
            portfolio_return(p, model12)
        with pytest.raises(EmptyPortfolio):
            portfolio_variance(p, model12)


class TestCqns:
    def test_single_asset_closed_form(self):
        model = toy_model([[0.0004, 0.0], [0.0, 0.1]], [0.2, 0.0])
        p = Portfolio.from_indices([0], 2)
        assert cqns(p, model, alpha=1.0) == pytest.approx(-0.0076, abs=1e-15)

    def test_zero_return_equals_variance(self):
        model = toy_model([[0.0004, 0.0], [0.0, 0.0009]], [0.0, 0.5])
        p = Portfolio.from_indices([0], 2)
        assert cqns(p, model, alpha=1.0) == portfolio_variance(p, model)

    def test_alpha_must_be_positive(self, model12):
        with pytest.raises(ValueError):
            cqns(Portfolio.from_indices([0], 12), model12, alpha=0.0)

    def test_global_best_matches_golden(self, model12, golden):
        from qubofolio.solvers import exhaustive_best

        result = exhaustive_best(model12)
        pinned = golden["synth12"]["best"]
        assert result.best.portfolio.to_literal() == pinned["mask"]
        assert result.best.cqns == pinned["cqns"]

    def test_permutation_invariance(self, model12):
        rng = np.random.default_rng(7)
        perm = rng.permutation(12)
        permuted = toy_model(model12.cov[np.ix_(perm, perm)],
                             model12.expected_returns[perm],
                             market_cov=model12.market_cov[perm],
                             market_var=model12.market_var)
        for _ in range(25):
            bits = (rng.random(12) < 0.4).astype(np.uint8)
            if not bits.any():
                continue
            # selecting the same underlying assets through the relabeling
            assert cqns(Portfolio(bits[perm]), permuted, 1.0) == pytest.approx(
                cqns(Portfolio(bits), model12, 1.0), abs=1e-15)

    def test_monotone_refinement_zero_asset(self, model12):
        # appending an asset with zero covariance and zero return rescales
        # variance by (m/(m+1))^2 and leaves the return sum unchanged
        cov = np.zeros((13, 13))
        cov[:12, :12] = model12.cov
        rets = np.concatenate([model12.expected_returns, [0.0]])
        extended = toy_model(cov, rets)
        base = toy_model(model12.cov, model12.expected_returns)
        p_old = Portfolio.from_indices(range(6), 12)
        p_new = Portfolio.from_indices(list(range(6)) + [12], 13)
        var_old = portfolio_variance(p_old, base)
        var_new = portfolio_variance(p_new, extended)
        assert var_new == pytest.approx(var_old * 36 / 49, rel=1e-12)
        ret_old = portfolio_return(p_old, base)
        ret_new = portfolio_return(p_new, extended)
        assert ret_new == pytest.approx(ret_old * 6 / 7, rel=1e-12)

    def test_batch_matches_single(self, model12):
        rng = np.random.default_rng(3)
        masks = (rng.random((40, 12)) < 0.5)
        masks = masks[masks.sum(axis=1) > 0].astype(np.float64)
        batch = batch_cqns(masks, model12, 1.0)
        for row, value in zip(masks, batch):
            p = Portfolio(row.astype(np.uint8))
            assert abs(value - cqns(p, model12, 1.0)) < 1e-12


class TestCqr:
    def test_zero_market_cov(self):
        model = toy_model([[0.0004, 0.0], [0.0, 0.0009]], [0.1, 0.2],
                          market_cov=[0.0, 0.0])
        assert cqr(Portfolio.from_indices([0], 2), model) == 0.0

    def test_single_asset_closed_form(self):
        model = toy_model([[0.0004, 0.0], [0.0, 0.0009]], [0.1, 0.2],
                          market_cov=[0.0003, 0.0001])
        expected = 0.0003 / np.sqrt(0.0004)
        assert cqr(Portfolio.from_indices([0], 2), model) == pytest.approx(expected, rel=1e-15)

    def test_fixture_ten_asset_oracle(self, model12):
        p = Portfolio.from_indices(range(10), 12)
        num = sum(model12.market_cov[i] for i in range(10)) / 10
        var = portfolio_variance(p, model12)
        oracle = num / np.sqrt(var)
        assert abs(cqr(p, model12) - oracle) < 1e-12

    def test_zero_variance_raises(self):
        model = toy_model([[0.0, 0.0], [0.0, 0.0]], [0.1, 0.2])
        with pytest.raises(ZeroVariance):
            cqr(Portfolio.from_indices([0], 2), model)


class TestSharpe:
    def test_reference_convention(self):
        # E/sigma without the risk-free subtraction reproduces ~8.91
        assert sharpe(0.2209, 0.0248, 0.0) == pytest.approx(8.907, abs=2e-3)

    def test_excess_zero(self):
        assert sharpe(0.05, 0.02, 0.05) == 0.0

    def test_arithmetic(self):
        assert sharpe(0.11, 0.05, 0.01) == pytest.approx(2.0, abs=1e-12)

    def test_zero_stdev_raises(self):
        with pytest.raises(ZeroVariance):
            sharpe(0.1, 0.0, 0.01)


class TestScore:
    def test_fields_consistent(self, model12):
        p = Portfolio.from_indices([1, 4, 7], 12)
        sp = score(p, model12, alpha=1.0)
        assert sp.stdev == np.sqrt(sp.variance)
        assert sp.cqns == sp.variance - signed_power(sp.expected_return, 3.0)
        assert sp.sharpe == sharpe(sp.expected_return, sp.stdev, model12.risk_free)

    def test_sharpe_excess_toggle(self, model12):
        p = Portfolio.from_indices([1, 4, 7], 12)
        with_rf = score(p, model12, sharpe_excess=True)
        without = score(p, model12, sharpe_excess=False)
        assert without.sharpe == sharpe(with_rf.expected_return, with_rf.stdev, 0.0)
