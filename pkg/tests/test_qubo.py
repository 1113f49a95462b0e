import json
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qubofolio import (
    Portfolio,
    ShiftParams,
    Weighting,
    apply_shift,
    build_bigmatrix,
    build_raw_qubo,
    cqns,
    estimate_size_energy,
    export_qubo,
    import_qubo,
    refactor_energy,
    scale,
    solve_shift,
    to_ising,
)
from qubofolio.errors import BadSize, DegenerateAnchor, RangeViolation, ZeroMatrix
from qubofolio.qubo import ScaledQubo, auto_end_energy, qubo_energies, qubo_energy
from qubofolio.scoring import portfolio_return, portfolio_variance

from conftest import toy_model


def all_masks(n):
    ints = np.arange(1, 1 << n, dtype=np.uint64)
    return ((ints[:, None] >> np.arange(n, dtype=np.uint64)) & 1).astype(np.float64)


@pytest.fixture(scope="module")
def scaled6(model12):
    raw = build_raw_qubo(model12, 6)
    e_bar = estimate_size_energy(raw, 200, seed=11)
    shift = solve_shift(e_bar, 6, auto_end_energy(e_bar, 6))
    return scale(apply_shift(raw, shift), shift)


class TestBuildRawQubo:
    def test_per_size_coefficients(self, model12):
        k = 5
        raw = build_raw_qubo(model12, k)
        off = ~np.eye(12, dtype=bool)
        assert np.array_equal(raw.q[off], (model12.cov / 25.0)[off])
        expected_diag = np.diag(model12.cov) / 25.0 - model12.expected_returns / k
        assert np.allclose(np.diag(raw.q), expected_diag, atol=1e-18)

    def test_two_asset_k1_closed_form(self):
        v, c = 0.0004, 0.0001
        model = toy_model([[v, c], [c, v]], [0.1, 0.3])
        raw = build_raw_qubo(model, 1)
        assert raw.q[0, 0] == v - 0.1
        assert raw.q[1, 1] == v - 0.3
        assert raw.q[0, 1] == c

    def test_unweighted_off_diagonal(self, model12):
        raw = build_raw_qubo(model12, 7, weighting=Weighting.UNWEIGHTED)
        off = ~np.eye(12, dtype=bool)
        assert np.array_equal(raw.q[off], model12.cov[off])

    def test_popcount_k_energy_is_var_minus_return(self, model12):
        k = 6
        raw = build_raw_qubo(model12, k)
        p = Portfolio.from_indices([0, 2, 4, 6, 8, 10], 12)
        energy = raw.energy(p.bits)
        surrogate = portfolio_variance(p, model12) - portfolio_return(p, model12)
        assert abs(energy - surrogate) < 1e-12

    def test_bad_sizes(self, model12):
        with pytest.raises(BadSize):
            build_raw_qubo(model12, 0)
        with pytest.raises(BadSize):
            build_raw_qubo(model12, 12)


class TestEstimateSizeEnergy:
    def test_empty_mask_zero(self, model12):
        raw = build_raw_qubo(model12, 6)
        e_bar = estimate_size_energy(raw, 50, seed=0)
        assert e_bar[0] == 0.0

    def test_full_mask_exact(self, model12):
        raw = build_raw_qubo(model12, 6)
        e_bar = estimate_size_energy(raw, 50, seed=0)
        assert e_bar[12] == raw.energy(np.ones(12))

    def test_mid_size_against_exhaustive_mean(self, model12):
        raw = build_raw_qubo(model12, 6)
        masks = np.zeros((0, 12))
        rows = []
        for combo in combinations(range(12), 6):
            row = np.zeros(12)
            row[list(combo)] = 1.0
            rows.append(row)
        masks = np.stack(rows)
        energies = qubo_energies(raw.q, masks)
        exact_mean = energies.mean()
        spread = energies.std(ddof=1)
        samples = 10_000
        e_bar = estimate_size_energy(raw, samples, seed=123)
        tolerance = 3.0 * spread / np.sqrt(samples)
        assert abs(e_bar[6] - exact_mean) <= tolerance

    def test_deterministic(self, model12):
        raw = build_raw_qubo(model12, 4)
        a = estimate_size_energy(raw, 100, seed=9)
        b = estimate_size_energy(raw, 100, seed=9)
        assert np.array_equal(a, b)


class TestSolveShift:
    def test_identity_anchor(self):
        e_bar = np.array([0.0, -0.1, -0.3, -0.5])
        shift = solve_shift(e_bar, 2, end_energy=float(e_bar[-1]))
        assert shift.quad == 0.0
        assert shift.lin == 0.0

    def test_closed_form_arithmetic(self):
        e_bar = np.zeros(61)
        e_bar[60] = -1.0
        shift = solve_shift(e_bar, 30, end_energy=1.0)
        assert shift.quad == pytest.approx(2.0 / 1800.0, rel=1e-15)
        assert shift.lin == -30 * shift.quad

    def test_anchors_exact(self):
        e_bar = np.linspace(0, -2.0, 13)
        shift = solve_shift(e_bar, 7, end_energy=0.5)
        assert shift.penalty(0) == 0.0
        assert shift.penalty(7) == 0.0
        assert shift.penalty(12) == 0.5 - e_bar[12]

    def test_degenerate_anchor(self):
        with pytest.raises(DegenerateAnchor):
            solve_shift(np.zeros(13), 12, end_energy=1.0)

    def test_warns_on_low_end(self):
        e_bar = np.zeros(13)
        e_bar[12] = 1.0
        with pytest.warns(UserWarning):
            solve_shift(e_bar, 6, end_energy=0.0)

    def test_no_warning_at_equality(self, recwarn):
        e_bar = np.zeros(13)
        e_bar[12] = -0.5
        solve_shift(e_bar, 6, end_energy=-0.5)
        assert not recwarn.list

    @pytest.mark.filterwarnings("ignore::UserWarning")
    @given(
        k=st.integers(min_value=1, max_value=11),
        end=st.floats(min_value=-3, max_value=3, allow_nan=False),
        ebar_n=st.floats(min_value=-3, max_value=3, allow_nan=False),
    )
    def test_anchor_property(self, k, end, ebar_n):
        e_bar = np.zeros(13)
        e_bar[12] = ebar_n
        shift = solve_shift(e_bar, k, end)
        assert shift.penalty(0) == 0.0
        assert shift.penalty(k) == 0.0
        assert shift.penalty(12) == end - ebar_n


class TestApplyShift:
    def test_zero_shift_unchanged(self, model12):
        raw = build_raw_qubo(model12, 6)
        shift = ShiftParams.identity(12, 6, ebar_n=raw.energy(np.ones(12)))
        assert np.array_equal(apply_shift(raw, shift), raw.q)

    def test_target_size_energy_unchanged(self, model12):
        raw = build_raw_qubo(model12, 6)
        e_bar = estimate_size_energy(raw, 100, seed=1)
        shift = solve_shift(e_bar, 6, end_energy=1.0)
        shifted = apply_shift(raw, shift)
        p = Portfolio.from_indices([1, 3, 5, 7, 9, 11], 12)
        assert qubo_energy(shifted, p.bits) == pytest.approx(
            raw.energy(p.bits), abs=1e-12)

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_exhaustive_identity_random_shifts(self, model12):
        # energy identity shifted(x) == raw(x) + S(popcount) over all masks
        n = 10
        sub = toy_model(model12.cov[:n, :n], model12.expected_returns[:n])
        raw = build_raw_qubo(sub, 4)
        masks = all_masks(n)
        raw_energies = qubo_energies(raw.q, masks)
        popcounts = masks.sum(axis=1).astype(int)
        rng = np.random.default_rng(77)
        for _ in range(100):
            k = int(rng.integers(1, n))
            end = float(rng.uniform(-1, 1))
            e_bar = np.zeros(n + 1)
            e_bar[n] = raw.energy(np.ones(n))
            shift = solve_shift(e_bar, k, end)
            shifted = apply_shift(raw, shift)
            shifted_energies = qubo_energies(shifted, masks)
            penalties = np.array([shift.penalty(m) for m in range(n + 1)])
            assert np.allclose(shifted_energies, raw_energies + penalties[popcounts],
                               atol=1e-9)


class TestGraduatedTune:
    def test_converged_no_change(self):
        e_bar = np.zeros(13)
        e_bar[12] = -0.5
        from qubofolio import graduated_tune
        shift = solve_shift(e_bar, 8, end_energy=1.0)
        tuned = graduated_tune(shift, [8, 8, 9, 7, 8], 8)
        assert tuned.end_energy == shift.end_energy
        assert tuned.quad == shift.quad

    def test_undersized_raises_end(self):
        from qubofolio import graduated_tune
        e_bar = np.zeros(13)
        e_bar[12] = -0.5
        shift = solve_shift(e_bar, 8, end_energy=1.0)
        tuned = graduated_tune(shift, [3, 4, 5], 8, eta=0.5)
        assert tuned.end_energy > shift.end_energy

    def test_requires_observations(self):
        from qubofolio import graduated_tune
        shift = ShiftParams.identity(12, 6)
        with pytest.raises(ValueError):
            graduated_tune(shift, [], 6)


class TestScale:
    def test_fixed_point(self):
        matrix = np.array([[0.9, 0.1], [0.1, -0.4]])
        scaled = scale(matrix, ShiftParams.identity(2, 1))
        assert scaled.scale == 1.0
        assert np.array_equal(scaled.matrix, matrix)

    def test_factor_arithmetic(self):
        matrix = np.array([[9.0, 0.0], [0.0, -1.0]])
        scaled = scale(matrix, ShiftParams.identity(2, 1))
        assert scaled.scale == pytest.approx(0.1, rel=1e-15)

    def test_zero_matrix(self):
        with pytest.raises(ZeroMatrix):
            scale(np.zeros((3, 3)), ShiftParams.identity(3, 1))

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_argmin_invariance_per_size(self, model12):
        masks = all_masks(12)
        popcounts = masks.sum(axis=1).astype(int)
        rng = np.random.default_rng(5)
        for trial in range(20):
            k = int(rng.integers(2, 11))
            raw = build_raw_qubo(model12, k)
            e_bar = estimate_size_energy(raw, 50, seed=trial)
            shift = solve_shift(e_bar, k, float(rng.uniform(-0.5, 0.5)))
            shifted = apply_shift(raw, shift)
            scaled = scale(shifted, shift)
            pre = qubo_energies(shifted, masks)
            post = qubo_energies(scaled.matrix, masks)
            for m in range(1, 13):
                rows = np.flatnonzero(popcounts == m)
                assert rows[np.argmin(pre[rows])] == rows[np.argmin(post[rows])]


class TestIsing:
    def test_one_variable_closed_form(self):
        q = ScaledQubo(matrix=np.array([[0.9]]), scale=1.0,
                       shift=ShiftParams.identity(1, 1), target_size=1)
        ising = to_ising(q)
        assert ising.h[0] == 0.45
        assert ising.offset == 0.45
        assert ising.j == {}

    def test_zero_matrix_all_zero(self):
        q = ScaledQubo(matrix=np.zeros((3, 3)), scale=1.0,
                       shift=ShiftParams.identity(3, 1), target_size=1)
        ising = to_ising(q)
        assert np.array_equal(ising.h, np.zeros(3))
        assert ising.offset == 0.0
        assert ising.j == {}

    def test_energy_identity_exhaustive(self, model12):
        n = 10
        sub = toy_model(model12.cov[:n, :n], model12.expected_returns[:n])
        raw = build_raw_qubo(sub, 5)
        e_bar = estimate_size_energy(raw, 100, seed=3)
        shift = solve_shift(e_bar, 5, auto_end_energy(e_bar, 5))
        scaled = scale(apply_shift(raw, shift), shift)
        ising = to_ising(scaled, validate=False)
        masks = all_masks(n)
        for bits in np.vstack([np.zeros((1, n)), masks]):
            spins = 2.0 * bits - 1.0
            q_energy = qubo_energy(scaled.matrix, bits)
            i_energy = ising.energy(spins) + ising.offset
            assert abs(q_energy - i_energy) < 1e-9

    def test_range_violation_names_indices(self):
        n = 6
        matrix = np.full((n, n), 0.9)
        q = ScaledQubo(matrix=matrix, scale=1.0,
                       shift=ShiftParams.identity(n, 2), target_size=2)
        with pytest.raises(RangeViolation) as err:
            to_ising(q)
        assert err.value.linear_indices == tuple(range(n))


class TestRefactorEnergy:
    def test_round_trip(self, model12, scaled6):
        p = Portfolio.from_indices([0, 1, 2, 3, 4], 12)
        sample = scaled6.energy(p.bits)
        raw_back, exact = refactor_energy(sample, scaled6, p.bits, model12)
        raw = build_raw_qubo(model12, 6)
        assert abs(raw_back - raw.energy(p.bits)) < 1e-9
        assert exact == cqns(p, model12, 1.0)

    def test_target_size_no_shift_term(self, model12, scaled6):
        p = Portfolio.from_indices([0, 2, 4, 6, 8, 10], 12)
        sample = scaled6.energy(p.bits)
        raw_back, _ = refactor_energy(sample, scaled6, p.bits, model12)
        assert raw_back == pytest.approx(sample / scaled6.scale, rel=1e-15)

    def test_thousand_random_masks(self, model12, scaled6):
        raw = build_raw_qubo(model12, 6)
        rng = np.random.default_rng(21)
        for _ in range(1000):
            bits = (rng.random(12) < 0.5).astype(np.uint8)
            if not bits.any():
                continue
            sample = scaled6.energy(bits)
            raw_back, exact = refactor_energy(sample, scaled6, bits, model12)
            assert abs(raw_back - raw.energy(bits)) < 1e-9
            assert exact == cqns(Portfolio(bits), model12, 1.0)


class TestExport:
    def test_round_trip_bitwise(self, scaled6, tmp_path):
        path = tmp_path / "q.json"
        export_qubo(scaled6, path, seed=7, model_hash="abc")
        loaded = import_qubo(path)
        assert np.array_equal(loaded.matrix, scaled6.matrix)
        assert loaded.scale == scaled6.scale
        assert loaded.shift == scaled6.shift
        assert loaded.target_size == scaled6.target_size

    def test_two_asset_triplet_count(self, tmp_path):
        model = toy_model([[0.0004, 0.0001], [0.0001, 0.0009]], [0.1, 0.3])
        raw = build_raw_qubo(model, 1)
        shift = ShiftParams.identity(2, 1, ebar_n=raw.energy(np.ones(2)))
        scaled = scale(apply_shift(raw, shift), shift)
        path = tmp_path / "two.json"
        export_qubo(scaled, path)
        doc = json.loads(path.read_text())
        assert len(doc["entries"]) == 3

    def test_sixty_asset_triplet_count(self, model60, tmp_path):
        raw = build_raw_qubo(model60, 30)
        e_bar = estimate_size_energy(raw, 50, seed=2)
        shift = solve_shift(e_bar, 30, auto_end_energy(e_bar, 30))
        scaled = scale(apply_shift(raw, shift), shift)
        path = tmp_path / "sixty.json"
        export_qubo(scaled, path, seed=1, model_hash=model60.content_hash())
        doc = json.loads(path.read_text())
        assert len(doc["entries"]) == 60 + 60 * 59 // 2  # 1830
        assert doc["metadata"]["model_hash"] == model60.content_hash()


class TestProperties:
    def test_energy_decomposition_exhaustive(self, model12, scaled6):
        raw = build_raw_qubo(model12, 6)
        masks = all_masks(12)
        raw_energies = qubo_energies(raw.q, masks)
        scaled_energies = qubo_energies(scaled6.matrix, masks)
        popcounts = masks.sum(axis=1).astype(int)
        penalties = np.array([scaled6.shift.penalty(m) for m in range(13)])
        expected = scaled6.scale * (raw_energies + penalties[popcounts])
        assert np.allclose(scaled_energies, expected, atol=1e-9)

    def test_valid_slice_ordering_matches_surrogate(self, model12, scaled6):
        rows = []
        for combo in combinations(range(12), 6):
            row = np.zeros(12)
            row[list(combo)] = 1.0
            rows.append(row)
        masks = np.stack(rows)
        qubo_vals = qubo_energies(scaled6.matrix, masks)
        variances = np.einsum("si,si->s", masks @ model12.cov, masks) / 36.0
        surrogate = variances - (masks @ model12.expected_returns) / 6.0
        assert np.array_equal(np.argsort(qubo_vals, kind="stable"),
                              np.argsort(surrogate, kind="stable"))

    def test_quadratic_shrinks_relative_to_linear(self, model12):
        ratios = []
        for k in range(2, 12):
            raw = build_raw_qubo(model12, k)
            off = ~np.eye(12, dtype=bool)
            quad_max = np.abs(raw.q[off]).max()
            lin_max = np.abs(np.diag(raw.q)).max()
            ratios.append(quad_max / lin_max)
        assert all(b < a for a, b in zip(ratios, ratios[1:]))

    def test_bigmatrix_sizes(self, model12):
        big = build_bigmatrix(model12, range(3, 7), samples_per_size=30, seed=4)
        assert sorted(big.qubos) == [3, 4, 5, 6]
        with pytest.raises(BadSize):
            build_bigmatrix(model12, [1, 2], samples_per_size=30)
