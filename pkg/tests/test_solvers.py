import math
from itertools import combinations

import numpy as np
import pytest

from qubofolio import Portfolio, ShiftParams, cqns
from qubofolio.errors import EmptySeedPopulation, TooLarge
from qubofolio.qubo import ScaledQubo, qubo_energies, qubo_energy
from qubofolio.rng import SplitMix64, derive_seed
from qubofolio.solvers import (
    CqnsObjective,
    GaConfig,
    QuboObjective,
    SaConfig,
    TabuConfig,
    exhaustive_best,
    genetic,
    monte_carlo_fat_tailed,
    refill_counts,
    simulated_anneal_custom,
    simulated_anneal_geometric,
    tabu_search,
)
from qubofolio import _kernels

from conftest import toy_model


def plain_qubo(matrix, k=1):
    matrix = np.asarray(matrix, dtype=np.float64)
    return ScaledQubo(matrix=matrix, scale=1.0,
                      shift=ShiftParams.identity(matrix.shape[0], k),
                      target_size=k)


@pytest.fixture(scope="module")
def scaled6(model12):
    from qubofolio import (apply_shift, auto_end_energy, build_raw_qubo,
                           estimate_size_energy, scale, solve_shift)
    raw = build_raw_qubo(model12, 6)
    e_bar = estimate_size_energy(raw, 200, seed=11)
    shift = solve_shift(e_bar, 6, auto_end_energy(e_bar, 6))
    return scale(apply_shift(raw, shift), shift)


class TestExhaustive:
    def test_two_asset_by_hand(self):
        model = toy_model([[0.0004, 0.0001], [0.0001, 0.0009]], [0.1, 0.3])
        result = exhaustive_best(model)
        candidates = {}
        for indices in ([0], [1], [0, 1]):
            p = Portfolio.from_indices(indices, 2)
            candidates[tuple(indices)] = cqns(p, model, 1.0)
        best_indices = min(candidates, key=candidates.get)
        assert tuple(result.best.portfolio.indices()) == best_indices
        assert result.best.cqns == candidates[best_indices]
        assert result.n_scored == 3

    def test_fixture_matches_golden(self, model12, golden):
        result = exhaustive_best(model12)
        pinned = golden["synth12"]
        assert result.best.portfolio.to_literal() == pinned["best"]["mask"]
        assert result.best.cqns == pinned["best"]["cqns"]
        for m, entry in pinned["per_size"].items():
            sp = result.per_size[int(m)]
            assert sp.portfolio.to_literal() == entry["mask"]
            assert sp.cqns == entry["cqns"]

    def test_per_size_pairs_at_sixty(self, model60):
        result = exhaustive_best(model60, sizes=[2])
        best = None
        for i, j in combinations(range(60), 2):
            p = Portfolio.from_indices([i, j], 60)
            value = cqns(p, model60, 1.0)
            if best is None or value < best[0]:
                best = (value, (i, j))
        assert tuple(result.best.portfolio.indices()) == best[1]
        assert result.best.cqns == pytest.approx(best[0], abs=1e-12)
        assert result.n_scored == 1770

    def test_too_large_guards(self, model60):
        with pytest.raises(TooLarge):
            exhaustive_best(model60)
        with pytest.raises(TooLarge):
            exhaustive_best(model60, sizes=[30], comb_limit=10_000)


class TestMonteCarlo:
    def test_deterministic(self, model12):
        a = monte_carlo_fat_tailed(model12, 1.0, 5000, seed=42)
        b = monte_carlo_fat_tailed(model12, 1.0, 5000, seed=42)
        assert a.best.mask_key == b.best.mask_key
        assert np.array_equal(a.stats.counts, b.stats.counts)
        assert np.array_equal(a.stats.mins, b.stats.mins)

    def test_small_universe_minima_match_exhaustive(self):
        cov = np.array([
            [4e-4, 1e-4, 0.0, -5e-5],
            [1e-4, 9e-4, 2e-5, 0.0],
            [0.0, 2e-5, 2e-4, 1e-5],
            [-5e-5, 0.0, 1e-5, 6e-4],
        ])
        model = toy_model(cov, [0.05, 0.21, 0.11, 0.16])
        result = monte_carlo_fat_tailed(model, 1.0, 6000, seed=3)
        oracle = exhaustive_best(model)
        for m, sp in oracle.per_size.items():
            assert result.stats.mins[m] == pytest.approx(sp.cqns, abs=1e-12)

    def test_coverage_every_size(self, model12):
        result = monte_carlo_fat_tailed(model12, 1.0, 24, seed=0)
        assert all(result.stats.counts[m] >= 1 for m in range(1, 13))

    def test_counts_sum_to_budget(self, model12):
        result = monte_carlo_fat_tailed(model12, 1.0, 9999, seed=1)
        assert result.stats.total == 9999
        assert result.samples == 9999

    def test_planted_tail_found(self, planted12):
        result = monte_carlo_fat_tailed(planted12, 1.0, 250_000, seed=8)
        assert result.best.portfolio.indices() == [0, 1]


class TestSaCustom:
    def test_no_proposals_returns_initial_mask(self, model12):
        cfg = SaConfig(t_max=0.02, t_min=0.01, cooling_rate=0.01, sweeps=0)
        seed = derive_seed(4, "restart", 0)
        records = simulated_anneal_custom(CqnsObjective(model12), cfg, 1, 4)
        rng = SplitMix64(seed)
        expected = [1 if rng.uniform() < 0.5 else 0 for _ in range(12)]
        while not any(expected):
            expected = [1 if rng.uniform() < 0.5 else 0 for _ in range(12)]
        assert records[0].portfolio.bits.tolist() == expected

    def test_zero_delta_always_accepted(self):
        # flat landscape: every proposal has delta == 0 and must be taken
        q = np.zeros((8, 8))
        bits, energy, worse_prop, worse_acc = _kernels.sa_custom_qubo(
            q, 1.0, 0.1, 9, 50, 123)
        assert worse_prop == 0
        assert energy == 0.0

    def test_deterministic(self, model12):
        a = simulated_anneal_custom(CqnsObjective(model12), SaConfig(), 5, 99)
        b = simulated_anneal_custom(CqnsObjective(model12), SaConfig(), 5, 99)
        assert [r.mask_key for r in a] == [r.mask_key for r in b]
        assert [r.energy for r in a] == [r.energy for r in b]

    def test_finds_oracle_in_most_restarts(self, model12, golden):
        oracle_key = Portfolio.from_literal(
            golden["synth12"]["best"]["mask"], 12).key
        records = simulated_anneal_custom(CqnsObjective(model12), SaConfig(), 20, 12345)
        hits = sum(1 for r in records if r.mask_key == oracle_key)
        assert hits >= 16

    def test_qubo_objective_mode(self, scaled6):
        records = simulated_anneal_custom(QuboObjective(scaled6), SaConfig(
            t_max=2.0, t_min=0.05, cooling_rate=0.05, sweeps=120), 4, 7)
        for record in records:
            assert record.target_size == 6
            assert abs(record.energy - qubo_energy(scaled6.matrix,
                                                   record.portfolio.bits)) < 1e-9

    def test_energy_honest(self, model12):
        records = simulated_anneal_custom(CqnsObjective(model12), SaConfig(), 5, 31)
        for record in records:
            assert abs(record.energy - cqns(record.portfolio, model12, 1.0)) < 1e-9
            assert record.valid  # unconstrained searcher: achieved size is the target


class TestSaGeometric:
    def test_constant_schedule_degenerates(self, scaled6):
        records = simulated_anneal_geometric(scaled6, beta_range=(2.0, 2.0),
                                             sweeps=40, reads=5, seed=6)
        assert len(records) == 5

    def test_minority_of_reads_valid(self, scaled6):
        records = simulated_anneal_geometric(scaled6, seed=17)
        valid = sum(r.valid for r in records)
        assert 1 <= valid < len(records)

    def test_long_schedule_reaches_exhaustive_minimum(self, model12):
        from qubofolio import (apply_shift, auto_end_energy, build_raw_qubo,
                               estimate_size_energy, scale, solve_shift)
        n = 10
        sub = toy_model(model12.cov[:n, :n], model12.expected_returns[:n])
        raw = build_raw_qubo(sub, 5)
        e_bar = estimate_size_energy(raw, 100, seed=5)
        shift = solve_shift(e_bar, 5, auto_end_energy(e_bar, 5))
        scaled = scale(apply_shift(raw, shift), shift)
        records = simulated_anneal_geometric(scaled, sweeps=500, reads=200, seed=9)
        ints = np.arange(1, 1 << n, dtype=np.uint64)
        masks = ((ints[:, None] >> np.arange(n, dtype=np.uint64)) & 1).astype(float)
        minimum = min(qubo_energies(scaled.matrix, masks).min(), 0.0)
        assert min(r.energy for r in records) == pytest.approx(minimum, abs=1e-9)

    def test_deterministic_and_honest(self, scaled6):
        a = simulated_anneal_geometric(scaled6, reads=20, seed=3)
        b = simulated_anneal_geometric(scaled6, reads=20, seed=3)
        assert [r.mask_key for r in a] == [r.mask_key for r in b]
        for record in a:
            assert abs(record.energy - qubo_energy(scaled6.matrix,
                                                   record.portfolio.bits)) < 1e-9

    def test_acceptance_law_three_sigma(self):
        # diagonal matrix: every 0->1 proposal is worse by exactly d
        n = 40
        d = 0.8
        beta = 1.7
        reads, sweeps = 25, 140
        q = plain_qubo(np.diag(np.full(n, d)))
        schedule = np.full(sweeps, beta)
        _, _, worse_prop, worse_acc = _kernels.sa_geometric(
            q.matrix, schedule, reads, 2024)
        assert reads * sweeps * n >= 100_000  # at least 1e5 proposals total
        expected = math.exp(-beta * d)
        rate = worse_acc / worse_prop
        sigma = math.sqrt(expected * (1 - expected) / worse_prop)
        assert abs(rate - expected) <= 3 * sigma


class TestGenetic:
    def test_refill_counting(self):
        assert refill_counts(456, 40, (3, 2)) == (250, 166)

    def test_elitism_preserves_planted_optimum(self, model12, golden):
        best = Portfolio.from_literal(golden["synth12"]["best"]["mask"], 12)
        seeds = [best] + [Portfolio.from_indices([i], 12) for i in range(8)]
        cfg = GaConfig(population=9, generations=6, elites=3,
                       seed_population=tuple(seeds))
        result = genetic(model12, 1.0, cfg, seed=2)
        assert result.best.portfolio == best

    def test_generation_best_non_increasing(self, model12):
        result = genetic(model12, 1.0, GaConfig(population=60, generations=25,
                                                elites=10), seed=5)
        bests = result.generation_best
        assert all(b2 <= b1 + 1e-15 for b1, b2 in zip(bests, bests[1:]))

    def test_population_size_constant(self, model12):
        cfg = GaConfig(population=50, generations=10, elites=7)
        result = genetic(model12, 1.0, cfg, seed=6)
        assert result.population_sizes == [50] * 10

    def test_finds_oracle_in_most_runs(self, model12, golden):
        oracle_key = Portfolio.from_literal(
            golden["synth12"]["best"]["mask"], 12).key
        hits = 0
        for s in range(20):
            result = genetic(model12, 1.0, GaConfig(), derive_seed(777, "ga-run", s))
            hits += result.best.portfolio.key == oracle_key
        assert hits >= 16

    def test_empty_seed_population(self):
        with pytest.raises(EmptySeedPopulation):
            GaConfig(seed_population=())

    def test_deterministic(self, model12):
        a = genetic(model12, 1.0, GaConfig(population=40, generations=5, elites=5), 11)
        b = genetic(model12, 1.0, GaConfig(population=40, generations=5, elites=5), 11)
        assert a.best.portfolio == b.best.portfolio
        assert a.generation_best == b.generation_best

    def test_records_energy_honest(self, model12):
        result = genetic(model12, 1.0, GaConfig(population=40, generations=5,
                                                elites=5), 11)
        for record in result.records:
            assert abs(record.energy - cqns(record.portfolio, model12, 1.0)) < 1e-9


class TestTabu:
    def test_aspiration_reaches_local_optimum(self):
        # all-improving landscape with tenure >= n: early flips go tabu but
        # aspiration still lets the walk finish at the full mask
        q = plain_qubo(np.diag([-1.0, -2.0, -3.0]), k=2)
        result = tabu_search(q, TabuConfig(reads=4, tenure=100), seed=5)
        for record in result.records:
            assert record.energy == -6.0
            assert record.portfolio.size == 3

    def test_deterministic(self, scaled6):
        a = tabu_search(scaled6, TabuConfig(reads=5), seed=8)
        b = tabu_search(scaled6, TabuConfig(reads=5), seed=8)
        assert [r.mask_key for r in a.records] == [r.mask_key for r in b.records]
        assert [r.energy for r in a.records] == [r.energy for r in b.records]

    def test_trace_tabu_only_under_aspiration(self, scaled6):
        result = tabu_search(scaled6, TabuConfig(reads=10, tenure=8), seed=13,
                             collect_trace=True)
        trace = result.trace
        assert trace is not None and len(trace["var"]) > 0
        # every tabu-flagged move must have set a new best (aspiration)
        tabu_moves = trace["tabu"] == 1
        assert np.all(trace["new_best"][tabu_moves] == 1)
        # replay the move sequence and recompute the tabu windows
        for read in np.unique(trace["read"]):
            rows = np.flatnonzero(trace["read"] == read)
            tabu_until = {}
            for iteration, row in enumerate(rows, start=1):
                var = int(trace["var"][row])
                was_tabu = tabu_until.get(var, 0) >= iteration
                assert was_tabu == bool(trace["tabu"][row])
                tabu_until[var] = iteration + 8

    def test_best_energy_matches_exhaustive_minimum(self, scaled6):
        records = tabu_search(scaled6, TabuConfig(reads=50), seed=21).records
        ints = np.arange(1, 1 << 12, dtype=np.uint64)
        masks = ((ints[:, None] >> np.arange(12, dtype=np.uint64)) & 1).astype(float)
        minimum = min(qubo_energies(scaled6.matrix, masks).min(), 0.0)
        assert min(r.energy for r in records) == pytest.approx(minimum, abs=1e-9)
