import numpy as np
import pytest

from deepris.core import DomainError, indices_of
from deepris.ga import (CachedFitness, GaConfig, GaError, default_grid, flip_bit_mutation,
                        grid_search_hyperparams, init_population, run_ga, tournament_select,
                        uniform_crossover)


def onemax(c):
    return float(np.sum(c))


def test_config_validation():
    for bad in (dict(l_pop=3), dict(l_pop=0), dict(k_tour=0), dict(k_tour=60), dict(p_mut=1.5),
                dict(eval_budget=0)):
        with pytest.raises(DomainError):
            GaConfig(**bad)
    assert GaConfig().mutation_rate(21) == pytest.approx(1 / 21)
    assert GaConfig(p_mut=0.2).mutation_rate(21) == 0.2


def test_tournament_picks_best_and_breaks_ties_low():
    pop = np.arange(6)[:, None].astype(np.uint8)
    scores = np.array([1.0, 5.0, 5.0, 0.0, 2.0, 3.0])
    # a tournament containing index 1 or 2 always returns 1 over its tie partner 2
    picks = np.concatenate([tournament_select(pop, scores, 6, np.random.default_rng(s))[:, 0] for s in range(20)])
    assert 2 not in picks.tolist() or np.mean(picks == 1) > np.mean(picks == 2)
    assert np.mean(picks == 1) > 0.5
    # with equal scores the smallest drawn index wins
    rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
    draws = rng_b.integers(0, 6, size=(6, 3))
    assert np.array_equal(tournament_select(pop, np.zeros(6), 3, rng_a)[:, 0], draws.min(axis=1))


def test_tournament_of_size_one_is_uniform():
    pop = np.arange(4)[:, None].astype(np.uint8)
    rng = np.random.default_rng(0)
    picks = np.concatenate([tournament_select(pop, [0, 0, 0, 9.0], 1, rng)[:, 0] for _ in range(500)])
    assert abs(np.mean(picks == 3) - 0.25) < 0.05


def test_crossover_complement_and_gene_origin(rng):
    p1 = rng.integers(0, 2, (10, 21), dtype=np.uint8)
    p2 = rng.integers(0, 2, (10, 21), dtype=np.uint8)
    c1, c2 = uniform_crossover(p1, p2, rng)
    assert np.array_equal(c2, 1 - c1)
    assert np.all((c1 == p1) | (c1 == p2))
    same = np.ones(21, np.uint8)
    c1, c2 = uniform_crossover(same, same, rng)
    assert np.all(c1 == 1) and np.all(c2 == 0)


def test_mutation_extremes_and_rate(rng):
    c = rng.integers(0, 2, 21, dtype=np.uint8)
    assert np.array_equal(flip_bit_mutation(c, 0.0, rng), c)
    assert np.array_equal(flip_bit_mutation(c, 1.0, rng), 1 - c)
    many = flip_bit_mutation(np.zeros((2000, 21), np.uint8), 0.1, rng)
    assert abs(many.mean() - 0.1) < 0.01
    with pytest.raises(DomainError):
        flip_bit_mutation(c, -0.1, rng)


def test_budget_accounting():
    res = run_ga(onemax, 10, GaConfig(l_pop=10, eval_budget=1000))
    assert res.evaluations_used == 1000
    assert len(res.best_score_history) == 100
    assert np.all(np.diff(res.best_score_history) >= 0)
    single = run_ga(onemax, 10, GaConfig(l_pop=10, eval_budget=10))
    assert single.evaluations_used == 10 and len(single.best_score_history) == 1
    init = init_population(10, GaConfig(l_pop=10))
    assert single.best_score == max(onemax(c) for c in init)
    with pytest.raises(DomainError):
        run_ga(onemax, 10, GaConfig(l_pop=10, eval_budget=9))


def test_deterministic_per_seed():
    a = run_ga(onemax, 15, GaConfig(l_pop=10, eval_budget=300, seed=4))
    b = run_ga(onemax, 15, GaConfig(l_pop=10, eval_budget=300, seed=4))
    assert np.array_equal(a.best_config, b.best_config) and a.best_score_history == b.best_score_history


def test_onemax_small_reaches_optimum():
    res = run_ga(onemax, 21, GaConfig(seed=1))
    assert res.best_score == 21 and np.all(res.best_config == 1)


def test_cache_calls_fitness_once_per_config():
    calls = []

    def f(c):
        calls.append(int(indices_of(c[None])[0]))
        return onemax(c)

    cached = CachedFitness(f)
    pop = np.array([[0, 1], [0, 1], [1, 1]], np.uint8)
    assert cached(pop).tolist() == [1, 1, 2]
    cached(pop)
    assert sorted(calls) == [2, 3]


def test_non_finite_fitness_names_candidate():
    with pytest.raises(GaError, match="candidate"):
        run_ga(lambda c: np.nan, 5, GaConfig(l_pop=4, k_tour=2, eval_budget=8))


def test_vectorized_fitness_matches_scalar():
    a = run_ga(onemax, 12, GaConfig(l_pop=10, eval_budget=200))
    b = run_ga(lambda cs: cs.sum(axis=1), 12, GaConfig(l_pop=10, eval_budget=200), vectorized=True)
    assert a.best_score == b.best_score and a.best_score_history == b.best_score_history


def test_hyperparameter_grid_search():
    grid = default_grid(21)
    assert len(grid) == 60
    best, rows = grid_search_hyperparams(onemax, 12, [(10, 2, 0.05), (10, 3, 0.1)], 400, seed=0)
    assert len(rows) == 2
    assert best.eval_budget == 200
    assert max(r[3] for r in rows) == [r[3] for r in rows if (r[0], r[1], r[2]) ==
                                       (best.l_pop, best.k_tour, best.p_mut)][0]
