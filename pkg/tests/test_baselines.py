import numpy as np
import pytest

from deepris.baselines import (TrueMomentEvaluator, check_ceiling, exhaustive_from_moments, exhaustive_search,
                               random_baseline, write_exhaustive_table)
from deepris.core import DomainError, LinkBudget, configs_from_indices
from deepris.physics import StaticFactorization, draw_angles, moments_at_angles


@pytest.fixture(scope="module")
def evaluator(tiny_env):
    return TrueMomentEvaluator(tiny_env, draw_angles(np.random.default_rng(5), 6))


def test_evaluator_matches_direct_moments(evaluator, tiny_env):
    cfgs = configs_from_indices([3, 9, 3], tiny_env.n)
    direct = moments_at_angles(StaticFactorization(tiny_env), cfgs, evaluator.angles)
    assert np.allclose(evaluator.moments(cfgs), direct, rtol=1e-12)
    calls = evaluator.calls
    evaluator.moments(cfgs)
    assert evaluator.calls == calls


def test_evaluator_is_independent_of_threads_and_chunking(tiny_env, evaluator):
    alt = TrueMomentEvaluator(tiny_env, evaluator.angles, threads=3, chunk=3)
    assert np.array_equal(alt.full_table(), evaluator.full_table())


def test_exhaustive_dominates_random(tiny_env, evaluator):
    rho, budget = np.ones(tiny_env.b), LinkBudget.from_snr_db(5)
    ex = exhaustive_search(tiny_env, rho, budget, 6, None, evaluator=evaluator)
    rnd = random_baseline(tiny_env, 10, rho, budget, 6, np.random.default_rng(0), evaluator=evaluator)
    assert ex.best_rate >= rnd.top_rate >= rnd.average_rate
    assert ex.best_rate == pytest.approx(np.max(ex.rates))
    assert len(ex.rates) == 2**tiny_env.n


def test_exhaustive_from_known_table():
    table = np.array([[1.0, 1.0], [3.0, 0.0], [2.0, 2.0], [0.5, 0.5]])
    res = exhaustive_from_moments(table, np.ones(2), LinkBudget(1.0))
    assert res.best_config.tolist() == [0, 1]
    assert res.best_rate == pytest.approx(2 * np.log2(3))


def test_ceiling_guard(tiny_env):
    with pytest.raises(DomainError, match="--force"):
        check_ceiling(17, 16, False)
    check_ceiling(17, 16, True)
    with pytest.raises(DomainError):
        exhaustive_search(tiny_env, np.ones(tiny_env.b), LinkBudget(1.0), 2, np.random.default_rng(0), ceiling=3)


def test_exhaustive_table_file(tmp_path):
    write_exhaustive_table(tmp_path / "e.csv", [1.5, 2.0, 0.25, 3.0], 2)
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines == ["index,config,rate", "0,00,1.5", "1,10,2.0", "2,01,0.25", "3,11,3.0"]


def test_two_element_exhaustive_matches_dense_oracle(tiny_text):
    from deepris.physics import channel_response
    from deepris.scenario import build_environment, read_sections
    from deepris.rate import surrogate_rate

    env = build_environment(read_sections(tiny_text, is_text=True), n=2)
    angles = draw_angles(np.random.default_rng(1), 3)
    rho, budget = np.ones(env.b), LinkBudget.from_snr_db(10)
    ex = exhaustive_search(env, rho, budget, 3, None, evaluator=TrueMomentEvaluator(env, angles))
    dense = [surrogate_rate(np.mean([np.abs(channel_response(env, c, a)) ** 2 for a in angles], axis=0), rho, budget)
             for c in configs_from_indices(range(4), 2)]
    assert len(ex.rates) == 4
    assert np.allclose(ex.rates, dense, rtol=1e-8)
    assert ex.best_rate == pytest.approx(max(dense), rel=1e-8)


def test_single_random_candidate(tiny_env, evaluator):
    rnd = random_baseline(tiny_env, 1, np.ones(tiny_env.b), LinkBudget(1.0), 6, np.random.default_rng(0),
                          evaluator=evaluator)
    assert rnd.average_rate == rnd.top_rate
