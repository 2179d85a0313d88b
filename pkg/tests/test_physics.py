import dataclasses

import numpy as np
import pytest
from scipy.special import hankel1

from deepris.core import DomainError, configs_from_indices
from deepris.physics import (DipoleArray, PerturberState, StaticFactorization, channel_response,
                             channel_response_fast, draw_angles, interaction_matrix, moments_at_angles,
                             sample_moments)


def reference_channel(env, config, angle):
    """Independent oracle: assemble W from the Hankel function directly and solve densely."""
    pos = env.positions(angle)
    res_s, lw_s, ch_s = env.static_params()
    po = env.perturber_offsets
    ris_res = np.where(np.asarray(config) == 1, env.ris.resonance[:, 1], env.ris.resonance[:, 0])
    res = np.concatenate([res_s, po.resonance, ris_res])
    lw = np.concatenate([lw_s, po.linewidth, env.ris.linewidth])
    ch = np.concatenate([ch_s, po.coupling, env.ris.coupling])
    out = []
    for f in env.grid.frequencies:
        k = 2 * np.pi * f
        d = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(d, 1.0)
        w = -0.25j * k**2 * hankel1(0, k * d)
        np.fill_diagonal(w, (res**2 - f**2 - 1j * lw * f) / ch**2 - 0.25j * k**2)
        e = np.zeros(len(pos), complex)
        e[env.tx_index] = 1
        out.append(np.linalg.solve(w, e)[env.rx_index] / (env.tx.coupling_strength * env.rx.coupling_strength))
    return np.array(out)


def test_interaction_matrix_is_symmetric(tiny_env, rng):
    for _ in range(5):
        cfg = rng.integers(0, 2, tiny_env.n)
        w = interaction_matrix(tiny_env, cfg, rng.uniform(0, 6.3), 1.0)
        assert np.max(np.abs(w - w.T)) <= 1e-12 * np.max(np.abs(w))


def test_dense_channel_matches_independent_oracle(tiny_env, rng):
    for _ in range(5):
        cfg, a = rng.integers(0, 2, tiny_env.n), rng.uniform(0, 2 * np.pi)
        h = channel_response(tiny_env, cfg, PerturberState(a))
        ref = reference_channel(tiny_env, cfg, a)
        assert np.max(np.abs(h - ref) / np.abs(ref)) < 1e-9


def test_fast_path_matches_dense_path(tiny_env, rng):
    base = StaticFactorization(tiny_env)
    for _ in range(10):
        cfg, a = rng.integers(0, 2, tiny_env.n), rng.uniform(0, 2 * np.pi)
        dense = channel_response(tiny_env, cfg, a)
        fast = channel_response_fast(base, cfg, a)
        assert np.max(np.abs(fast - dense) / np.abs(dense)) < 1e-8


def test_batched_responses_equal_single_responses(tiny_env):
    blk = StaticFactorization(tiny_env).at_angle(0.7)
    allc = configs_from_indices(np.arange(2**tiny_env.n), tiny_env.n)
    batch = blk.responses(allc)
    assert batch.shape == (2**tiny_env.n, tiny_env.b)
    for c, h in zip(allc, batch):
        assert np.allclose(blk.responses(c), h, rtol=1e-12, atol=0)


def test_reciprocity(tiny_env, rng):
    # swapping the antennas transposes the problem; a symmetric W gives the same channel
    swapped = dataclasses.replace(tiny_env, tx=tiny_env.rx, rx=tiny_env.tx)
    cfg = rng.integers(0, 2, tiny_env.n)
    assert np.allclose(channel_response(tiny_env, cfg, 1.1), channel_response(swapped, cfg, 1.1), rtol=1e-10)


def test_ris_changes_the_channel(tiny_env):
    zeros = np.zeros(tiny_env.n, dtype=int)
    ones = np.ones(tiny_env.n, dtype=int)
    h0, h1 = channel_response(tiny_env, zeros, 0.0), channel_response(tiny_env, ones, 0.0)
    assert np.max(np.abs(h0 - h1)) > 1e-3 * np.max(np.abs(h0))


def test_angle_is_periodic(tiny_env):
    cfg = np.array([1, 0, 1, 1])
    assert PerturberState(2 * np.pi + 0.3).angle == pytest.approx(0.3)
    base = StaticFactorization(tiny_env)
    assert np.allclose(channel_response_fast(base, cfg, 0.3), channel_response_fast(base, cfg, 0.3 + 2 * np.pi),
                       rtol=1e-10)


def test_static_environment_has_deterministic_moments(tiny_env, rng):
    static = tiny_env.without_perturber()
    cfg = np.array([0, 1, 1, 0])
    base = StaticFactorization(static)
    m = sample_moments(static, cfg, 20, rng, base=base)
    h = channel_response(static, cfg, 0.0)
    assert np.allclose(m, np.abs(h) ** 2, rtol=1e-9)


def test_symmetric_perturber_is_rotation_invariant(tiny_env):
    point = DipoleArray(np.zeros((1, 2)), [10.0], [0.05], [50.0])
    env = dataclasses.replace(tiny_env, perturber_offsets=point)
    cfg = np.array([1, 1, 0, 0])
    assert np.allclose(channel_response(env, cfg, 0.0), channel_response(env, cfg, 2.0), rtol=1e-12)


def test_moments_are_averages_of_squared_magnitudes(tiny_env, rng):
    base = StaticFactorization(tiny_env)
    cfgs = rng.integers(0, 2, (3, tiny_env.n))
    angles = draw_angles(rng, 7)
    m = moments_at_angles(base, cfgs, angles)
    ref = np.mean([[np.abs(channel_response(tiny_env, c, a)) ** 2 for c in cfgs] for a in angles], axis=0)
    assert np.allclose(m, ref, rtol=1e-8)
    assert np.all(m > 0)


def test_domain_errors(tiny_env):
    with pytest.raises(DomainError):
        interaction_matrix(tiny_env, np.zeros(4, int), 0.0, 0.0)
    with pytest.raises(DomainError):
        channel_response(tiny_env, np.zeros(3, int), 0.0)
    with pytest.raises(DomainError):
        StaticFactorization(tiny_env).at_angle(0.0).responses(np.zeros((2, 5), int))
    with pytest.raises(DomainError):
        draw_angles(np.random.default_rng(0), 0)
