"""Ergodic rate (Monte Carlo) and its low-SNR moment-based approximation.

Rates are in bits per channel use summed over the B bins.
"""

from __future__ import annotations

import numpy as np

from .core import DomainError, LinkBudget, validate_config, validate_power
from .physics import Environment, StaticFactorization, draw_angles


def _sigma2(budget) -> float:
    s2 = budget.noise_variance if isinstance(budget, LinkBudget) else float(budget)
    if not s2 > 0:
        raise DomainError(f"noise variance must be positive, got {s2}")
    return s2


def surrogate_rate(m, rho, budget) -> np.ndarray | float:
    """``sum_i log2(1 + max(m_i, 0) * rho_i / sigma^2)``; vectorized over leading axes of ``m``."""
    s2 = _sigma2(budget)
    m = np.asarray(m, dtype=float)
    rho = validate_power(rho, m.shape[-1])
    r = np.sum(np.log2(1.0 + np.maximum(m, 0.0) * rho / s2), axis=-1)
    return float(r) if np.ndim(r) == 0 else r


def instantaneous_rate(h, rho, budget) -> np.ndarray | float:
    """Rate of channel realization(s) ``h`` (complex, last axis = bins)."""
    return surrogate_rate(np.abs(np.asarray(h)) ** 2, rho, budget)


def monte_carlo_rate(env: Environment, config, rho, budget, n_angles: int, rng: np.random.Generator,
                     base: StaticFactorization | None = None) -> tuple[float, float]:
    """Sample mean of the instantaneous rate over random angles, with its standard error."""
    if n_angles < 2:
        raise DomainError("monte_carlo_rate needs at least two angles")
    bits = validate_config(config, env.n)
    rho = validate_power(rho, env.b)
    base = base if base is not None else StaticFactorization(env)
    angles = draw_angles(rng, n_angles)
    if len(env.perturber_offsets) == 0:
        return float(instantaneous_rate(base.at_angle(0.0).responses(bits), rho, budget)), 0.0
    rates = np.array([instantaneous_rate(base.at_angle(a).responses(bits), rho, budget) for a in angles])
    return float(rates.mean()), float(rates.std(ddof=1) / np.sqrt(n_angles))


def snr_sweep(evaluator, snr_grid_db, b: int) -> list[tuple[float, float]]:
    """Evaluate ``evaluator(rho, budget)`` at each SNR with ``rho = 1`` on all
    ``b`` bins and ``sigma^2 = 10^(-snr/10)``."""
    grid = list(snr_grid_db)
    if not grid:
        raise DomainError("SNR grid is empty")
    rho = np.ones(b)
    return [(float(s), float(evaluator(rho, LinkBudget.from_snr_db(s)))) for s in grid]


def parse_snr_grid(text: str) -> list[float]:
    """``"-10:20:5"`` (inclusive range) or ``"-10,0,10"``."""
    text = text.strip()
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise DomainError("SNR grid step must be positive")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [lo + i * step for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]
