"""Reference curves: average/top of random configurations and exhaustive search.

All baselines score configurations with the moment-based rate computed from
*simulated* moments. A :class:`TrueMomentEvaluator` fixes one set of
perturber angles and evaluates every configuration against it (common random
numbers), so methods compared through the same evaluator are ranked without
Monte-Carlo noise between them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DomainError, bits_to_str, configs_from_indices, indices_of
from .physics import Environment, StaticFactorization, draw_angles
from .rate import surrogate_rate

EXHAUSTIVE_CEILING = 16


class TrueMomentEvaluator:
    """Simulated per-bin mean ``|H|^2`` over a fixed angle set, memoized by index.

    Work is split over configuration chunks at each fixed angle, reusing that
    angle's factorization; the accumulation order over angles is fixed, so
    results do not depend on ``threads``.
    """

    def __init__(self, env: Environment, angles, *, base: StaticFactorization | None = None,
                 threads: int = 1, chunk: int = 256):
        self.env = env
        self.angles = np.asarray(angles, dtype=float)
        if self.angles.size < 1:
            raise DomainError("need at least one angle")
        if len(env.perturber_offsets) == 0:
            self.angles = self.angles[:1]
        self.base = base if base is not None else StaticFactorization(env)
        self.threads = max(1, int(threads))
        self.chunk = chunk
        self._angle_blocks = None
        self._cache: dict[int, np.ndarray] = {}
        self.table: np.ndarray | None = None
        self.calls = 0

    @classmethod
    def from_rng(cls, env, n_angles: int, rng, **kw) -> "TrueMomentEvaluator":
        return cls(env, draw_angles(rng, n_angles), **kw)

    def _blocks(self):
        if self._angle_blocks is None:
            self._angle_blocks = [self.base.at_angle(a) for a in self.angles]
        return self._angle_blocks

    def _compute(self, configs: np.ndarray) -> np.ndarray:
        blocks = self._blocks()

        def work(part):
            acc = np.zeros((len(part), self.env.b))
            for blk in blocks:
                acc += np.abs(blk.responses(part)) ** 2
            return acc / len(blocks)

        parts = [configs[i:i + self.chunk] for i in range(0, len(configs), self.chunk)]
        self.calls += len(configs)
        if self.threads > 1 and len(parts) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                out = list(pool.map(work, parts))
        else:
            out = [work(p) for p in parts]
        return np.vstack(out) if out else np.zeros((0, self.env.b))

    def moments(self, configs) -> np.ndarray:
        configs = np.atleast_2d(np.asarray(configs, dtype=np.uint8))
        if configs.shape[1] != self.env.n:
            raise DomainError(f"configuration has {configs.shape[1]} bits, expected {self.env.n}")
        idx = indices_of(configs)
        if self.table is not None:
            return self.table[idx]
        missing = np.array(sorted({int(i) for i in idx} - self._cache.keys()), dtype=np.int64)
        if missing.size:
            vals = self._compute(configs_from_indices(missing, self.env.n))
            self._cache.update(zip(missing.tolist(), vals))
        return np.array([self._cache[int(i)] for i in idx])

    def full_table(self, *, ceiling: int = EXHAUSTIVE_CEILING, force: bool = False) -> np.ndarray:
        """Moments of all ``2^N`` configurations, row ``k`` = configuration index ``k``."""
        check_ceiling(self.env.n, ceiling, force)
        if self.table is None:
            allc = configs_from_indices(np.arange(2**self.env.n), self.env.n)
            self.table = self._compute(allc)
        return self.table


def check_ceiling(n: int, ceiling: int, force: bool) -> None:
    if n > ceiling and not force:
        raise DomainError(
            f"exhaustive search over 2^{n} configurations exceeds the ceiling N={ceiling}; "
            "pass force=True (--force) to run it anyway")


@dataclass
class RandomBaseline:
    average_rate: float
    top_rate: float
    top_config: np.ndarray
    configs: np.ndarray
    rates: np.ndarray


def random_configs(n: int, n_candidates: int, rng: np.random.Generator) -> np.ndarray:
    if n_candidates < 1:
        raise DomainError("need at least one random candidate")
    return rng.integers(0, 2, size=(n_candidates, n), dtype=np.uint8)


def summarize_random(configs, rates) -> RandomBaseline:
    rates = np.asarray(rates, dtype=float)
    j = int(np.argmax(rates))
    return RandomBaseline(float(np.mean(rates)), float(rates[j]), configs[j].copy(), configs, rates)


def random_baseline(env: Environment, n_candidates: int, rho, budget, n_angles: int,
                    rng: np.random.Generator, *, evaluator: TrueMomentEvaluator | None = None) -> RandomBaseline:
    """Mean and best moment-based rate over uniformly drawn configurations.

    Without an ``evaluator`` one angle set is drawn from ``rng`` first and
    shared by all candidates.
    """
    if evaluator is None:
        evaluator = TrueMomentEvaluator.from_rng(env, n_angles, rng)
    configs = random_configs(env.n, n_candidates, rng)
    rates = np.atleast_1d(surrogate_rate(evaluator.moments(configs), rho, budget))
    return summarize_random(configs, rates)


@dataclass
class ExhaustiveResult:
    best_rate: float
    best_config: np.ndarray
    rates: np.ndarray  # indexed by configuration index


def exhaustive_from_moments(table: np.ndarray, rho, budget) -> ExhaustiveResult:
    rates = np.asarray(surrogate_rate(table, rho, budget))
    k = int(np.argmax(rates))
    n = int(np.log2(len(table)))
    return ExhaustiveResult(float(rates[k]), configs_from_indices([k], n)[0], rates)


def exhaustive_search(env: Environment, rho, budget, n_angles: int, rng: np.random.Generator, *,
                      evaluator: TrueMomentEvaluator | None = None, ceiling: int = EXHAUSTIVE_CEILING,
                      force: bool = False, threads: int = 1) -> ExhaustiveResult:
    """Score every configuration with the fast simulator path."""
    check_ceiling(env.n, ceiling, force)
    if evaluator is None:
        evaluator = TrueMomentEvaluator.from_rng(env, n_angles, rng, threads=threads)
    table = evaluator.full_table(ceiling=ceiling, force=force)
    return exhaustive_from_moments(table, rho, budget)


def write_exhaustive_table(path, rates, n: int) -> None:
    lines = ["index,config,rate"]
    for k, r in enumerate(np.asarray(rates)):
        lines.append(f"{k},{bits_to_str(configs_from_indices([k], n)[0])},{float(r)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
