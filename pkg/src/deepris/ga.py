"""Genetic algorithm over binary configurations.

Each generation scores the whole population, records the best candidate seen
so far, then builds the next population by tournament selection, random
pairing with uniform crossover (second child is the ones-complement of the
first) and independent bit-flip mutation. The global best is tracked outside
the population; there is no elitism.

Random numbers: the initial population uses ``child_rng(seed, 0)`` and the
offspring of generation ``k`` use ``child_rng(seed, k)``, consumed in the
order selection, pairing, crossover, mutation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DomainError, NumericalError, bits_to_str, child_rng, indices_of


class GaError(NumericalError):
    pass


@dataclass(frozen=True)
class GaConfig:
    l_pop: int = 50
    k_tour: int = 5
    p_mut: float | None = None  # None: 1/N
    eval_budget: int = 20000
    seed: int = 0

    def __post_init__(self):
        if self.l_pop < 2 or self.l_pop % 2:
            raise DomainError(f"l_pop must be a positive even integer, got {self.l_pop}")
        if not 1 <= self.k_tour <= self.l_pop:
            raise DomainError(f"k_tour must lie in [1, l_pop], got {self.k_tour}")
        if self.p_mut is not None and not 0.0 <= self.p_mut <= 1.0:
            raise DomainError(f"p_mut must lie in [0, 1], got {self.p_mut}")
        if self.eval_budget < 1:
            raise DomainError("eval_budget must be positive")

    def mutation_rate(self, n: int) -> float:
        return 1.0 / n if self.p_mut is None else self.p_mut


@dataclass
class GaResult:
    best_config: np.ndarray
    best_score: float
    evaluations_used: int
    best_score_history: list[float] = field(default_factory=list)


def init_population(n: int, cfg: GaConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    rng = rng if rng is not None else child_rng(cfg.seed, 0)
    return rng.integers(0, 2, size=(cfg.l_pop, n), dtype=np.uint8)


def tournament_select(population: np.ndarray, scores, k_tour: int, rng: np.random.Generator) -> np.ndarray:
    """Pick ``len(population)`` parents, each the best of ``k_tour`` draws with
    replacement; ties go to the lowest population index."""
    scores = np.asarray(scores, dtype=float)
    l_pop = len(population)
    if scores.shape != (l_pop,):
        raise DomainError("scores must align with the population")
    draws = rng.integers(0, l_pop, size=(l_pop, k_tour))
    s = scores[draws]
    top = s.max(axis=1, keepdims=True)
    winners = np.where(s == top, draws, l_pop).min(axis=1)
    return population[winners]


def uniform_crossover(p1, p2, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Children of one or many parent pairs (rows). Second child = ``1 - first``."""
    p1 = np.asarray(p1, dtype=np.uint8)
    p2 = np.asarray(p2, dtype=np.uint8)
    if p1.shape != p2.shape:
        raise DomainError(f"parent shapes differ: {p1.shape} vs {p2.shape}")
    take_first = rng.random(p1.shape) < 0.5
    child = np.where(take_first, p1, p2).astype(np.uint8)
    return child, (1 - child).astype(np.uint8)


def flip_bit_mutation(config, p_mut: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= p_mut <= 1.0:
        raise DomainError(f"p_mut must lie in [0, 1], got {p_mut}")
    config = np.asarray(config, dtype=np.uint8)
    flips = rng.random(config.shape) < p_mut
    return config ^ flips.astype(np.uint8)


def next_generation(population: np.ndarray, scores, cfg: GaConfig, rng: np.random.Generator) -> np.ndarray:
    n = population.shape[1]
    parents = tournament_select(population, scores, cfg.k_tour, rng)
    parents = parents[rng.permutation(len(parents))]
    c1, c2 = uniform_crossover(parents[0::2], parents[1::2], rng)
    offspring = np.empty_like(population)
    offspring[0::2] = c1
    offspring[1::2] = c2
    return flip_bit_mutation(offspring, cfg.mutation_rate(n), rng)


class CachedFitness:
    """Memoizes fitness by configuration index. ``vectorized`` fitness functions
    take a ``(k, N)`` array and return ``k`` scores."""

    def __init__(self, fitness, vectorized: bool = False):
        self.fitness = fitness
        self.vectorized = vectorized
        self.cache: dict[int, float] = {}

    def __call__(self, population: np.ndarray) -> np.ndarray:
        keys = indices_of(population).tolist()
        missing = sorted({k for k in keys if k not in self.cache})
        if missing:
            where = {k: keys.index(k) for k in missing}
            batch = population[[where[k] for k in missing]]
            if self.vectorized:
                vals = np.asarray(self.fitness(batch), dtype=float).reshape(-1)
            else:
                vals = np.array([float(self.fitness(c)) for c in batch])
            for k, c, v in zip(missing, batch, vals):
                if not np.isfinite(v):
                    raise GaError(f"fitness returned {v} for candidate {bits_to_str(c)}")
                self.cache[k] = float(v)
        return np.array([self.cache[k] for k in keys])


def run_ga(fitness, n: int, cfg: GaConfig = GaConfig(), *, vectorized: bool = False) -> GaResult:
    """Maximize ``fitness`` over ``{0,1}^n`` for ``eval_budget // l_pop`` generations.

    Every population member counts as one evaluation, cache hits included.
    """
    if cfg.eval_budget < cfg.l_pop:
        raise DomainError(f"eval_budget {cfg.eval_budget} is smaller than l_pop {cfg.l_pop}")
    evaluate = fitness if isinstance(fitness, CachedFitness) else CachedFitness(fitness, vectorized)
    generations = cfg.eval_budget // cfg.l_pop
    pop = init_population(n, cfg)
    best_score, best_config = -np.inf, None
    history = []
    used = 0
    for k in range(1, generations + 1):
        scores = evaluate(pop)
        used += len(pop)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score, best_config = float(scores[j]), pop[j].copy()
        history.append(best_score)
        if k < generations:
            pop = next_generation(pop, scores, cfg, child_rng(cfg.seed, k))
    return GaResult(best_config, best_score, used, history)


def default_grid(n: int) -> list[tuple[int, int, float]]:
    """60 combinations of (l_pop, k_tour, p_mut)."""
    return list(itertools.product((10, 20, 50, 100), (2, 3, 5), (0.01, 0.02, 0.05, 1.0 / n, 0.1)))


def grid_search_hyperparams(fitness, n: int, grid, total_budget: int, *, seed: int = 0,
                            vectorized: bool = False) -> tuple[GaConfig, list[tuple]]:
    """Run every ``(l_pop, k_tour, p_mut)`` combo with ``total_budget // len(grid)``
    evaluations; return the best config (first in grid order on ties) and
    one ``(l_pop, k_tour, p_mut, best_score)`` row per combo."""
    grid = list(grid)
    if not grid:
        raise DomainError("hyper-parameter grid is empty")
    per = total_budget // len(grid)
    evaluate = CachedFitness(fitness, vectorized)
    rows = []
    best_cfg, best = None, -np.inf
    for l_pop, k_tour, p_mut in grid:
        cfg = GaConfig(l_pop=l_pop, k_tour=k_tour, p_mut=p_mut, eval_budget=per, seed=seed)
        res = run_ga(evaluate, n, cfg)
        rows.append((l_pop, k_tour, p_mut, res.best_score))
        if res.best_score > best:
            best_cfg, best = cfg, res.best_score
    return best_cfg, rows


def with_budget(cfg: GaConfig, eval_budget: int) -> GaConfig:
    return replace(cfg, eval_budget=eval_budget)
