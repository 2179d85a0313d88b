"""End-to-end pipeline steps shared by the CLI and the acceptance tests."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import TrueMomentEvaluator, exhaustive_from_moments, random_configs, summarize_random
from .core import DomainError, LinkBudget, bits_to_str, child_rng
from .ga import GaConfig, GaResult, run_ga
from .physics import Environment, draw_angles
from .rate import instantaneous_rate, monte_carlo_rate, surrogate_rate
from .surrogate import MlpParameters, predict_moments

METHODS = ("average", "top-random", "ga", "exhaustive")

# stream keys under the experiment seed
CRN_ANGLES, RANDOM_CONFIGS, MC_VERIFY = 101, 102, 103


def model_fitness(model: MlpParameters, rho, budget):
    """Vectorized GA fitness: moment-based rate of the surrogate's predictions."""
    def fitness(configs):
        return surrogate_rate(predict_moments(model, configs), rho, budget)
    return fitness


def optimize_with_model(model: MlpParameters, n: int, snr_db: float, cfg: GaConfig) -> GaResult:
    if model.n_in != n:
        raise DomainError(f"model expects N={model.n_in}, scenario has N={n}")
    rho = np.ones(model.n_out)
    return run_ga(model_fitness(model, rho, LinkBudget.from_snr_db(snr_db)), n, cfg, vectorized=True)


def crn_evaluator(env: Environment, n_angles: int, seed: int, threads: int = 1) -> TrueMomentEvaluator:
    return TrueMomentEvaluator.from_rng(env, n_angles, child_rng(seed, CRN_ANGLES), threads=threads)


def verify_config(env: Environment, config, snr_db: float, evaluator: TrueMomentEvaluator,
                  n_angles: int, seed: int) -> dict[str, float]:
    """Moment-based rate on the shared angles plus an independent Monte-Carlo ergodic rate."""
    rho = np.ones(env.b)
    budget = LinkBudget.from_snr_db(snr_db)
    approx = float(surrogate_rate(evaluator.moments(config)[0], rho, budget))
    mc, se = monte_carlo_rate(env, config, rho, budget, max(2, n_angles), child_rng(seed, MC_VERIFY),
                              base=evaluator.base)
    return {"true_surrogate_rate": approx, "mc_rate": mc, "mc_stderr": se}


@dataclass
class Comparison:
    snr_grid: list[float]
    rates: dict[str, list[float]]
    winners: dict[str, list[str]] = field(default_factory=dict)

    def rows(self) -> list[tuple[float, str, float]]:
        return [(s, m, self.rates[m][i]) for i, s in enumerate(self.snr_grid) for m in METHODS if m in self.rates]

    def normalized(self) -> dict[str, list[float]]:
        if "exhaustive" not in self.rates:
            raise DomainError("normalized rates need the exhaustive column")
        ref = self.rates["exhaustive"]
        return {m: [r / e for r, e in zip(v, ref)] for m, v in self.rates.items()}


def compare_methods(env: Environment, model: MlpParameters, snr_grid, *, n_random: int = 5000,
                    n_angles: int = 100, ga_cfg: GaConfig = GaConfig(), seed: int = 0,
                    exhaustive: bool = True, ceiling: int = 16, force: bool = False,
                    threads: int = 1, evaluator: TrueMomentEvaluator | None = None) -> Comparison:
    """Rates of every method across the SNR grid, all scored on one shared angle set.

    The GA optimizes the surrogate's predicted rate; its winner is then scored
    with simulated moments like every baseline.
    """
    evaluator = evaluator if evaluator is not None else crn_evaluator(env, n_angles, seed, threads)
    table = evaluator.full_table(ceiling=ceiling, force=force) if exhaustive else None
    cands = random_configs(env.n, n_random, child_rng(seed, RANDOM_CONFIGS))
    cand_moments = evaluator.moments(cands)
    rho = np.ones(env.b)
    rates = {m: [] for m in METHODS if exhaustive or m != "exhaustive"}
    winners = {m: [] for m in rates if m != "average"}
    for s in snr_grid:
        budget = LinkBudget.from_snr_db(s)
        rnd = summarize_random(cands, surrogate_rate(cand_moments, rho, budget))
        rates["average"].append(rnd.average_rate)
        rates["top-random"].append(rnd.top_rate)
        winners["top-random"].append(bits_to_str(rnd.top_config))
        ga = optimize_with_model(model, env.n, s, ga_cfg)
        rates["ga"].append(float(surrogate_rate(evaluator.moments(ga.best_config)[0], rho, budget)))
        winners["ga"].append(bits_to_str(ga.best_config))
        if table is not None:
            ex = exhaustive_from_moments(table, rho, budget)
            rates["exhaustive"].append(ex.best_rate)
            winners["exhaustive"].append(bits_to_str(ex.best_config))
    return Comparison(list(map(float, snr_grid)), rates, winners)


def winner_rows(env: Environment, cmp: Comparison, evaluator: TrueMomentEvaluator, n_angles: int,
                seed: int) -> list[tuple[float, str, str, float, float, float]]:
    """Per SNR and method, the winning configuration with its moment-based rate on the
    shared angles and a Monte-Carlo ergodic rate on an independent angle set.

    Rows: ``(snr_db, method, config, surrogate_rate, mc_rate, mc_stderr)``.
    """
    if n_angles < 2:
        raise DomainError("Monte-Carlo check needs at least two angles")
    unique = sorted({c for v in cmp.winners.values() for c in v})
    configs = np.array([[int(ch) for ch in c] for c in unique], dtype=np.uint8)
    angles = draw_angles(child_rng(seed, MC_VERIFY), n_angles)
    if len(env.perturber_offsets) == 0:
        angles = angles[:1]
    h = np.array([evaluator.base.at_angle(a).responses(configs) for a in angles])  # (A, U, B)
    moments = evaluator.moments(configs)
    rho = np.ones(env.b)
    rows = []
    for i, s in enumerate(cmp.snr_grid):
        budget = LinkBudget.from_snr_db(s)
        for m in METHODS:
            if m not in cmp.winners:
                continue
            u = unique.index(cmp.winners[m][i])
            inst = np.atleast_1d(instantaneous_rate(h[:, u], rho, budget))
            se = float(inst.std(ddof=1) / np.sqrt(len(inst))) if len(inst) > 1 else 0.0
            rows.append((s, m, cmp.winners[m][i], float(surrogate_rate(moments[u], rho, budget)),
                         float(inst.mean()), se))
    return rows


def prediction_rows(frequencies, true, predicted) -> list[tuple[int, float, float, float, float]]:
    return [(i, float(f), float(t), float(p), float(p - t))
            for i, (f, t, p) in enumerate(zip(frequencies, true, predicted))]


def write_csv(path, header, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
