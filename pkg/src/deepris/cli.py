"""Command line interface: ``deepris <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 validation/domain error,
4 numerical failure, 5 I/O failure.

``--config FILE`` reads default flag values from a sectioned file (same
format as scenarios): keys under ``[common]`` apply to every command and keys
under ``[<command>]`` to that command; explicit flags still win. Keys are flag
names without the leading dashes, e.g. ``max-epochs = 2000``.
"""

from __future__ import annotations

import argparse
import datetime
import sys
from pathlib import Path

import numpy as np

from . import harness
from .baselines import EXHAUSTIVE_CEILING, exhaustive_from_moments, write_exhaustive_table
from .core import (DomainError, LinkBudget, NumericalError, ValidationError, bits_to_str, str_to_bits,
                   validate_config)
from .dataset import (Dataset, generate_dataset, load_dataset, load_split, save_dataset, save_split,
                      split_dataset)
from .ga import GaConfig, default_grid, grid_search_hyperparams
from .rate import parse_snr_grid
from .scenario import load_scenario, read_sections
from .surrogate import TrainingConfig, load_model, predict_moments, save_model, train
from .svgplot import line_chart

EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 3, 4, 5


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _env(args):
    return load_scenario(args.scenario, n=args.n)


def _ga_cfg(args, budget=None) -> GaConfig:
    return GaConfig(l_pop=args.l_pop, k_tour=args.k_tour, p_mut=args.p_mut,
                    eval_budget=budget if budget is not None else args.budget, seed=args.seed)


def _model_path(args) -> Path:
    return Path(args.model) if args.model else Path(args.out) / "model.txt"


def _write_svg(path, text: str, stamp: bool) -> None:
    if stamp:
        text = text.replace("</svg>", f"<!-- {datetime.datetime.now().isoformat()} -->\n</svg>")
    Path(path).write_text(text)


def cmd_generate(args) -> int:
    env = _env(args)
    fractions = tuple(float(v) for v in args.split.split(","))
    ds = generate_dataset(env, args.c, args.angles, args.seed, threads=args.threads)
    split = split_dataset(ds, fractions, args.seed)
    out = _out(args)
    save_dataset(ds, out / "dataset.txt")
    save_split(split, out / "split.txt", seed=args.seed, fractions=fractions)
    sizes = "/".join(str(len(s)) for s in (split.train, split.validation, split.test))
    print(f"generated C={len(ds)} N={env.n} B={env.b} seed={args.seed} split={sizes} -> {out}")
    return 0


def _load_data(args, env=None):
    data = Path(args.data) if args.data else Path(args.out)
    ds = load_dataset(data / "dataset.txt", n=env.n if env else None, b=env.b if env else None)
    return ds, load_split(ds, data / "split.txt")


def cmd_train(args) -> int:
    _, split = _load_data(args)
    cfg = TrainingConfig(learning_rate=args.lr, l2_lambda=args.l2_lambda, max_epochs=args.max_epochs,
                         patience=args.patience, batch_size=args.batch_size or None,
                         hidden=tuple(int(h) for h in args.hidden.split(",")), seed=args.seed)
    params, report = train(split, cfg)
    out = _out(args)
    save_model(params, out / "model.txt")
    (out / "training_report.txt").write_text(report.to_text())
    harness.write_csv(out / "training_history.csv", ["epoch", "train_loss", "validation_mse"],
                      [(i + 1, a, b) for i, (a, b) in enumerate(zip(report.train_loss_history,
                                                                      report.validation_mse_history))])
    print(f"trained {report.epochs_run} epochs, best epoch {report.best_epoch}, "
          f"validation MSE {report.best_validation_mse:.4g}, test MSE {report.test_mse:.4g}")
    return 0


def cmd_optimize(args) -> int:
    env = _env(args)
    model = load_model(_model_path(args), n=env.n, b=env.b)
    res = harness.optimize_with_model(model, env.n, args.snr, _ga_cfg(args))
    header = ["snr_db", "config", "surrogate_score", "evaluations_used"]
    row = [float(args.snr), bits_to_str(res.best_config), res.best_score, res.evaluations_used]
    if args.verify:
        ev = harness.crn_evaluator(env, args.angles, args.seed, args.threads)
        checks = harness.verify_config(env, res.best_config, args.snr, ev, args.angles, args.seed)
        header += list(checks)
        row += list(checks.values())
    out = _out(args)
    harness.write_csv(out / "optimize.csv", header, [row])
    print(", ".join(f"{h}={v}" for h, v in zip(header, row)))
    return 0


def cmd_compare(args) -> int:
    env = _env(args)
    model = load_model(_model_path(args), n=env.n, b=env.b)
    grid = parse_snr_grid(args.snr_grid)
    if not args.no_exhaustive and env.n > args.ceiling and not args.force:
        raise DomainError(f"exhaustive data requested but N={env.n} exceeds the ceiling {args.ceiling}; "
                          "use --force or --no-exhaustive")
    ev = harness.crn_evaluator(env, args.angles, args.seed, args.threads)
    cmp = harness.compare_methods(env, model, grid, n_random=args.random, n_angles=args.angles,
                                  ga_cfg=_ga_cfg(args), seed=args.seed, exhaustive=not args.no_exhaustive,
                                  ceiling=args.ceiling, force=args.force, threads=args.threads, evaluator=ev)
    out = _out(args)
    harness.write_csv(out / "rates.csv", ["snr_db", "method", "rate"], cmp.rows())
    harness.write_csv(out / "winners.csv",
                      ["snr_db", "method", "config", "surrogate_rate", "mc_rate", "mc_stderr"],
                      harness.winner_rows(env, cmp, ev, args.mc_angles, args.seed))
    series = {m: (grid, v) for m, v in cmp.rates.items()}
    _write_svg(out / "rates.svg", line_chart(series, title="Rate versus SNR", xlabel="SNR [dB]",
                                             ylabel="rate [bits/channel use]"), args.stamp)
    if not args.no_exhaustive:
        norm = cmp.normalized()
        harness.write_csv(out / "normalized.csv", ["snr_db", "method", "normalized_rate"],
                          [(s, m, norm[m][i]) for i, s in enumerate(grid) for m in harness.METHODS])
        _write_svg(out / "normalized.svg",
                   line_chart({m: (grid, v) for m, v in norm.items()}, title="Rate relative to exhaustive",
                              xlabel="SNR [dB]", ylabel="fraction of optimum"), args.stamp)
    for i, s in enumerate(grid):
        print(f"{s:6.1f} dB  " + "  ".join(f"{m}={cmp.rates[m][i]:.4f}" for m in cmp.rates))
    return 0


def cmd_predict(args) -> int:
    env = _env(args)
    model = load_model(_model_path(args), n=env.n, b=env.b)
    ds, split = _load_data(args, env)
    test = split.test
    if args.bits:
        bits = validate_config(str_to_bits(args.bits), env.n)
        hits = np.flatnonzero(np.all(test.configs == bits, axis=1))
        if hits.size:
            target = test.targets[hits[0]]
        elif args.heldout:
            raise DomainError(f"configuration {args.bits} is not in the test split")
        else:
            hits = np.flatnonzero(np.all(ds.configs == bits, axis=1))
            if not hits.size:
                raise DomainError(f"configuration {args.bits} is not in the dataset")
            target = ds.targets[hits[0]]
    else:
        if not 0 <= args.record < len(test):
            raise DomainError(f"record {args.record} outside the test split of {len(test)}")
        bits, target = test.configs[args.record], test.targets[args.record]
    pred = predict_moments(model, bits)
    rows = harness.prediction_rows(env.grid.frequencies, target, pred)
    out = _out(args)
    harness.write_csv(out / "predict.csv", ["bin", "frequency", "true", "predicted", "residual"], rows)
    f = env.grid.frequencies
    _write_svg(out / "predict.svg",
               line_chart({"ground truth": (f, target), "predicted": (f, pred)},
                          title=f"Mean |H|^2 for {bits_to_str(bits)}", xlabel="frequency [a.u.]",
                          ylabel="E|H|^2"), args.stamp)
    rel = np.abs(pred - target) / target
    print(f"config {bits_to_str(bits)}: median relative error {np.median(rel):.3%}")
    return 0


def cmd_exhaustive(args) -> int:
    env = _env(args)
    ev = harness.crn_evaluator(env, args.angles, args.seed, args.threads)
    table = ev.full_table(ceiling=args.ceiling, force=args.force)
    res = exhaustive_from_moments(table, np.ones(env.b), LinkBudget.from_snr_db(args.snr))
    out = _out(args)
    write_exhaustive_table(out / "exhaustive.csv", res.rates, env.n)
    print(f"best config {bits_to_str(res.best_config)} rate {res.best_rate!r} at {args.snr} dB")
    return 0


def cmd_grid_search(args) -> int:
    env = _env(args)
    model = load_model(_model_path(args), n=env.n, b=env.b)
    rho = np.ones(env.b)
    fitness = harness.model_fitness(model, rho, LinkBudget.from_snr_db(args.snr))
    best, rows = grid_search_hyperparams(fitness, env.n, default_grid(env.n), args.total_budget,
                                         seed=args.seed, vectorized=True)
    out = _out(args)
    harness.write_csv(out / "grid_search.csv", ["l_pop", "k_tour", "p_mut", "best_score"], rows)
    print(f"best: l_pop={best.l_pop} k_tour={best.k_tour} p_mut={best.p_mut!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned file with default flag values")
    common.add_argument("--scenario", default="default", help="builtin name (default, n10) or scenario file")
    common.add_argument("--n", type=int, default=None, help="override the RIS element count")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")

    ga = argparse.ArgumentParser(add_help=False)
    ga.add_argument("--l-pop", type=int, default=GaConfig.l_pop)
    ga.add_argument("--k-tour", type=int, default=GaConfig.k_tour)
    ga.add_argument("--p-mut", type=float, default=None, help="default 1/N")
    ga.add_argument("--budget", type=int, default=GaConfig.eval_budget, help="fitness evaluations")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", default=None, help="model file (default OUT/model.txt)")

    stamp = argparse.ArgumentParser(add_help=False)
    stamp.add_argument("--stamp", action="store_true", help="embed a timestamp in SVG output")

    p = argparse.ArgumentParser(prog="deepris", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", allow_abbrev=False, parents=[common], help="simulate the training dataset")
    g.add_argument("--c", type=int, default=500, help="number of configurations")
    g.add_argument("--angles", type=int, default=100, help="perturber angles per configuration")
    g.add_argument("--split", default="0.8,0.1,0.1", help="train,validation,test fractions")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", allow_abbrev=False, parents=[common], help="train the surrogate network")
    t.add_argument("--data", default=None, help="directory with dataset.txt and split.txt (default OUT)")
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--lambda", dest="l2_lambda", type=float, default=2.5e-5)
    t.add_argument("--max-epochs", type=int, default=5000)
    t.add_argument("--patience", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=0, help="0 = full batch")
    t.add_argument("--hidden", default="64,64")
    t.set_defaults(func=cmd_train)

    o = sub.add_parser("optimize", allow_abbrev=False, parents=[common, ga, model], help="run the GA on the surrogate")
    o.add_argument("--snr", type=float, default=10.0)
    o.add_argument("--verify", action="store_true", help="score the winner with the simulator")
    o.add_argument("--angles", type=int, default=100)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("compare", allow_abbrev=False, parents=[common, ga, model, stamp], help="methods versus SNR")
    c.add_argument("--snr-grid", default="-10:20:5", help="lo:hi:step or comma list in dB; write --snr-grid=-10:20:5 for negative starts")
    c.add_argument("--random", type=int, default=5000, help="random candidates")
    c.add_argument("--angles", type=int, default=100, help="shared perturber angles")
    c.add_argument("--mc-angles", type=int, default=100,
                   help="independent angles for the Monte-Carlo rate of each winner")
    c.add_argument("--no-exhaustive", action="store_true")
    c.add_argument("--force", action="store_true", help="allow exhaustive search above the ceiling")
    c.add_argument("--ceiling", type=int, default=EXHAUSTIVE_CEILING)
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("predict", allow_abbrev=False, parents=[common, model, stamp], help="true vs predicted moments")
    r.add_argument("--data", default=None)
    r.add_argument("--record", type=int, default=0, help="index into the test split")
    r.add_argument("--bits", default=None, help="configuration bit string (bit 0 first)")
    r.add_argument("--heldout", action="store_true", help="require --bits to be in the test split")
    r.set_defaults(func=cmd_predict)

    e = sub.add_parser("exhaustive", allow_abbrev=False, parents=[common], help="score every configuration")
    e.add_argument("--snr", type=float, default=10.0)
    e.add_argument("--angles", type=int, default=100)
    e.add_argument("--force", action="store_true")
    e.add_argument("--ceiling", type=int, default=EXHAUSTIVE_CEILING)
    e.set_defaults(func=cmd_exhaustive)

    s = sub.add_parser("grid-search", allow_abbrev=False, parents=[common, model], help="GA hyper-parameter grid search")
    s.add_argument("--snr", type=float, default=10.0)
    s.add_argument("--total-budget", type=int, default=30000)
    s.set_defaults(func=cmd_grid_search)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    sections = read_sections(known.config)
    subparser = parser._subparsers._group_actions[0].choices.get(known.command)
    if subparser is None:
        return
    actions = {a.option_strings[0].lstrip("-"): a for a in subparser._actions if a.option_strings}
    defaults = {}
    for section in ("common", known.command):
        if not sections.has_section(section):
            continue
        for key, raw in sections.items(section):
            action = actions.get(key)
            if action is None:
                raise ValidationError(f"[{section}] {key}: not a flag of '{known.command}'")
            if action.nargs == 0:
                defaults[action.dest] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                defaults[action.dest] = action.type(raw) if action.type else raw
    subparser.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
