"""Command-line interface.

Every option can also be set through an environment variable named
``MDCRBM_<OPTION>`` (upper case, dashes as underscores), e.g. ``MDCRBM_SEED=7``.
Precedence is: command-line flag, then environment, then ``--config`` file,
then built-in defaults.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import files
from .elasticity import elasticity_density
from .errors import DataError, MdcError, NumericError
from .generator import (DEFAULT_BURN_IN, DEFAULT_SWEEPS, DEFAULT_THIN, ConditioningMask,
                        impute, synthesize)
from .nn_benchmark import nn_train
from .oracle import RECIPES, get_recipe
from .rng import stream
from .schema import Complete, encode, filter_rows
from .stats import compare
from .trainer import REPORT_COLUMNS, TrainConfig, config_from_mapping, default_choice, train

ENV_PREFIX = "MDCRBM_"
DEFAULT_SEED = 20240101
DEFAULT_HIDDEN = 16

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# Options that feed TrainConfig, keyed by argparse dest.
TRAIN_OPTIONS = {"epochs": "epochs", "batch": "batch_size", "lr": "lr", "decay": "decay",
                 "cd_steps": "cd_steps", "val_fraction": "val_fraction"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_training(p):
    p.add_argument("--hidden", type=int, help=f"hidden units J (default {DEFAULT_HIDDEN})")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--cd-steps", type=int)
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--config", help="INI file with a [train] section")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdcrbm", description="RBM generative model for multiple discrete-continuous data")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth-oracle", help="write a synthetic dataset with known ground truth")
    p.add_argument("--recipe", default="mdc", help=f"one of: {', '.join(sorted(RECIPES))}")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True, help="data file")
    p.add_argument("--schema", required=True, help="schema file to write")
    p.add_argument("--truth", help="ground-truth JSON (default: <out>.truth.json)")

    p = sub.add_parser("train", help="fit an RBM and write the model file and metrics table")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="model file to write")
    p.add_argument("--out", help="metrics table (default: stdout)")
    p.add_argument("--target", help="choice variable for the likelihood columns")
    _add_training(p)

    p = sub.add_parser("generate", help="sample synthetic rows from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="data file (default: stdout)")
    p.add_argument("--data", help="rows to start the chains from (default: noise)")
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--thin", type=int, default=DEFAULT_THIN)
    p.add_argument("--chains", type=int, default=100)

    p = sub.add_parser("impute", help="fill unknown values by clamped Gibbs sampling")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mask", help='e.g. "mode=?,purpose=work"; empty fields are unknown too')
    p.add_argument("--sweeps", type=int, default=DEFAULT_SWEEPS)
    p.add_argument("--out", help="data file (default: stdout)")

    p = sub.add_parser("validate", help="compare a generated file against an original file")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True, help="original data")
    p.add_argument("--generated", required=True)
    p.add_argument("--bins", type=int, help="histogram bins (default: Freedman-Diaconis)")
    p.add_argument("--out", help="report file (default: stdout)")

    p = sub.add_parser("elasticity", help="choice elasticities w.r.t. a continuous variable")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target")
    p.add_argument("--variable", required=True)
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--out", help="report file (default: stdout)")

    p = sub.add_parser("benchmark", help="train the supervised baseline and the RBM on the same split")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target")
    p.add_argument("--out", help="curves table (default: stdout)")
    _add_training(p)

    for action in sub.choices.values():
        action.add_argument("--seed", type=int, help=f"default {DEFAULT_SEED}")
    return parser


def _apply_env(args, parser: argparse.ArgumentParser, environ) -> None:
    """Fill options left unset on the command line from ``MDCRBM_*`` variables."""
    sub = parser._subparsers._group_actions[0].choices[args.command]
    for action in sub._actions:
        if not action.option_strings or action.dest == "help":
            continue
        key = ENV_PREFIX + action.dest.upper()
        if key in environ and getattr(args, action.dest) in (None, action.default):
            raw = environ[key]
            try:
                value = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError(f"{key}={raw!r}: invalid value") from None
            setattr(args, action.dest, value)


def _train_config(args, seed: int) -> tuple[TrainConfig, int]:
    base = TrainConfig(seed=seed)
    hidden = DEFAULT_HIDDEN
    if getattr(args, "config", None):
        parser = configparser.ConfigParser(interpolation=None)
        if not parser.read(args.config, encoding="utf-8"):
            raise UsageError(f"cannot read config file {args.config}")
        if parser.has_section("train"):
            section = dict(parser["train"])
            if "hidden" in section:
                hidden = int(section.pop("hidden"))
            base = config_from_mapping(section, base)
    overrides = {TRAIN_OPTIONS[k]: getattr(args, k) for k in TRAIN_OPTIONS
                 if getattr(args, k, None) is not None}
    if getattr(args, "target", None):
        overrides["choice"] = args.target
    config = replace(base, seed=seed, **overrides)
    if args.hidden is not None:
        hidden = args.hidden
    if hidden < 1:
        raise UsageError("--hidden must be >= 1")
    return config, hidden


def _emit(text: str, out) -> None:
    if out:
        files._atomic_write(out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _read_data(path, schema):
    table = files.read_table(path, schema)
    return filter_rows(table, schema, [Complete()])


def cmd_synth_oracle(args, seed):
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    recipe = get_recipe(args.recipe)
    table = recipe.sample(args.n, stream(seed, "oracle")) if args.n else np.empty((0, len(recipe.schema)))
    files.write_table(args.out, table, recipe.schema)
    files.write_schema(args.schema, recipe.schema)
    truth_path = args.truth or f"{args.out}.truth.json"
    files._atomic_write(truth_path, (json.dumps(recipe.truth(), indent=2) + "\n").encode("utf-8"))


def cmd_train(args, seed):
    schema, norm = files.read_schema(args.schema)
    config, hidden = _train_config(args, seed)
    table = _read_data(args.data, schema)
    params, report = train(table, schema, hidden, config, norm=norm)
    # Wall-clock seconds are dropped so the metrics table is reproducible.
    report.seconds = [0.0] * len(report)
    _emit(report.to_tsv(), args.out)
    if report.aborted:
        raise NumericError(f"training aborted: {report.aborted}; no model written")
    files.save_model(args.model, params)


def cmd_generate(args, seed):
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    params = files.load_model(args.model)
    init = None
    if args.data:
        init = encode(_read_data(args.data, params.schema), params.schema, params.norm)
    rows = synthesize(params, args.n, stream(seed, "generate"), burn_in=args.burn_in,
                      thin=args.thin, chains=args.chains, init=init)
    _emit(files.table_to_text(rows, params.schema), args.out)


def cmd_impute(args, seed):
    params = files.load_model(args.model)
    table = files.read_table(args.data, params.schema)
    mask = ConditioningMask.parse(args.mask, params.schema) if args.mask else None
    rows = impute(table, params, stream(seed, "impute"), sweeps=args.sweeps, mask=mask)
    _emit(files.table_to_text(rows, params.schema), args.out)


def cmd_validate(args, seed):
    schema, _ = files.read_schema(args.schema)
    original = files.read_table(args.data, schema)
    generated = files.read_table(args.generated, schema)
    _emit(compare(original, generated, schema, bins=args.bins).to_text(), args.out)


def cmd_elasticity(args, seed):
    params = files.load_model(args.model)
    target = args.target or default_choice(params.schema)
    table = _read_data(args.data, params.schema)
    report = elasticity_density(table, target, args.variable, params, bins=args.bins)
    _emit(report.to_tsv(), args.out)


def cmd_benchmark(args, seed):
    schema, norm = files.read_schema(args.schema)
    config, hidden = _train_config(args, seed)
    target = args.target or default_choice(schema)
    config = replace(config, choice=target)
    table = _read_data(args.data, schema)
    _, rbm_curve = train(table, schema, hidden, config, norm=norm)
    _, nn_curve = nn_train(table, schema, target, hidden, config, norm=norm)
    lines = ["model\t" + "\t".join(REPORT_COLUMNS)]
    for name, curve in (("rbm", rbm_curve), ("nn", nn_curve)):
        curve.seconds = [0.0] * len(curve)
        body = curve.to_tsv().splitlines()[1:]
        lines.extend(f"{name}\t{line}" if not line.startswith("#") else f"# {name} {line[2:]}"
                     for line in body)
    _emit("\n".join(lines) + "\n", args.out)


COMMANDS = {
    "synth-oracle": cmd_synth_oracle,
    "train": cmd_train,
    "generate": cmd_generate,
    "impute": cmd_impute,
    "validate": cmd_validate,
    "elasticity": cmd_elasticity,
    "benchmark": cmd_benchmark,
}


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    environ = os.environ if environ is None else environ
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_env(args, parser, environ)
        seed = DEFAULT_SEED if args.seed is None else args.seed
        COMMANDS[args.command](args, seed)
    except UsageError as exc:
        print(f"mdcrbm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"mdcrbm {args.command}: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"mdcrbm {args.command}: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MdcError as exc:
        print(f"mdcrbm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        # Unreadable paths and out-of-range option values are usage problems.
        print(f"mdcrbm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
