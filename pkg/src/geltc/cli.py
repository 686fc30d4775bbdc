"""Command-line entry point.

Subcommands:

* ``run <config.json>``           execute an experiment config;
* ``validate <config.json>``      parse a config and report derived T1 /
  lambda / width without running it;
* ``compare-lasso <config.json>`` run the vector-environment head-to-head;
* ``selftest``                    fast invariant suite (< 60 s).

Exit codes: 0 on success, 2 on usage/config errors, 1 on runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geltc",
        description="High-dimensional generalized-linear tensor bandit experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "execute an experiment config"),
        ("validate", "parse a config and print derived quantities"),
        ("compare-lasso", "run the DR-Lasso comparison config"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to a JSON experiment config")
        if name != "validate":
            p.add_argument("--output-dir", default=None, help="override the config output directory")
    sub.add_parser("selftest", help="run the fast invariant suite")
    return parser


def _load(path: str):
    from .harness import ConfigError, load_config

    try:
        return load_config(path)
    except FileNotFoundError:
        print(f"error: config file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    except json.JSONDecodeError as exc:
        print(
            f"error: malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            file=sys.stderr,
        )
        raise SystemExit(2)
    except ConfigError as exc:
        print(f"error: invalid config {path}: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _with_output_dir(config, output_dir):
    if output_dir is None:
        return config
    import dataclasses

    return dataclasses.replace(config, output_dir=output_dir)


def _cmd_run(args) -> int:
    from .harness import ExperimentConfig, LassoComparisonConfig, run_experiment, run_lasso_comparison

    config = _with_output_dir(_load(args.config), args.output_dir)
    if isinstance(config, ExperimentConfig):
        run_experiment(config)
    elif isinstance(config, LassoComparisonConfig):
        run_lasso_comparison(config)
    return 0


def _cmd_validate(args) -> int:
    from .bandit import derive_run_parameters, gen_lasso_comparison_env, BanditInstance
    from .harness import ExperimentConfig

    config = _load(args.config)
    if isinstance(config, ExperimentConfig):
        env = BanditInstance.generate(
            config.build_spec(),
            config.dims,
            config.K,
            config.T,
            config.build_family(),
            config.replication_seeds(0),
        )
    else:
        env = gen_lasso_comparison_env(
            config.K,
            config.d,
            config.sparsity,
            config.rho2,
            config.noise_scale,
            config.T,
            config.replication_seeds(0),
        )
    from .seeding import STREAM_WIDTH, derive_seed

    width_rng = np.random.Generator(np.random.PCG64(derive_seed(config.base_seed, STREAM_WIDTH)))
    derived = derive_run_parameters(
        env, config.schedule(), config.c_explore, config.width_samples, width_rng
    )
    print(f"experiment_id: {config.experiment_id}")
    print(f"width:  {derived.width:.6g} (stderr {derived.width_stderr:.3g})")
    print(f"T1:     {derived.t1} of T={config.T}")
    print(f"lambda: {derived.lam:.6g}")
    return 0


def _cmd_compare(args) -> int:
    from .harness import LassoComparisonConfig, run_lasso_comparison

    config = _with_output_dir(_load(args.config), args.output_dir)
    if not isinstance(config, LassoComparisonConfig):
        print("error: compare-lasso requires a config with type 'lasso_comparison'", file=sys.stderr)
        return 2
    run_lasso_comparison(config)
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest()


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "compare-lasso": _cmd_compare,
        "selftest": _cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # surface a one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
