"""Command line interface: run, paper, plot, validate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .envs import ConfigurationError
from .harness import (
    ExperimentConfig,
    best_bands,
    ensure_writable,
    paper_config,
    read_agg,
    resolve_output_dir,
    run_sweep,
    write_results,
)
from .plotting import render_figures

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    # Usage problems are configuration errors: exit 1, not argparse's 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _build_parser() -> _Parser:
    parser = _Parser(prog="semibandit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a sweep described by a config file")
    run.add_argument("--config", required=True, help="path to a JSON experiment config")
    _add_overrides(run)

    paper = sub.add_parser("paper", help="run the built-in reproduction protocol")
    _add_overrides(paper)
    paper.add_argument("--reps", type=int, default=None, help="override replication count")

    plot = sub.add_parser("plot", help="re-render figures from an existing agg.csv")
    plot.add_argument("--agg", required=True, help="path to agg.csv")
    plot.add_argument("--out", default=None, help="directory for the SVG files")

    validate = sub.add_parser("validate", help="check a config file without running it")
    validate.add_argument("--config", required=True, help="path to a JSON experiment config")
    return parser


def _add_overrides(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", default=None, help="output directory override")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument("--parallelism", type=int, default=None, help="worker count override")
    sub.add_argument("--horizon", type=int, default=None, help="horizon override")


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> None:
    if args.out is not None:
        config.output_dir = args.out
    if args.seed is not None:
        config.master_seed = args.seed
    if args.parallelism is not None:
        config.parallelism = args.parallelism
    if args.horizon is not None:
        config.horizon = args.horizon


def _run_and_write(config: ExperimentConfig) -> int:
    config.validate()
    out = resolve_output_dir(config)
    ensure_writable(out)
    result = run_sweep(config)
    bands = best_bands(config, result.curves, strict=False)
    write_results(result.curves, bands, config, failures=result.failures)
    if bands:
        render_figures(bands, out)
    if result.failures:
        sys.stderr.write(
            f"{len(result.failures)} episode(s) failed; see {out / 'failures.json'}\n"
        )
        return EXIT_RUNTIME
    print(f"wrote results for {len(result.curves)} episodes to {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "validate":
            config = load_config(args.config)
            config.validate()
            print(f"configuration OK: {args.config}")
            return EXIT_OK
        if args.command == "run":
            config = load_config(args.config)
            _apply_overrides(config, args)
            return _run_and_write(config)
        if args.command == "paper":
            config = paper_config()
            _apply_overrides(config, args)
            if args.reps is not None:
                config.n_reps = args.reps
            return _run_and_write(config)
        if args.command == "plot":
            bands = read_agg(Path(args.agg))
            out = Path(args.out) if args.out is not None else Path(args.agg).parent
            render_figures(bands, out)
            print(f"wrote figures to {out}")
            return EXIT_OK
    except ConfigurationError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(f"runtime failure: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
