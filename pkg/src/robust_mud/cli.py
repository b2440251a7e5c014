"""Command line entry point: ``robust-mud {analytic,simulate,oracle,validate}``.

Exit status: 0 success, 1 failed check, 2 configuration error,
3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import sys

from .harness import (ConfigError, ExperimentConfig, format_results, load_config,
                      run_analytic_curve, run_ber_sweep, run_oracle_curve)
from .quadrature import QuadratureError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _snr_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-mud", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--snr", type=_snr_list, help="comma-separated SNR grid in dB")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int, default=1)

    common(sub.add_parser("analytic", help="analytic BER curve"))
    common(sub.add_parser("simulate", help="Monte Carlo BER sweep of the detectors"))
    common(sub.add_parser("oracle", help="direct Monte Carlo of the analytic model"))
    val = sub.add_parser("validate", help="run the acceptance checks")
    common(val, config_required=False)
    val.add_argument("--level", choices=("quick", "full"), default="quick")
    return parser


def _config(args) -> ExperimentConfig:
    overrides = dict(seed=args.seed, trials=args.trials, snr_grid_db=args.snr)
    return load_config(args.config, **overrides)


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        from .validation import format_report, validate

        results = validate(args.level, stream=sys.stderr)
        report = format_report(results)
        if args.out:
            _write(report, args.out)
        else:
            sys.stdout.write(report)
        return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK
    try:
        cfg = _config(args)
        if args.command == "analytic":
            curves = [run_analytic_curve(cfg)]
        elif args.command == "simulate":
            curves = run_ber_sweep(cfg, args.workers)
        else:
            curves = [run_oracle_curve(cfg, args.workers)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        _write(format_results(curves, args.format, cfg), args.out)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
