"""Command line entry point.

    fmpair run CONFIG [--out DIR]
    fmpair sweep CONFIG --param k|z --values 5,10,20 [--epochs 5] [--warmup 1]

Outputs go to ``--out``, else ``$FMPAIR_OUTPUT_DIR``, else ``./output``.
Exit codes: 0 ok, 2 config error, 3 data error, 4 training error,
5 evaluation error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError
from .experiment import StageError, run_experiment, run_timing_sweep

EXIT_CONFIG, EXIT_DATA, EXIT_TRAIN, EXIT_EVAL = 2, 3, 4, 5
STAGE_CODES = {"data": EXIT_DATA, "train": EXIT_TRAIN, "eval": EXIT_EVAL}


def _values(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def output_dir(arg) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get("FMPAIR_OUTPUT_DIR") or "output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmpair", description="Factorization machines with pairwise learning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-fold progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="cross-validated experiment")
    run.add_argument("config", type=Path)
    run.add_argument("--out", help="output directory")

    sweep = sub.add_parser("sweep", help="epoch-time sweep over k or synthetic aux count")
    sweep.add_argument("config", type=Path)
    sweep.add_argument("--param", choices=("k", "z"), required=True)
    sweep.add_argument("--values", type=_values, required=True)
    sweep.add_argument("--epochs", type=int, default=5, help="timed epochs per fold (default 5)")
    sweep.add_argument("--warmup", type=int, default=1, help="untimed epochs per fold (default 1)")
    sweep.add_argument("--folds", type=_values, help="fold indices to time (default all)")
    sweep.add_argument("--out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = output_dir(args.out)
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            result = run_experiment(cfg, out)
            sys.stdout.write(result.report.to_text())
        else:
            if args.epochs < 1 or args.warmup < 0:
                raise ConfigError("--epochs", "need --epochs >= 1 and --warmup >= 0")
            rows = run_timing_sweep(cfg, args.param, args.values, args.epochs, args.warmup, out, args.folds)
            for r in rows:
                print(f"{r.param}={r.value}: {r.mean_ms:.2f} ms/epoch (std {r.std_ms:.2f}, n={r.epochs})")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return STAGE_CODES[exc.stage]
    print(f"wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
