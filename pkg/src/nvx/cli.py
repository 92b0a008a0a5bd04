"""Command-line entry point: ``nvx <command> [--config PATH | --preset NAME] ...``."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

import numpy as np

from .config import PRESETS, ConfigError, ExperimentConfig, load_config, load_preset
from .emit import EmitError, emit, to_csv
from .hamiltonian import HamiltonianError
from .rates import SteadyStateError
from .sweep import COMMANDS, WORKERS_ENV, SweepConfigError, default_workers, run

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvx", description="NV-ensemble AO-PL and ODMR sweeps.")
    p.add_argument("command", choices=COMMANDS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="TOML experiment config")
    src.add_argument("--preset", choices=PRESETS, help="shipped config")
    p.add_argument("--out", help="output directory (default: config output.dir, else CSV to stdout)")
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--format", choices=("csv", "svg"), action="append",
                   help="output format; repeat for several (default: config output.formats)")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    return p


def _load(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config)
    if args.preset:
        return load_preset(args.preset)
    return ExperimentConfig()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK

    def err(msg):
        print(f"nvx: error: {msg}", file=sys.stderr)

    try:
        cfg = _load(args)
        workers = args.workers if args.workers is not None else (
            cfg.workers if cfg.workers != 1 else default_workers())
        if workers < 1:
            raise ConfigError("--workers must be a positive integer")
        cfg = replace(cfg, workers=workers)
        progress = None if args.quiet else (
            lambda done, total: print(f"[nvx] {args.command}: {done}/{total}", file=sys.stderr))
        t0 = time.perf_counter()
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            result = run(cfg, args.command, progress)
        formats = tuple(args.format) if args.format else cfg.output.formats
        out = args.out or cfg.output.dir
        if out is None:
            if formats != ("csv",):
                raise ConfigError("SVG output needs --out or output.dir")
            sys.stdout.write(to_csv(result))
        else:
            for fmt in formats:
                path = emit(result, fmt, out)
                if not args.quiet:
                    print(f"[nvx] wrote {path}", file=sys.stderr)
        if not args.quiet:
            print(f"[nvx] {args.command} finished in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
        return EXIT_OK
    except ConfigError as exc:
        err(exc)
        return EXIT_PARSE if exc.kind == "parse" else EXIT_VALIDATION
    except (EmitError, OSError) as exc:
        err(exc)
        return EXIT_IO
    except (SteadyStateError, FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        err(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    except (SweepConfigError, HamiltonianError, ValueError) as exc:
        err(exc)
        return EXIT_VALIDATION


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
