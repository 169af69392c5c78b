"""Command line entry point.

Exit codes: 0 success, 1 bound-check failure under ``--strict``,
2 configuration error, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import FORMATS, MODES, ExperimentConfig
from .exceptions import ConfigError, ResourceError
from .runner import emit, run

log = logging.getLogger("latlab")

EXIT_OK, EXIT_STRICT, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latlab", description="Lattice discretization robustness experiments.")
    p.add_argument("--config", required=True, help="path to a JSON experiment config")
    p.add_argument("--mode", choices=MODES, help="override the config mode")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--samples", type=int, help="override n_samples")
    p.add_argument("--out", help="output directory (default: config out_dir)")
    p.add_argument("--format", choices=FORMATS, help="scan table format")
    p.add_argument("--strict", action="store_true", help="exit 1 when a claimed bound check fails")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        overrides = {"mode": args.mode, "seed": args.seed, "n_samples": args.samples,
                     "out_dir": args.out, "format": args.format}
        raw = cfg.to_dict()
        raw.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ExperimentConfig.from_dict(raw)
        log.info("running %s for %s%s", cfg.mode, cfg.family, cfg.params)
        report = run(cfg)
    except (ConfigError, ResourceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = emit(report, cfg.out_dir, cfg.format, cfg.name)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        log.info("wrote %s", path)
    if args.strict and report.strict_failures:
        print(f"strict: failed checks {report.strict_failures}", file=sys.stderr)
        return EXIT_STRICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
