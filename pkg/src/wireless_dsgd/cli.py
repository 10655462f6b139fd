"""Command-line entry point: ``python -m wireless_dsgd --config run.cfg``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .errors import ConfigurationError

log = logging.getLogger("wireless_dsgd")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wireless_dsgd",
        description="Simulate decentralized SGD over a wireless D2D network.")
    parser.add_argument("--config", help="flat 'key = value' config file")
    parser.add_argument("--mode", choices=harness.MODES)
    parser.add_argument("--seed", help="episode seeds, e.g. '0,1,2'")
    parser.add_argument("--blocks", type=int, help="number of communication blocks")
    parser.add_argument("--out", help="metrics CSV path")
    parser.add_argument("--emit-plot-script", action="store_true",
                        help="write a matplotlib script next to the CSV")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
        if args.mode:
            cfg.mode = args.mode
        if args.seed:
            cfg.seeds = harness._coerce("seeds", args.seed, cfg.seeds)
        if args.blocks is not None:
            cfg.blocks = args.blocks
        if args.out:
            cfg.out = args.out
        if args.emit_plot_script:
            cfg.emit_plot_script = True
        cfg.validate()
    except ConfigurationError as exc:
        log.error("config error: %s", exc)
        return 1
    try:
        rows = harness.run_experiment(cfg)
        path = harness.write_metrics(rows, cfg.out, cfg.emit_plot_script)
    except ConfigurationError as exc:
        log.error("config error: %s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit code 2
        log.error("run failed: %s", exc)
        return 2
    log.info("wrote %d rows to %s", len(rows), path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
