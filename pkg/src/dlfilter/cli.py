"""Command line interface: run a scenario, sweep sampling frequencies, self-check."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .checks import run_all
from .harness import load_config, run_scenario, sweep, write_outputs, write_sweep_csv


def _fraction_list(text: str) -> list[Fraction]:
    return [Fraction(part.strip()) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlfilter",
                                     description="Filtering experiments for 1-D stochastic advection")
    parser.add_argument("--version", action="version", version=f"dlfilter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write its outputs")
    run_p.add_argument("--config", required=True, type=Path,
                       help="flat key = value config file, or a manifest.json")
    run_p.add_argument("--out", required=True, type=Path, help="output directory")
    run_p.add_argument("--pool-trace", action="store_true",
                       help="also write the per-step live-observation pool trace")

    sweep_p = sub.add_parser("sweep", help="replicate runs over sampling frequencies")
    sweep_p.add_argument("--config", required=True, type=Path)
    sweep_p.add_argument("--xi", required=True, type=_fraction_list,
                         help="comma list of spatial frequencies, e.g. 1,1/5")
    sweep_p.add_argument("--tau", required=True, type=_fraction_list,
                         help="comma list of temporal frequencies, e.g. 1,1/10")
    sweep_p.add_argument("--replicates", type=int, default=1)
    sweep_p.add_argument("--out", required=True, type=Path)

    sub.add_parser("check", help="run the oracle/property self-checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "run":
        cfg = load_config(args.config)
        result = run_scenario(cfg, collect_pool_trace=args.pool_trace)
        written = write_outputs(result, args.out)
        for path in written:
            print(path)
        return 0

    if args.command == "sweep":
        cfg = load_config(args.config)
        rows = sweep(cfg, args.xi, args.tau, args.replicates)
        args.out.mkdir(parents=True, exist_ok=True)
        out_path = args.out / "sweep_summary.csv"
        write_sweep_csv(rows, out_path)
        print(out_path)
        return 0

    failures = 0
    for result in run_all():
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: {result.detail}")
        failures += 0 if result.passed else 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
