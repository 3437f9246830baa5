"""Command-line entry point: ``maxmargin {predict,simulate,experiment,selftest}``."""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config, override
from .report import compare_report, format_table
from .runner import run
from .selftest import run_selftest

LEGS = {
    "predict": ("predict",),
    "simulate": ("simulate",),
    "experiment": ("predict", "simulate"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxmargin",
                                     description="Asymptotic and simulated max-margin classification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [("predict", "asymptotic predictions only"),
                           ("simulate", "finite-sample simulations only"),
                           ("experiment", "predictions, simulations and comparison")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", help="output directory (overrides [output].path)")
        p.add_argument("--seed", type=int, help="base seed for the replicates")
        p.add_argument("--workers", type=int, help="size of the worker pool")
        p.add_argument("--quad-order", type=int,
                       help="Gauss-Hermite and Marchenko-Pastur quadrature order")
    st = sub.add_parser("selftest", help="run the invariant battery")
    st.add_argument("--quad-order", type=int, help="accepted for symmetry; unused")
    st.add_argument("--config", help="unused")
    st.add_argument("--out", help="unused")
    st.add_argument("--seed", type=int, help="unused")
    st.add_argument("--workers", type=int, help="unused")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return 0 if run_selftest() else 1
    try:
        cfg = override(load_config(args.config), seed=args.seed, workers=args.workers,
                       quad_order=args.quad_order, output_path=args.out)
    except (ConfigError, OSError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    try:
        result = run(cfg, LEGS[args.command])
    except OSError as exc:
        print(json.dumps({"error": "output", "message": str(exc)}), file=sys.stderr)
        return 2
    if "compare" in result.files:
        print(format_table(compare_report(result.files["asymptotic"], result.files["simulation"],
                                          cfg.tolerances)))
    if result.failures:
        print(json.dumps({"error": "partial_failure", "count": len(result.failures),
                          "report": result.files.get("errors")}), file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
