"""Command line entry point.

Exit codes: 0 all certificates pass, 1 config/usage error,
2 iteration failed to converge, 3 certificate violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import diagnostics as diag
from .config import EXIT_CERT, EXIT_OK, EXIT_USAGE, ConfigError, bundled_configs, load_config
from .experiment import OUTPUT_ROOT_ENV, resolve_output_dir, run_experiment, run_sweep


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = resolve_output_dir(cfg, args.out)
    return run_experiment(cfg, out).exit_code


def _cmd_sweep(args) -> int:
    values = [v for v in (args.values or "").replace(",", " ").split()]
    if not values:
        print("error: --values must list at least one value", file=sys.stderr)
        return EXIT_USAGE
    cfg = load_config(args.config)
    out = resolve_output_dir(cfg, args.out)
    return run_sweep(args.config, args.axis, values, out, args.workers)


def _cmd_certify(args) -> int:
    hist = diag.read_history(args.history, args.summary)
    with open(args.summary) as fh:
        stored = json.load(fh).get("certificates", {})
    pairing_tol = stored.get("monotone_pairing", {}).get("detail", {}).get("final_tol", 1e-6)
    certs = [diag.contraction_certificate(hist),
             diag.monotone_gap_certificate(hist, pairing_tol)]
    ok = True
    for c in certs:
        print(c.line())
        prev = stored.get(c.name, {}).get("passed")
        if prev is not None and prev != c.passed:
            print(f"  verdict differs from the stored summary ({prev})")
        ok &= c.passed
    return EXIT_OK if ok else EXIT_CERT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="robin-dd",
        description="Robin-Robin domain decomposition experiments for p-structure problems.",
        epilog=f"Bundled configs: {', '.join(bundled_configs())}. "
               f"Set {OUTPUT_ROOT_ENV} to prefix relative output directories.",
    )
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config", help="config file or bundled config name")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run an experiment for several values of one parameter")
    p.add_argument("config", help="config file or bundled config name")
    p.add_argument("--axis", choices=("s", "p", "h"), required=True,
                   help="parameter to sweep; h takes element counts per direction")
    p.add_argument("--values", required=True, help="comma or space separated list")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="parallel processes")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("certify", help="recheck certificates of a stored run")
    p.add_argument("history", type=Path)
    p.add_argument("summary", type=Path)
    p.set_defaults(func=_cmd_certify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
