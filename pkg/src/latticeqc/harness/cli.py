"""Command line: ``latticeqc run|suite|presets``.

Failures print one JSON object ``{"status": "error", "category": ...,
"message": ...}`` to stderr and exit with the category's code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..exceptions import LatticeQCError
from .config import load_config
from .presets import list_presets
from .runner import run_case, run_convergence_suite

EXIT_CODES = {
    "error": 1,
    "config": 2,
    "io": 3,
    "geometry": 4,
    "mesh": 5,
    "sampling": 6,
    "boundary_condition": 7,
    "solver": 8,
    "fracture": 9,
    "error_norm": 10,
    "dead_strut": 11,
    "internal": 70,
}
SCHEMES = ("fs", "ess", "iss", "nas", "nss")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--reference", choices=("fr", "fs", "none"), help="reference solutions to compute")
    common.add_argument("--scheme", choices=SCHEMES, help="sampling scheme override")
    common.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"))

    parser = argparse.ArgumentParser(prog="latticeqc", description="Lattice quasicontinuum runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one case")
    run.add_argument("config", help="TOML file or preset name")
    suite = sub.add_parser("suite", parents=[common], help="convergence study over element sizes")
    suite.add_argument("config", help="TOML file or preset name")
    suite.add_argument("--sizes", nargs="+", type=float, help="element sizes in multiples of l0")
    suite.add_argument("--schemes", nargs="+", choices=SCHEMES, help="schemes to compare")
    presets = sub.add_parser("presets", help="bundled presets")
    presets.add_argument("action", choices=("list",))
    return parser


def _print_metrics(metrics: dict, stream):
    for k, v in metrics.items():
        stream.write(f"{k}={v}\n")


def _cmd_run(args, out):
    cfg = load_config(args.config).with_overrides(scheme=args.scheme, reference=args.reference, out=args.out)
    result = run_case(cfg)
    _print_metrics(result.summary(), out)
    for name, path in result.files.items():
        out.write(f"wrote {name}: {path}\n")


def _cmd_suite(args, out):
    cfg = load_config(args.config).with_overrides(reference=args.reference, out=args.out)
    schemes = args.schemes or ([args.scheme] if args.scheme else None)
    result = run_convergence_suite(cfg, sizes=args.sizes, schemes=schemes)
    for row in result.rows:
        out.write(" ".join(f"{k}={v}" for k, v in row.items()) + "\n")
    for scheme, per in result.fits.items():
        for norm, fit in per.items():
            out.write(f"fit scheme={scheme} norm={norm} order={fit.order!r} r_squared={fit.r_squared!r}\n")
    for name, path in result.files.items():
        out.write(f"wrote {name}: {path}\n")


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(args, "log_level", "WARNING"),
                        format="%(levelname)s %(name)s: %(message)s", stream=err)
    try:
        if args.command == "presets":
            for name, desc in list_presets():
                out.write(f"{name}\t{desc}\n")
        elif args.command == "run":
            _cmd_run(args, out)
        else:
            _cmd_suite(args, out)
    except LatticeQCError as exc:
        category = getattr(exc, "category", "error")
        err.write(json.dumps({"status": "error", "category": category, "message": str(exc)}) + "\n")
        return EXIT_CODES.get(category, 1)
    except Exception as exc:  # noqa: BLE001 - report anything else as internal
        err.write(json.dumps({"status": "error", "category": "internal",
                              "message": f"{type(exc).__name__}: {exc}"}) + "\n")
        return EXIT_CODES["internal"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
