"""Command-line entry point.

One subcommand per scenario.  Without ``--config`` the documented
defaults run on the bundled aggregate; with it, the file is validated
first and every offending field is reported.  The subcommand overrides
the ``scenario`` field of the config, so one config file can drive
several scenarios.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import FORMATS, SCENARIOS, ConfigError, load_config, reference_config
from .runner import run_scenario

_DESCRIPTIONS = {
    "model-info": "eigenstate energies, widths and dipole strengths",
    "jsa": "joint spectral intensity of the photon-pair source",
    "excite": "prepared two-exciton distribution for one source",
    "excite-scan": "preparation map over all scan targets",
    "propagate": "prepared populations relaxing through the bath",
    "coincidence": "filtered two-photon coincidence map",
    "panel-study": "coincidence maps over filter/waiting variations",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excitonscope",
        description="entangled-pair excitation and coincidence detection "
        "in a dissipative exciton aggregate",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="scenario", required=True, metavar="scenario")
    for name in SCENARIOS:
        p = sub.add_parser(name, help=_DESCRIPTIONS[name])
        p.add_argument("--config", metavar="PATH", default=None,
                       help="JSON run configuration (default: bundled reference)")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (default: out_dir from the config)")
        p.add_argument("--threads", metavar="N", type=int, default=None,
                       help="worker threads (default: config, then EXCITONSCOPE_THREADS)")
        p.add_argument("--format", choices=FORMATS, default=None,
                       help="artifact format (default: config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config) if args.config else reference_config(args.scenario)
        cfg = replace(cfg, scenario=args.scenario)
        manifest = run_scenario(cfg, out_dir=args.out, threads=args.threads, fmt=args.format)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for note in manifest.warnings:
        print(f"warning: {note}", file=sys.stderr)
    out_dir = manifest.resolved["out_dir"]
    print(f"{args.scenario}: wrote {len(manifest.artifacts)} artifacts and manifest.json to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
