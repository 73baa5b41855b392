"""Command-line front end.

    cocyclelab run --config runs/spectrum.ini [--out DIR] [--seed N] [--threads N]
    cocyclelab report --artifacts DIR [--out DIR]

Exit codes: 0 success, 1 configuration error, 2 numerical failure (the
failing error class is named in the message).
"""

import argparse
import dataclasses
import os
import sys

from .config import load_config
from .errors import CocycleLabError, ConfigError
from .experiments import run
from .reports import emit_report, write_summary


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cocyclelab",
        description="numerical laboratory for linear cocycles and dichotomies",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a configured experiment")
    p_run.add_argument("--config", required=True, help="INI run configuration")
    p_run.add_argument("--out", default=None, help="artifact directory")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker threads for trial-parallel experiments")
    p_rep = sub.add_parser("report", help="emit plot-ready files from artifacts")
    p_rep.add_argument("--artifacts", required=True)
    p_rep.add_argument("--out", default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    cfg = None
    try:
        if args.command == "report":
            manifest = emit_report(args.artifacts, args.out)
            print(f"report: {len(manifest['files'])} files emitted")
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        summary = run(cfg, outdir=args.out, threads=args.threads)
        checks = summary.get("assertions", {})
        for name, ok in checks.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        print(f"{cfg.experiment}: artifacts under {args.out or cfg.out}")
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except CocycleLabError as e:
        print(f"numerical failure [{type(e).__name__}]: {e}", file=sys.stderr)
        if cfg is not None:
            outdir = args.out or cfg.out
            os.makedirs(outdir, exist_ok=True)
            write_summary(
                os.path.join(outdir, "summary.json"),
                {"experiment": cfg.experiment, "seed": cfg.seed,
                 "error": type(e).__name__, "message": str(e)},
            )
        return 2


if __name__ == "__main__":
    sys.exit(main())
