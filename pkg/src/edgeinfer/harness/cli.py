"""``edgeinfer`` command line: run, reproduce and validate experiments.

Exit codes: 0 success, 2 invalid configuration, 3 I/O error, 4 systematic
solver failure (more than half of the trials raised a solver error).
"""

from __future__ import annotations

import argparse
import os
import sys

from ..errors import ConfigError
from .config import load_config, parse_config
from .experiments import series_names
from .plot import emit_plot_data, render_svg
from .presets import PRESETS
from .runner import FAILURE_LIMIT, run_experiment, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4


def _parser():
    p = argparse.ArgumentParser(prog="edgeinfer", description="Edge inference simulation experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, help="config file path")
    run.add_argument("--out", required=True, help="output directory")
    _common(run)

    rep = sub.add_parser("reproduce", help="run a figure preset")
    rep.add_argument("figure", choices=sorted(PRESETS))
    rep.add_argument("--out", required=True, help="output directory")
    _common(rep)

    val = sub.add_parser("validate", help="check a config file and print its canonical form")
    val.add_argument("--config", required=True, help="config file path")
    return p


def _common(sp):
    sp.add_argument("--seed", type=int, help="override master_seed")
    sp.add_argument("--workers", type=int, help="override worker count")
    sp.add_argument("--trials", type=int, help="override trials per sweep point")
    sp.add_argument("--svg", action="store_true", help="also render plot.svg")
    sp.add_argument("--quiet", action="store_true", help="no progress output")


def _overrides(args):
    return {"master_seed": args.seed, "workers": args.workers, "trials": args.trials}


def _execute(cfg, args, argv):
    total = len(cfg.sweep_values) * cfg.trials
    per_trial = len(series_names(cfg))

    def progress(n_rows):
        if not args.quiet:
            done = n_rows // per_trial
            print(f"\r{done}/{total} trials", end="", file=sys.stderr, flush=True)

    table = run_experiment(cfg, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    try:
        write_outputs(table, cfg, args.out, argv)
        emit_plot_data(table, path=os.path.join(args.out, "plot_data.csv"))
        if args.svg:
            render_svg(table, path=os.path.join(args.out, "plot.svg"))
    except OSError as exc:
        print(f"error: cannot write outputs to {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    if table.failure_rate > FAILURE_LIMIT:
        print(f"error: {table.failure_rate:.0%} of trial rows hit solver failures (see manifest.json)", file=sys.stderr)
        return EXIT_SOLVER
    if not args.quiet:
        print(f"wrote {len(table.rows)} trial rows and {len(table.summary)} summary rows to {args.out}")
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(cfg.as_text(), end="")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config, _overrides(args))
        else:
            cfg = parse_config(PRESETS[args.figure], _overrides(args))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(cfg, args, ["edgeinfer", *argv])


if __name__ == "__main__":
    sys.exit(main())
