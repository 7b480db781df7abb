"""Command line entry point: ``dpplab <experiment> [options]``.

Exit status: 0 when every statistical test passes, 2 when one fails and 1
on any error (bad configuration, numerical failure, I/O).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .parallel import WORKERS_ENV

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

log = logging.getLogger("dpplab")

# which driver keyword receives --n for each experiment
_N_KEY = {"nnballs": "n", "maxnn": "n_list", "vn": "n_list", "sample": "R",
          "na-test": "R", "bounds": "W", "voidprob": "r_list", "palm-test": "window",
          "decay-test": "configurations"}
_LIST_KEYS = {"n", "n_list", "r_list"}


def build_parser():
    p = argparse.ArgumentParser(
        prog="dpplab",
        description="Simulation experiments for determinantal point processes.",
        epilog="Worker processes: --workers or the %s environment variable." % WORKERS_ENV)
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", help="JSON config file; command line values override it")
    p.add_argument("--n", type=float, nargs="+",
                   help="size parameter (n for nnballs/maxnn/vn, radius for sample/na-test/"
                        "bounds/palm-test, radii for voidprob)")
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args):
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        if cfg.experiment != args.experiment:
            raise ValueError("config is for %r, not %r" % (cfg.experiment, args.experiment))
    else:
        cfg = ExperimentConfig(args.experiment)
    params = dict(cfg.params)
    if args.n is not None:
        key = _N_KEY[args.experiment]
        if key in _LIST_KEYS:
            params[key] = list(args.n)
        elif len(args.n) != 1:
            raise ValueError("%s takes a single --n value" % args.experiment)
        else:
            params[key] = int(args.n[0]) if key == "configurations" else args.n[0]
    if args.tau is not None:
        params["tau"] = args.tau
    if args.replicates is not None:
        key = {"decay-test": "configurations", "voidprob": "hkpv_replicates"}.get(
            args.experiment, "replicates")
        params[key] = args.replicates
    if args.margin is not None:
        params["margin"] = args.margin
    seed = cfg.seed if args.seed is None else args.seed
    out = args.out if args.out is not None else cfg.output_dir
    return ExperimentConfig(args.experiment, params, seed, out or "")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        rep = run_experiment(cfg, workers=args.workers)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit 1
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    for t in rep.tests:
        print("%s  %s" % ("PASS" if t["passed"] else "FAIL", t["name"]))
    if cfg.output_dir:
        print("wrote %s" % cfg.output_dir)
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
