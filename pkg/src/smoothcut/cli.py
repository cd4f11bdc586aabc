"""Command-line entry point: ``smoothcut {run,sweep,verify,plot}``.

Exit codes: 0 success, 1 configuration or input error, 2 the learner
hit a realizability failure (the failing round is printed).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, OUT_ENV, load_config
from .convex_geometry import DEFAULT_GAP
from .erm_oracle import ErmInfeasible
from .learners import InvalidDistribution, NonRealizable

log = logging.getLogger("smoothcut")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoothcut", description="Smoothed online learning simulator.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_ENV} or config)")
    sub = p.add_subparsers(dest="command", required=True)

    for name, text in (("run", "run one experiment"), ("sweep", "sweep horizons / adversary parameter")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--config", required=True, metavar="PATH", help="YAML experiment config")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--trials", type=int, help="override the trial count")
        if name == "sweep":
            s.add_argument("--jobs", type=int, default=1, help="parallel workers (joblib)")

    v = sub.add_parser("verify", parents=[common], help="run the geometric and ERM invariant suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--full", action="store_true", help="acceptance-size batches instead of the quick pass")
    v.add_argument("--solver-gap", type=float, default=DEFAULT_GAP,
                   help="optimality gap handed to the ellipsoid solver in the decay batch")
    v.add_argument("--config", metavar="PATH", help="accepted for symmetry; unused")

    pl = sub.add_parser("plot", parents=[common], help="SVG figures from trace / sweep CSVs")
    pl.add_argument("inputs", nargs="+", metavar="CSV", help="trace CSV(s) and/or a sweep CSV")
    pl.add_argument("--config", metavar="PATH", help="accepted for symmetry; unused")
    return p


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING - 10 * min(verbosity, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")


def _load(args):
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if changes:
        cfg = cfg.replace(**changes)
    from .harness import validate_config

    validate_config(cfg)
    out = args.out or cfg.output.resolved_dir()
    return cfg, out


def cmd_run(args) -> int:
    from .harness import run_experiment, write_run_outputs

    cfg, out = _load(args)
    results = []
    for trial in range(cfg.trials):
        trace, summary = run_experiment(cfg, trial)
        log.info("trial %d: %d mistakes, decay %s", trial, summary.total_mistakes,
                 "ok" if summary.decay["passed"] else "VIOLATED")
        results.append((trace, summary))
    paths = write_run_outputs(out, results)
    for tr, sm in results:
        bounds = ", ".join(f"{b['bound_name']}={b['bound_value']:.1f}"
                           f"({'ok' if b['satisfied'] else 'exceeded'})" for b in sm.bounds)
        print(f"trial {sm.trial}: mistakes={sm.total_mistakes} decay={'pass' if sm.decay['passed'] else 'fail'}"
              + (f" bounds: {bounds}" if bounds else ""))
    print(f"wrote {len(paths)} files to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import sweep

    cfg, out = _load(args)
    res = sweep(cfg, n_jobs=args.jobs)
    os.makedirs(out, exist_ok=True)
    res.to_csv(os.path.join(out, "sweep.csv"))
    with open(os.path.join(out, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump({"config": cfg.to_dict(), **res.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for m in res.means:
        print(f"sigma={m['sigma']:.3g} T={m['horizon']}: mean mistakes {m['mean_mistakes']:.2f}")
    print(f"slope vs log T: {res.slope_vs_log_T:.3f}; slope vs log(1/sigma): {res.slope_vs_log_inv_sigma:.3f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import format_table, run_all

    results = run_all(seed=args.seed, quick=not args.full, gap=args.solver_gap)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def cmd_plot(args) -> int:
    from .harness import CSV_COLUMNS, Trace
    from .plots import (plot_cumulative_mistakes, plot_log_volume, plot_mistakes_vs_sigma,
                        read_sweep_csv)

    out = args.out or os.environ.get(OUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    written = []
    for path in args.inputs:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                header = fh.readline().strip()
        except OSError as err:
            raise ConfigError(f"cannot read {path}: {err}") from None
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            if header == ",".join(CSV_COLUMNS):
                trace = Trace.read_csv(path)
                for kind, fn in (("mistakes", plot_cumulative_mistakes), ("volume", plot_log_volume)):
                    target = os.path.join(out, f"{stem}_{kind}.svg")
                    fn(trace, target)
                    written.append(target)
            else:
                rows = read_sweep_csv(path)
                target = os.path.join(out, f"{stem}_sigma.svg")
                plot_mistakes_vs_sigma(rows, target)
                written.append(target)
        except ValueError as err:
            raise ConfigError(f"malformed CSV: {err}") from None
    for w in written:
        print(w)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "plot": cmd_plot}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidDistribution) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonRealizable, ErmInfeasible) as err:
        rnd = getattr(err, "round", None)
        where = f" at round {rnd}" if rnd is not None else ""
        print(f"{type(err).__name__}{where}: {getattr(err, 'detail', err)}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
