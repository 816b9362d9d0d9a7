"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 data or parse
error, 4 no-support error, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import load_csv
from .estimators import METHODS, bootstrap, make_estimator, with_interval
from .exceptions import (
    BootstrapError,
    ColumnTypeError,
    ConfigurationError,
    ConvergenceError,
    DegenerateFitError,
    ExperimentError,
    FitError,
    InvalidArgumentError,
    NoSupportError,
    ParseError,
    SingularityError,
    UnderflowError,
)
from .graph import read_graph, write_graph
from .graph_select import partial_corr_graph
from .imputer import fit_all, multiple_impute, write_run
from .simulation import SimConfig, run_experiment
from .submodels import FAMILIES

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SUPPORT, EXIT_NUMERIC = 0, 2, 3, 4, 5

_EXIT_FOR = (
    ((NoSupportError, BootstrapError), EXIT_SUPPORT),
    ((ParseError, ColumnTypeError, OSError, json.JSONDecodeError), EXIT_DATA),
    ((ConfigurationError, InvalidArgumentError), EXIT_USAGE),
    ((SingularityError, ConvergenceError, DegenerateFitError, FitError, UnderflowError, ExperimentError),
     EXIT_NUMERIC),
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmg", description="Graph-restricted multiple imputation and mean estimation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    gp = sub.add_parser("graph", help="working-graph utilities")
    gsub = gp.add_subparsers(dest="graph_command", required=True)
    ge = gsub.add_parser("estimate", help="threshold complete-case partial correlations")
    ge.add_argument("--input", required=True, help="CSV with header; NA or empty cells are missing")
    ge.add_argument("--threshold", required=True, type=float, help="keep edges with |partial corr| above this")
    ge.add_argument("--output", required=True, help="edge-list file to write")

    im = sub.add_parser("impute", help="fit submodels and write m completed datasets")
    im.add_argument("--input", required=True, help="CSV with header; NA or empty cells are missing")
    im.add_argument("--graph", required=True, help="edge-list file (1-based vertices)")
    im.add_argument("--family", required=True, choices=FAMILIES, help="submodel family")
    im.add_argument("--k", type=int, default=2, help="mixture components for --family mp (default 2)")
    im.add_argument("--m", required=True, type=int, help="number of completed datasets")
    im.add_argument("--seed", required=True, type=int, help="master seed")
    im.add_argument("--outdir", required=True, help="output directory")
    im.add_argument("--allow-fallback", action="store_true",
                    help="fit unsupported components on rows observing them alone instead of failing")

    es = sub.add_parser("estimate", help="estimate the mean of one column")
    es.add_argument("--input", required=True, help="CSV with header; NA or empty cells are missing")
    es.add_argument("--graph", required=True, help="edge-list file (1-based vertices)")
    es.add_argument("--target", required=True, help="target column name")
    es.add_argument("--method", required=True, choices=METHODS, help="estimator")
    es.add_argument("--bootstrap", type=int, default=0, metavar="B", help="bootstrap replicates (0 = none)")
    es.add_argument("--level", type=float, default=0.95, help="interval level (default 0.95)")
    es.add_argument("--seed", type=int, help="seed; required with --bootstrap")
    es.add_argument("--output", required=True, help="JSON report to write")

    si = sub.add_parser("simulate", help="run a simulation design from a JSON config")
    si.add_argument("--config", required=True, help="JSON file with SimConfig fields, including seed")
    si.add_argument("--outdir", required=True, help="directory for summary.csv and aggregate.csv")
    return p


def _graph_estimate(args) -> int:
    data = load_csv(args.input)
    g = partial_corr_graph(data, args.threshold)
    write_graph(g, args.output)
    print(f"{len(g.edges)} edges written to {args.output}")
    return EXIT_OK


def _load_graph_for(args, data):
    g = read_graph(args.graph)
    if g.d != data.d:
        raise InvalidArgumentError(f"graph has {g.d} vertices but {args.input} has {data.d} columns")
    return g


def _impute(args) -> int:
    if args.m < 1:
        raise InvalidArgumentError("--m must be at least 1")
    data = load_csv(args.input)
    g = _load_graph_for(args, data)
    store = fit_all(g, data, args.family, k=args.k, seed=args.seed, allow_fallback=args.allow_fallback)
    run = multiple_impute(store, data, args.m, args.seed)
    write_run(run, store, args.outdir)
    print(f"{len(store)} submodels fitted; {run.m} datasets written to {args.outdir}")
    return EXIT_OK


def _estimate(args) -> int:
    if args.bootstrap and args.seed is None:
        raise InvalidArgumentError("--seed is required with --bootstrap")
    data = load_csv(args.input)
    g = _load_graph_for(args, data)
    target = data.column_index(args.target)
    est = make_estimator(g, target, args.method)
    report = est(data)
    if args.bootstrap:
        lo, hi = bootstrap(est, data, args.bootstrap, args.level, args.seed)
        report = with_interval(report, lo, hi, args.level)
    report.diagnostics = {"target": args.target, **report.diagnostics}
    Path(args.output).write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"{args.method} estimate of mean({args.target}) = {report.point:.6g}")
    return EXIT_OK


def _simulate(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    if "seed" not in raw:
        raise ConfigurationError("simulation config must set 'seed'")
    cfg = SimConfig.from_dict(raw)
    res = run_experiment(cfg)
    res.write(args.outdir)
    for method, mean, sd, bias in res.aggregate:
        print(f"{method:5s} mean={mean:.4f} sd={sd:.4f} bias={bias:+.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    handler = {"graph": _graph_estimate, "impute": _impute, "estimate": _estimate, "simulate": _simulate}
    try:
        return handler[args.command](args)
    except Exception as exc:
        for types, code in _EXIT_FOR:
            if isinstance(exc, types):
                print(f"mmg: error: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
