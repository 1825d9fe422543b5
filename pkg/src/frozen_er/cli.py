"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 acceptance or experiment failure,
3 numerical failure.
"""
import argparse
import hashlib
import inspect
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import DomainError, NumericalError

log = logging.getLogger("frozen_er")

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_NUMERIC = 0, 1, 2, 3
QUANTITIES = ("g", "d", "v", "e", "r", "t_k")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def config_hash(settings):
    blob = json.dumps(settings, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def header(settings, seed=None):
    return f"# frozen-er {__version__} config_hash={config_hash(settings)} seed={seed}"


def _settings(args):
    return {k: v for k, v in vars(args).items() if k not in ("func", "log_level")}


# --- subcommands --------------------------------------------------------------


def cmd_simulate(args, out):
    from .simulator import RunConfig, run

    cfg = RunConfig(n=args.n, p=args.p, mode=args.mode, seed=args.seed, grid=args.grid, k_max=args.k_max,
                    strict_ppp=args.strict_ppp, keep_edges=args.keep_edges, max_steps=args.max_steps)
    if args.keep_edges and args.n > 10**4:
        raise DomainError("--keep-edges is limited to n <= 10^4")
    rec = run(cfg)
    doc = rec.to_json()
    log.info("run finished: absorption=%s incomplete=%s wall=%.2fs", rec.absorption, rec.incomplete, rec.wall_seconds)
    if args.keep_edges:
        doc["forest_edges"] = [list(map(int, e)) for e in rec.state.forest_edges()]
    head = f"# frozen-er {__version__} config_hash={doc['config_hash']} seed={cfg.seed}\n"
    if args.out:
        stem = args.out[:-5] if args.out.endswith(".json") else args.out
        with open(stem + ".json", "w") as fh:
            json.dump(doc, fh, indent=2)
        with open(stem + ".csv", "w") as fh:
            fh.write(head + rec.trajectory_csv())
        out.write(f"{stem}.json\n{stem}.csv\n")
    else:
        out.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_fluid(args, out):
    from .fluid_limit import d_p, e_p, gel_curve, r_p, t_pk, v_p

    if args.t_step <= 0 or args.t_max < args.t_min or args.t_min < 0:
        raise DomainError("need 0 <= t-min <= t-max and t-step > 0")
    count = int(math.floor((args.t_max - args.t_min) / args.t_step + 1e-9)) + 1
    t = args.t_min + args.t_step * np.arange(count)
    curve = gel_curve(args.p)
    fns = {"g": curve.g, "d": lambda x: d_p(curve, x), "v": lambda x: v_p(curve, x),
           "e": lambda x: e_p(curve, x), "r": lambda x: r_p(curve, x), "t_k": lambda x: t_pk(curve, args.k, x)}
    vals = fns[args.quantity](t)
    out.write(header(_settings(args)) + "\n")
    out.write("t,value\n")
    for a, b in zip(t, vals):
        out.write(f"{a:.10g},{b:.12g}\n")
    return EXIT_OK


def cmd_count_forests(args, out):
    from .forest_counts import britikov_all, britikov_asymptotic, count_forests_exact, _omega

    out.write(header(_settings(args)) + "\n")
    if not args.asymptotic:
        out.write(f"{count_forests_exact(args.n, args.m)}\n")
        return EXIT_OK
    if not (1 <= args.m <= args.n - 1):
        raise DomainError("asymptotic estimates need 1 <= M <= N-1")
    regime, est = britikov_asymptotic(args.n, args.m, cutoff=args.cutoff)
    out.write(f"{regime},log,{est:.12g}\n")
    if 0.5 <= abs(_omega(args.n, args.m)) <= 2.0:
        for name, value in britikov_all(args.n, args.m).items():
            if name != regime:
                out.write(f"{name},log,{value:.12g}\n")
    return EXIT_OK


def cmd_sample_forest(args, out):
    from .forest_sampler import sample_forest

    rng = np.random.default_rng(args.seed)
    out.write(header(_settings(args), args.seed) + "\n")
    for i in range(args.count):
        if i:
            out.write("---\n")
        forest = sample_forest(args.n, args.m, rng)
        for j, comp in enumerate(forest.components):
            if j:
                out.write("\n")
            members = set(comp)
            edges = [e for e in forest.edges if e[0] in members]
            if not edges:
                out.write(f"{comp[0]}\n")
            for a, b in sorted((min(e), max(e)) for e in edges):
                out.write(f"{a} {b}\n")
    return EXIT_OK


def cmd_experiment(args, out):
    from .stats_harness import EXPERIMENTS, write_report

    if args.name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {args.name!r}; choose from {', '.join(EXPERIMENTS)}")
    fn = EXPERIMENTS[args.name]
    params = {}
    if args.config:
        with open(args.config) as fh:
            params = json.load(fh)
        if not isinstance(params, dict):
            raise UsageError("config file must hold a JSON object")
    accepted = inspect.signature(fn).parameters
    unknown = sorted(set(params) - set(accepted))
    if unknown:
        raise UsageError(f"unknown config keys for {args.name}: {', '.join(unknown)}")
    params["seed"] = args.seed
    try:
        report = fn(**params)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    base = write_report(report, args.out)
    out.write(header({"name": args.name, **params}, args.seed) + "\n")
    out.write(report.summary_line() + "\n")
    out.write(f"{base}.json\n{base}.csv\n")
    return EXIT_OK if report.verdict else EXIT_FAIL


def cmd_verify(args, out):
    from .acceptance import run_acceptance

    out.write(header(_settings(args), args.seed) + "\n")
    results = run_acceptance(full=args.full, seed=args.seed, echo=lambda s: (out.write(s + "\n"), out.flush()))
    failed = [r.number for r in results if not r.passed]
    out.write(f"{len(results) - len(failed)}/{len(results)} criteria passed\n")
    return EXIT_FAIL if failed else EXIT_OK


# --- parser ---------------------------------------------------------------------


def _probability(text):
    v = float(text)
    if not (0.0 < v <= 1.0):
        raise argparse.ArgumentTypeError("p must lie in (0, 1]")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    ap = _Parser(prog="frozen-er", description="Frozen Erdos-Renyi simulation and numerics")
    ap.add_argument("--version", action="version", version=f"frozen-er {__version__}")
    ap.add_argument("--log-level", default=os.environ.get("FROZEN_ER_LOG", "WARNING"))
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="run one replica of the process")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=_probability, required=True)
    s.add_argument("--mode", choices=("discrete", "poissonized"), default="discrete")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid", type=int, default=512)
    s.add_argument("--k-max", type=_positive, default=10)
    s.add_argument("--max-steps", type=_positive, default=None)
    s.add_argument("--strict-ppp", action="store_true", help="ignore rings on edges already present")
    s.add_argument("--keep-edges", action="store_true", help="keep forest edges (n <= 10^4)")
    s.add_argument("--out", help="output stem; writes STEM.json and STEM.csv")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fluid", help="tabulate a limit function")
    f.add_argument("--p", type=_probability, required=True)
    f.add_argument("--quantity", choices=QUANTITIES, default="g")
    f.add_argument("--k", type=_positive, default=1)
    f.add_argument("--t-min", type=float, default=0.0)
    f.add_argument("--t-max", type=float, default=3.0)
    f.add_argument("--t-step", type=float, default=0.01)
    f.set_defaults(func=cmd_fluid)

    c = sub.add_parser("count-forests", help="number of forests with N vertices and M edges")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--m", type=int, required=True)
    mode = c.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--asymptotic", action="store_true")
    c.add_argument("--cutoff", type=float, default=1.0)
    c.set_defaults(func=cmd_count_forests)

    w = sub.add_parser("sample-forest", help="uniform forests with N vertices and M edges")
    w.add_argument("--n", type=_positive, required=True)
    w.add_argument("--m", type=int, required=True)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--count", type=_positive, default=1)
    w.set_defaults(func=cmd_sample_forest)

    e = sub.add_parser("experiment", help="run one verification experiment")
    e.add_argument("--name", required=True)
    e.add_argument("--config", help="JSON object of keyword arguments")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="reports")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="run the acceptance criteria")
    level = v.add_mutually_exclusive_group()
    level.add_argument("--quick", action="store_true", help="exact small-n checks (default)")
    level.add_argument("--full", action="store_true", help="add the Monte-Carlo limit-law checks")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    logging.basicConfig(level=str(args.log_level).upper(), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s %(message)s")
    log.info("command=%s settings=%s", args.command, json.dumps(_settings(args), default=str))
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
