"""Command-line front end: run studies, query interpolants, render reports.

Exit codes: 0 success, 1 bad input (malformed config, support mismatch,
out-of-domain point), 2 completed with isolated cell failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import report as report_mod
from . import scenario as sc
from .distributions import ProductDistribution, RandomVariable
from .exceptions import OutOfDomainError
from .sparse_grid import interpolant_eval, load_interpolant
from .statistics import cop, kde, marginal_surface, mean, quantile_lower_bound, resample, std

#: environment variable naming the default output directory
OUT_ENV = "BOREFIELD_UQ_OUT"


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "out")


def _domain_distribution(itp, spec: str) -> ProductDistribution:
    """Distribution from a CLI spec, either a kind name applied over the
    interpolant's own domain or an explicit JSON list of
    [kind, lo, hi] triples (which may mismatch the domain and raise)."""
    if spec in ("uniform", "triangular"):
        return ProductDistribution(tuple(
            RandomVariable(spec, float(lo), float(hi)) for lo, hi in itp.domain))
    triples = json.loads(spec)
    return ProductDistribution(tuple(
        RandomVariable(str(k), float(lo), float(hi)) for k, lo, hi in triples))


def cmd_run(args) -> int:
    try:
        cfg = sc.load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)

    cells = None
    if args.cell:
        cells = []
        for spec in args.cell:
            try:
                name, deg = spec.rsplit(":", 1)
                cells.append((name, float(deg)))
            except ValueError:
                print(f"error: bad --cell {spec!r}, expected LAYOUT:SCENARIO",
                      file=sys.stderr)
                return 1

    map_fn = map
    pool = None
    threads = args.threads if args.threads is not None else os.cpu_count() or 1
    if threads > 1:
        import multiprocessing as mp
        pool = mp.get_context("spawn").Pool(threads)
        map_fn = pool.map
    try:
        result = sc.run_study(cfg, args.out, cells=cells, map_fn=map_fn)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    print(f"{len(result.rows)} result rows -> {os.path.join(args.out, 'results.csv')}")
    if result.failures:
        for name, deg, err in result.failures:
            print(f"cell {name}:{deg:g} failed: {err}", file=sys.stderr)
        return 2
    return 0


def cmd_stats(args) -> int:
    itp = load_interpolant(args.interpolant)
    try:
        dist = _domain_distribution(itp, args.dist)
        mean_c = mean(itp, dist)
        samples = resample(itp, dist, args.mc_samples, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    std_c = std(itp, dist, n_samples=args.mc_samples, seed=args.seed + 1)
    density = kde(samples)
    t_min = quantile_lower_bound(samples, confidence=args.confidence, density=density)
    out = {
        "mean_c": mean_c,
        "std_c": std_c,
        "t_min_c": t_min,
        "cop": cop(mean_c, args.cop_reference),
        "confidence": args.confidence,
        "n_samples": args.mc_samples,
        "distribution": args.dist,
    }
    print(json.dumps(out, indent=2, sort_keys=True))

    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.interpolant))[0]
    path = os.path.join(args.out, f"{stem}_density.csv")
    grid_x, grid_pdf = density.grid(301)
    sc._write_csv(path, ("t_avg_c", "density"),
                  np.column_stack([grid_x, grid_pdf]).tolist())
    print(f"density -> {path}")
    return 0


def cmd_marginal(args) -> int:
    itp = load_interpolant(args.interpolant)
    try:
        d0, d1 = (int(v) for v in args.dims.split(","))
        dist = _domain_distribution(itp, args.dist)
        x, y, table = marginal_surface(itp, dist, (d0, d1), grid=args.grid,
                                       reference=args.reference)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    labels = itp.labels or [f"dim_{i}" for i in range(itp.dimension)]
    rows = [(x[a], y[b], table[a, b])
            for a in range(args.grid) for b in range(args.grid)]
    header = (labels[d0], labels[d1],
              "deviation_pct" if args.reference is not None else "marginal_mean")
    if args.out:
        sc._write_csv(args.out, header, rows)
        print(f"marginal -> {args.out}")
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(sc._fmt(v) for v in row))
    return 0


def cmd_eval(args) -> int:
    itp = load_interpolant(args.interpolant)
    point = np.array([float(v) for v in args.point.split(",")])
    try:
        value = interpolant_eval(itp, point)
    except OutOfDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(sc._fmt(float(value)))
    return 0


def cmd_report(args) -> int:
    try:
        files = report_mod.render_study(args.study_dir, args.out or args.study_dir)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="borefield-uq",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a study from a config file")
    r.add_argument("config", help="study config (JSON)")
    r.add_argument("--out", default=_default_out(),
                   help=f"output directory (env {OUT_ENV}, default ./out)")
    r.add_argument("--seed", type=int, default=None, help="override config seed")
    r.add_argument("--threads", type=int, default=None,
                   help="worker pool size for model batches (default: all cores)")
    r.add_argument("--cell", action="append", metavar="LAYOUT:SCENARIO",
                   help="run only this cell, repeatable (e.g. 12m-d8:3)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("stats", help="statistics of a serialized interpolant")
    s.add_argument("interpolant", help="interpolant JSON file")
    s.add_argument("--dist", default="uniform",
                   help="uniform | triangular | JSON [[kind,lo,hi],...]")
    s.add_argument("--confidence", type=float, default=0.95)
    s.add_argument("--mc-samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cop-reference", type=float, default=35.0,
                   help="heat-pump supply temperature, degrees C")
    s.add_argument("--out", default=_default_out())
    s.set_defaults(func=cmd_stats)

    m = sub.add_parser("marginal", help="2D marginal surface of an interpolant")
    m.add_argument("interpolant")
    m.add_argument("--dims", required=True, metavar="I,J",
                   help="the two kept dimensions, 0-based")
    m.add_argument("--grid", type=int, default=41)
    m.add_argument("--dist", default="uniform")
    m.add_argument("--reference", type=float, default=None,
                   help="report percent deviation from this value")
    m.add_argument("--out", default=None, help="CSV path (default: stdout)")
    m.set_defaults(func=cmd_marginal)

    e = sub.add_parser("eval", help="evaluate an interpolant at one point")
    e.add_argument("interpolant")
    e.add_argument("--point", required=True,
                   help="comma-separated coordinates, physical units")
    e.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="render figures for a completed study")
    rp.add_argument("study_dir", help="directory written by `run`")
    rp.add_argument("--out", default=None,
                    help="figure directory (default: the study directory)")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
