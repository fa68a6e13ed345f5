"""Command-line interface: ``wishart-euler {central,nc2,mc,canon,hgm}``.

Every subcommand writes a table (CSV or JSON) to ``--out`` or stdout.
Exit codes: 0 success, 2 usage or invalid input, 3 numerical
non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

import mpmath
import numpy as np

from . import central, montecarlo, noncentral2x2, odeseries
from .linalg import LinalgError, NonConvergenceError, WishartParams, canonicalize

EXIT_OK, EXIT_USAGE, EXIT_NONCONV, EXIT_IO = 0, 2, 3, 4


class UsageError(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def parse_grid(x: str | None, x_range: str | None) -> list[float]:
    if (x is None) == (x_range is None):
        raise UsageError("give exactly one of --x or --x-range")
    if x is not None:
        try:
            xs = [float(v) for v in x.split(",") if v.strip()]
        except ValueError as e:
            raise UsageError(f"bad --x list: {x!r}") from e
    else:
        try:
            start, stop, step = (Fraction(v) for v in x_range.split(":"))
        except ValueError as e:
            raise UsageError(f"--x-range needs start:stop:step, got {x_range!r}") from e
        if step <= 0 or stop < start:
            raise UsageError("--x-range needs step > 0 and stop >= start")
        n = int((stop - start) / step)
        xs = [float(start + k * step) for k in range(n + 1)]
    if not xs:
        raise UsageError("x grid is empty")
    return xs


def write_table(columns, rows, fmt_name: str, out) -> None:
    if fmt_name == "json":
        recs = [{c: _json_value(v) for c, v in zip(columns, r)} for r in rows]
        out.write(json.dumps(recs, indent=1) + "\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else str(v)


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def read_matrix(path: str) -> np.ndarray:
    """A matrix from a JSON nested list or a whitespace/comma separated text file."""
    text = _read_text(path).strip()
    if text.startswith("["):
        a = np.array(json.loads(text), dtype=float)
    else:
        a = np.loadtxt(io.StringIO(text.replace(",", " ")), ndmin=2)
    return np.atleast_2d(a)


def inline_matrix(values: str, rows: int | None, cols: int | None) -> np.ndarray:
    try:
        flat = np.array([float(v) for v in values.split(",")])
    except ValueError as e:
        raise UsageError(f"bad matrix values {values!r}") from e
    if rows is None or cols is None:
        raise UsageError("inline matrices need --rows and --cols")
    if flat.size != rows * cols:
        raise UsageError(f"expected {rows * cols} values, got {flat.size}")
    return flat.reshape(rows, cols)


def load_params(path: str) -> WishartParams:
    d = json.loads(_read_text(path))
    try:
        p = WishartParams.from_dict(d)
    except (KeyError, TypeError) as e:
        raise UsageError(f"parameter file needs m, n, scales, mean: {e}") from e
    if "m" in d and "n" in d and (p.m, p.n) != (d["m"], d["n"]):
        raise UsageError("m, n disagree with the shape of mean")
    return p


# subcommands ---------------------------------------------------------------

def run_central(args):
    spec = central.CentralSpec(args.m, args.n, args.s)
    rows = []
    for x in parse_grid(args.x, args.x_range):
        v = central.expected_euler_central(spec, x)
        if x > 0:
            a = central.tail_asymptotic_leading(spec, x)
            d = central.approximation_error_asymptotic(spec, x)
        else:
            a = d = math.nan
        rows.append((x, v, a, d))
    return ["x", "value", "asymptote", "delta_asymptote"], rows


def run_nc2(args):
    p = noncentral2x2.Params2x2(args.s1, args.s2, args.m11, args.m21, args.m22)
    q = noncentral2x2.QuadratureSpec(tol=args.tol, workers=args.workers)
    rows = []
    for x in parse_grid(args.x, args.x_range):
        r = noncentral2x2.expected_euler_2x2(p, x, q)
        if not r.converged:
            raise NonConvergence(f"quadrature at x={x} reached {r.error:.3g}, above tol {args.tol:.3g}")
        rows.append((x, r.value, r.error))
    return ["x", "value", "achieved_tol"], rows


def _mc_params(args) -> WishartParams:
    if args.params:
        return load_params(args.params)
    if args.m is None or args.n is None:
        raise UsageError("mc needs --params FILE or --m and --n")
    if args.scales:
        scales = [float(v) for v in args.scales.split(",")]
    else:
        scales = [args.s] * args.m
    if args.mean:
        mean = inline_matrix(args.mean, args.rows or args.m, args.cols or args.n)
    else:
        mean = np.zeros((args.m, args.n))
    return WishartParams(np.array(scales), mean)


def run_mc(args):
    p = _mc_params(args)
    cfg = montecarlo.McConfig(n_samples=args.samples, seed=args.seed, workers=args.workers)
    xs = parse_grid(args.x, args.x_range)
    if args.mode == "tails":
        t = montecarlo.estimate_eigen_tails(p, xs, cfg, args.scale)
        cols = ["x"] + [c for i in range(1, p.m + 1) for c in (f"p{i}", f"stderr{i}")]
        rows = [(x, *[v for i in range(p.m) for v in (t.value[j, i], t.stderr[j, i])])
                for j, x in enumerate(t.xs)]
        return cols, rows
    if args.mode == "euler":
        est = montecarlo.estimate_expected_euler(p, xs, cfg, args.scale)
        return ["x", "value", "stderr"], [(x, e.value, e.stderr) for x, e in zip(xs, est)]
    est = montecarlo.tail_ratio_curve(p, xs, cfg, args.scale)
    return (["x", "ratio", "stderr", "n_denominator", "flagged"],
            [(x, e.ratio, e.stderr, e.n_denominator, e.flagged) for x, e in zip(xs, est)])


def run_canon(args):
    if args.sigma_file:
        sigma = read_matrix(args.sigma_file)
    elif args.sigma:
        sigma = inline_matrix(args.sigma, args.rows, args.rows)
    else:
        raise UsageError("canon needs --sigma-file or --sigma")
    if args.mean_file:
        mean = read_matrix(args.mean_file)
    elif args.mean:
        mean = inline_matrix(args.mean, args.rows, args.cols)
    else:
        raise UsageError("canon needs --mean-file or --mean")
    p = canonicalize(sigma, mean)
    return p.to_dict()


def _grid_fractions(g) -> list[Fraction]:
    try:
        start, stop, step = (odeseries.to_fraction(str(g[k])) for k in ("start", "stop", "step"))
    except (KeyError, TypeError) as e:
        raise UsageError("eval_grid needs start, stop, step") from e
    if step <= 0 or stop < start:
        raise UsageError("eval_grid needs step > 0 and stop >= start")
    return [start + k * step for k in range(int((stop - start) / step) + 1)]


def _mc_reference(path: str, points) -> list[Fraction]:
    with open(path, encoding="utf-8", newline="") as fh:
        table = list(csv.reader(fh))
    lookup = {float(r[0]): r[1] for r in table[1:]}
    out = []
    for p in points:
        key = float(p)
        if key not in lookup:
            raise UsageError(f"reference point {p} not found in {path}")
        out.append(odeseries.to_fraction(lookup[key]))
    return out


def run_hgm(args):
    ode = odeseries.parse_ode(_read_text(args.ode))
    job = json.loads(_read_text(args.job), parse_float=str)
    try:
        centers = [str(c) for c in job["centers"]]
        ref_points = [str(c) for c in job["ref_points"]]
        n_terms = int(job.get("n_terms", odeseries.DEFAULT_TERMS))
        bits = int(job.get("precision_bits", 256))
        grid = _grid_fractions(job["eval_grid"])
    except KeyError as e:
        raise UsageError(f"job file is missing {e}") from e
    if args.mc_reference:
        ref_values = _mc_reference(args.mc_reference, [odeseries.to_fraction(p) for p in ref_points])
    elif "ref_values" in job:
        ref_values = [str(v) for v in job["ref_values"]]
    else:
        raise UsageError("job file needs ref_values (or pass --mc-reference)")
    model = odeseries.fit_extrapolation(ode, centers, ref_points, ref_values, inits=job.get("inits"),
                                        n_terms=n_terms, precision_bits=bits)
    tol = mpmath.mpf(2) ** (-(model.precision_bits // 2))
    rows = []
    for x in grid:
        v, last = model.evaluate(x)
        rows.append((float(x), float(v), float(last), bool(last > tol * max(1, abs(v)))))
    return ["x", "value", "last_term_indicator", "divergent"], rows


# parser ----------------------------------------------------------------------

def _common(sp, grid=True):
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--seed", type=int, default=0)
    if grid:
        sp.add_argument("--x", help="comma-separated x values")
        sp.add_argument("--x-range", help="start:stop:step, stop inclusive")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wishart-euler", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("central", help="closed form for M = 0, Sigma = I/s")
    _common(sp)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--s", type=float, default=1.0)
    sp.set_defaults(func=run_central)

    sp = sub.add_parser("nc2", help="2x2 non-central quadrature")
    _common(sp)
    for name, default in (("s1", None), ("s2", None), ("m11", 0.0), ("m21", 0.0), ("m22", 0.0)):
        sp.add_argument(f"--{name}", type=float, required=default is None, default=default)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=run_nc2)

    sp = sub.add_parser("mc", help="Monte Carlo tails, alternating sum, or tail ratio")
    _common(sp)
    sp.add_argument("--params", help="JSON file with m, n, scales, mean")
    sp.add_argument("--m", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--s", type=float, default=1.0, help="common scale when --scales is absent")
    sp.add_argument("--scales", help="comma-separated scales")
    sp.add_argument("--mean", help="row-major comma-separated mean (with --rows/--cols)")
    sp.add_argument("--rows", type=int)
    sp.add_argument("--cols", type=int)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--mode", choices=("tails", "euler", "ratio"), default="tails")
    sp.add_argument("--scale", choices=montecarlo.SCALES, default="sigma",
                    help="threshold singular values (sigma) or eigenvalues (eigen)")
    sp.set_defaults(func=run_mc)

    sp = sub.add_parser("canon", help="canonical (scales, mean) for a covariance and mean")
    _common(sp, grid=False)
    sp.add_argument("--sigma-file")
    sp.add_argument("--mean-file")
    sp.add_argument("--sigma", help="row-major covariance, rows x rows")
    sp.add_argument("--mean", help="row-major mean, rows x cols")
    sp.add_argument("--rows", type=int)
    sp.add_argument("--cols", type=int)
    sp.set_defaults(func=run_canon)

    sp = sub.add_parser("hgm", help="ODE series extrapolation")
    _common(sp, grid=False)
    sp.add_argument("--ode", required=True, help="ODE file")
    sp.add_argument("--job", required=True, help="extrapolation job file")
    sp.add_argument("--mc-reference", help="mc CSV whose value column supplies ref_values")
    sp.set_defaults(func=run_hgm)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        result = args.func(args)
        buf = io.StringIO()
        if isinstance(result, dict):
            buf.write(json.dumps(result, indent=1) + "\n")
        else:
            write_table(*result, args.format, buf)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NonConvergence, NonConvergenceError, noncentral2x2.QuadratureError,
            odeseries.ConvergenceRangeError, odeseries.SingularSystemError, MemoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONV
    except (UsageError, LinalgError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
