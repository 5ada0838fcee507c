"""Command-line front end: ``gwperc <command> ...``.

Data goes to stdout (or ``--out``) as CSV or JSON; diagnostics go to stderr.
Exit status is 0 on success, 1 when a check fails and 2 on bad input.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import sys

import numpy as np

from . import _kernels
from .annealed import annealed_survival, critical_slope, expansion_coefficients
from .errors import GWPercError
from .offspring import OffspringDistribution, critical_parameter

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:step`` (stop included up to rounding) or a single value."""
    parts = spec.split(":")
    try:
        nums = [float(x) for x in parts]
    except ValueError:
        raise UsageError(f"bad grid {spec!r}") from None
    if len(nums) == 1:
        grid = np.array(nums)
    elif len(nums) == 3:
        start, stop, step = nums
        if step <= 0 or stop < start:
            raise UsageError(f"bad grid {spec!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        grid = np.round(start + step * np.arange(count), 12)
    else:
        raise UsageError(f"grid must be start:stop:step, got {spec!r}")
    if grid.size == 0 or np.any((grid <= 0) | (grid > 1)):
        raise UsageError("grid points must lie in (0, 1]")
    return grid


def _dist(args) -> OffspringDistribution:
    if not args.dist:
        raise UsageError("--dist is required")
    try:
        return OffspringDistribution.from_json(args.dist)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read distribution: {exc}") from None


def _nonneg(name):
    def conv(text):
        value = int(text)
        if value < 0:
            raise argparse.ArgumentTypeError(f"{name} must be nonnegative")
        return value

    return conv


def _plain(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _emit_json(obj, out):
    out.write(json.dumps(obj, sort_keys=True, default=_plain) + "\n")


def _emit_csv(header, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    out.write(buf.getvalue())


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, np.floating):
        return repr(float(x))
    return x


# ---------------------------------------------------------------------------
# commands


def cmd_coeffs(args, out):
    dist = _dist(args)
    coeffs = expansion_coefficients(dist, args.order)
    k = args.order
    powers = [[float(coeffs.powers[m, j]) for j in range(1, k + 1)] for m in range(1, k + 1)]
    _emit_json({"p_c": critical_parameter(dist), "K": critical_slope(dist), "r": list(coeffs.r),
                "powers": powers}, out)
    return EXIT_OK


def cmd_stats(args, out):
    from .gwtree import sample_tree
    from .subsetstats import doob_decomposition, subset_stats

    dist = _dist(args)
    tree = sample_tree(dist, args.depth, args.seed, lazy=dist.is_deterministic)
    stats = subset_stats(tree, args.depth, args.jmax, args.kmax)
    parts = doob_decomposition(stats, dist)
    rows = [(n, j, k, float(stats.X[n, j, k]), float(parts.Y[n, j, k]), float(parts.deltaA[n, j, k]))
            for n in range(args.depth + 1) for j in range(1, args.jmax + 1) for k in range(args.kmax + 1)]
    _emit_csv(["n", "j", "k", "X", "Y", "deltaA"], rows, out)
    return EXIT_OK


def cmd_martingale(args, out):
    from .expansion import expansion_martingale
    from .gwtree import sample_tree
    from .subsetstats import subset_stats

    dist = _dist(args)
    tree = sample_tree(dist, args.depth, args.seed, lazy=dist.is_deterministic)
    stats = subset_stats(tree, args.depth, args.order, args.order - 1)
    mart = expansion_martingale(stats, expansion_coefficients(dist, args.order), args.order)
    rows = [(n, i, float(mart.M[n, i])) for n in range(args.depth + 1) for i in range(1, args.order + 1)]
    _emit_csv(["n", "i", "M"], rows, out)
    return EXIT_OK


def cmd_survival(args, out):
    from .gwtree import sample_tree
    from .quenched import mc_survival, survival_to_depth_many

    dist = _dist(args)
    grid = parse_grid(args.p)
    tree = sample_tree(dist, args.depth, args.seed, lazy=True)
    exact = survival_to_depth_many(tree, grid, args.depth)
    rows = []
    for p, g in zip(grid, exact):
        if args.mc:
            est, se = mc_survival(tree, float(p), args.depth, args.mc, args.mc_seed)
            rows.append((float(p), float(g), est, se))
        else:
            rows.append((float(p), float(g), "", ""))
    _emit_csv(["p", "g_exact", "g_mc", "se"], rows, out)
    return EXIT_OK


def cmd_russo(args, out):
    from .gwtree import sample_tree
    from .quenched import russo_check

    dist = _dist(args)
    p = float(args.p)
    if not critical_parameter(dist) < p < 1:
        raise UsageError("p must lie strictly between p_c and 1")
    tree = sample_tree(dist, args.depth, args.seed, lazy=True)
    res = russo_check(tree, p, args.depth, args.reps, args.mc_seed, h=args.h)
    _emit_json(res.to_dict(), out)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_collapsed(args, out):
    from .collapsed import (
        CollapsedTree,
        Monomial,
        derivative_expansion,
        mc_monomial_expectation,
        verify_derivative_identity,
    )
    from .gwtree import sample_tree
    from .quenched import default_depth

    dist = _dist(args)
    try:
        V = CollapsedTree.parse(args.v)
        F = Monomial.parse(args.f) if args.f is not None else Monomial((0,) * V.n_edges)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(F.exponents) != V.n_edges:
        raise UsageError(f"--f needs {V.n_edges} exponents")
    p = float(args.p)
    if not critical_parameter(dist) < p < 1:
        raise UsageError("p must lie strictly between p_c and 1")
    n = args.depth if args.depth is not None else default_depth(dist, p - 2 * args.h)
    tree = sample_tree(dist, n, args.seed, lazy=True)
    est = mc_monomial_expectation(tree, V, F, p, n, args.reps, args.mc_seed)
    result = {
        "V": str(V), "F": list(F.exponents), "p": p, "n": n, "reps": args.reps,
        "estimate": est.estimate, "se": est.se, "indeterminate_fraction": est.indeterminate_fraction,
        "status": est.status,
        "derivative_terms": [{"coef": t.coef, "V": str(t.V), "F": list(t.F.exponents), "kind": t.kind}
                             for t in derivative_expansion(V, F)],
    }
    code = EXIT_OK
    if args.verify:
        rep = verify_derivative_identity(tree, V, F, p, h=args.h, reps=args.reps, seed=args.mc_seed, n=n)
        result["verify"] = rep.to_dict()
        code = EXIT_OK if rep.passed else EXIT_FAIL
    _emit_json(result, out)
    return code


# -- verification suites ------------------------------------------------------


def _suite_constants(dist, args, log):
    from .expansion import verify_constants_identity

    ok = True
    for i in range(1, args.order + 1):
        res = verify_constants_identity(dist, i)
        good = res < 1e-9
        ok &= good
        log.append({"check": "constants_identity", "i": i, "residual": res, "pass": good})
    return ok


def _suite_martingale(dist, args, log):
    from .expansion import expansion_martingale, mean_first_level_martingale, predictable_part
    from .gwtree import sample_tree
    from .subsetstats import subset_stats

    order = args.order
    coeffs = expansion_coefficients(dist, order)
    ok = True
    closed = mean_first_level_martingale(dist, order)
    for i in range(1, order + 1):
        good = abs(closed[i] - coeffs.r[i - 1]) <= 1e-9 * max(1.0, abs(coeffs.r[i - 1]))
        ok &= good
        log.append({"check": "first_level_mean", "i": i, "value": float(closed[i]), "r": coeffs.r[i - 1],
                    "pass": good})
    depth = args.depth
    samples = []
    worst = 0.0
    for seed in range(args.seeds):
        tree = sample_tree(dist, depth, seed, lazy=dist.is_deterministic)
        stats = subset_stats(tree, depth, order, order - 1)
        samples.append(expansion_martingale(stats, coeffs, order).M[depth])
        if seed < 5:
            worst = max(worst, float(np.abs(predictable_part(stats, coeffs, order, dist)).max()))
    good = worst < 1e-9 * max(1.0, max(abs(r) for r in coeffs.r)) * 1e3
    ok &= good
    log.append({"check": "predictable_part", "max_abs": worst, "pass": good})
    samples = np.array(samples)
    for i in range(1, order + 1):
        mean = float(samples[:, i].mean())
        se = float(samples[:, i].std(ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else 0.0
        good = abs(mean - coeffs.r[i - 1]) <= 3 * se + 1e-9 * max(1.0, abs(coeffs.r[i - 1]))
        ok &= good
        log.append({"check": "ensemble_mean", "i": i, "n": depth, "mean": mean, "se": se,
                    "r": coeffs.r[i - 1], "pass": good})
    return ok


def _suite_expansion(dist, args, log):
    from .expansion import expansion_martingale, predict_quenched_survival
    from .gwtree import sample_tree
    from .subsetstats import subset_stats

    order = args.order
    coeffs = expansion_coefficients(dist, order)
    pc = critical_parameter(dist)
    ok = True
    # annealed series: remainder / eps^order shrinks as eps -> 0
    eps = [2.0**-t for t in range(6, 13)]
    rem = [abs(annealed_survival(dist, pc + e) - coeffs.value(e)) / e**order for e in eps]
    good = rem[-1] < rem[0]
    ok &= good
    log.append({"check": "annealed_series", "order": order, "remainders": rem, "pass": good})
    if dist.is_deterministic:
        # every vertex alike: the tree's survival function is the annealed one
        tree = sample_tree(dist, args.depth, 0, lazy=True)
        stats = subset_stats(tree, args.depth, order, order - 1)
        mart = expansion_martingale(stats, coeffs, order)
        ratios = []
        for e in (0.02, 0.01, 0.005, 0.0025):
            pred = predict_quenched_survival(mart, e, order=min(order, 2))
            ratios.append(abs(annealed_survival(dist, pc + e) - pred) / e**2)
        good = all(r <= 2 * ratios[0] for r in ratios)
        ok &= good
        log.append({"check": "quenched_order2_ratio", "ratios": ratios, "pass": good})
    return ok


SUITES = {"constants": _suite_constants, "martingale": _suite_martingale, "expansion": _suite_expansion}


def cmd_verify(args, out):
    dist = _dist(args)
    log = []
    ok = SUITES[args.suite](dist, args, log)
    _emit_json({"suite": args.suite, "pass": bool(ok), "checks": log}, out)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwperc", description="Percolation on Galton-Watson trees")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (env GWPERC_THREADS)")
    parser.add_argument("--out", default=None, help="write output here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--dist", help="distribution JSON file or inline JSON")
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        p.add_argument("--out", default=argparse.SUPPRESS)
        return p

    p = add("coeffs", "annealed expansion coefficients")
    p.add_argument("--order", type=int, default=3)

    p = add("stats", "subset statistics and Doob parts of one tree")
    p.add_argument("--seed", type=_nonneg("seed"), default=0)
    p.add_argument("--depth", type=_nonneg("depth"), default=8)
    p.add_argument("--jmax", type=int, default=2)
    p.add_argument("--kmax", type=int, default=1)

    p = add("martingale", "expansion martingales of one tree")
    p.add_argument("--seed", type=_nonneg("seed"), default=0)
    p.add_argument("--depth", type=_nonneg("depth"), default=8)
    p.add_argument("--order", type=int, default=3)

    p = add("survival", "exact and simulated survival to a depth")
    p.add_argument("--seed", type=_nonneg("seed"), default=0)
    p.add_argument("--depth", type=_nonneg("depth"), default=20)
    p.add_argument("--p", required=True, help="start:stop:step")
    p.add_argument("--mc", type=_nonneg("reps"), default=0, help="replicates for the simulated column")
    p.add_argument("--mc-seed", type=_nonneg("mc seed"), default=1)

    p = add("russo", "derivative of survival against the branching depth")
    p.add_argument("--seed", type=_nonneg("seed"), default=0)
    p.add_argument("--depth", type=_nonneg("depth"), default=30)
    p.add_argument("--p", required=True, type=float)
    p.add_argument("--reps", type=_nonneg("reps"), default=100000)
    p.add_argument("--mc-seed", type=_nonneg("mc seed"), default=1)
    p.add_argument("--h", type=float, default=1e-3)

    p = add("collapsed", "monomial expectation and its derivative expansion")
    p.add_argument("--seed", type=_nonneg("seed"), default=0)
    p.add_argument("--v", required=True, help='collapsed tree, e.g. "(()())"')
    p.add_argument("--f", default=None, help='exponents in preorder edge order, e.g. "1,0"')
    p.add_argument("--p", required=True, type=float)
    p.add_argument("--depth", type=_nonneg("depth"), default=None, help="truncation depth (default from A_p)")
    p.add_argument("--reps", type=_nonneg("reps"), default=100000)
    p.add_argument("--mc-seed", type=_nonneg("mc seed"), default=1)
    p.add_argument("--h", type=float, default=5e-3)
    p.add_argument("--verify", action="store_true", help="also check the derivative identity")

    p = add("verify", "run a property suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--depth", type=_nonneg("depth"), default=8)
    p.add_argument("--seeds", type=_nonneg("seeds"), default=1000)
    return parser


COMMANDS = {
    "coeffs": cmd_coeffs, "stats": cmd_stats, "martingale": cmd_martingale, "survival": cmd_survival,
    "russo": cmd_russo, "collapsed": cmd_collapsed, "verify": cmd_verify,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _kernels.set_threads(args.threads)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                return COMMANDS[args.command](args, fh)
        return COMMANDS[args.command](args, sys.stdout)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gwperc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GWPercError, ValueError) as exc:
        print(f"gwperc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    with contextlib.suppress(BrokenPipeError):
        sys.exit(run())
