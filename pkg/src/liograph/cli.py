"""Command-line interface: ``liograph <command> ...``.

Exit codes: 0 success, 2 input error, 3 non-convergence, 4 numerical failure.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from . import incremental
from .eliminate import PARALLEL, SERIAL, back_substitute, eliminate
from .errors import DivergenceError, LioGraphError, SingularSystemError
from .factors import LAYOUTS, cost
from .fileio import (atomic_write, format_measurements, format_trajectory, read_measurements,
                     read_trajectory)
from .metrics import rpe
from .perfmodel import PipelineConfig, sweep, table_csv
from .solver import ORACLE, SolveConfig, gauss_newton
from .storage import REPORTED_RATIOS, StorageTier, footprint_table
from .synth import DEFAULT_NOISE, dead_reckoning, first_guess, generate, propagate

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(LioGraphError):
    pass


def _noise(text):
    out = dict(DEFAULT_NOISE)
    for item in filter(None, text.split(",")):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in ("gps", "lidar", "motion", "prior"):
            raise argparse.ArgumentTypeError(f"bad noise entry {item!r} (use gps=,lidar=,motion=,prior=)")
        try:
            out[key] = float(val)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad number in {item!r}") from None
        if not out[key] >= 0:
            raise argparse.ArgumentTypeError(f"noise stddev must be >= 0 in {item!r}")
    return out


def _grid(text):
    lo, sep, hi = text.partition("..")
    try:
        lo, hi = int(lo), int(hi) if sep else int(lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"need 1 <= A <= B, got {text!r}")
    return list(range(lo, hi + 1))


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _emit(text, path, out):
    if path:
        atomic_write(path, text)
    else:
        out.write(text)


def _load(path, require_order=False):
    graph, _ = read_measurements(path, require_order=require_order)
    return graph


def cmd_gen(args, out):
    layout = LAYOUTS[args.layout]
    graph, truth = generate(args.n, layout, noise=args.noise, seed=args.seed, dt=args.dt,
                            gps_every=args.gps_every)
    _emit(format_measurements(graph), args.out, out)
    if args.truth:
        atomic_write(args.truth, format_trajectory(truth, layout))
    return EXIT_OK


def cmd_solve(args, out):
    graph = _load(args.measurements)
    if graph.n == 0:
        raise InputError("no measurements")
    x0 = dead_reckoning(graph)
    config = SolveConfig(mode=args.mode, max_iterations=args.max_iterations, workers=args.workers)
    x, report = gauss_newton(graph, x0, config)
    _emit(format_trajectory(x, graph.layout), args.out, out)
    if args.report:
        atomic_write(args.report, report.to_text())
    if args.oracle:
        xo, _ = gauss_newton(graph, x0, SolveConfig(mode=ORACLE, max_iterations=args.max_iterations))
        print(f"oracle max deviation: {np.abs(x - xo).max():.3e}", file=sys.stderr)
    print(f"iterations={report.iterations} cost={report.final_cost:.6g} "
          f"converged={int(report.converged)}", file=sys.stderr)
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def smooth_stream(graph, mode=SERIAL):
    """Feed ``graph`` one keyframe at a time; returns ``(estimate, log lines)``."""
    layout = graph.layout
    tree = incremental.init(graph.truncated(1), first_guess(graph)[None, :])
    x = incremental.estimate(tree)
    log = ["# keyframes cost trace_len"]
    log.append(f"1 {cost(tree.graph.factors(), x, layout):.17g} {len(tree.last_steps)}")
    for j in range(1, graph.n):
        prior = graph.prior.get(j + 1)
        between = graph.between.get(j)
        guess = propagate(x[-1], between, layout)
        tree = incremental.update(tree, between=between, motion=graph.motion.get(j),
                                  gps=graph.gps.get(j + 1), prior=prior, x_init=guess, mode=mode)
        x = incremental.estimate(tree)
        log.append(f"{j + 1} {cost(tree.graph.factors(), x, layout):.17g} {len(tree.last_steps)}")
    return x, log


def cmd_smooth(args, out):
    graph = _load(args.measurements, require_order=True)
    if graph.n == 0:
        raise InputError("no measurements")
    x, log = smooth_stream(graph, mode=args.mode)
    _emit(format_trajectory(x, graph.layout), args.out, out)
    if args.report:
        atomic_write(args.report, "\n".join(log) + "\n")
    return EXIT_OK


def _wallclock(graph, states, mode, workers, runs):
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        back_substitute(eliminate(graph, states, mode=mode, workers=workers), workers=workers)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cmd_bench(args, out):
    graph = _load(args.measurements)
    if graph.n == 0:
        raise InputError("no measurements")
    base = PipelineConfig(1, args.eval_cost, args.update_cost, not args.single_lane)
    rows = sweep(graph, args.nu_grid, base=base)
    _emit(table_csv(rows), args.out, out)
    x0 = dead_reckoning(graph)
    for mode, workers in ((SERIAL, 1), (PARALLEL, args.workers)):
        t = _wallclock(graph, x0, mode, workers, args.runs)
        print(f"# wallclock {mode} median_s={t:.6g} runs={args.runs}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args, out):
    ie, est = read_trajectory(args.estimate)
    it, tru = read_trajectory(args.truth)
    if len(ie) != len(it) or not np.array_equal(ie, it):
        raise InputError("estimate and truth keyframe indices do not match")
    rmse, mx = rpe(est, tru)
    out.write(f"rmse {rmse:.6g}\nmax_error {mx:.6g}\n")
    return EXIT_OK


def cmd_storage(args, out):
    graph = _load(args.measurements)
    tiers = tuple(StorageTier) if args.tier == "all" else (StorageTier.from_label(args.tier),)
    lines = ["tier\tbytes\tratio\treported_ratio"]
    for label, nbytes, ratio in footprint_table(graph, tiers, args.scalar_bytes):
        ref = REPORTED_RATIOS.get(label)
        lines.append(f"{label}\t{nbytes}\t{ratio:.4g}\t{'' if ref is None else ref}")
    _emit("\n".join(lines) + "\n", args.out, out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="liograph", description="Chain factor-graph smoothing tools.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic measurement file and ground truth")
    g.add_argument("-n", type=_positive_int, required=True, help="number of keyframes")
    g.add_argument("--layout", choices=sorted(LAYOUTS), default="linear")
    g.add_argument("--noise", type=_noise, default=dict(DEFAULT_NOISE),
                   help="stddevs, e.g. gps=0.1,lidar=0.05,motion=0.05")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dt", type=float, default=1.0)
    g.add_argument("--gps-every", type=_positive_int, default=1)
    g.add_argument("--out", help="measurement file (default stdout)")
    g.add_argument("--truth", help="ground-truth trajectory CSV")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="batch Gauss-Newton solve")
    s.add_argument("measurements")
    s.add_argument("--mode", choices=(SERIAL, PARALLEL), default=SERIAL)
    s.add_argument("--oracle", action="store_true", help="also solve by normal equations and compare")
    s.add_argument("--report", help="write the per-iteration report here")
    s.add_argument("--max-iterations", type=_positive_int, default=50)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--out", help="trajectory CSV (default stdout)")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("smooth", help="incremental smoothing, one keyframe at a time")
    m.add_argument("measurements")
    m.add_argument("--mode", choices=(SERIAL, PARALLEL), default=SERIAL)
    m.add_argument("--report", help="write the per-step cost log here")
    m.add_argument("--out", help="final trajectory CSV (default stdout)")
    m.set_defaults(func=cmd_smooth)

    b = sub.add_parser("bench", help="cycle-model sweep and wall-clock timing")
    b.add_argument("measurements")
    b.add_argument("--nu-grid", type=_grid, default=_grid("1..8"))
    b.add_argument("--eval-cost", type=float, default=1.0, help="cycles per Evaluate row")
    b.add_argument("--update-cost", type=float, default=1.0, help="cycles per Update entry")
    b.add_argument("--single-lane", action="store_true", help="run parallel stages on one lane")
    b.add_argument("--runs", type=_positive_int, default=5)
    b.add_argument("--workers", type=_positive_int, default=2)
    b.add_argument("--out", help="CSV output (default stdout)")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("eval", help="relative pose error of an estimate against truth")
    e.add_argument("estimate")
    e.add_argument("truth")
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("storage", help="storage footprint per tier")
    t.add_argument("measurements")
    t.add_argument("--tier", choices=("all", "dense", "step1", "step2", "step3"), default="all")
    t.add_argument("--scalar-bytes", type=int, choices=(4, 8), default=8)
    t.add_argument("--out", help="TSV output (default stdout)")
    t.set_defaults(func=cmd_storage)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (SingularSystemError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LioGraphError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
