"""Command line entry point.

::

    lipgo bench run --methods direct,direct-l,diag-new --class simple2.txt \\
        --delta 1e-4 --cap 1000000 --out results/ --jobs 4
    lipgo gkls dump --n 2 --m 10 --preset simple --seed 1 > simple2.txt
    lipgo solve --method diag-new --problem simple2.txt:17 --budget 5000
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import LipgoError
from .gkls import dump_manifest, generate_class, load_manifest, preset_spec
from .harness import (
    BUILTIN_PROBLEMS,
    DEFAULT_CAP,
    DELTA_PRESETS,
    METHODS,
    Problem,
    emit_report,
    format_delta,
    percentile_columns,
    run_benchmark,
    solve_problem,
)

log = logging.getLogger("lipgo")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lipgo", description="Lipschitz global optimization toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="benchmark methods on a GKLS class")
    bsub = bench.add_subparsers(dest="bench_command", required=True)
    run = bsub.add_parser("run", help="run a benchmark and write report files")
    run.add_argument("--methods", default="direct,direct-l,diag-new", help="comma separated method names")
    run.add_argument("--class", dest="manifest", required=True, help="class manifest file")
    run.add_argument("--delta", type=float, default=None, help="accuracy coefficient (default: preset for N)")
    run.add_argument("--cap", type=int, default=DEFAULT_CAP, help="trial cap per function")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--functions", default=None, help="subset of function indices, e.g. 1-20")
    run.add_argument("--timings", action="store_true", help="also write timings.csv")

    gk = sub.add_parser("gkls", help="GKLS class utilities")
    gsub = gk.add_subparsers(dest="gkls_command", required=True)
    dump = gsub.add_parser("dump", help="print a class manifest")
    dump.add_argument("--n", type=int, required=True)
    dump.add_argument("--m", type=int, default=10)
    dump.add_argument("--preset", choices=("simple", "hard"), default="simple")
    dump.add_argument("--seed", type=int, default=1)
    dump.add_argument("--output", "-o", default=None, help="write to a file instead of stdout")

    solve = sub.add_parser("solve", help="run one method on one problem")
    solve.add_argument("--method", required=True, choices=sorted(METHODS))
    solve.add_argument("--problem", required=True, help=f"one of {', '.join(BUILTIN_PROBLEMS)} or MANIFEST:IDX")
    solve.add_argument("--budget", type=int, default=1000)
    return p


def _indices(spec: Optional[str]):
    if spec is None:
        return None
    out: list[int] = []
    for part in spec.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _bench_run(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    cls = load_manifest(args.manifest)
    delta = args.delta if args.delta is not None else DELTA_PRESETS.get(cls.spec.dimension)
    if delta is None:
        raise LipgoError(f"no delta preset for N={cls.spec.dimension}; pass --delta")
    records = run_benchmark(methods, cls, delta, args.cap, args.jobs, _indices(args.functions))
    paths = emit_report(records, args.out, delta, args.cap, timings=args.timings)
    print(f"# N={cls.spec.dimension} class={cls.spec.label} delta={format_delta(delta)} cap={args.cap}")
    print(f"{'method':<10} {'p50':>10} {'p100':>18} {'solved':>7}")
    for m in methods:
        group = [r for r in records if r.method == m]
        cols = percentile_columns(group, args.cap, expected=None)
        print(f"{m:<10} {cols.render(cols.trials_p50):>10} {cols.render(cols.trials_p100):>18} {cols.solved:>7}")
    for p in paths:
        log.info("wrote %s", p)
    return 0


def _gkls_dump(args) -> int:
    cls = generate_class(preset_spec(args.n, args.preset, args.seed, args.m))
    text = dump_manifest(cls)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _problem(ref: str) -> Problem:
    if ref in BUILTIN_PROBLEMS:
        return BUILTIN_PROBLEMS[ref]
    path, sep, idx = ref.rpartition(":")
    if not sep or not idx.isdigit():
        raise LipgoError(f"unknown problem {ref!r}")
    cls = load_manifest(path)
    fn = cls[int(idx)]
    return Problem(f"{cls.spec.label}:{idx}", fn, cls.spec.domain, fn.global_minimizer)


def _solve(args) -> int:
    problem = _problem(args.problem)
    res = solve_problem(args.method, problem, args.budget)
    np.set_printoptions(precision=10)
    print(f"problem      {problem.name}")
    print(f"method       {args.method}")
    print(f"status       {res.status}")
    print(f"trials       {res.trials_used}")
    print(f"cells        {res.hyperintervals_generated}")
    print(f"best_value   {res.best_value!r}")
    print(f"best_point   {' '.join(repr(float(v)) for v in res.best_point)}")
    if res.lower_bound is not None:
        print(f"lower_bound  {res.lower_bound!r}")
    if problem.minimizer is not None:
        err = float(np.max(np.abs(res.best_point - problem.minimizer)))
        print(f"max_abs_err  {err:.3e}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "bench":
            return _bench_run(args)
        if args.command == "gkls":
            return _gkls_dump(args)
        return _solve(args)
    except (LipgoError, OSError) as exc:
        print(f"lipgo: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
