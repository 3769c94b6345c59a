"""Benchmark runner: hit detection, per-class statistics and report files.

A run pairs every method with every function of a GKLS class. Each solve is
wrapped in an evaluation hook that compares every trial with the known
global minimizer and stops the solver on the first hit, so the solver
itself never sees the answer.

Output files (all plain text, stable ordering)::

    table.csv            N,delta,class,method,trials_p50,trials_p100,
                         hyperintervals_p50,hyperintervals_p100,solved
    records.csv          one row per (method, function)
    records.json         the same records plus run metadata
    oc_<class>_<method>.dat
                         operating characteristic, two columns ``k P(k)``
    timings.csv          wall times, only when asked for (never compared)
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    BoxDomain,
    InputError,
    LipgoError,
    LipschitzSpec,
    Objective,
    SolverResult,
    TargetReached,
    Trial,
)
from .diagonal import solve_multidim_diagonal
from .direct import solve_direct
from .framework import StoppingCriteria
from .geometric1d import solve_piyavskij
from .gkls import FUNCTION_COUNT, GklsClass, load_manifest

__all__ = [
    "DELTA_PRESETS",
    "DEFAULT_CAP",
    "METHODS",
    "Problem",
    "BUILTIN_PROBLEMS",
    "BenchmarkRecord",
    "PercentileColumns",
    "OperatingCharacteristic",
    "hit_check",
    "solve_problem",
    "run_single",
    "run_benchmark",
    "percentile_columns",
    "operating_characteristics",
    "emit_report",
    "records_to_json",
    "records_from_json",
    "format_delta",
]

DELTA_PRESETS = {2: 1e-4, 3: 1e-6, 4: 1e-6, 5: 1e-7}
DEFAULT_CAP = 1_000_000
DEFAULT_EPS = 1e-4

TABLE_HEADER = [
    "N",
    "delta",
    "class",
    "method",
    "trials_p50",
    "trials_p100",
    "hyperintervals_p50",
    "hyperintervals_p100",
    "solved",
]
RECORD_HEADER = ["method", "class", "N", "index", "trials_to_hit", "hyperintervals", "hit", "status"]


def hit_check(x, x_star, delta: float, domain: BoxDomain) -> bool:
    """True iff every coordinate of ``x`` is within ``delta**(1/N)`` of the
    box width from ``x_star``."""
    if not 0.0 < delta <= 1.0:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    x = np.asarray(x, dtype=float).reshape(-1)
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    n = domain.dimension
    if x.size != n or x_star.size != n:
        raise InputError("point dimension does not match the domain")
    tol = delta ** (1.0 / n) * domain.widths
    return bool(np.all(np.abs(x - x_star) <= tol))


def format_delta(delta: float) -> str:
    """``1e-4`` style for powers of ten, ``%g`` otherwise."""
    e = math.log10(delta)
    if abs(e - round(e)) < 1e-12:
        return f"1e{int(round(e))}"
    return f"{delta:g}"


# ---------------------------------------------------------------------------
# problems and methods


@dataclass(frozen=True)
class Problem:
    name: str
    fn: Callable[[np.ndarray], float]
    domain: BoxDomain
    minimizer: Optional[np.ndarray] = None
    lipschitz: Optional[float] = None


def _sphere(x):
    return float(np.sum((np.asarray(x) - 0.3) ** 2))


def _sine(x):
    t = float(np.asarray(x).reshape(-1)[0])
    return math.sin(t) + math.sin(10.0 * t / 3.0)


def _branin(x):
    x1, x2 = float(x[0]), float(x[1])
    a, b, c = 1.0, 5.1 / (4 * math.pi**2), 5.0 / math.pi
    return a * (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - 1 / (8 * math.pi)) * math.cos(x1) + 10


BUILTIN_PROBLEMS = {
    # Shubert-style test: global minimum near 5.1457 on [2.7, 7.5]
    "sine1d": Problem("sine1d", _sine, BoxDomain([2.7], [7.5]), np.array([5.145735]), 1.0 + 10.0 / 3.0),
    "sphere2d": Problem("sphere2d", _sphere, BoxDomain.cube(2, -1.0, 1.0), np.array([0.3, 0.3])),
    # three global minimizers, so no single hit target
    "branin": Problem("branin", _branin, BoxDomain([-5.0, 0.0], [10.0, 15.0])),
}


def _univariate(problem: Problem):
    if problem.domain.dimension != 1:
        raise InputError(f"method needs a univariate problem, {problem.name} has N={problem.domain.dimension}")
    return float(problem.domain.lower[0]), float(problem.domain.upper[0])


def _run_piyavskij(problem, objective, stop):
    if problem.lipschitz is None:
        raise InputError(f"piyavskij needs an a priori Lipschitz constant; {problem.name} has none")
    return solve_piyavskij(objective, _univariate(problem), LipschitzSpec.a_priori(problem.lipschitz), stop)


def _run_geom(spec_factory):
    def run(problem, objective, stop):
        return solve_piyavskij(objective, _univariate(problem), spec_factory(), stop)

    return run


def _run_direct(variant):
    def run(problem, objective, stop):
        return solve_direct(objective, problem.domain, variant, DEFAULT_EPS, stop)

    return run


def _run_diag(problem, objective, stop):
    return solve_multidim_diagonal(objective, problem.domain, DEFAULT_EPS, "all", stop)


METHODS: dict[str, Callable[[Problem, Objective, StoppingCriteria], SolverResult]] = {
    "piyavskij": _run_piyavskij,
    "geom-adaptive": _run_geom(LipschitzSpec.adaptive_global),
    "geom-localtune": _run_geom(LipschitzSpec.local_tuning),
    "direct": _run_direct("direct"),
    "direct-l": _run_direct("direct-l"),
    "diag-new": _run_diag,
}


def _method(name: str):
    try:
        return METHODS[name]
    except KeyError:
        raise InputError(f"unknown method {name!r}; choose from {', '.join(METHODS)}") from None


def solve_problem(
    method: str,
    problem: Problem,
    budget: int,
    on_trial: Optional[Callable[[int, Trial], None]] = None,
) -> SolverResult:
    """Run one method on one problem with a trial budget."""
    run = _method(method)
    objective = Objective(problem.fn, problem.domain, on_trial=on_trial)
    return run(problem, objective, StoppingCriteria(max_trials=budget))


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class BenchmarkRecord:
    """Outcome of one (method, function) solve.

    ``trials_to_hit`` is the 1-based index of the first trial meeting the
    hit condition, or ``None`` when the cap was reached (or the solver
    stopped) without a hit.
    """

    method: str
    class_id: str
    dimension: int
    index: int
    trials_to_hit: Optional[int]
    hyperintervals: int
    hit: bool
    status: str
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.hit != (self.trials_to_hit is not None):
            raise InputError("hit must be true exactly when trials_to_hit is set")

    def row(self) -> list[str]:
        return [
            self.method,
            self.class_id,
            str(self.dimension),
            str(self.index),
            "CAP" if self.trials_to_hit is None else str(self.trials_to_hit),
            str(self.hyperintervals),
            "1" if self.hit else "0",
            self.status,
        ]


def run_single(method: str, problem: Problem, delta: float, cap: int, class_id: str = "", index: int = 0) -> BenchmarkRecord:
    """Solve until the first hit or ``cap`` trials."""
    _method(method)
    if cap < 1:
        raise InputError("cap must be positive")
    if problem.minimizer is None:
        raise InputError(f"problem {problem.name} has no known minimizer")
    if not 0.0 < delta <= 1.0:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    x_star = np.asarray(problem.minimizer, dtype=float)
    tol = delta ** (1.0 / problem.domain.dimension) * problem.domain.widths
    hit_at: list[int] = []

    def on_trial(k: int, trial: Trial) -> None:
        # inline form of hit_check; this runs on every evaluation
        if np.all(np.abs(trial.point - x_star) <= tol):
            hit_at.append(k)
            raise TargetReached(f"hit at trial {k}")

    t0 = time.perf_counter()
    try:
        result = solve_problem(method, problem, cap, on_trial)
        hyper, status = result.hyperintervals_generated, result.status
    except LipgoError as exc:
        hyper, status = 0, f"error: {exc}"
    elapsed = time.perf_counter() - t0
    if hit_at:
        status = "hit"
    elif status in ("max_trials", "budget"):
        status = "cap"
    k = hit_at[0] if hit_at else None
    return BenchmarkRecord(method, class_id, problem.domain.dimension, index, k, hyper, bool(hit_at), status, elapsed)


def _gkls_problem(cls: GklsClass, index: int) -> Problem:
    fn = cls[index]
    return Problem(f"{cls.spec.label}:{index}", fn, cls.spec.domain, fn.global_minimizer)


def _task(args) -> BenchmarkRecord:
    method, cls, index, delta, cap = args
    return run_single(method, _gkls_problem(cls, index), delta, cap, cls.spec.label, index)


def run_benchmark(
    methods: Sequence[str],
    cls: Union[GklsClass, str, Path],
    delta: Optional[float] = None,
    cap: int = DEFAULT_CAP,
    jobs: int = 1,
    indices: Optional[Iterable[int]] = None,
) -> list[BenchmarkRecord]:
    """Run every method on every function of ``cls``.

    Records come back ordered by method (as given) and function index,
    whatever ``jobs`` is.
    """
    if not isinstance(cls, GklsClass):
        cls = load_manifest(cls)
    for m in methods:
        _method(m)
    if cap < 1:
        raise InputError("cap must be positive")
    if delta is None:
        delta = DELTA_PRESETS.get(cls.spec.dimension)
        if delta is None:
            raise InputError(f"no delta preset for N={cls.spec.dimension}")
    idx = list(indices) if indices is not None else list(range(1, len(cls) + 1))
    tasks = [(m, cls, i, delta, cap) for m in methods for i in idx]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_task(t) for t in tasks]
    order = {m: k for k, m in enumerate(methods)}
    records.sort(key=lambda r: (order[r.method], r.index))
    return records


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class PercentileColumns:
    """Table cells for one method on one class.

    ``None`` in a value slot means the order statistic fell on an unsolved
    function; :meth:`render` prints it as ``> cap (u)``.
    """

    trials_p50: Optional[int]
    trials_p100: Optional[int]
    hyper_p50: Optional[int]
    hyper_p100: Optional[int]
    solved: int
    unsolved: int
    cap: int

    def render(self, value: Optional[int]) -> str:
        return str(value) if value is not None else f"> {self.cap} ({self.unsolved})"


def _order_stat(values: list[Optional[int]], rank: int) -> Optional[int]:
    """``rank``-th smallest (1-based), unsolved entries sorting last."""
    solved = sorted(v for v in values if v is not None)
    return solved[rank - 1] if rank <= len(solved) else None


def percentile_columns(records: Sequence[BenchmarkRecord], cap: int = DEFAULT_CAP, expected: int = FUNCTION_COUNT) -> PercentileColumns:
    """Order statistics of one method on one class.

    ``p50`` is the trial count that suffices for the easiest half, i.e. the
    ``ceil(n/2)``-th smallest; ``p100`` is the largest. Hyperinterval
    columns take the same order statistics of the hyperinterval counts of
    the solved functions.
    """
    if expected is not None and len(records) != expected:
        raise InputError(f"expected {expected} records, got {len(records)}")
    if not records:
        raise InputError("no records")
    keys = {(r.method, r.class_id) for r in records}
    if len(keys) != 1:
        raise InputError("records mix several methods or classes")
    n = len(records)
    half = (n + 1) // 2
    trials = [r.trials_to_hit for r in records]
    hyper = [r.hyperintervals if r.hit else None for r in records]
    solved = sum(r.hit for r in records)
    return PercentileColumns(
        _order_stat(trials, half),
        _order_stat(trials, n),
        _order_stat(hyper, half),
        _order_stat(hyper, n),
        solved,
        n - solved,
        cap,
    )


@dataclass(frozen=True)
class OperatingCharacteristic:
    method: str
    class_id: str
    ks: tuple
    counts: tuple
    total: int

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.ks, self.counts))


def operating_characteristics(records: Sequence[BenchmarkRecord], k_grid: Optional[Iterable[int]] = None) -> OperatingCharacteristic:
    """Number of problems solved within ``k`` trials, for each ``k``.

    The default grid is ``0`` plus every distinct first-hit count, which is
    exactly where the step curve jumps.
    """
    records = list(records)
    if not records:
        raise InputError("no records")
    hits = np.sort(np.array([r.trials_to_hit for r in records if r.hit], dtype=np.int64))
    if k_grid is None:
        ks = np.concatenate([[0], np.unique(hits)]).astype(np.int64)
    else:
        ks = np.asarray(sorted(set(int(k) for k in k_grid)), dtype=np.int64)
    counts = np.searchsorted(hits, ks, side="right")
    return OperatingCharacteristic(
        records[0].method,
        records[0].class_id,
        tuple(int(k) for k in ks),
        tuple(int(c) for c in counts),
        len(records),
    )


# ---------------------------------------------------------------------------
# serialization


def _group(records: Sequence[BenchmarkRecord]) -> dict[tuple, list[BenchmarkRecord]]:
    groups: dict[tuple, list[BenchmarkRecord]] = {}
    for r in records:
        groups.setdefault((r.dimension, r.class_id, r.method), []).append(r)
    return groups


def records_to_json(records: Sequence[BenchmarkRecord], delta: Optional[float] = None, cap: Optional[int] = None) -> str:
    payload = {
        "delta": None if delta is None else format_delta(delta),
        "cap": cap,
        "records": [{k: v for k, v in asdict(r).items() if k != "wall_time"} for r in records],
    }
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def records_from_json(text: str) -> list[BenchmarkRecord]:
    payload = json.loads(text)
    names = {f.name for f in fields(BenchmarkRecord)}
    return [BenchmarkRecord(**{k: v for k, v in d.items() if k in names}) for d in payload["records"]]


def _table_rows(records, delta, cap):
    rows = []
    for (n, cid, method), group in _group(records).items():
        cols = percentile_columns(group, cap, expected=None)
        rows.append(
            [
                str(n),
                format_delta(delta),
                cid,
                method,
                cols.render(cols.trials_p50),
                cols.render(cols.trials_p100),
                cols.render(cols.hyper_p50),
                cols.render(cols.hyper_p100),
                str(cols.solved),
            ]
        )
    return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _plotdata_text(oc: OperatingCharacteristic) -> str:
    lines = [f"# operating characteristic: method={oc.method} class={oc.class_id} M={oc.total}", "# k P(k)"]
    lines += [f"{k} {p}" for k, p in oc.pairs()]
    return "\n".join(lines) + "\n"


def emit_report(
    records: Sequence[BenchmarkRecord],
    out_dir: Union[str, Path],
    delta: float,
    cap: int = DEFAULT_CAP,
    formats: Sequence[str] = ("csv", "json", "plotdata"),
    timings: bool = False,
) -> list[Path]:
    """Write the report files into ``out_dir``; returns their paths."""
    if not records:
        raise InputError("no records to report")
    unknown = set(formats) - {"csv", "json", "plotdata"}
    if unknown:
        raise InputError(f"unknown report format(s): {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[Path, str] = {}
    if "csv" in formats:
        written[out / "table.csv"] = _csv_text(TABLE_HEADER, _table_rows(records, delta, cap))
        written[out / "records.csv"] = _csv_text(RECORD_HEADER, [r.row() for r in records])
    if "json" in formats:
        written[out / "records.json"] = records_to_json(records, delta, cap)
    if "plotdata" in formats:
        for (_, cid, method), group in _group(records).items():
            written[out / f"oc_{cid}_{method}.dat"] = _plotdata_text(operating_characteristics(group))
    if timings:
        rows = [[r.method, r.class_id, str(r.index), f"{r.wall_time:.6f}"] for r in records]
        written[out / "timings.csv"] = _csv_text(["method", "class", "index", "seconds"], rows)
    for path, text in written.items():
        path.write_text(text)
    return list(written)


def default_jobs() -> int:
    return max(1, min(8, os.cpu_count() or 1))
