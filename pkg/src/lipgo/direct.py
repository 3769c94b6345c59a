"""Centre-sampling baselines: DIRECT and its locally-biased form DIRECT-l.

Both work on the unit hypercube. A rectangle is stored by its centre and the
trisection depth ``k_j`` of each side (side length ``3**-k_j``), so sizes are
exact and rectangles of equal shape share a bit-identical measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .core import BoxDomain, InputError, Objective, SolverResult, improvement_threshold
from .framework import Cell, DivideTheBestHooks, PartitionState, StoppingCriteria, run_divide_the_best

__all__ = [
    "CenterRect",
    "potentially_optimal",
    "trisect_rect",
    "rect_measure",
    "level_measure",
    "solve_direct",
    "VARIANTS",
]

VARIANTS = ("direct", "direct-l")

# rectangles this deep on their longest side are no longer split (float
# centres would coincide)
MAX_DEPTH = 30


def _variant(name: str) -> str:
    key = name.lower().replace("_", "-")
    if key in ("directl",):
        key = "direct-l"
    if key not in VARIANTS:
        raise InputError(f"unknown DIRECT variant {name!r}")
    return key


def rect_measure(depths) -> float:
    """Half the diagonal of a rectangle with sides ``3**-depths``."""
    # sorted so that permuted shapes give the identical float
    return 0.5 * math.sqrt(math.fsum(9.0 ** -k for k in sorted(depths)))


def level_measure(level: int, n: int) -> float:
    """Measure of a DIRECT-l rectangle after ``level`` single-side splits.

    Splitting always the lowest-index longest side means that after
    ``level = q n + r`` splits the first ``r`` sides are ``3**-(q+1)`` long
    and the rest ``3**-q``.
    """
    q, r = divmod(level, n)
    return rect_measure([q + 1] * r + [q] * (n - r))


@dataclass(frozen=True)
class CenterRect:
    center: tuple
    depths: tuple
    value: float
    level: int = 0

    @property
    def sides(self) -> np.ndarray:
        return 3.0 ** -np.asarray(self.depths, dtype=float)

    @property
    def measure(self) -> float:
        return rect_measure(self.depths)

    def bounds(self):
        c = np.asarray(self.center)
        half = 0.5 * self.sides
        return c - half, c + half


def potentially_optimal(rects, f_min: float, eps: float = 1e-4) -> list[int]:
    """Indices of potentially optimal rectangles.

    ``rects`` is a sequence of ``(measure, value)`` pairs or of
    :class:`CenterRect`. Index ``i`` is returned iff some ``K > 0`` makes
    ``value_i - K measure_i`` minimal over all rectangles and at most
    ``f_min - eps |f_min|``.
    """
    d, f = _pairs(rects)
    mask = kernels.hull_select(d, f, improvement_threshold(f_min, eps))
    return [int(i) for i in np.nonzero(mask)[0]]


def _pairs(rects):
    if len(rects) == 0:
        raise InputError("need at least one rectangle")
    if isinstance(rects[0], CenterRect):
        d = np.array([r.measure for r in rects])
        f = np.array([r.value for r in rects])
    else:
        arr = np.asarray(rects, dtype=float).reshape(-1, 2)
        d, f = np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])
    return d, f


def trisect_rect(rect: CenterRect, variant: str, fn: Callable[[np.ndarray], float]) -> list[CenterRect]:
    """Split ``rect`` and evaluate the new centres with ``fn``.

    ``fn`` receives unit-cube points. The first child returned is the
    middle rectangle that keeps the parent's centre and value.

    DIRECT splits along every longest side, giving the largest pieces to
    the directions whose new centres are best. DIRECT-l splits only the
    lowest-index longest side.
    """
    variant = _variant(variant)
    depths = np.asarray(rect.depths)
    center = np.asarray(rect.center, dtype=float)
    kmin = depths.min()
    axes = [int(j) for j in np.nonzero(depths == kmin)[0]]
    if variant == "direct-l":
        axes = axes[:1]
    delta = 3.0 ** -(kmin + 1)

    samples = {}
    for j in axes:
        lo = center.copy()
        lo[j] -= delta
        hi = center.copy()
        hi[j] += delta
        samples[j] = (lo, fn(lo), hi, fn(hi))

    order = sorted(axes, key=lambda j: (min(samples[j][1], samples[j][3]), j))
    new_depths = depths.copy()
    children = []
    for j in order:
        new_depths[j] += 1
        lo, flo, hi, fhi = samples[j]
        for c, v in ((lo, flo), (hi, fhi)):
            children.append(CenterRect(tuple(c), tuple(int(k) for k in new_depths), v, rect.level + 1))
    middle = CenterRect(rect.center, tuple(int(k) for k in new_depths), rect.value, rect.level + 1)
    return [middle] + children


class _DirectHooks(DivideTheBestHooks):
    incremental = True

    def __init__(self, domain: BoxDomain, variant: str, eps: float):
        self.domain = domain
        self.variant = _variant(variant)
        self.eps = eps
        self._pending: dict[int, list[CenterRect]] = {}

    def _cell(self, state: PartitionState, rect: CenterRect, generation: int) -> Cell:
        lo, hi = rect.bounds()
        lo = self.domain.lower + lo * self.domain.widths
        hi = self.domain.lower + hi * self.domain.widths
        return state.new_cell(lo, hi, generation, data=rect)

    def _evaluate(self, state: PartitionState, u: np.ndarray) -> float:
        return state.objective(self.domain.from_unit(u))

    def initialize(self, state: PartitionState) -> list[Cell]:
        n = self.domain.dimension
        c = np.full(n, 0.5)
        rect = CenterRect(tuple(c), (0,) * n, self._evaluate(state, c))
        return [self._cell(state, rect, 0)]

    def compute_characteristics(self, state: PartitionState, cells: list[Cell]) -> None:
        for cell in cells:
            cell.characteristic = cell.data.value

    def select(self, state: PartitionState) -> list[int]:
        cells = [c for c in state.cells.values() if min(c.data.depths) < MAX_DEPTH]
        if not cells:
            return []
        d = np.array([c.data.measure for c in cells])
        f = np.array([c.characteristic for c in cells])
        mask = kernels.hull_select(d, f, improvement_threshold(state.best_value, self.eps))
        chosen = [cells[i] for i in np.nonzero(mask)[0]]
        if self.variant == "direct-l":
            per_measure: dict[float, Cell] = {}
            for c in chosen:
                key = c.data.measure
                best = per_measure.get(key)
                if best is None or (c.characteristic, c.id) < (best.characteristic, best.id):
                    per_measure[key] = c
            chosen = list(per_measure.values())
        return sorted(c.id for c in chosen)

    def subdivide(self, state: PartitionState, cell: Cell) -> list[Cell]:
        rects = trisect_rect(cell.data, self.variant, lambda u: self._evaluate(state, u))
        return [self._cell(state, r, cell.generation + 1) for r in rects]


def solve_direct(
    objective: Union[Objective, Callable[[np.ndarray], float]],
    domain: BoxDomain,
    variant: str = "direct",
    eps: float = 1e-4,
    stop: Optional[StoppingCriteria] = None,
) -> SolverResult:
    """Minimize ``objective`` over ``domain`` with DIRECT or DIRECT-l.

    Parameters
    ----------
    variant
        ``"direct"`` or ``"direct-l"``.
    eps
        Improvement parameter of the potential-optimality test.
    stop
        Defaults to a budget of 1000 trials.
    """
    if eps < 0:
        raise InputError("eps must be nonnegative")
    if not isinstance(objective, Objective):
        objective = Objective(objective, domain)
    stop = stop or StoppingCriteria(max_trials=1000)
    return run_divide_the_best(objective, domain, _DirectHooks(domain, variant, eps), stop)
