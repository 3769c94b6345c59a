"""Univariate geometric methods (Piyavskij-Shubert family).

The search interval is kept as a sorted set of trial abscissae. Each
subinterval is scored by the minimum of the two-cone minorant over it and
the best one receives a new trial at the cone intersection. The Lipschitz
information is either a fixed constant, an adaptive global estimate, or a
set of local estimates tuned to each subinterval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import (
    BoxDomain,
    InputError,
    LipschitzSpec,
    Objective,
    SolverResult,
    StructuralError,
    Trial,
)
from .framework import Cell, DivideTheBestHooks, PartitionState, StoppingCriteria, run_divide_the_best

log = logging.getLogger(__name__)

__all__ = [
    "IntervalCell",
    "SlopeConditionViolated",
    "interval_characteristic",
    "next_trial_point",
    "estimate_L_global",
    "estimate_L_local",
    "local_estimates",
    "solve_piyavskij",
]


class SlopeConditionViolated(InputError):
    """The estimate ``l`` does not exceed the slope of the interval.

    Recoverable: solvers inflate ``l`` and try again.
    """


@dataclass(frozen=True)
class IntervalCell:
    x_left: float
    z_left: float
    x_right: float
    z_right: float

    @property
    def width(self) -> float:
        return self.x_right - self.x_left

    @property
    def slope(self) -> float:
        return abs(self.z_right - self.z_left) / self.width


def _check_cell(cell: IntervalCell, l: float) -> None:
    if not cell.x_right > cell.x_left:
        raise StructuralError(f"degenerate interval [{cell.x_left}, {cell.x_right}]")
    if not (math.isfinite(l) and l > 0):
        raise InputError(f"estimate must be positive, got {l}")


def interval_characteristic(cell: IntervalCell, l: float) -> float:
    _check_cell(cell, l)
    return 0.5 * (cell.z_left + cell.z_right) - 0.5 * l * cell.width


def next_trial_point(cell: IntervalCell, l: float) -> float:
    """Abscissa of the minorant minimum inside ``cell``.

    Raises :class:`SlopeConditionViolated` unless ``l`` strictly exceeds the
    interval slope, since the point would otherwise hit an end point.
    """
    _check_cell(cell, l)
    if not l > cell.slope:
        raise SlopeConditionViolated(f"l={l} does not exceed slope {cell.slope}")
    return 0.5 * (cell.x_left + cell.x_right) - (cell.z_right - cell.z_left) / (2.0 * l)


def _sorted_arrays(trials: Sequence[Trial]):
    if len(trials) < 2:
        raise InputError("need at least two trials")
    xs = np.array([float(np.asarray(t.point).reshape(-1)[0]) for t in trials])
    zs = np.array([t.value for t in trials], dtype=float)
    order = np.argsort(xs, kind="stable")
    xs, zs = xs[order], zs[order]
    if np.any(np.diff(xs) <= 0):
        raise InputError("duplicate abscissae")
    return xs, zs


def _check_r_xi(r, xi):
    if not r >= 1.0:
        raise InputError("reliability factor must be at least 1")
    if not xi > 0:
        raise InputError("xi must be positive")


def estimate_L_global(trials: Sequence[Trial], r: float = 1.5, xi: float = 1e-8) -> float:
    _check_r_xi(r, xi)
    xs, zs = _sorted_arrays(trials)
    slopes = np.abs(np.diff(zs)) / np.diff(xs)
    return r * max(xi, float(slopes.max()))


def local_estimates(xs: np.ndarray, zs: np.ndarray, r: float, xi: float) -> np.ndarray:
    """Local tuning estimates for every subinterval of sorted samples.

    ``l_i = r * max(lambda_i, gamma_i, xi)`` where ``lambda_i`` is the
    largest slope among intervals ``i-1, i, i+1`` and
    ``gamma_i = Lambda * width_i / max_width`` scales the global slope
    ``Lambda`` by the relative interval width.
    """
    widths = np.diff(xs)
    slopes = np.abs(np.diff(zs)) / widths
    lam = slopes.copy()
    if slopes.size > 1:
        lam[1:] = np.maximum(lam[1:], slopes[:-1])
        lam[:-1] = np.maximum(lam[:-1], slopes[1:])
    gamma = slopes.max() * widths / widths.max()
    return r * np.maximum(np.maximum(lam, gamma), xi)


def estimate_L_local(trials: Sequence[Trial], i: int, r: float = 1.5, xi: float = 1e-8) -> float:
    _check_r_xi(r, xi)
    xs, zs = _sorted_arrays(trials)
    if not 0 <= i < xs.size - 1:
        raise InputError(f"interval index {i} out of range")
    return float(local_estimates(xs, zs, r, xi)[i])


class _PiyavskijHooks(DivideTheBestHooks):
    """Trials are mirrored in sorted arrays so every iteration can rescore
    all intervals in one vectorized pass; ``_ids[k]`` is the cell spanning
    ``[_xs[k], _xs[k+1]]``."""

    incremental = False
    max_inflations = 200

    def __init__(self, spec: LipschitzSpec, a: float, b: float):
        if spec.mode == "multiple_estimates":
            raise InputError("univariate solver supports a_priori, adaptive_global and local_tuning")
        self.spec = spec
        self.a, self.b = a, b
        self.min_sep = 1e-12 * (b - a)
        self.inflations = 0
        self._ids: list[int] = []
        self._xs = np.empty(0)
        self._zs = np.empty(0)
        self._l = np.empty(0)
        self._r = np.empty(0)

    def initialize(self, state: PartitionState) -> list[Cell]:
        obj = state.objective
        za = obj(np.array([self.a]))
        zb = obj(np.array([self.b]))
        cell = state.new_cell([self.a], [self.b], data=IntervalCell(self.a, za, self.b, zb))
        self._ids = [cell.id]
        self._xs = np.array([self.a, self.b])
        self._zs = np.array([za, zb])
        return [cell]

    def _estimates(self) -> np.ndarray:
        spec, xs, zs = self.spec, self._xs, self._zs
        if spec.mode == "a_priori":
            return np.full(xs.size - 1, spec.L)
        if spec.mode == "adaptive_global":
            slopes = np.abs(np.diff(zs)) / np.diff(xs)
            return np.full(xs.size - 1, spec.r * max(spec.xi, float(slopes.max())))
        return local_estimates(xs, zs, spec.r, spec.xi)

    def compute_characteristics(self, state: PartitionState, cells: list[Cell]) -> None:
        l = self._estimates()
        width = np.diff(self._xs)
        r = 0.5 * (self._zs[:-1] + self._zs[1:]) - 0.5 * l * width
        # intervals too narrow to hold another trial are retired
        r[width <= 2 * self.min_sep] = math.inf
        self._l, self._r = l, r
        for cid, value in zip(self._ids, r.tolist()):
            state.cells[cid].characteristic = value

    def select(self, state: PartitionState) -> list[int]:
        r = self._r
        finite = np.isfinite(r)
        if not finite.any():
            return []
        best = r[finite].min()
        # ties go to the older cell
        return [min(cid for cid, v in zip(self._ids, r) if v == best)]

    def subdivide(self, state: PartitionState, cell: Cell) -> list[Cell]:
        iv: IntervalCell = cell.data
        l = float(self._l[self._ids.index(cell.id)])
        factor = self.spec.r
        for _ in range(self.max_inflations):
            try:
                x = next_trial_point(iv, l)
            except SlopeConditionViolated:
                x = None
            if x is not None and iv.x_left + self.min_sep < x < iv.x_right - self.min_sep:
                break
            self.inflations += 1
            log.debug("inflating estimate %.6g on [%.6g, %.6g]", l, iv.x_left, iv.x_right)
            l = max(l * factor, iv.slope * factor, self.spec.xi)
        else:
            x = 0.5 * (iv.x_left + iv.x_right)
        gen = cell.generation + 1
        return [
            state.new_cell([iv.x_left], [x], gen, data=IntervalCell(iv.x_left, iv.z_left, x, math.nan)),
            state.new_cell([x], [iv.x_right], gen, data=IntervalCell(x, math.nan, iv.x_right, iv.z_right)),
        ]

    def place_trials(self, state: PartitionState, parent: Cell, children: list[Cell]) -> None:
        left, right = children
        x = left.data.x_right
        z = state.objective(np.array([x]))
        left.data = IntervalCell(left.data.x_left, left.data.z_left, x, z)
        right.data = IntervalCell(x, z, right.data.x_right, right.data.z_right)
        k = self._ids.index(parent.id)
        self._ids[k : k + 1] = [left.id, right.id]
        self._xs = np.insert(self._xs, k + 1, x)
        self._zs = np.insert(self._zs, k + 1, z)

    def lower_bound(self, state: PartitionState) -> Optional[float]:
        if self.spec.mode != "a_priori" or not state.cells:
            return None
        return min(interval_characteristic(c.data, self.spec.L) for c in state.cells.values())


def solve_piyavskij(
    objective: Union[Objective, Callable[[np.ndarray], float]],
    interval: tuple[float, float],
    spec: Optional[LipschitzSpec] = None,
    stop: Optional[StoppingCriteria] = None,
) -> SolverResult:
    """Minimize a univariate Lipschitz function on ``[a, b]``.

    Parameters
    ----------
    objective
        An :class:`Objective` or a plain callable taking a length-1 array.
    interval
        ``(a, b)`` with ``a < b``.
    spec
        Lipschitz information; defaults to an adaptive global estimate with
        ``r = 1.5``.
    stop
        Defaults to a budget of 1000 trials.
    """
    a, b = float(interval[0]), float(interval[1])
    domain = BoxDomain([a], [b])
    if not isinstance(objective, Objective):
        objective = Objective(objective, domain)
    spec = spec or LipschitzSpec.adaptive_global()
    stop = stop or StoppingCriteria(max_trials=1000)
    return run_divide_the_best(objective, domain, _PiyavskijHooks(spec, a, b), stop)
