"""Problem statement, trial bookkeeping and Lipschitz minorant mathematics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels

__all__ = [
    "LipgoError",
    "InputError",
    "DomainError",
    "StructuralError",
    "NonFiniteValueError",
    "SearchTerminated",
    "BudgetExhausted",
    "TargetReached",
    "BoxDomain",
    "Trial",
    "Objective",
    "LipschitzSpec",
    "SolverResult",
    "minorant_value",
    "minorant_minimum_1d",
    "diagonal_lower_bound",
    "lipschitz_violation_witness",
    "improvement_threshold",
]


class LipgoError(Exception):
    """Base class for all package errors."""


class InputError(LipgoError, ValueError):
    """Invalid argument value."""


class DomainError(InputError):
    """Argument outside the admissible set (empty data, point outside D, ...)."""


class StructuralError(LipgoError):
    """A partition hook broke the tiling or cell invariants."""


class NonFiniteValueError(LipgoError, ArithmeticError):
    """The objective returned NaN or an infinity."""


class SearchTerminated(LipgoError):
    """Raised from inside an evaluation to end a solve cleanly."""

    status = "terminated"


class BudgetExhausted(SearchTerminated):
    status = "budget"


class TargetReached(SearchTerminated):
    status = "target"


@dataclass(frozen=True)
class BoxDomain:
    """Hyperinterval ``[lower, upper]`` in ``R^N``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.size < 1 or lo.shape != hi.shape:
            raise InputError("lower and upper must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InputError("bounds must be finite")
        if not np.all(lo < hi):
            raise InputError("every axis needs lower < upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "BoxDomain":
        return cls(np.full(n, lo), np.full(n, hi))

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == self.lower.shape and bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.widths

    def from_unit(self, u) -> np.ndarray:
        x = self.lower + np.asarray(u, dtype=float) * self.widths
        return np.clip(x, self.lower, self.upper)

    def __eq__(self, other):
        if not isinstance(other, BoxDomain):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True)
class Trial:
    point: np.ndarray
    value: float

    def __eq__(self, other):
        if not isinstance(other, Trial):
            return NotImplemented
        return self.value == other.value and np.array_equal(self.point, other.point)

    __hash__ = None


class Objective:
    """Counting wrapper around a black-box function.

    Every call is checked against the domain, recorded in :attr:`history`
    and counted. Once ``budget`` evaluations have been spent further calls
    raise :class:`BudgetExhausted`. ``on_trial(index, trial)`` runs after a
    trial is recorded (``index`` is 1-based) and may itself raise a
    :class:`SearchTerminated` subclass to stop the solve.
    """

    def __init__(
        self,
        fn: Callable[[np.ndarray], float],
        domain: Optional[BoxDomain] = None,
        budget: Optional[int] = None,
        on_trial: Optional[Callable[[int, Trial], None]] = None,
    ):
        if budget is not None and budget < 0:
            raise InputError("budget must be nonnegative")
        self.fn = fn
        self.domain = domain
        self.budget = budget
        self.on_trial = on_trial
        self.history: list[Trial] = []
        self.best: Optional[Trial] = None

    @property
    def evaluation_count(self) -> int:
        return len(self.history)

    @property
    def exhausted(self) -> bool:
        return self.budget is not None and len(self.history) >= self.budget

    def __call__(self, x) -> float:
        if self.exhausted:
            raise BudgetExhausted(f"evaluation budget of {self.budget} spent")
        point = np.array(x, dtype=float).reshape(-1)
        if self.domain is not None and not self.domain.contains(point):
            raise DomainError(f"point {point} lies outside the search domain")
        point.setflags(write=False)
        value = float(self.fn(point))
        if not math.isfinite(value):
            raise NonFiniteValueError(f"objective returned {value} at {point}")
        trial = Trial(point, value)
        self.history.append(trial)
        if self.best is None or value < self.best.value:
            self.best = trial
        if self.on_trial is not None:
            self.on_trial(len(self.history), trial)
        return value


_MODES = ("a_priori", "adaptive_global", "local_tuning", "multiple_estimates")


@dataclass(frozen=True)
class LipschitzSpec:
    """How a solver obtains its Lipschitz information.

    Use the constructors rather than the raw fields.
    """

    mode: str
    L: Optional[float] = None
    r: float = 1.5
    xi: float = 1e-8
    eps: float = 1e-4

    def __post_init__(self):
        if self.mode not in _MODES:
            raise InputError(f"unknown Lipschitz mode {self.mode!r}")
        if self.mode == "a_priori":
            if self.L is None or not (math.isfinite(self.L) and self.L > 0):
                raise InputError("a priori mode needs a finite L > 0")
        if not self.r > 1.0:
            raise InputError("reliability factor r must exceed 1")
        if not self.xi > 0.0:
            raise InputError("xi must be positive")
        if not self.eps >= 0.0:
            raise InputError("eps must be nonnegative")

    @classmethod
    def a_priori(cls, L: float) -> "LipschitzSpec":
        return cls("a_priori", L=L)

    @classmethod
    def adaptive_global(cls, r: float = 1.5, xi: float = 1e-8) -> "LipschitzSpec":
        return cls("adaptive_global", r=r, xi=xi)

    @classmethod
    def local_tuning(cls, r: float = 1.5, xi: float = 1e-8) -> "LipschitzSpec":
        return cls("local_tuning", r=r, xi=xi)

    @classmethod
    def multiple_estimates(cls, eps: float = 1e-4) -> "LipschitzSpec":
        return cls("multiple_estimates", eps=eps)


@dataclass
class SolverResult:
    best_point: np.ndarray
    best_value: float
    trials_used: int
    hyperintervals_generated: int
    trial_history: list = field(repr=False)
    status: str = "stopped"
    iterations: int = 0
    lower_bound: Optional[float] = None

    @classmethod
    def from_objective(cls, objective: Objective, hyperintervals: int, status: str, iterations: int, lower_bound=None):
        if objective.best is None:
            raise StructuralError("solver finished without a single trial")
        return cls(
            best_point=objective.best.point,
            best_value=objective.best.value,
            trials_used=objective.evaluation_count,
            hyperintervals_generated=hyperintervals,
            trial_history=list(objective.history),
            status=status,
            iterations=iterations,
            lower_bound=lower_bound,
        )


# ---------------------------------------------------------------------------
# minorant operations


def _trial_arrays(trials: Sequence[Trial]):
    if len(trials) == 0:
        raise DomainError("need at least one trial")
    points = np.array([np.atleast_1d(t.point) for t in trials], dtype=float)
    values = np.array([t.value for t in trials], dtype=float)
    if not (np.all(np.isfinite(points)) and np.all(np.isfinite(values))):
        raise InputError("trials contain non-finite numbers")
    return points, values


def _check_l(L):
    if not (math.isfinite(L) and L > 0):
        raise InputError(f"Lipschitz constant must be finite and positive, got {L}")


def minorant_value(trials: Sequence[Trial], L: float, x) -> float | np.ndarray:
    """Evaluate ``F(x) = max_i (z_i - L ||x - x_i||)``.

    ``x`` may be a single point or a ``(q, N)`` batch; the result shape
    follows.
    """
    points, values = _trial_arrays(trials)
    _check_l(L)
    xq = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xq)):
        raise InputError("query point is not finite")
    n = points.shape[1]
    if xq.ndim <= 1 and xq.size == n:
        out = kernels.cone_minorant(points, values, float(L), xq.reshape(1, n))
        return float(out[0])
    return kernels.cone_minorant(points, values, float(L), xq.reshape(-1, n))


def minorant_minimum_1d(trials: Sequence[Trial], L: float, interval=None) -> tuple[float, float]:
    """Global minimizer and minimum of the 1-D sawtooth minorant.

    Trials must be sorted by abscissa and bracket ``interval`` (both end
    points sampled). Between adjacent samples the two cones meet at

        x = (x_i + x_{i+1})/2 - (z_{i+1} - z_i)/(2L)

    with value ``(z_i + z_{i+1})/2 - L (x_{i+1} - x_i)/2``.
    """
    _check_l(L)
    points, values = _trial_arrays(trials)
    if points.shape[1] != 1:
        raise InputError("minorant_minimum_1d needs scalar trial points")
    xs = points[:, 0]
    if np.any(np.diff(xs) < 0):
        raise InputError("trials must be sorted by point")
    if interval is not None:
        a, b = interval
        if xs[0] < a or xs[-1] > b:
            raise DomainError("trial outside interval")
    if xs.size == 1:
        return float(xs[0]), float(values[0])
    left, right = xs[:-1], xs[1:]
    zl, zr = values[:-1], values[1:]
    width = right - left
    cand_x = 0.5 * (left + right) - (zr - zl) / (2.0 * L)
    cand_v = 0.5 * (zl + zr) - 0.5 * L * width
    # only reachable when L is below an adjacent slope: the pairwise formula
    # then leaves the pair, fall back to the full minorant at the clipped point
    outside = (cand_x < left) | (cand_x > right)
    if np.any(outside):
        cand_x = np.clip(cand_x, left, right)
        cand_v = np.where(outside, minorant_value(trials, L, cand_x.reshape(-1, 1)), cand_v)
    k = int(np.argmin(cand_v))
    return float(cand_x[k]), float(cand_v[k])


def diagonal_lower_bound(z_a: float, z_b: float, diag_length: float, L: float) -> float:
    """Minimum of the two-cone minorant along a main diagonal."""
    _check_l(L)
    if not (math.isfinite(diag_length) and diag_length > 0):
        raise InputError("diagonal length must be positive")
    return 0.5 * (z_a + z_b) - 0.5 * L * diag_length


def lipschitz_violation_witness(trials: Sequence[Trial], L: float) -> Optional[tuple[int, int]]:
    """Return the first index pair breaking the Lipschitz condition, if any."""
    if len(trials) < 2:
        return None
    points, values = _trial_arrays(trials)
    for i in range(len(trials)):
        dist = np.linalg.norm(points[i + 1 :] - points[i], axis=1)
        bad = np.nonzero(np.abs(values[i + 1 :] - values[i]) > L * dist)[0]
        if bad.size:
            return i, i + 1 + int(bad[0])
    return None


def improvement_threshold(f_best: float, eps: float, floor: float = 1e-8) -> float:
    """Target ``f_best - eps |f_best|`` a selected cell's bound must reach."""
    if eps < 0:
        raise InputError("eps must be nonnegative")
    if eps == 0:
        return f_best
    return f_best - max(eps * abs(f_best), floor)
