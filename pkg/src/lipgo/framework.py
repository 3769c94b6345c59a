"""Generic Divide-the-Best iteration engine.

One iteration:

1. compute the characteristic of every live cell (or only the new ones when
   the hooks declare characteristics to be static),
2. select the best cell(s),
3. subdivide each selected cell and place trials in the children,
4. check the stopping rule.

Solvers plug in through :class:`DivideTheBestHooks`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np

from .core import (
    BoxDomain,
    InputError,
    Objective,
    SearchTerminated,
    SolverResult,
    StructuralError,
)

__all__ = [
    "Cell",
    "PartitionState",
    "StoppingCriteria",
    "DivideTheBestHooks",
    "run_divide_the_best",
    "select_best_cells",
    "check_stop",
]

_VOLUME_RTOL = 1e-9


@dataclass(eq=False)
class Cell:
    id: int
    lower: np.ndarray
    upper: np.ndarray
    generation: int = 0
    characteristic: float = math.nan
    trials: tuple = ()
    data: Any = None

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))


@dataclass
class StoppingCriteria:
    max_trials: Optional[int] = None
    min_cell_volume_fraction: Optional[float] = None
    max_iterations: Optional[int] = None

    def __post_init__(self):
        if self.max_trials is None and self.min_cell_volume_fraction is None and self.max_iterations is None:
            raise InputError("set at least one stopping criterion")
        if self.max_trials is not None and self.max_trials < 1:
            raise InputError("max_trials must be positive")
        if self.min_cell_volume_fraction is not None and not self.min_cell_volume_fraction > 0:
            raise InputError("min_cell_volume_fraction must be positive")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise InputError("max_iterations must be nonnegative")


class PartitionState:
    """Live partition of ``D`` plus the information gathered so far."""

    def __init__(self, domain: BoxDomain, objective: Optional[Objective] = None):
        self.domain = domain
        self.objective = objective
        self.cells: dict[int, Cell] = {}
        self.iteration = 0
        self.fresh: list[Cell] = []
        self._next_id = 0

    @property
    def trials(self) -> int:
        return 0 if self.objective is None else self.objective.evaluation_count

    @property
    def points(self) -> np.ndarray:
        """Trial points gathered so far, in evaluation order."""
        if self.objective is None or not self.objective.history:
            return np.empty((0, self.domain.dimension))
        return np.array([t.point for t in self.objective.history])

    @property
    def values(self) -> np.ndarray:
        if self.objective is None:
            return np.empty(0)
        return np.array([t.value for t in self.objective.history])

    @property
    def best_value(self) -> float:
        if self.objective is None or self.objective.best is None:
            return math.inf
        return self.objective.best.value

    def new_cell(self, lower, upper, generation: int = 0, data: Any = None, trials: tuple = ()) -> Cell:
        cell = Cell(self._next_id, np.asarray(lower, dtype=float), np.asarray(upper, dtype=float), generation, trials=trials, data=data)
        self._next_id += 1
        return cell

    def seed(self, cells: Iterable[Cell]) -> None:
        cells = list(cells)
        if self.cells:
            raise StructuralError("partition already seeded")
        total = 0.0
        for c in cells:
            self._check_inside(c, self.domain.lower, self.domain.upper)
            total += c.volume
        _check_disjoint(cells)
        if abs(total - self.domain.volume) > _VOLUME_RTOL * self.domain.volume:
            raise StructuralError("initial cells do not cover the domain")
        for c in cells:
            self.cells[c.id] = c
        self.fresh.extend(cells)

    def replace(self, parent_id: int, children: list[Cell]) -> None:
        """Swap a live cell for its children after validating the split."""
        parent = self.cells.get(parent_id)
        if parent is None:
            raise StructuralError(f"cell {parent_id} is not live")
        if not children:
            raise StructuralError("subdivision produced no children")
        total = 0.0
        for c in children:
            if c.id in self.cells:
                raise StructuralError(f"child id {c.id} already live")
            self._check_inside(c, parent.lower, parent.upper)
            total += c.volume
        _check_disjoint(children)
        if abs(total - parent.volume) > _VOLUME_RTOL * parent.volume:
            raise StructuralError(f"children of cell {parent_id} do not tile it")
        del self.cells[parent_id]
        for c in children:
            self.cells[c.id] = c
        self.fresh.extend(children)

    def total_volume(self) -> float:
        return math.fsum(c.volume for c in self.cells.values())

    @staticmethod
    def _check_inside(cell: Cell, lo, hi) -> None:
        tol = 1e-12 * np.maximum(1.0, np.abs(hi - lo))
        if not (np.all(cell.lower < cell.upper)):
            raise StructuralError(f"cell {cell.id} has empty interior")
        if np.any(cell.lower < lo - tol) or np.any(cell.upper > hi + tol):
            raise StructuralError(f"cell {cell.id} escapes its parent region")


def _check_disjoint(cells: list[Cell]) -> None:
    if len(cells) > 64:
        return  # only seeding large tilings; the volume sum catches overlaps there
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            lo = np.maximum(cells[i].lower, cells[j].lower)
            hi = np.minimum(cells[i].upper, cells[j].upper)
            overlap = float(np.prod(np.clip(hi - lo, 0.0, None)))
            if overlap > _VOLUME_RTOL * min(cells[i].volume, cells[j].volume):
                raise StructuralError(f"cells {cells[i].id} and {cells[j].id} overlap")


def select_best_cells(state: PartitionState, multiplicity: int = 1, maximize: bool = False) -> list[int]:
    """Ids of the ``multiplicity`` best cells; ties go to the older cell.

    Cells whose characteristic is NaN or infinite in the wrong direction are
    never selected.
    """
    if multiplicity < 1:
        raise InputError("multiplicity must be at least 1")
    sign = -1.0 if maximize else 1.0
    ranked = [
        (sign * c.characteristic, c.id)
        for c in state.cells.values()
        if math.isfinite(c.characteristic) or len(state.cells) == 1
    ]
    ranked.sort()
    return [cid for _, cid in ranked[:multiplicity]]


def check_stop(state: PartitionState, best_cell: Optional[Cell], stop: StoppingCriteria) -> Optional[str]:
    """Name of the criterion that fired, or ``None`` to continue."""
    if stop.max_trials is not None and state.trials >= stop.max_trials:
        return "max_trials"
    if stop.min_cell_volume_fraction is not None and best_cell is not None:
        if best_cell.volume / state.domain.volume <= stop.min_cell_volume_fraction:
            return "min_volume"
    if stop.max_iterations is not None and state.iteration >= stop.max_iterations:
        return "max_iterations"
    return None


class DivideTheBestHooks:
    """Base class for solver plug-ins.

    ``incremental = True`` declares that a cell's characteristic never
    changes once computed, so only fresh cells are passed to
    :meth:`compute_characteristics`. Otherwise every live cell is rescored
    each iteration.
    """

    maximize = False
    incremental = False
    multiplicity = 1

    def initialize(self, state: PartitionState) -> list[Cell]:
        raise NotImplementedError

    def compute_characteristics(self, state: PartitionState, cells: list[Cell]) -> None:
        raise NotImplementedError

    def select(self, state: PartitionState) -> list[int]:
        return select_best_cells(state, self.multiplicity, self.maximize)

    def subdivide(self, state: PartitionState, cell: Cell) -> list[Cell]:
        raise NotImplementedError

    def place_trials(self, state: PartitionState, parent: Cell, children: list[Cell]) -> None:
        pass

    def hyperintervals(self, state: PartitionState) -> int:
        return len(state.cells)

    def lower_bound(self, state: PartitionState) -> Optional[float]:
        """Certified lower bound on ``f*`` at exit, when the method has one."""
        return None


def run_divide_the_best(
    objective: Objective,
    domain: BoxDomain,
    hooks: DivideTheBestHooks,
    stop: StoppingCriteria,
) -> SolverResult:
    if stop.max_trials is not None:
        objective.budget = stop.max_trials if objective.budget is None else min(objective.budget, stop.max_trials)
    state = PartitionState(domain, objective)
    status = "running"
    try:
        state.seed(hooks.initialize(state))
        while status == "running":
            pending = state.fresh if hooks.incremental else list(state.cells.values())
            state.fresh = []
            hooks.compute_characteristics(state, pending)
            selected = hooks.select(state)
            if not selected:
                status = "exhausted"
                break
            best = state.cells[selected[0]]
            for cid in selected:
                parent = state.cells[cid]
                children = hooks.subdivide(state, parent)
                hooks.place_trials(state, parent, children)
                state.replace(cid, children)
            state.iteration += 1
            status = check_stop(state, best, stop) or "running"
    except SearchTerminated as exc:
        status = exc.status
    return SolverResult.from_objective(
        objective, hooks.hyperintervals(state), status, state.iteration, hooks.lower_bound(state)
    )
