"""Diagonal partitions with vertex reuse and multiple Lipschitz estimates.

Each hyperinterval is known only through the two end points of its main
diagonal. A cell is trisected across its longest edge (lowest index on
ties) with the new diagonal points

    u = a + (2/3)(b_j - a_j) e_j,    v = b - (2/3)(b_j - a_j) e_j

and children ``(a, v)``, ``(u, v)``, ``(u, b)``. Neighbouring children
share ``u`` and ``v`` and the mesh stays regular, so a single point can be
a diagonal end of up to ``2**N`` cells. Points are keyed by exact base-3
rationals and every point is evaluated at most once per solve.

Cells are selected like DIRECT does with centres, but on the pair
``(||b - a|| / 2, (f(a) + f(b)) / 2)``: a cell is chosen iff its diagonal
lower bound is the smallest for some Lipschitz estimate ``K > 0`` and
improves on the incumbent by the ``eps`` margin.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .core import BoxDomain, DomainError, InputError, Objective, SolverResult, improvement_threshold
from .framework import Cell, DivideTheBestHooks, PartitionState, StoppingCriteria, run_divide_the_best

__all__ = [
    "ExactVertex",
    "VertexStore",
    "DiagHyperinterval",
    "trisect_diagonal",
    "vertex_fetch",
    "select_nondominated",
    "solve_multidim_diagonal",
    "MULTIPLICITY_POLICIES",
]

MULTIPLICITY_POLICIES = ("all", "one-per-measure")

# beyond this per-axis depth the float images of the cells stop being
# distinct; such cells are frozen rather than split
MAX_DEPTH = 30


def _canonical(num: int, depth: int) -> tuple[int, int]:
    while depth > 0 and num % 3 == 0:
        num //= 3
        depth -= 1
    return num, depth


class ExactVertex:
    """Point of the base-3 mesh: ``x_j = a_j + num_j (b_j - a_j) / 3**depth_j``.

    Coordinates are reduced on construction, so equality and hashing are
    geometric.
    """

    __slots__ = ("coords", "_hash")

    def __init__(self, coords):
        out = []
        for num, depth in coords:
            num, depth = int(num), int(depth)
            if depth < 0 or not 0 <= num <= 3**depth:
                raise DomainError(f"coordinate {num}/3^{depth} outside [0, 1]")
            out.append(_canonical(num, depth))
        self.coords = tuple(out)
        self._hash = hash(self.coords)

    @classmethod
    def corner(cls, bits) -> "ExactVertex":
        return cls((int(b), 0) for b in bits)

    def __eq__(self, other):
        return isinstance(other, ExactVertex) and self.coords == other.coords

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "ExactVertex(" + ", ".join(f"{n}/3^{d}" for n, d in self.coords) + ")"

    def fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(n, 3**d) for n, d in self.coords)

    def unit(self) -> np.ndarray:
        return np.array([n / 3**d for n, d in self.coords])

    def to_point(self, domain: BoxDomain) -> np.ndarray:
        return domain.from_unit(self.unit())

    def moved(self, axis: int, num: int, depth: int) -> "ExactVertex":
        coords = list(self.coords)
        coords[axis] = (num, depth)
        return ExactVertex(coords)


class VertexStore:
    """Cache of objective values by exact vertex, with reuse statistics."""

    def __init__(self, domain: BoxDomain):
        self.domain = domain
        self.values: dict[ExactVertex, float] = {}
        self.hits = 0
        self.misses = 0
        self.incidence: dict[ExactVertex, int] = {}

    def __len__(self):
        return len(self.values)

    def __contains__(self, v):
        return v in self.values

    def attach(self, v: ExactVertex, count: int = 1) -> None:
        n = self.incidence.get(v, 0) + count
        if n:
            self.incidence[v] = n
        else:
            del self.incidence[v]

    @property
    def max_incidence(self) -> int:
        return max(self.incidence.values(), default=0)


def vertex_fetch(store: VertexStore, v: ExactVertex, objective: Callable[[np.ndarray], float]) -> float:
    value = store.values.get(v)
    if value is not None:
        store.hits += 1
        return value
    value = objective(v.to_point(store.domain))
    store.misses += 1
    store.values[v] = value
    return value


@dataclass(frozen=True, eq=False)
class DiagHyperinterval:
    a: ExactVertex
    b: ExactVertex
    za: float
    zb: float
    depths: tuple
    length: float

    @classmethod
    def build(cls, a: ExactVertex, b: ExactVertex, za: float, zb: float, depths, domain: BoxDomain):
        sides = domain.widths * 3.0 ** -np.asarray(depths, dtype=float)
        # sorted sum: equal shapes give the bit-identical length
        return cls(a, b, za, zb, tuple(depths), math.sqrt(math.fsum(sorted(sides * sides))))

    @property
    def half_diagonal(self) -> float:
        return 0.5 * self.length

    @property
    def mean_value(self) -> float:
        return 0.5 * (self.za + self.zb)

    def bounds(self, domain: BoxDomain):
        pa, pb = self.a.to_point(domain), self.b.to_point(domain)
        return np.minimum(pa, pb), np.maximum(pa, pb)

    def exact_volume(self) -> Fraction:
        """Volume in units of ``volume(D)``."""
        return Fraction(1, 3 ** sum(self.depths))


def _split_axis(depths) -> int:
    return int(np.argmin(depths))


def _third_points(a: ExactVertex, b: ExactVertex, j: int, k: int):
    deep = k + 1
    na, da = a.coords[j]
    nb, db = b.coords[j]
    A = na * 3 ** (deep - da)
    B = nb * 3 ** (deep - db)
    step = (B - A) // 3
    if abs(B - A) != 3:
        raise InputError("diagonal end points do not span the cell along the split axis")
    u = a.moved(j, A + 2 * step, deep)
    v = b.moved(j, B - 2 * step, deep)
    return u, v


def trisect_diagonal(
    h: DiagHyperinterval,
    store: VertexStore,
    objective: Callable[[np.ndarray], float],
) -> tuple[list[DiagHyperinterval], list[ExactVertex]]:
    """Split ``h`` into three slabs; returns the children and ``[u, v]``."""
    j = _split_axis(h.depths)
    u, v = _third_points(h.a, h.b, j, h.depths[j])
    zu = vertex_fetch(store, u, objective)
    zv = vertex_fetch(store, v, objective)
    depths = list(h.depths)
    depths[j] += 1
    dom = store.domain
    children = [
        DiagHyperinterval.build(h.a, v, h.za, zv, depths, dom),
        DiagHyperinterval.build(u, v, zu, zv, depths, dom),
        DiagHyperinterval.build(u, h.b, zu, h.zb, depths, dom),
    ]
    return children, [u, v]


def select_nondominated(cells, f_best: float, eps: float = 1e-4) -> list[int]:
    """Indices of cells that are best for some Lipschitz estimate.

    ``cells`` holds :class:`DiagHyperinterval` objects or precomputed
    ``(half_diagonal, mean_value)`` pairs.
    """
    if len(cells) == 0:
        raise InputError("need at least one cell")
    if isinstance(cells[0], DiagHyperinterval):
        d = np.array([c.half_diagonal for c in cells])
        m = np.array([c.mean_value for c in cells])
    else:
        arr = np.asarray(cells, dtype=float).reshape(-1, 2)
        d, m = np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])
    mask = kernels.hull_select(d, m, improvement_threshold(f_best, eps))
    return [int(i) for i in np.nonzero(mask)[0]]


class _TraceWriter:
    def __init__(self, dest):
        self._own = isinstance(dest, (str, Path))
        self.fh = open(dest, "w") if self._own else dest
        self.fh.write("# cell_id parent_id a_1..a_N b_1..b_N z_a z_b\n")

    def write(self, cell_id: int, parent_id: int, h: DiagHyperinterval, domain: BoxDomain):
        pa, pb = h.a.to_point(domain), h.b.to_point(domain)
        fields = [str(cell_id), str(parent_id), *map(repr, pa.tolist()), *map(repr, pb.tolist()), repr(h.za), repr(h.zb)]
        self.fh.write(" ".join(fields) + "\n")

    def close(self):
        if self._own:
            self.fh.close()


class _DiagonalHooks(DivideTheBestHooks):
    incremental = True

    def __init__(self, domain: BoxDomain, eps: float, multiplicity: str, trace=None):
        if multiplicity not in MULTIPLICITY_POLICIES:
            raise InputError(f"multiplicity policy must be one of {MULTIPLICITY_POLICIES}")
        self.domain = domain
        self.eps = eps
        self.multiplicity = multiplicity
        self.store = VertexStore(domain)
        self.trace = trace

    def _cell(self, state: PartitionState, h: DiagHyperinterval, generation: int, parent: int = -1) -> Cell:
        lo, hi = h.bounds(self.domain)
        cell = state.new_cell(lo, hi, generation, data=h)
        if self.trace is not None:
            self.trace.write(cell.id, parent, h, self.domain)
        return cell

    def initialize(self, state: PartitionState) -> list[Cell]:
        n = self.domain.dimension
        a, b = ExactVertex.corner([0] * n), ExactVertex.corner([1] * n)
        za = vertex_fetch(self.store, a, state.objective)
        zb = vertex_fetch(self.store, b, state.objective)
        h = DiagHyperinterval.build(a, b, za, zb, (0,) * n, self.domain)
        self.store.attach(a)
        self.store.attach(b)
        return [self._cell(state, h, 0)]

    def compute_characteristics(self, state: PartitionState, cells: list[Cell]) -> None:
        for cell in cells:
            cell.characteristic = cell.data.mean_value

    def select(self, state: PartitionState) -> list[int]:
        cells = [c for c in state.cells.values() if min(c.data.depths) < MAX_DEPTH]
        if not cells:
            return []
        d = np.array([c.data.half_diagonal for c in cells])
        m = np.array([c.characteristic for c in cells])
        mask = kernels.hull_select(d, m, improvement_threshold(state.best_value, self.eps))
        chosen = [cells[i] for i in np.nonzero(mask)[0]]
        if self.multiplicity == "one-per-measure":
            keep: dict[float, Cell] = {}
            for c in chosen:
                best = keep.get(c.data.half_diagonal)
                if best is None or (c.characteristic, c.id) < (best.characteristic, best.id):
                    keep[c.data.half_diagonal] = c
            chosen = list(keep.values())
        return sorted(c.id for c in chosen)

    def subdivide(self, state: PartitionState, cell: Cell) -> list[Cell]:
        children, _ = trisect_diagonal(cell.data, self.store, state.objective)
        return [self._cell(state, h, cell.generation + 1, cell.id) for h in children]

    def place_trials(self, state: PartitionState, parent: Cell, children: list[Cell]) -> None:
        # trials were placed through the vertex store during subdivision;
        # only the incidence bookkeeping is left
        st = self.store
        st.attach(parent.data.a, -1)
        st.attach(parent.data.b, -1)
        for c in children:
            st.attach(c.data.a)
            st.attach(c.data.b)


def solve_multidim_diagonal(
    objective: Union[Objective, Callable[[np.ndarray], float]],
    domain: BoxDomain,
    eps: float = 1e-4,
    multiplicity: str = "all",
    stop: Optional[StoppingCriteria] = None,
    trace: Union[str, Path, io.TextIOBase, None] = None,
    return_store: bool = False,
):
    """Minimize over ``domain`` with the diagonal multiple-estimates method.

    Parameters
    ----------
    eps
        Improvement margin for the selection test.
    multiplicity
        ``"all"`` subdivides every nondominated cell per iteration,
        ``"one-per-measure"`` only the best one of each diagonal length.
    stop
        Defaults to a budget of 1000 trials.
    trace
        Optional path or text stream receiving one line per created cell.
    return_store
        Also return the :class:`VertexStore` (for reuse statistics).
    """
    if eps < 0:
        raise InputError("eps must be nonnegative")
    if not isinstance(objective, Objective):
        objective = Objective(objective, domain)
    stop = stop or StoppingCriteria(max_trials=1000)
    writer = _TraceWriter(trace) if trace is not None else None
    hooks = _DiagonalHooks(domain, eps, multiplicity, writer)
    try:
        result = run_divide_the_best(objective, domain, hooks, stop)
    finally:
        if writer is not None:
            writer.close()
    if return_store:
        return result, hooks.store
    return result
