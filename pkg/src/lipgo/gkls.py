"""GKLS-style generator of differentiable multiextremal test classes.

A function is a convex paraboloid ``||x - T||^2 + t`` with ``m`` disjoint
balls carved into it. Inside ball ``i`` (centre ``M_i``, radius ``rho_i``)
the paraboloid is replaced by a cubic in the distance to ``M_i`` that
matches the paraboloid's value and gradient on the sphere and reaches
``f_i`` at the centre. The result is C^1, every ``M_i`` is a strict local
minimizer, and nothing else is.

Layout conventions:

* minimum 0 is the paraboloid vertex ``T`` itself, with value ``t``;
* minimum 1 is the global minimizer, at distance ``global_distance`` from
  ``T``, with value ``global_value`` and radius ``global_radius``;
* the others are placed uniformly at random.

Randomness comes from numpy's PCG64 bit generator, seeded per function
with ``class_seed ^ index`` (index 1..100), and only its uniform doubles are
consumed, so classes regenerate identically across platforms.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import kernels
from .core import BoxDomain, DomainError, InputError, LipgoError

__all__ = [
    "GenerationError",
    "GklsClassSpec",
    "GklsFunction",
    "GklsClass",
    "PRESETS",
    "preset_spec",
    "generate_function",
    "generate_class",
    "gkls_eval",
    "gkls_gradient",
    "gkls_minima",
    "dump_manifest",
    "load_manifest",
]

FUNCTION_COUNT = 100
MAX_ATTEMPTS = 10_000

# (global_distance, global_radius) per (dimension, difficulty)
PRESETS = {
    (2, "simple"): (0.90, 0.20),
    (2, "hard"): (0.90, 0.10),
    (3, "simple"): (0.66, 0.20),
    (3, "hard"): (0.90, 0.20),
    (4, "simple"): (0.66, 0.20),
    (4, "hard"): (0.90, 0.20),
    (5, "simple"): (0.66, 0.30),
    (5, "hard"): (0.66, 0.20),
}


class GenerationError(LipgoError):
    """The class parameters cannot be realized."""


@dataclass(frozen=True)
class GklsClassSpec:
    dimension: int
    num_minima: int = 10
    global_value: float = -1.0
    global_radius: float = 0.2
    global_distance: float = 0.9
    domain: Optional[BoxDomain] = None
    seed: int = 1
    paraboloid_floor: float = 0.0
    min_radius_fraction: float = 0.01
    label: str = "custom"
    global_clearance: Optional[float] = None
    function_count: int = field(default=FUNCTION_COUNT, init=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise InputError("dimension must be at least 1")
        if self.domain is None:
            object.__setattr__(self, "domain", BoxDomain.cube(self.dimension, -1.0, 1.0))
        if self.domain.dimension != self.dimension:
            raise InputError("domain dimension mismatch")
        if self.num_minima < 2:
            raise InputError("need at least two minima (paraboloid vertex and global)")
        if not (self.global_radius > 0 and self.global_distance > 0):
            raise InputError("global radius and distance must be positive")
        if not self.global_value < self.paraboloid_floor:
            raise InputError("global value must lie below the paraboloid floor")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")
        # placement clearance is frozen at construction so that dataclasses.replace()
        # with a smaller radius keeps the random layout
        if self.global_clearance is None:
            object.__setattr__(self, "global_clearance", float(self.global_radius))
        if self.global_radius > self.global_clearance:
            raise InputError("global_radius cannot exceed global_clearance")

    @property
    def min_radius(self) -> float:
        return self.min_radius_fraction * float(self.domain.widths.min())


def preset_spec(dimension: int, difficulty: str, seed: int = 1, num_minima: int = 10, **kw) -> GklsClassSpec:
    try:
        distance, radius = PRESETS[(dimension, difficulty)]
    except KeyError:
        raise InputError(f"no preset for N={dimension}, {difficulty!r}") from None
    return GklsClassSpec(
        dimension,
        num_minima=num_minima,
        global_radius=radius,
        global_distance=distance,
        seed=seed,
        label=difficulty,
        **kw,
    )


@dataclass(frozen=True, eq=False)
class GklsFunction:
    """One generated test function; callable on points of its domain."""

    vertex: np.ndarray
    floor: float
    centers: np.ndarray
    values: np.ndarray
    radii: np.ndarray
    domain: BoxDomain
    index: int = 0
    global_index: int = 1

    def __post_init__(self):
        for name in ("vertex", "centers", "values", "radii"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        diff = self.vertex[None, :] - self.centers
        coef = np.einsum("mn,mn->m", diff, diff) + self.floor - self.values
        coef.setflags(write=False)
        object.__setattr__(self, "coef_a", coef)

    @property
    def dimension(self) -> int:
        return self.vertex.size

    @property
    def global_minimizer(self) -> np.ndarray:
        return self.centers[self.global_index]

    @property
    def global_value(self) -> float:
        return float(self.values[self.global_index])

    def _args(self):
        return self.vertex, self.floor, self.centers, self.values, self.radii, self.coef_a

    def evaluate(self, x) -> np.ndarray:
        """Batch evaluation of ``(q, N)`` points; no domain check."""
        x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, self.dimension))
        return kernels.gkls_values(x, *self._args())

    def gradient_batch(self, x) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, self.dimension))
        return kernels.gkls_gradients(x, *self._args())

    def __call__(self, x) -> float:
        return gkls_eval(self, x)

    def same_minima(self, other: "GklsFunction") -> bool:
        return (
            np.array_equal(self.vertex, other.vertex)
            and self.floor == other.floor
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.radii, other.radii)
        )


def _check_point(fn: GklsFunction, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != fn.dimension or not fn.domain.contains(x):
        raise DomainError(f"point {x} outside the function domain")
    return x


def gkls_eval(fn: GklsFunction, x) -> float:
    x = _check_point(fn, x)
    return float(fn.evaluate(x)[0])


def gkls_gradient(fn: GklsFunction, x) -> np.ndarray:
    x = _check_point(fn, x)
    return fn.gradient_batch(x)[0]


def gkls_minima(fn: GklsFunction) -> list[tuple[np.ndarray, float, float]]:
    return [(fn.centers[i].copy(), float(fn.values[i]), float(fn.radii[i])) for i in range(len(fn.values))]


# ---------------------------------------------------------------------------
# generation


def _unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        # Box-Muller on raw uniforms keeps the stream independent of numpy's
        # normal sampler
        u1 = 1.0 - rng.random(n)
        u2 = rng.random(n)
        g = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        norm = float(np.linalg.norm(g))
        if norm > 1e-12:
            return g / norm


def _boundary_distance(p: np.ndarray, domain: BoxDomain) -> float:
    return float(min(np.min(p - domain.lower), np.min(domain.upper - p)))


def generate_function(spec: GklsClassSpec, index: int) -> GklsFunction:
    """Deterministically build function ``index`` (1-based) of a class."""
    if not 1 <= index <= spec.function_count:
        raise InputError(f"function index must be in 1..{spec.function_count}")
    rng = np.random.Generator(np.random.PCG64(spec.seed ^ index))
    dom = spec.domain
    lo, w = dom.lower, dom.widths
    n, m = spec.dimension, spec.num_minima
    rho_g, dist_g, dmin = spec.global_radius, spec.global_distance, spec.min_radius
    clear = spec.global_clearance
    if dist_g < clear + dmin:
        raise GenerationError("global_distance too small: vertex ball would touch the global ball")

    for _ in range(MAX_ATTEMPTS):
        vertex = lo + w * rng.random(n)
        if _boundary_distance(vertex, dom) < dmin:
            continue
        glob = vertex + dist_g * _unit_vector(rng, n)
        if _boundary_distance(glob, dom) >= clear:
            break
    else:
        raise GenerationError("global ball does not fit inside the domain at the requested distance")

    centers = [vertex, glob]
    for k in range(2, m):
        for _ in range(MAX_ATTEMPTS):
            p = lo + w * rng.random(n)
            if _boundary_distance(p, dom) < dmin:
                continue
            if np.linalg.norm(p - glob) < clear + dmin:
                continue
            if any(np.linalg.norm(p - c) < 2.0 * dmin for i, c in enumerate(centers) if i != 1):
                continue
            centers.append(p)
            break
        else:
            raise GenerationError(f"could not place local minimum {k + 1} of {m} without overlap")
    centers = np.array(centers)

    radii = np.empty(m)
    radii[1] = rho_g
    for i in range(m):
        if i == 1:
            continue
        others = [np.linalg.norm(centers[i] - centers[j]) for j in range(m) if j not in (i, 1)]
        r = min(
            0.5 * min(others) if others else math.inf,
            float(np.linalg.norm(centers[i] - glob)) - rho_g,
            _boundary_distance(centers[i], dom),
        )
        radii[i] = r

    t = spec.paraboloid_floor
    values = np.empty(m)
    values[0] = t
    values[1] = spec.global_value
    for i in range(2, m):
        # lowest paraboloid value on the ball's sphere
        q = (float(np.linalg.norm(centers[i] - vertex)) - radii[i]) ** 2 + t
        values[i] = q - (0.1 + 0.7 * rng.random()) * (q - spec.global_value)

    fn = GklsFunction(vertex, t, centers, values, radii, dom, index=index)
    _validate(fn, spec)
    return fn


def _validate(fn: GklsFunction, spec: GklsClassSpec) -> None:
    c, r = fn.centers, fn.radii
    m = len(r)
    for i in range(m):
        if _boundary_distance(c[i], fn.domain) < r[i] - 1e-12:
            raise GenerationError(f"ball {i} leaves the domain")
        for j in range(i + 1, m):
            if np.linalg.norm(c[i] - c[j]) < r[i] + r[j] - 1e-12:
                raise GenerationError(f"balls {i} and {j} overlap")
    others = np.delete(fn.values, fn.global_index)
    if np.any(others <= fn.global_value + 1e-6):
        raise GenerationError("a local minimum is not strictly above the global value")
    # M_i stays a strict minimizer iff the cubic's quadratic coefficient is
    # positive on the ray towards the vertex
    dist = np.linalg.norm(fn.vertex[None, :] - c, axis=1)
    need = (4.0 * dist * r - r * r) / 3.0
    bad = (fn.coef_a <= need) & (dist > 0)
    if np.any(bad):
        raise GenerationError(f"minimum {int(np.argmax(bad))} too shallow for its ball")


@dataclass
class GklsClass:
    spec: GklsClassSpec
    functions: list

    def __len__(self):
        return len(self.functions)

    def __getitem__(self, index: int) -> GklsFunction:
        """Function by its 1-based index."""
        return self.functions[index - 1]


def generate_class(spec: GklsClassSpec) -> GklsClass:
    return GklsClass(spec, [generate_function(spec, i) for i in range(1, spec.function_count + 1)])


# ---------------------------------------------------------------------------
# manifest
#
#   gkls v1 N m f* rho seed
#   # key value...            (metadata comments)
#   idx x_1 ... x_N value radius   (m lines per function)


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_manifest(cls: GklsClass, dest: Union[str, Path, io.TextIOBase, None] = None) -> str:
    s = cls.spec
    lines = [
        f"gkls v1 {s.dimension} {s.num_minima} {_fmt(s.global_value)} {_fmt(s.global_radius)} {s.seed}",
        f"# label {s.label}",
        f"# global_distance {_fmt(s.global_distance)}",
        f"# global_clearance {_fmt(s.global_clearance)}",
        f"# paraboloid_floor {_fmt(s.paraboloid_floor)}",
        f"# min_radius_fraction {_fmt(s.min_radius_fraction)}",
        "# domain_lower " + " ".join(_fmt(v) for v in s.domain.lower),
        "# domain_upper " + " ".join(_fmt(v) for v in s.domain.upper),
        "# prng numpy-PCG64 uniform doubles; function idx uses seed (class_seed XOR idx)",
        "# rows: idx x_1..x_N value radius; row 1 of a block = paraboloid vertex, row 2 = global minimum",
    ]
    for fn in cls.functions:
        for p, v, r in gkls_minima(fn):
            lines.append(" ".join([str(fn.index), *(_fmt(x) for x in p), _fmt(v), _fmt(r)]))
    text = "\n".join(lines) + "\n"
    if dest is None:
        return text
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)
    return text


def load_manifest(source: Union[str, Path, io.TextIOBase]) -> GklsClass:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError("empty manifest")
    head = lines[0].split()
    if len(head) != 7 or head[:2] != ["gkls", "v1"]:
        raise InputError(f"bad manifest header: {lines[0]!r}")
    n, m = int(head[2]), int(head[3])
    f_star, rho, seed = float(head[4]), float(head[5]), int(head[6])
    meta: dict[str, list[str]] = {}
    rows: dict[int, list[list[float]]] = {}
    for ln in lines[1:]:
        if ln.startswith("#"):
            parts = ln[1:].split()
            if parts:
                meta[parts[0]] = parts[1:]
            continue
        parts = ln.split()
        if len(parts) != n + 3:
            raise InputError(f"bad minimum row: {ln!r}")
        rows.setdefault(int(parts[0]), []).append([float(v) for v in parts[1:]])

    def _meta_float(key, default):
        return float(meta[key][0]) if key in meta else default

    if "domain_lower" in meta:
        domain = BoxDomain([float(v) for v in meta["domain_lower"]], [float(v) for v in meta["domain_upper"]])
    else:
        domain = BoxDomain.cube(n, -1.0, 1.0)
    spec = GklsClassSpec(
        n,
        num_minima=m,
        global_value=f_star,
        global_radius=rho,
        global_distance=_meta_float("global_distance", 0.9),
        global_clearance=_meta_float("global_clearance", rho),
        domain=domain,
        seed=seed,
        paraboloid_floor=_meta_float("paraboloid_floor", 0.0),
        min_radius_fraction=_meta_float("min_radius_fraction", 0.01),
        label=meta.get("label", ["custom"])[0],
    )
    functions = []
    for idx in sorted(rows):
        block = np.array(rows[idx])
        if block.shape[0] != m:
            raise InputError(f"function {idx} lists {block.shape[0]} minima, expected {m}")
        pts, vals, radii = block[:, :n], block[:, n], block[:, n + 1]
        functions.append(GklsFunction(pts[0], float(vals[0]), pts, vals, radii, domain, index=idx))
    return GklsClass(spec, functions)
