"""Deterministic Lipschitz global optimization toolkit."""

__version__ = "0.1.0"

from .core import (
    BoxDomain,
    BudgetExhausted,
    DomainError,
    InputError,
    LipgoError,
    LipschitzSpec,
    NonFiniteValueError,
    Objective,
    SearchTerminated,
    SolverResult,
    StructuralError,
    TargetReached,
    Trial,
    diagonal_lower_bound,
    lipschitz_violation_witness,
    minorant_minimum_1d,
    minorant_value,
)
from .diagonal import solve_multidim_diagonal
from .direct import solve_direct
from .framework import StoppingCriteria, run_divide_the_best
from .geometric1d import solve_piyavskij
from .gkls import GklsClassSpec, generate_class, load_manifest, preset_spec
from .harness import hit_check, run_benchmark
