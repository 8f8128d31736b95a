"""Finite LMI relaxations for q-fold nested fuzzy-summation matrix
inequalities, with a built-in barrier feasibility solver, sparse SDPA
import/export, and an independent numeric verification layer.
"""

__version__ = "0.1.0"

from .backend import BACKEND
from .errors import (
    CapExceeded,
    ConfigError,
    DimensionError,
    NumericalFailure,
    PlmirelaxError,
    RegistryError,
    WrongFold,
)
from .matexpr import (
    AffineSymMatrix,
    MembershipVector,
    PlmiSpec,
    VarRegistry,
    dump_spec,
    eval_plmi,
    load_spec,
    make_example_spec,
)
from .relax import LmiSet, canonicalize, count_constraints, generate, lmi_sets_equal
from .sdp import (
    FeasibilityProblem,
    FeasibilityResult,
    SolverOptions,
    Status,
    solve_feasibility,
    stabilization_problem,
)
from .sdpa import export_sdpa, parse_sdpa
from .sweep import SweepConfig, run_sweep, sweep_digest

__all__ = [
    "__version__",
    "BACKEND",
    "PlmirelaxError",
    "CapExceeded",
    "WrongFold",
    "DimensionError",
    "RegistryError",
    "ConfigError",
    "NumericalFailure",
    "AffineSymMatrix",
    "MembershipVector",
    "PlmiSpec",
    "VarRegistry",
    "dump_spec",
    "load_spec",
    "make_example_spec",
    "eval_plmi",
    "LmiSet",
    "generate",
    "canonicalize",
    "count_constraints",
    "lmi_sets_equal",
    "FeasibilityProblem",
    "FeasibilityResult",
    "SolverOptions",
    "Status",
    "solve_feasibility",
    "stabilization_problem",
    "export_sdpa",
    "parse_sdpa",
    "SweepConfig",
    "run_sweep",
    "sweep_digest",
]
