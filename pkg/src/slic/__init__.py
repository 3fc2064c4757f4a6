"""slic: a small probabilistic language with level-typed slicing,
conditional-independence typing, and compile-time marginalisation of
bounded discrete parameters."""

from .syntax import (  # noqa: F401
    BASE, CI, DATA, GENQUANT, Gamma, L1, L2, L3, Level, MODEL, Program,
    lub, lub_ci,
)
from .parser import parse, parse_file, pretty, ParseError, Diagnostic  # noqa: F401
from .interp import run, density, density_counted, EvalError, EvalCounters  # noqa: F401
from .typecheck import check_program, check_stmt, infer_levels  # noqa: F401
from .shred import shred, recompose, is_single_level  # noqa: F401
from .ci import check_ci, infer_ci, ci_query, markov_blanket, CIPartition  # noqa: F401
from .elim import eliminate, transform_all, store_of  # noqa: F401
from .oracle import enumerate_joint, check_preservation, check_ci_table  # noqa: F401
from .stan import emit_stan  # noqa: F401

__version__ = "0.1.0"
