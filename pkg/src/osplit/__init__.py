"""Oracle-complexity separation for composite convex minimization.

Minimize ``f = h + g`` where ``h`` has an expensive full-gradient oracle and
``g`` a cheap basic oracle (full gradient, one partial derivative, or one
finite-sum component). A three-loop scheme spends ``grad h`` calls according
to the conditioning of ``h`` and ``g`` units according to that of ``g``.
"""

from .core import (CompositeProblem, Counts, CsrMatrix, GMode, GTerm, OracleTally,
                   SmoothTerm, make_rng)
from .frame import SolverConfig, SolveResult, gmco, ms_run, restart_schedule, solve
from .inner import INNER_SOLVERS, InnerProblem, get_inner_solver, solve_acdm, solve_apg, solve_katyusha
from .problems import make_preset, make_quadratic, quadratic_family

__version__ = "0.1.0"
