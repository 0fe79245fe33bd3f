"""Finite-difference solver for a nonlocal Dirichlet problem on an interval.

The package covers the full workflow: mesh and singular-kernel assembly,
the nonlinear nonlocal operator, power-type reactions with truncation
calculus, the first two eigenvalues, energy minimization and mountain-pass
saddles, order-interval solution lattices with extremal constant-sign
solutions, and a config-driven experiment pipeline with verifiable outputs.
"""

from fplap import kernels
from fplap.errors import (ConvergenceError, DegeneracyError, DegeneratePathError,
                          FplapError, InternalCheckError, NotFoundError,
                          ParameterError)
from fplap.mesh import Mesh, ProblemParams, build_mesh, check_grid, weighted_sup
from fplap.operator import apply, energy, jacobian, pair, phi_p
from fplap.reaction import (FixedSource, ModelReaction, Reaction, TruncatedReaction,
                            growth_check, interval_truncation, negative_truncation,
                            positive_truncation, tau_eps)
from fplap.spectral import (EigenResult, principal_eigenpair,
                            second_eigenvalue_minimax, weight_compare)
from fplap.variational import (Functional, SolveReport, SolverOptions, minimize,
                               mountain_pass, newton_solve, solve_rhs)
from fplap.lattice import (IntervalPair, SolutionSet, biggest_negative,
                           check_subsolution, check_supersolution,
                           enumerate_solutions, interval_pair, interval_solve,
                           join, meet, maximal_solution, minimal_solution,
                           nodal_solution, smallest_positive)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegeneracyError", "DegeneratePathError", "FplapError",
    "InternalCheckError", "NotFoundError", "ParameterError",
    "Mesh", "ProblemParams", "build_mesh", "check_grid", "weighted_sup",
    "apply", "energy", "jacobian", "pair", "phi_p",
    "FixedSource", "ModelReaction", "Reaction", "TruncatedReaction",
    "growth_check", "interval_truncation", "negative_truncation",
    "positive_truncation", "tau_eps",
    "EigenResult", "principal_eigenpair", "second_eigenvalue_minimax",
    "weight_compare",
    "Functional", "SolveReport", "SolverOptions", "minimize", "mountain_pass",
    "newton_solve", "solve_rhs",
    "IntervalPair", "SolutionSet", "biggest_negative", "check_subsolution",
    "check_supersolution", "enumerate_solutions", "interval_pair", "interval_solve",
    "join", "meet", "maximal_solution", "minimal_solution", "nodal_solution",
    "smallest_positive",
    "kernels", "__version__",
]
