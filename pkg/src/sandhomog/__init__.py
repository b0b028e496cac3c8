"""Two-scale homogenization of tidal sand transport.

Solvers for the eps-dependent degenerate parabolic transport equation with
Robin boundary data, its theta-periodic cell problems and homogenized limits,
and two-scale convergence and corrector studies.
"""

from .cell_solver import (
    CellProblem,
    PeriodicProfile,
    ThresholdSet,
    continue_mu_to_zero,
    continue_nu_to_zero,
    norm_certificates,
    solve_homogenized_long,
    solve_homogenized_short,
    solve_mu_nu,
    threshold_set,
)
from .coeffs import (
    FluxLaw,
    ModelConstants,
    TidalForcing,
    assemble_coefficients,
    default_constants,
    default_flux_law,
    default_forcing,
    eval_forcing,
    eval_ga,
    eval_gc,
    validate_hypotheses,
)
from .eps_solver import EpsProblem, SolveRun, mass_balance_report, solve, step_implicit, uniform_bound_study
from .errors import ContractError, ConvergenceError, SolverError
from .grid import Boundary, FaceField, Grid
from .twoscale import TestFunction, TwoScaleReport, convergence_study, corrector_study, default_battery, pair_limit, pair_sequence

__version__ = "0.1.0"
