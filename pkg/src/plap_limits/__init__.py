"""Numerical laboratory for positive solutions of p-Laplacian problems as p grows."""

__version__ = "0.1.0"

from .asymptotics import LimitTolerances, SweepRow, SweepTable, calibrated_constants, check_limits, run_sweep
from .errors import ConfigError, ConvergenceError, InvariantViolation
from .fixed_point import FixedPointConfig, SolveReport, domain_constants, nonexistence_probe, solve_problem_P
from .geometry import Domain, EnergySpec, Field, distance_function, energy_Ip, integrate, lp_norm, sup_norm
from .solver import SolverConfig, solve_p_poisson, torsion_exact_ball, torsion_function, torsion_max_bound
from .spectral import EigenPair, check_lbep, principal_eigenpair
from .thresholds import (DomainConstants, GradientEstimateConstants, ProblemParams, compute_m_inf,
                         compute_Mp_corollary_up, compute_mp, in_region_E, nonexistence_bound)

__all__ = [
    "ConfigError", "ConvergenceError", "DomainConstants", "Domain", "EigenPair", "EnergySpec", "Field",
    "FixedPointConfig", "GradientEstimateConstants", "InvariantViolation", "LimitTolerances", "ProblemParams",
    "SolveReport", "SolverConfig", "SweepRow", "SweepTable", "calibrated_constants", "check_lbep", "check_limits", "compute_Mp_corollary_up",
    "compute_m_inf", "compute_mp", "distance_function", "domain_constants", "energy_Ip", "in_region_E", "integrate",
    "lp_norm", "nonexistence_bound", "nonexistence_probe", "principal_eigenpair", "run_sweep", "solve_p_poisson",
    "solve_problem_P", "sup_norm", "torsion_exact_ball", "torsion_function", "torsion_max_bound",
]
