"""Exact Diophantine trajectories and certified exactly-approximable points.

The package works on the grid of times ``t = l * M`` with ``M = n/(n+1) log N``
so that every quantity it compares is an exact combination of logarithms.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, ExactApproxError, Infeasible, InternalError,
                     PreconditionViolated, SimplexViolation, WitnessOutOfCube)
from .lognum import Enclosure, Grid, LogQuantity, compare
from .psi import PsiSpec, gamma_psi, r_psi
from .lattice import FlowLattice, RationalPoint, lambda_min_log, successive_minima_log
from .dani import classify, dani_backward, dani_forward, trajectory
from .schedule import Constants, EpochSchedule, build_template, choose_times
from .cantor import Certificate, construct, verify_conditions
from .dimension import branching_survey, dim_lower_bound

__all__ = [
    "ConfigError", "DomainError", "ExactApproxError", "Infeasible", "InternalError",
    "PreconditionViolated", "SimplexViolation", "WitnessOutOfCube",
    "Enclosure", "Grid", "LogQuantity", "compare",
    "PsiSpec", "gamma_psi", "r_psi",
    "FlowLattice", "RationalPoint", "lambda_min_log", "successive_minima_log",
    "classify", "dani_backward", "dani_forward", "trajectory",
    "Constants", "EpochSchedule", "build_template", "choose_times",
    "Certificate", "construct", "verify_conditions",
    "branching_survey", "dim_lower_bound",
]
