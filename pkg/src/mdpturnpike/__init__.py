"""Turnpike analysis for finite Markov decision processes."""
from .chain import ChainReport, ChainStructure, analyze_matrix, communicating_classes, full_report
from .core import (
    DecisionModel,
    FactoredMDP,
    bellman_gauss_seidel,
    bellman_general,
    bellman_standard,
    build_decision_model,
    explicit_model,
    value_iteration,
)
from .errors import AnalysisError, TurnpikeError, ValidationError
from .kernels import BACKEND
from .optimality import average_optimal_set, blackwell_optimal, summarize
from .turnpike import discounted_turnpike, undiscounted_turnpike
from .walk import RandomWalkSpec, check_conjecture, counterexample_5_3, parrondo, solve_bellman

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "BACKEND",
    "ChainReport",
    "ChainStructure",
    "DecisionModel",
    "FactoredMDP",
    "RandomWalkSpec",
    "TurnpikeError",
    "ValidationError",
    "analyze_matrix",
    "average_optimal_set",
    "bellman_gauss_seidel",
    "bellman_general",
    "bellman_standard",
    "blackwell_optimal",
    "build_decision_model",
    "check_conjecture",
    "communicating_classes",
    "counterexample_5_3",
    "discounted_turnpike",
    "explicit_model",
    "full_report",
    "parrondo",
    "solve_bellman",
    "summarize",
    "undiscounted_turnpike",
    "value_iteration",
]
