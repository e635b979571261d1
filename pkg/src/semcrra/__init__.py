"""Joint compression-ratio and bandwidth/power allocation for task-oriented
semantic communication over fading uplinks."""

from .compression_opt import CompressionGrid, best_ratios, optimize_compression
from .crra import (METHODS, Solution, SolverConfig, brute_force_joint, crra_solve,
                   fcr_solve, fra_solve, msr_solve, solve)
from .errors import (ConfigError, DomainError, InfeasibleBudgetError, InvalidModelError,
                     SemcrraError)
from .fitting import FitConfig, FitReport, fit_accuracy_model
from .models import (AccuracyModel, UserLink, effective_accuracy, success_probability,
                     success_probability_mc)
from .resource_opt import (Allocation, Budgets, ResourceConfig, brute_force_allocation,
                           solve_resource_allocation)

__version__ = "0.1.0"

__all__ = [
    "AccuracyModel", "Allocation", "Budgets", "CompressionGrid", "ConfigError",
    "DomainError", "FitConfig", "FitReport", "InfeasibleBudgetError", "InvalidModelError",
    "METHODS", "ResourceConfig", "SemcrraError", "Solution", "SolverConfig", "UserLink",
    "best_ratios", "brute_force_allocation", "brute_force_joint", "crra_solve",
    "effective_accuracy", "fcr_solve", "fit_accuracy_model", "fra_solve", "msr_solve",
    "optimize_compression", "solve", "solve_resource_allocation", "success_probability",
    "success_probability_mc",
]
