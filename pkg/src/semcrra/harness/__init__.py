"""Scenario files, sweeps, output files and the command-line front end."""

from .config import ScenarioConfig, load_scenario, parse_quantity, parse_scenario
from .scenario import accuracy_model, budgets_for, generate_users
from .sweep import (SweepResult, SweepRow, SweepSpec, emit_csv, emit_plot, read_csv,
                    run_sweep, validate_success_probability)

__all__ = [
    "ScenarioConfig", "load_scenario", "parse_quantity", "parse_scenario",
    "accuracy_model", "budgets_for", "generate_users",
    "SweepResult", "SweepRow", "SweepSpec", "emit_csv", "emit_plot", "read_csv",
    "run_sweep", "validate_success_probability",
]
