"""Exception hierarchy shared by the solver modules and the CLI."""


class SemcrraError(Exception):
    """Base class for all package errors."""


class DomainError(SemcrraError, ValueError):
    """An argument lies outside the domain of a formula."""


class InvalidModelError(SemcrraError, ValueError):
    """Accuracy curve leaves [0, 1] on the evaluation grid."""


class UnderdeterminedFitError(SemcrraError, ValueError):
    pass


class InfeasibleBudgetError(SemcrraError):
    """Per-user minimums cannot be met within the total budget."""


class AnchorError(SemcrraError):
    """SCA anchor is not strictly feasible for the linearized program."""


class OracleScaleError(SemcrraError, ValueError):
    pass


class ConfigError(SemcrraError, ValueError):
    """Scenario file could not be parsed or failed validation."""
