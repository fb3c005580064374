"""Error hierarchy shared by the library and the command line."""


class PgxSelectError(Exception):
    """Base class for all pgx-select errors."""


class DomainError(PgxSelectError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class DimensionError(PgxSelectError, ValueError):
    """Array shapes do not agree."""


class DataValidationError(PgxSelectError):
    """Input files or configuration violate their schema."""


class InfeasibleTargetError(PgxSelectError, ValueError):
    """A calibration target cannot be reached with the given hyperparameters."""


class ConvergenceError(PgxSelectError):
    """Sampler diagnostics breach the strict convergence policy.

    Attributes:
        worst_rhat: Largest split R-hat across monitored parameters
        threshold: Policy threshold that was exceeded
    """

    def __init__(self, worst_rhat: float, threshold: float):
        super().__init__(
            f"split R-hat {worst_rhat:.3f} exceeds strict threshold {threshold:.2f}"
        )
        self.worst_rhat = worst_rhat
        self.threshold = threshold
