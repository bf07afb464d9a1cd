"""Exception types shared across the package."""


class ProcoalError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ProcoalError, ValueError):
    """An argument violates a documented precondition."""


class SchemaError(ProcoalError):
    """An input file is missing required columns or fields."""


class DataQualityError(ProcoalError):
    """Input data exists but is unusable (gaps, misalignment, bad values)."""


class LengthError(ProcoalError, ValueError):
    """A series is too short for the requested operation."""


class DegenerateSeriesError(ProcoalError):
    """A series has zero variance; Pearson correlation is undefined for it."""

    def __init__(self, agent_ids, message=None):
        self.agent_ids = tuple(agent_ids)
        super().__init__(message or f"zero-variance series for agents: {list(self.agent_ids)}")


class PhiBoundaryError(ProcoalError, ValueError):
    """phi in {0, 1} makes the analytic contract diverge."""


class InfeasibleError(ProcoalError):
    """No threshold yields the requested number of disjoint clique seeds."""

    def __init__(self, requested, max_achievable, message=None):
        self.requested = requested
        self.max_achievable = max_achievable
        super().__init__(
            message
            or f"cannot seed {requested} disjoint cliques; best achievable is {max_achievable}"
        )


class ConfigError(ProcoalError):
    """A run configuration failed validation; `path` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class SweepInvariantError(ProcoalError):
    """A sweep produced results violating a structural invariant."""
