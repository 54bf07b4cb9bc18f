"""Shared exception types."""


class SoftHandError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SoftHandError, ValueError):
    """A configuration or input value failed validation.

    Carries the offending field name so callers (CLI, service) can report
    a structured error path.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SafetyLimitError(SoftHandError):
    """A commanded pressure exceeds a channel's safety limit."""

    def __init__(self, channel, value_kpa, limit_kpa):
        self.channel = channel
        self.value_kpa = value_kpa
        self.limit_kpa = limit_kpa
        super().__init__(
            f"channel {channel}: {value_kpa:.1f} kPa exceeds safety limit "
            f"{limit_kpa:.1f} kPa"
        )


class ConvergenceError(SoftHandError):
    """An iterative solver failed to converge.

    residual_history holds the residual norm at each iteration for
    post-mortem inspection.
    """

    def __init__(self, message, residual_history=None):
        self.residual_history = list(residual_history or [])
        super().__init__(message)
