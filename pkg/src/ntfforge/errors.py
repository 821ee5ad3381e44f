"""Exception hierarchy shared by all ntfforge modules."""


class NtfForgeError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(NtfForgeError):
    """A filter or design specification violates its invariants."""


class ConditioningError(NtfForgeError):
    """A computation is too ill-conditioned to trust."""


class TruncationOverflowError(NtfForgeError):
    """Impulse-response truncation would exceed the configured hard cap."""


class EvaluationError(NtfForgeError):
    """A frequency-domain evaluation failed (e.g. denominator vanished)."""


class DegenerateFilterError(NtfForgeError):
    """The output filter is identically zero; the objective is degenerate."""


class CausalityError(NtfForgeError):
    """A loop decomposition would require a non-causal filter."""


class BoundViolationError(NtfForgeError):
    """A gain-bound feasibility check failed at the requested level."""

    def __init__(self, message, grid_max=None):
        super().__init__(message)
        self.grid_max = grid_max


class SolverError(NtfForgeError):
    """The SDP solver failed to produce a usable solution."""
