"""Exception types raised by the numerical routines."""


class MergeSplitError(Exception):
    """Base class for all package errors."""


class DomainError(MergeSplitError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(MergeSplitError):
    """A series or iteration was evaluated outside its region of validity."""


class InstabilityError(MergeSplitError):
    """A numerical estimate failed its own stability check."""


class IntegrationError(MergeSplitError):
    """A trajectory left its invariant region, stalled, or collapsed its step."""


class FitError(MergeSplitError):
    """A regression produced a result inconsistent with the expected exponent."""


class ResolutionError(MergeSplitError):
    """A requested window cannot be resolved on the available grid."""


class OscillationError(InstabilityError):
    """A Laplace inversion produced a non-monotone result (order too high)."""


class PrecisionError(MergeSplitError):
    """Cancellation in an alternating sum exceeded the allowed loss of digits."""


class TailTruncationWarning(UserWarning):
    """Endpoint contributions of a truncated integral are not negligible."""
