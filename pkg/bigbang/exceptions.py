"""
Error hierarchy for the big-bang regularization toolkit.

Every error carries a machine-readable ``reason`` code and the process exit
code the command line maps it to.
"""

from typing import Optional


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_OBSTRUCTION = 3
EXIT_NUMERIC = 4


class BigBangError(Exception):
    """Base error with a reason code and exit code."""

    exit_code = EXIT_NUMERIC
    default_reason = "error"

    def __init__(self, message: str, reason: Optional[str] = None):
        super().__init__(message)
        self.reason = reason or self.default_reason

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "reason": self.reason,
            "message": str(self),
        }


class RejectedInputError(BigBangError, ValueError):
    """Input outside an operation's contract (zero denominator, float w, ...)."""

    exit_code = EXIT_USAGE
    default_reason = "rejected-input"


class ParameterFileError(RejectedInputError):
    """Parameter file missing, unreadable or failing schema validation."""

    default_reason = "invalid-params"


class UsageError(BigBangError):
    """Malformed command line."""

    exit_code = EXIT_USAGE
    default_reason = "usage"


class DomainError(BigBangError, ValueError):
    """Evaluation outside a >0 / r >= 0 domain."""

    default_reason = "domain"


class SingularChartError(DomainError):
    """A point of the collision manifold has no physical preimage."""

    default_reason = "collision-manifold-no-preimage"


class ImaginaryBranchError(DomainError):
    """Negative base raised to a rational power with even denominator."""

    default_reason = "q-even-negative-base"


class IntegrationError(BigBangError):
    """Numeric integration failure (non-finite state, r < 0 excursion)."""

    default_reason = "integration-failure"


class NoExtensionError(BigBangError):
    """No real branch extension through the singularity exists."""

    exit_code = EXIT_OBSTRUCTION
    default_reason = "q-even"


class FitQualityError(BigBangError):
    """Handoff point lies outside the asymptotic regime."""

    default_reason = "outside-asymptotic-regime"


class InsufficientDataError(BigBangError):
    """Too few samples for a power-law fit."""

    default_reason = "fewer-than-8-samples"
