"""Exception types shared across the package.

The HTTP layer maps these onto status codes, so new error conditions
should subclass one of the existing families rather than raising bare
ValueError/KeyError.
"""


class McqForgeError(Exception):
    """Base class for all domain errors."""


class ValidationError(McqForgeError):
    """Invalid input or state for the requested operation (HTTP 400)."""


class UnknownIdError(McqForgeError):
    """Referenced session/item/bank id does not exist (HTTP 404)."""


class WrongGateError(McqForgeError):
    """Gate decision submitted to a session not at that gate (HTTP 409)."""


class SessionConflictError(McqForgeError):
    """Concurrent writer lost the race for a single-writer session (HTTP 409)."""


class BudgetExhaustedError(McqForgeError):
    """Correction budget cap would be exceeded; state left unchanged (HTTP 422)."""


class ProviderError(McqForgeError):
    """Transport or backend failure after retries were exhausted (HTTP 502)."""


class UnconfiguredRoleError(ProviderError):
    """Dispatch against a role with no configured backend."""


class ResponseTooLargeError(ProviderError):
    """Backend response exceeded the configured size cap."""


class DuplicateKeyError(ValidationError):
    """Duplicate key in a mock fixture map."""


class ParseFailureError(ValidationError):
    """A provider response could not be parsed into the expected structure.

    Carries the structured report when one exists.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
