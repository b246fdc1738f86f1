"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TrajcheckError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TrajcheckError):
    """Malformed input that could not be parsed."""


class ValidationError(TrajcheckError):
    """Input violates a documented precondition or invariant."""


class CapacityError(TrajcheckError):
    """Input exceeds a configured size cap."""


class ProviderError(TrajcheckError):
    """An embedding provider violated its contract."""


class TransportError(TrajcheckError):
    """An LLM client failed to obtain a response."""


class GenerationError(TrajcheckError):
    """A question-generation call yielded fewer parseable items than requested."""


class StepCapError(TrajcheckError):
    """An agent run exceeded its tool-call cap.

    Carries the partial run (``.run``) recorded up to the cap.
    """

    def __init__(self, message: str, run=None):
        super().__init__(message)
        self.run = run


class ToolResolutionError(TrajcheckError):
    """The agent requested a tool the executor does not provide."""


class CaseAssemblyError(TrajcheckError):
    """A verification case could not be assembled from its alternate runs."""


class JudgeParseError(TrajcheckError):
    """The judge model never produced a parseable score line.

    Carries the raw model output (``.raw``).
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class ConfigError(TrajcheckError):
    """Invalid or unresolvable pipeline configuration."""
