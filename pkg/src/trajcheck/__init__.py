"""trajcheck: synthetic question generation and deterministic verification
of LLM agent tool-call trajectories."""

from .trajectory import (
    WITH_ARGS,
    WITHOUT_ARGS,
    QuestionRecord,
    ToolCall,
    Trajectory,
    VerificationCase,
    canonical_serialize,
    parse_trajectory,
    strip_arguments,
    trajectories_equal,
)

__version__ = "0.1.0"

__all__ = [
    "WITH_ARGS",
    "WITHOUT_ARGS",
    "QuestionRecord",
    "ToolCall",
    "Trajectory",
    "VerificationCase",
    "canonical_serialize",
    "parse_trajectory",
    "strip_arguments",
    "trajectories_equal",
    "__version__",
]
