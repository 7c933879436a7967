"""Shared exception types; the CLI maps them onto exit codes."""


class ValidationError(ValueError):
    """Bad user input or violated operation precondition (exit code 2)."""


class ResourceLimitError(RuntimeError):
    """Work or memory would exceed a configured cap (exit code 3)."""


class InternalInvariantError(RuntimeError):
    """A quantity the implementation guarantees came out wrong (exit code 4)."""
