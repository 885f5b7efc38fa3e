"""Shared exception types."""


class OccnavError(Exception):
    """Base class for all package errors."""


class DomainError(OccnavError, ValueError):
    """An input violates an operation's precondition."""


class PlanningError(OccnavError, RuntimeError):
    """No feasible geometric route exists between the requested points."""


class GenerationError(OccnavError, RuntimeError):
    """Environment generation exhausted its rejection budget."""


class ParseError(OccnavError, ValueError):
    """Malformed serialized data; the message names the offending location."""


class ForecastError(OccnavError, RuntimeError):
    """A forecast backend failed (connection, timeout, or protocol violation)."""
