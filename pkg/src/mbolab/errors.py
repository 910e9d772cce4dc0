"""Exception types shared across the library."""

from __future__ import annotations


class MbolabError(Exception):
    """Base class for all library errors."""


class SpecMismatchError(MbolabError):
    """Two fields that must share a grid were built on different grids."""


class ContainmentError(MbolabError):
    """A shape or set violates the guard band of the periodic domain."""


class PreconditionError(MbolabError):
    """An operation was called with inputs outside its contract."""


class ConfigurationError(MbolabError):
    """Invalid configuration value, file format, or resolvability violation."""

    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message)
        self.errors = errors if errors is not None else [message]


class NumericError(MbolabError):
    """A quadrature or solver failed to reach its accuracy target."""


class TopologyError(MbolabError):
    """A mask contour is open or otherwise unusable for boundary integrals."""
