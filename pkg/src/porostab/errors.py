class PorostabError(Exception):
    """Base class for all package errors."""


class ConfigError(PorostabError, ValueError):
    """Invalid mesh, material, scenario or run configuration."""


class SolverError(PorostabError, RuntimeError):
    """A linear solve failed or missed its residual tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class CertificationError(PorostabError):
    """A null-space certificate was not satisfied."""
