"""Exception types shared across the package.

Two families matter to callers: validation errors (bad model input, CLI
exit code 1) and solver errors (a structurally sound model that cannot be
solved, e.g. a reducible chain, CLI exit code 2).
"""

from __future__ import annotations


class DynwalkError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(DynwalkError, ValueError):
    """Input data violates a documented contract."""


class DimensionMismatchError(ValidationError):
    """Adjacency configurations do not share a common size."""


class AsymmetryError(ValidationError):
    """An adjacency matrix entry differs from its transpose entry."""


class NonBinaryEntryError(ValidationError):
    """An adjacency matrix entry is not 0 or 1."""


class NonzeroDiagonalError(ValidationError):
    """An adjacency matrix has a self-loop on its diagonal."""


class SolverError(DynwalkError, RuntimeError):
    """A solve failed for structural or numerical reasons."""


class ReducibleChainError(SolverError):
    """The chain has more than one recurrent class, so no unique
    stationary distribution exists.

    ``recurrent_classes`` lists each recurrent class as a tuple of state
    labels (or indices when no labels apply).
    """

    def __init__(self, message: str, recurrent_classes):
        super().__init__(message)
        self.recurrent_classes = tuple(tuple(c) for c in recurrent_classes)
