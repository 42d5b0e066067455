"""Exception types shared across the package."""


class SojournMcError(Exception):
    """Base class for all package errors."""


class RangeError(SojournMcError, ValueError):
    """A window, grid point, or argument lies outside the supported range."""


class SolverError(SojournMcError, RuntimeError):
    """A root finder failed to bracket or converge."""


class ContractError(SojournMcError, ValueError):
    """Mismatched inputs, e.g. table alpha differs from model alpha."""


class GridResolutionError(SojournMcError, RuntimeError):
    """A lattice computation leaked more mass than the tolerance allows."""


class EstimationError(SojournMcError, RuntimeError):
    """A Monte Carlo estimate is unreliable (too many rejected samples)."""


class SchemaError(SojournMcError, ValueError):
    """A config file does not match the versioned schema."""
