"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are inconsistent or empty."""


class DomainError(ValueError):
    """An argument lies outside the domain where the operation is defined."""


class StructureError(ValueError):
    """A sparse matrix does not have the block structure a solver requires."""


class SolverError(RuntimeError):
    """A linear solve failed; carries an estimate of the smallest singular value."""

    def __init__(self, message, sigma_min=None):
        super().__init__(message)
        self.sigma_min = sigma_min


class DegenerateStateError(ValueError):
    """A state vector with zero norm cannot be normalised."""
