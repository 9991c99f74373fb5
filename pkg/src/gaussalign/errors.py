"""Exception hierarchy shared by all modules."""


class GaussAlignError(Exception):
    """Base class for every error raised by gaussalign."""


class InvalidInputError(GaussAlignError, ValueError):
    """Input contains non-finite values or is otherwise malformed."""


class EmptyInputError(InvalidInputError):
    pass


class DimensionError(GaussAlignError, ValueError):
    """Shapes or dimensions of the inputs are incompatible."""


class NotPSDError(GaussAlignError, ValueError):
    """A matrix that must be positive semidefinite is not."""


class NotInvertibleError(GaussAlignError, ValueError):
    """A covariance that must be positive definite is singular."""


class ConstraintError(GaussAlignError, ValueError):
    """A point handed to a manifold solver violates the manifold constraint."""


class UnsupportedInputError(GaussAlignError, ValueError):
    """The requested formula does not cover the given inputs."""


class ConvergenceError(GaussAlignError, RuntimeError):
    """An iterative method failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        Residual at the last iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class UncertifiedWarning(UserWarning):
    """A solver returned a point whose global optimality it could not certify."""
