"""Exception hierarchy shared by all eqpower modules."""


class EqPowerError(Exception):
    """Base class for all package errors."""


class NumericalError(EqPowerError):
    """A matrix or estimation quantity could not be computed."""


class PositiveDefinitenessError(NumericalError):
    """Symmetric factorization of a supposedly SPD matrix failed."""


class NonPositiveEigenvalueError(NumericalError):
    """A circulant equivalent has a DFT eigenvalue that is not strictly positive.

    Usually happens at small ``n`` for slowly decaying ACFs; increase ``n``.
    """

    def __init__(self, eigenvalue, index, n):
        self.eigenvalue = float(eigenvalue)
        self.index = int(index)
        self.n = int(n)
        super().__init__(
            f"circulant equivalent of size n={n} has eigenvalue "
            f"{self.eigenvalue:.6g} <= 0 at DFT index {self.index}; increase n"
        )


class ConstraintViolationError(EqPowerError, ValueError):
    """A power allocation violates the total/peak/positivity constraints."""


class InfeasibleConstraintsError(ConstraintViolationError):
    """The constraint set itself is empty (e.g. P_T > n * P_max)."""


class DiagnosticFailure(EqPowerError):
    """A finite-size inequality that must hold was violated."""
