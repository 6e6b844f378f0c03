"""Exception hierarchy shared by all modules."""


class QuatRMTError(Exception):
    """Base class for every error raised by this package."""


class DomainError(QuatRMTError, ValueError):
    """Input outside the mathematical domain of an operation (non-finite, bad parameter)."""


class SingularQuaternionError(QuatRMTError, ZeroDivisionError):
    pass


class NotDiagonalizableError(QuatRMTError):
    """Degenerate or already-diagonal quaternion handed to the explicit diagonalizer."""


class PoleError(QuatRMTError, ZeroDivisionError):
    """Evaluation exactly at a pole, atom or branch point."""


class DegenerateCoefficientError(QuatRMTError):
    """Leading polynomial coefficient vanishes at the requested point."""


class NoNonHoloSolution(QuatRMTError):
    """No admissible non-real conjugate root pair: the point lies outside the eigenvalue domain."""


class UnsupportedDegreeError(QuatRMTError):
    pass


class ContinuationError(QuatRMTError):
    """Branch tracking of the holomorphic solution lost the root."""


class DecompositionError(QuatRMTError):
    """Dense eigendecomposition failed or produced an inaccurate factorization."""


class ConfigError(QuatRMTError, ValueError):
    pass
