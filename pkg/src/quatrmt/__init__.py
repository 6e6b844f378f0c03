"""Spectra of non-Hermitian sums H + iH' of free Hermitian ensembles via quaternion free probability."""

from importlib.metadata import PackageNotFoundError, version

from .errors import (
    ConfigError,
    ContinuationError,
    DecompositionError,
    DegenerateCoefficientError,
    DomainError,
    NoNonHoloSolution,
    NotDiagonalizableError,
    PoleError,
    QuatRMTError,
    SingularQuaternionError,
    UnsupportedDegreeError,
)
from .grid import BorderlineCurve, SpectralGrid, borderline, density, solve_grid, trace_borderline
from .qcalculus import qblue_hermitian, qblue_scaled, qblue_sum, qgreen_hermitian
from .quaternion import Quaternion, diagonalize, i_rotate, quat_eigenvalues, quat_inv
from .references import Ginibre, Pastur, Scattering, closed_form_reference
from .solver import Branch, NonHoloSolution, solve_general, solve_gue_special, solve_holomorphic
from .transforms import (
    AtomicGeneral,
    AtomicTwoPoint,
    EnsembleSpec,
    ScaledSemicircle,
    WishartLike,
    blue,
    conjugate_pairs,
    ensemble_from_json,
    green,
    shifted_blue_poly,
)

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"
