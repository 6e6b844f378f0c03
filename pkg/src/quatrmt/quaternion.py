"""Quaternions in the 2x2 complex representation.

A quaternion ``x0 + i (x1 s1 + x2 s2 + x3 s3)`` (s_k the Pauli matrices) is
stored as the complex pair ``(a, b)`` of the matrix::

    [[a,      i*conj(b)],
     [i*b,    conj(a)  ]]

with ``a = x0 + i x3`` and ``b = x1 + i x2``.  All values are immutable and
every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotDiagonalizableError, SingularQuaternionError

DEGENERACY_EPS = 1e-12


@dataclass(frozen=True, slots=True)
class Quaternion:
    a: complex
    b: complex

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))

    @property
    def coords(self) -> tuple[float, float, float, float]:
        return (self.a.real, self.b.real, self.b.imag, self.a.imag)

    @property
    def x0(self) -> float:
        return self.a.real

    @property
    def vec_norm(self) -> float:
        """Length of the imaginary 3-vector |x|."""
        return math.hypot(self.b.real, self.b.imag, self.a.imag)

    def matrix(self) -> np.ndarray:
        a, b = self.a, self.b
        return np.array([[a, 1j * b.conjugate()], [1j * b, a.conjugate()]])

    @classmethod
    def from_matrix(cls, m, *, atol: float = 1e-9) -> "Quaternion":
        m = np.asarray(m, dtype=complex)
        a, b = m[0, 0], -1j * m[1, 0]
        q = cls(a, b)
        if not np.allclose(q.matrix(), m, atol=atol, rtol=0.0):
            raise DomainError("matrix is not of quaternion form")
        return q

    @classmethod
    def scalar(cls, x: complex) -> "Quaternion":
        """``x`` times the identity; only quaternion-valued for real ``x``."""
        return cls(x, 0.0)

    def det(self) -> float:
        return abs(self.a) ** 2 + abs(self.b) ** 2

    def trace(self) -> float:
        return 2.0 * self.a.real

    def dagger(self) -> "Quaternion":
        """Hermitian conjugate, which is also the quaternion conjugate."""
        return Quaternion(self.a.conjugate(), -self.b)

    def is_degenerate(self, eps: float = DEGENERACY_EPS) -> bool:
        return self.vec_norm <= eps * (1.0 + abs(self.x0))

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.a - other.a, self.b - other.b)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.a, -self.b)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        s = float(other)  # only real scalars keep quaternion form
        return Quaternion(self.a * s, self.b * s)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "Quaternion":
        s = float(s)
        return Quaternion(self.a / s, self.b / s)

    def norm_diff(self, other: "Quaternion") -> float:
        return math.sqrt(abs(self.a - other.a) ** 2 + abs(self.b - other.b) ** 2)


IDENTITY = Quaternion(1.0, 0.0)
# i*sigma_3 = diag(i, -i): the right factor of the I-rotation
I_SIGMA3 = Quaternion(1j, 0.0)


@dataclass(frozen=True, slots=True)
class QuaternionEigenpair:
    q: complex
    qbar: complex

    @property
    def degenerate(self) -> bool:
        return self.q == self.qbar


@dataclass(frozen=True)
class Diagonalizer:
    """``s_inv @ diag(q, qbar) @ s`` reconstructs the quaternion."""

    s: np.ndarray
    s_inv: np.ndarray
    q: complex
    qbar: complex

    def reconstruct(self) -> np.ndarray:
        return self.s_inv @ np.diag([self.q, self.qbar]) @ self.s


def quat_from_coords(x0: float, x1: float, x2: float, x3: float) -> Quaternion:
    xs = (x0, x1, x2, x3)
    if not all(math.isfinite(v) for v in xs):
        raise DomainError(f"non-finite quaternion coordinates {xs!r}")
    return Quaternion(complex(x0, x3), complex(x1, x2))


def quat_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    # first column of the 2x2 product is enough to fix (a, b)
    a = p.a * q.a + 1j * p.b.conjugate() * 1j * q.b
    ib = 1j * p.b * q.a + p.a.conjugate() * 1j * q.b
    return Quaternion(a, -1j * ib)


def quat_inv(q: Quaternion) -> Quaternion:
    d = q.det()
    if d == 0.0:
        raise SingularQuaternionError("quaternion with zero determinant has no inverse")
    return Quaternion(q.a.conjugate() / d, -q.b / d)


def quat_eigenvalues(q: Quaternion) -> QuaternionEigenpair:
    """Eigenvalues ``x0 +/- i|x|``; the one with non-negative imaginary part first."""
    x0 = q.x0
    if q.is_degenerate():
        return QuaternionEigenpair(complex(x0, 0.0), complex(x0, 0.0))
    r = q.vec_norm
    return QuaternionEigenpair(complex(x0, r), complex(x0, -r))


def i_rotate(q: Quaternion) -> Quaternion:
    """``Q i sigma_3``: maps (a, b) to (i a, i b)."""
    return Quaternion(1j * q.a, 1j * q.b)


def diagonalize(q: Quaternion) -> Diagonalizer:
    """Explicit similarity transform bringing ``q`` to ``diag(q, qbar)``.

    Only defined for non-degenerate quaternions with ``b != 0``; the
    degenerate and the already diagonal cases need no transformation and
    raise :class:`NotDiagonalizableError` so that callers branch explicitly.
    """
    if q.is_degenerate():
        raise NotDiagonalizableError("degenerate quaternion x0*1 is already diagonal")
    scale = 1.0 + math.sqrt(q.det())
    if abs(q.b) <= DEGENERACY_EPS * scale:
        raise NotDiagonalizableError("quaternion with b == 0 is already diagonal")
    ev = quat_eigenvalues(q)
    lam, lamb = ev.q, ev.qbar
    a, b = q.a, q.b
    s = np.array([[1j * b, lam - a], [lamb - a.conjugate(), 1j * b.conjugate()]])
    qa = lam - a
    s_inv = np.array([[1j * b.conjugate() / qa, -1.0], [1.0, 1j * b / qa]]) / (lam - lamb)
    return Diagonalizer(s=s, s_inv=s_inv, q=lam, qbar=lamb)


def random_quaternion(rng: np.random.Generator, scale: float = 1.0) -> Quaternion:
    x = rng.normal(scale=scale, size=4)
    return quat_from_coords(*map(float, x))

