"""Hermitian ensembles and their holomorphic Green's and Blue's functions.

Every ensemble is described by an algebraic relation ``P(s, w) = 0`` tying
the Green's function value ``s = G(w)`` to its argument; the same relation
read the other way round, ``P(s, B(s)) = 0``, defines the Blue's function.
The relation is what powers the polynomial machinery of the solver: the
"shifted Blue" equation ``B(g) = t + m/g`` becomes, after clearing
denominators, a polynomial in ``g`` whose coefficients are polynomials in
``m``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from . import _bipoly as bp
from .errors import (
    DegenerateCoefficientError,
    DomainError,
    NoNonHoloSolution,
    PoleError,
    UnsupportedDegreeError,
)

PAIR_TOL = 1e-9
_REAL_TOL = 1e-12


def _finite(name: str, *vals: float) -> None:
    for v in vals:
        if not math.isfinite(v):
            raise DomainError(f"{name}: parameters must be finite, got {vals!r}")


def _edge_sqrt(z: complex, e1: float, e2: float) -> complex:
    """``sqrt((z-e1)(z-e2))`` with the cut on [e1, e2] and ~z at infinity."""
    return cmath.sqrt(z - e1) * cmath.sqrt(z - e2)


class EnsembleSpec:
    """Base class for the catalog of Hermitian ensembles."""

    kind: ClassVar[str]

    def green(self, z: complex) -> complex:
        raise NotImplementedError

    def blue(self, s: complex) -> complex:
        raise NotImplementedError

    def relation(self) -> np.ndarray:
        """Coefficients ``P[i, j]`` of ``s**i w**j`` in ``P(s, w) = 0``."""
        raise NotImplementedError

    def support(self) -> list[tuple[float, float]]:
        """Closed intervals carrying the spectrum; atoms are degenerate intervals."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def hull(self) -> tuple[float, float]:
        sup = self.support()
        return min(lo for lo, _ in sup), max(hi for _, hi in sup)

    def singular_shifts(self) -> tuple[float, ...]:
        """Shifts ``t`` where the shifted Blue polynomial loses its leading term."""
        return ()

    def green_is_linear_in_w(self) -> bool:
        return self.relation().shape[1] == 2

    def _check_off_support(self, z: complex) -> None:
        if z.imag != 0.0:
            return
        x = z.real
        for lo, hi in self.support():
            if lo == hi:
                if x == lo:
                    raise PoleError(f"{self.kind}: z = {x} is an atom")
            elif x == lo or x == hi:
                raise PoleError(f"{self.kind}: z = {x} is a branch point")
            elif lo < x < hi:
                raise DomainError(
                    f"{self.kind}: real z = {x} lies on the cut; pass z +/- i*eps explicitly"
                )


@dataclass(frozen=True)
class ScaledSemicircle(EnsembleSpec):
    """GUE-type ensemble with ``B(s) = r s + 1/s`` (semicircle of radius 2 sqrt(r))."""

    r: float = 1.0
    kind: ClassVar[str] = "semicircle"

    def __post_init__(self):
        _finite(self.kind, self.r)
        if self.r <= 0:
            raise DomainError("semicircle: r must be positive")

    @property
    def edge(self) -> float:
        return 2.0 * math.sqrt(self.r)

    def green(self, z: complex) -> complex:
        z = complex(z)
        self._check_off_support(z)
        e = self.edge
        return 2.0 / (z + _edge_sqrt(z, -e, e))

    def blue(self, s: complex) -> complex:
        s = complex(s)
        if s == 0:
            raise PoleError("semicircle: Blue's function has a pole at 0")
        return self.r * s + 1.0 / s

    def relation(self) -> np.ndarray:
        p = np.zeros((3, 2))
        p[0, 0], p[1, 1], p[2, 0] = 1.0, -1.0, self.r
        return p

    def support(self):
        return [(-self.edge, self.edge)]

    def to_json(self) -> dict:
        return {"kind": self.kind, "r": self.r}


@dataclass(frozen=True)
class WishartLike(EnsembleSpec):
    """Ensemble with ``B(s) = -c r/(1 + c s) + 1/s``.

    This is a free Poisson law of rate ``r`` and jump ``-c``: for ``c > 0``
    the spectrum sits on the negative axis, between ``-c(1 + sqrt r)**2``
    and ``-c(1 - sqrt r)**2``, with an extra atom of mass ``1 - r`` at 0
    when ``r < 1``.
    """

    c: float = 1.0
    r: float = 1.0
    kind: ClassVar[str] = "wishart"

    def __post_init__(self):
        _finite(self.kind, self.c, self.r)
        if self.c <= 0 or self.r <= 0:
            raise DomainError("wishart: c and r must be positive")

    @property
    def edges(self) -> tuple[float, float]:
        sr = math.sqrt(self.r)
        e1, e2 = -self.c * (1 + sr) ** 2, -self.c * (1 - sr) ** 2
        return (min(e1, e2), max(e1, e2))

    def green(self, z: complex) -> complex:
        z = complex(z)
        self._check_off_support(z)
        c, r = self.c, self.r
        b = z + c * r - c
        den = b + _edge_sqrt(z, *self.edges)
        if den == 0:
            raise PoleError("wishart: z = 0 is an atom")
        return 2.0 / den

    def blue(self, s: complex) -> complex:
        s = complex(s)
        if s == 0:
            raise PoleError("wishart: Blue's function has a pole at 0")
        if 1.0 + self.c * s == 0:
            raise PoleError("wishart: Blue's function has a pole at -1/c")
        return -self.c * self.r / (1.0 + self.c * s) + 1.0 / s

    def relation(self) -> np.ndarray:
        # c w s^2 + (w + c r - c) s - 1 = 0
        c, r = self.c, self.r
        p = np.zeros((3, 2))
        p[0, 0] = -1.0
        p[1, 0] = c * r - c
        p[1, 1] = 1.0
        p[2, 1] = c
        return p

    def singular_shifts(self) -> tuple[float, ...]:
        return (0.0,)

    def support(self):
        sup = [self.edges]
        if self.r < 1:
            sup.append((0.0, 0.0))
        return sup

    def to_json(self) -> dict:
        return {"kind": self.kind, "c": self.c, "r": self.r}


@dataclass(frozen=True)
class AtomicGeneral(EnsembleSpec):
    """Deterministic spectrum ``sum_k w_k delta(lambda - lambda_k)``."""

    atoms: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    kind: ClassVar[str] = "atoms"

    def __post_init__(self):
        atoms = tuple((float(lam), float(w)) for lam, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise DomainError("atoms: need at least one atom")
        for lam, w in atoms:
            _finite(self.kind, lam, w)
            if w <= 0:
                raise DomainError("atoms: weights must be positive")
        if abs(sum(w for _, w in atoms) - 1.0) > 1e-12:
            raise DomainError("atoms: weights must sum to 1")

    def green(self, z: complex) -> complex:
        z = complex(z)
        self._check_off_support(z)
        return sum(w / (z - lam) for lam, w in self.atoms)

    def blue(self, s: complex) -> complex:
        s = complex(s)
        if s == 0:
            raise PoleError(f"{self.kind}: Blue's function has a pole at 0")
        # G(w) = s; the branch ~1/s at small s is the largest-modulus preimage
        roots = np.roots(self._preimage_poly(s)[::-1])
        return complex(roots[np.argmax(np.abs(roots))])

    def _preimage_poly(self, s: complex) -> np.ndarray:
        p = self.relation()
        return sum(p[i] * s**i for i in range(p.shape[0]))

    def relation(self) -> np.ndarray:
        # s * prod(w - lam) - sum_k w_k prod_{j != k}(w - lam_j) = 0
        lams = [lam for lam, _ in self.atoms]
        full = np.array([1.0])
        for lam in lams:
            full = np.convolve(full, [-lam, 1.0])
        rest = np.zeros(len(lams))
        for k, (_, wk) in enumerate(self.atoms):
            part = np.array([1.0])
            for j, lam in enumerate(lams):
                if j != k:
                    part = np.convolve(part, [-lam, 1.0])
            rest[: part.size] += wk * part
        p = np.zeros((2, len(lams) + 1))
        p[1] = full
        p[0, : rest.size] = -rest
        return p

    def support(self):
        return [(lam, lam) for lam, _ in self.atoms]

    def singular_shifts(self) -> tuple[float, ...]:
        return tuple(sorted(lam for lam, _ in self.atoms))

    def to_json(self) -> dict:
        return {"kind": self.kind, "atoms": [list(a) for a in self.atoms]}


@dataclass(frozen=True)
class AtomicTwoPoint(AtomicGeneral):
    """Atoms of weight 1/2 at ``+mu`` and ``-mu``."""

    mu: float = 1.0
    atoms: tuple[tuple[float, float], ...] = field(init=False, default=())
    kind: ClassVar[str] = "two_atoms"

    def __post_init__(self):
        _finite(self.kind, self.mu)
        if self.mu <= 0:
            raise DomainError("two_atoms: mu must be positive")
        object.__setattr__(self, "atoms", ((-self.mu, 0.5), (self.mu, 0.5)))
        super().__post_init__()

    def green(self, z: complex) -> complex:
        z = complex(z)
        self._check_off_support(z)
        mu = self.mu
        return 0.5 * (1.0 / (z - mu) + 1.0 / (z + mu))

    def blue(self, s: complex) -> complex:
        s = complex(s)
        if s == 0:
            raise PoleError("two_atoms: Blue's function has a pole at 0")
        return (1.0 + cmath.sqrt(1.0 + 4.0 * self.mu**2 * s * s)) / (2.0 * s)

    def to_json(self) -> dict:
        return {"kind": self.kind, "mu": self.mu}


_KINDS = {
    "semicircle": (ScaledSemicircle, {"r"}),
    "wishart": (WishartLike, {"c", "r"}),
    "two_atoms": (AtomicTwoPoint, {"mu"}),
    "atoms": (AtomicGeneral, {"atoms"}),
}


def ensemble_from_json(obj: dict) -> EnsembleSpec:
    """Parse ``{"kind": ..., params...}``; unknown kinds or fields are rejected."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise DomainError(f"ensemble must be an object with a 'kind' field, got {obj!r}")
    kind = obj["kind"]
    if kind not in _KINDS:
        raise DomainError(f"unknown ensemble kind {kind!r}; expected one of {sorted(_KINDS)}")
    cls, fields = _KINDS[kind]
    params = {k: v for k, v in obj.items() if k != "kind"}
    extra = set(params) - fields
    missing = fields - set(params)
    if extra or missing:
        raise DomainError(
            f"{kind}: expected fields {sorted(fields)}, unknown {sorted(extra)}, missing {sorted(missing)}"
        )
    if kind == "atoms":
        params["atoms"] = tuple(tuple(a) for a in params["atoms"])
    else:
        params = {k: float(v) for k, v in params.items()}
    return cls(**params)


def green(ens: EnsembleSpec, z: complex) -> complex:
    return ens.green(z)


def blue(ens: EnsembleSpec, s: complex) -> complex:
    return ens.blue(s)


# --- shifted Blue polynomials -------------------------------------------------


@dataclass(frozen=True)
class ShiftedBluePoly:
    """Polynomial in ``g`` (ascending coefficients) solving ``B(g) = t + m/g``."""

    coeffs: np.ndarray
    t: float = math.nan
    m: float = math.nan

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, g):
        return np.polynomial.polynomial.polyval(g, self.coeffs)

    def roots(self) -> np.ndarray:
        return np.roots(self.coeffs[::-1])


def shifted_blue_mpoly(ens: EnsembleSpec, t: float) -> np.ndarray:
    """Coefficient array ``M[i, j]`` of ``g**i m**j`` for ``B(g) = t + m/g``.

    Obtained from the ensemble relation by substituting ``w = (t g + m)/g``
    and clearing the powers of ``g``.
    """
    p = ens.relation()
    J = p.shape[1] - 1
    shift = np.array([[0.0, 1.0], [t, 0.0]])  # t*g + m
    out = np.zeros((1, 1))
    for j in range(J + 1):
        gj = np.zeros((p.shape[0] + J - j, 1))
        gj[J - j:, 0] = p[:, j]
        out = bp.add(out, bp.mul(gj, bp.power(shift, j)))
    # g = 0 is a spurious root of the cleared form
    out = bp.strip_low_u(out, tol=1e-15)
    return out


def _eval_rows(M: np.ndarray, m: float) -> np.ndarray:
    return M @ (m ** np.arange(M.shape[1]))


def _check_leading(coeffs: np.ndarray, where: str) -> None:
    scale = np.max(np.abs(coeffs))
    if scale == 0 or abs(coeffs[-1]) <= 1e-13 * scale:
        raise DegenerateCoefficientError(f"{where}: leading coefficient vanishes")


def shifted_blue_poly(ens: EnsembleSpec, t: float, m: float) -> ShiftedBluePoly:
    _finite("shifted_blue_poly", t, m)
    coeffs = _eval_rows(shifted_blue_mpoly(ens, t), m)
    _check_leading(coeffs, f"{ens.kind} at t={t}, m={m}")
    return ShiftedBluePoly(coeffs=coeffs, t=t, m=m)


def viete_symmetric(poly: ShiftedBluePoly) -> tuple[complex, complex]:
    """Sum and product of the two roots of a quadratic."""
    if poly.degree != 2:
        raise UnsupportedDegreeError(f"Viete rules need degree 2, got {poly.degree}")
    c0, c1, c2 = poly.coeffs
    return complex(-c1 / c2), complex(c0 / c2)


@dataclass(frozen=True)
class ConjugatePair:
    root: complex  # member with positive imaginary part
    sum: float
    product: float


def conjugate_pairs(poly: ShiftedBluePoly, tol: float = PAIR_TOL) -> list[ConjugatePair]:
    """All non-real conjugate root pairs, largest ``|Im g|`` first."""
    coeffs = np.asarray(poly.coeffs)
    if np.iscomplexobj(coeffs):
        if np.max(np.abs(coeffs.imag)) > _REAL_TOL * np.max(np.abs(coeffs)):
            raise DomainError("conjugate pairs need real polynomial coefficients")
        coeffs = coeffs.real
    if poly.degree == 2:
        c0, c1, c2 = coeffs
        s, p = -c1 / c2, c0 / c2
        disc = s * s - 4 * p
        if disc >= 0:
            return []
        root = complex(s / 2, math.sqrt(-disc) / 2)
        if root.imag <= tol * (1 + abs(root)):
            return []
        return [ConjugatePair(root, s, p)]
    roots = np.roots(coeffs[::-1])
    upper = [r for r in roots if r.imag > tol * (1 + abs(r))]
    lower = [r for r in roots if r.imag < -tol * (1 + abs(r))]
    pairs = []
    for r in upper:
        if not lower:
            break
        k = int(np.argmin([abs(r - l.conjugate()) for l in lower]))
        if abs(r - lower[k].conjugate()) <= max(tol, 1e-7) * (1 + abs(r)):
            lower.pop(k)
            pairs.append(ConjugatePair(complex(r), 2 * r.real, abs(r) ** 2))
    pairs.sort(key=lambda pr: -pr.root.imag)
    return pairs


def conjugate_pair_roots(poly: ShiftedBluePoly) -> tuple[float, float]:
    """Sum and product of the selected non-real conjugate pair.

    With several pairs the one with the largest ``|Im g|`` is returned; grid
    sweeps override this by continuity.
    """
    pairs = conjugate_pairs(poly)
    if not pairs:
        raise NoNonHoloSolution("no non-real conjugate root pair")
    return pairs[0].sum, pairs[0].product
