"""Closed-form solutions for three exactly solvable ensemble pairs.

They are evaluated as plain formulas: outside the eigenvalue domain the
returned ``G`` and ``C`` are the analytic continuations of the interior
expressions (``C > 0`` there) and the branch is tagged Holomorphic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import PoleError
from .solver import Branch, NonHoloSolution
from .transforms import AtomicTwoPoint, EnsembleSpec, ScaledSemicircle, WishartLike


@dataclass(frozen=True)
class Ginibre:
    """Semicircle(r) + i semicircle(r')."""

    r: float = 1.0
    rp: float = 1.0

    def ensembles(self) -> tuple[EnsembleSpec, EnsembleSpec]:
        return ScaledSemicircle(self.r), ScaledSemicircle(self.rp)

    def singular_lines(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return (), ()

    def semi_axes(self) -> tuple[float, float]:
        s = math.sqrt(self.r + self.rp)
        return 2 * self.r / s, 2 * self.rp / s

    def density(self) -> float:
        return (self.r + self.rp) / (4 * math.pi * self.r * self.rp)

    def solve(self, x: float, y: float) -> NonHoloSolution:
        r, rp = self.r, self.rp
        m = rp / (r + rp)
        p = 1.0 / (r + rp)
        return _solution(m, x / r, p, y / rp, p)

    def borderline_residual(self, x: float, y: float) -> float:
        return x * x / self.r**2 + y * y / self.rp**2 - 4.0 / (self.r + self.rp)


@dataclass(frozen=True)
class Scattering:
    """Unit semicircle + i WishartLike(c, r)."""

    c: float = 1.0
    r: float = 1.0

    def ensembles(self) -> tuple[EnsembleSpec, EnsembleSpec]:
        return ScaledSemicircle(1.0), WishartLike(self.c, self.r)

    def singular_lines(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return (), (0.0, 1.0 / self.c)

    def _check(self, y: float) -> None:
        if y == 0.0 or y * self.c == 1.0:
            raise PoleError(f"scattering closed form is singular at y = {y}")

    def _im_sum(self, y: float) -> float:
        c, r = self.c, self.r
        return c / (y * c - 1) - r / y - 1 / c

    def solve(self, x: float, y: float) -> NonHoloSolution:
        self._check(y)
        c = self.c
        m = y * c / (y * c - 1)
        p = 1.0 / (1.0 - y * c)
        return _solution(m, x, p, self._im_sum(y), p)

    def borderline_residual(self, x: float, y: float) -> float:
        self._check(y)
        return x * x + self._im_sum(y) ** 2 - 4.0 / (1.0 - y * self.c)


@dataclass(frozen=True)
class Pastur:
    """Two atoms at +-mu + i unit semicircle."""

    mu: float = 0.5

    def ensembles(self) -> tuple[EnsembleSpec, EnsembleSpec]:
        return AtomicTwoPoint(self.mu), ScaledSemicircle(1.0)

    def singular_lines(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return (-self.mu, self.mu), ()

    def _check(self, x: float) -> None:
        if x * x == self.mu**2:
            raise PoleError(f"Pastur closed form is singular at x = {x}")

    def solve(self, x: float, y: float) -> NonHoloSolution:
        self._check(x)
        d = x * x - self.mu**2
        m = d + 1.0
        return _solution(m, -2 * x - x / d, m, y, m)

    def borderline_y2(self, x: float) -> float:
        """Squared height of the borderline above ``x`` (negative: no crossing)."""
        self._check(x)
        mu2 = self.mu**2
        num = -4 * mu2 * x**4 + x * x * (8 * mu2 * mu2 - 4 * mu2 - 1) + 4 * mu2 * mu2 * (1 - mu2)
        return num / (x * x - mu2) ** 2

    def borderline_residual(self, x: float, y: float) -> float:
        return y * y - self.borderline_y2(x)


def _solution(m: float, g_sum: float, g_prod: float, gI_sum: float, gI_prod: float) -> NonHoloSolution:
    G = complex(0.5 * g_sum, -0.5 * gI_sum)
    C = 0.25 * (g_sum**2 + gI_sum**2) - g_prod
    branch = Branch.NonHolomorphic if C <= 0 else Branch.Holomorphic
    return NonHoloSolution(m, g_sum, g_prod, gI_sum, gI_prod, G, C, branch, c_ext=C)


Model = Ginibre | Scattering | Pastur


def closed_form_reference(model: Model, z: complex) -> NonHoloSolution:
    z = complex(z)
    return model.solve(z.real, z.imag)

