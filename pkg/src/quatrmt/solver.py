"""Point solvers for X = H + i H' on the slice Q = diag(z, conj z).

Non-holomorphic branch
    Step 1 turns ``B_H(g) = x + m/g`` and ``B_H'(g^I) = y + (1-m)/g^I`` into
    polynomials whose coefficients are polynomials in ``m``.  Step 2 imposes
    ``|g|^2 = |g^I|^2``; for quadratics this is the polynomial
    ``c0 d2 - d0 c2 = 0`` in ``m``.  Step 3 reads off ``G`` and ``C``.
    Every real ``m`` root is kept as an :class:`MCandidate`; only those with
    non-real conjugate pairs, positive product and ``C <= 0`` are admissible.

GUE-special branch
    With ``B_H(s) = s + 1/s`` the problem collapses to ``G_H'(h) = m - h``
    and ``h + conj h = y + m``.

Holomorphic branch
    ``B_X(s) = B_H(s) + i B_H'(i s) - 1/s = z`` cleared of denominators is a
    polynomial in ``A = G_X(z)`` with coefficients polynomial in ``z``; the
    physical root is continued from ``A ~ 1/z`` at a far anchor.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import _bipoly as bp
from .errors import (
    ContinuationError,
    DegenerateCoefficientError,
    UnsupportedDegreeError,
)
from .transforms import (
    EnsembleSpec,
    ScaledSemicircle,
    ShiftedBluePoly,
    conjugate_pairs,
    shifted_blue_mpoly,
)

REAL_ROOT_TOL = 1e-7
LEAD_TOL = 1e-13
Z_PERTURB = 1e-9
SCAN_RANGE = (-10.0, 10.0)
SCAN_POINTS = 801


class Branch(enum.Enum):
    NonHolomorphic = "NonHolomorphic"
    Holomorphic = "Holomorphic"
    Outside = "Outside"


@dataclass(frozen=True)
class MCandidate:
    """One real root of the step-2 equation with its step-1 data."""

    m: float
    g_sum: float
    g_prod: float
    gI_sum: float
    gI_prod: float
    admissible: bool

    def __post_init__(self):
        for name in ("m", "g_sum", "g_prod", "gI_sum", "gI_prod"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "admissible", bool(self.admissible))

    @property
    def C(self) -> float:
        return 0.25 * (self.g_sum**2 + self.gI_sum**2) - self.g_prod

    @property
    def G(self) -> complex:
        return complex(0.5 * self.g_sum, -0.5 * self.gI_sum)

    @property
    def im_g(self) -> float:
        return math.sqrt(max(self.g_prod - 0.25 * self.g_sum**2, 0.0))


@dataclass(frozen=True)
class NonHoloSolution:
    m: float
    g_sum: float
    g_prod: float
    gI_sum: float
    gI_prod: float
    G: complex
    C: float
    branch: Branch
    # C of the selected real m-root even where it is positive; nan if none
    c_ext: float = math.nan

    @classmethod
    def from_candidate(cls, cand: MCandidate) -> "NonHoloSolution":
        return cls(
            m=cand.m,
            g_sum=cand.g_sum,
            g_prod=cand.g_prod,
            gI_sum=cand.gI_sum,
            gI_prod=cand.gI_prod,
            G=cand.G,
            C=cand.C,
            branch=Branch.NonHolomorphic,
            c_ext=cand.C,
        )

    @classmethod
    def holomorphic(cls, G: complex, c_ext: float = math.nan, outside: bool = False) -> "NonHoloSolution":
        nan = math.nan
        return cls(
            m=nan,
            g_sum=nan,
            g_prod=nan,
            gI_sum=nan,
            gI_prod=nan,
            G=G,
            C=0.0,
            branch=Branch.Outside if outside else Branch.Holomorphic,
            c_ext=c_ext,
        )


def _admissible(g_sum: float, g_prod: float, gI_sum: float, gI_prod: float) -> bool:
    if not (g_prod > 0 and gI_prod > 0):
        return False
    if g_sum**2 >= 4 * g_prod or gI_sum**2 >= 4 * gI_prod:
        return False
    return 0.25 * (g_sum**2 + gI_sum**2) - g_prod <= 0.0


def _poly_real_roots(coeffs: np.ndarray) -> list[float]:
    """Real roots of an ascending-coefficient real polynomial, Newton-polished."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size == 0:
        raise DegenerateCoefficientError("step-2 equation vanishes identically")
    scale = np.max(np.abs(c))
    while c.size > 1 and abs(c[-1]) <= LEAD_TOL * scale:
        c = c[:-1]
    if c.size < 2:
        return []
    if c.size == 2:
        return [float(-c[0] / c[1])]
    if c.size == 3:
        # cancellation-free quadratic formula
        a0, a1, a2 = (float(v) for v in c)
        disc = a1 * a1 - 4 * a2 * a0
        if disc < -REAL_ROOT_TOL * (a1 * a1 + abs(4 * a2 * a0)):
            return []
        q = -0.5 * (a1 + math.copysign(math.sqrt(max(disc, 0.0)), a1))
        if q == 0.0:
            return [0.0, 0.0]
        return sorted([q / a2, a0 / q])
    desc = c[::-1]
    dd = np.polyder(desc)
    out = []
    for r in np.roots(desc):
        if abs(r.imag) > REAL_ROOT_TOL * (1 + abs(r)):
            continue
        x = r.real
        for _ in range(3):
            d = np.polyval(dd, x)
            if d == 0:
                break
            step = np.polyval(desc, x) / d
            x -= step
            if abs(step) <= 1e-16 * (1 + abs(x)):
                break
        out.append(float(x))
    return sorted(out)


def _check_lead(M: np.ndarray, where: str) -> None:
    if np.max(np.abs(M[-1])) <= LEAD_TOL * np.max(np.abs(M)):
        raise DegenerateCoefficientError(f"{where}: leading coefficient vanishes")


@lru_cache(maxsize=4096)
def _mpoly_h(ens: EnsembleSpec, t: float) -> np.ndarray:
    M = shifted_blue_mpoly(ens, t)
    _check_lead(M, f"{ens.kind} at t={t}")
    return M


@lru_cache(maxsize=4096)
def _mpoly_hp(ens: EnsembleSpec, t: float) -> np.ndarray:
    # the anti-Hermitian part carries m' = 1 - m
    M = bp.substitute_v_affine(shifted_blue_mpoly(ens, t), 1.0, -1.0)
    _check_lead(M, f"{ens.kind} at t={t}")
    return M


def _rows_at(M: np.ndarray, m: float) -> np.ndarray:
    return M @ (m ** np.arange(M.shape[1]))


def _candidates_quadratic(MH: np.ndarray, MHp: np.ndarray) -> list[MCandidate]:
    c0, c1, c2 = MH
    d0, d1, d2 = MHp
    E = bp.add(np.convolve(c0, d2)[None, :], -np.convolve(d0, c2)[None, :])[0]
    out = []
    for m in _poly_real_roots(E):
        a = _rows_at(MH, m)
        b = _rows_at(MHp, m)
        if abs(a[2]) <= LEAD_TOL * np.max(np.abs(a)) or abs(b[2]) <= LEAD_TOL * np.max(np.abs(b)):
            continue
        g_sum, g_prod = -a[1] / a[2], a[0] / a[2]
        gI_sum, gI_prod = -b[1] / b[2], b[0] / b[2]
        out.append(MCandidate(m, g_sum, g_prod, gI_sum, gI_prod, _admissible(g_sum, g_prod, gI_sum, gI_prod)))
    return out


def _scan_roots(f, n_funcs: int, m_lo: float, m_hi: float, n: int) -> list[tuple[int, float]]:
    """Sign changes of each component of ``f(m)`` on a uniform grid, refined with brentq.

    ``f`` returns ``n_funcs`` values, nan where a component is undefined.
    """
    ms = np.linspace(m_lo, m_hi, n)
    vals = np.array([f(m) for m in ms], dtype=float).reshape(n, n_funcs)
    found = []
    for k in range(n_funcs):
        for i in range(n - 1):
            v0, v1 = vals[i, k], vals[i + 1, k]
            if not (math.isfinite(v0) and math.isfinite(v1)) or v0 * v1 > 0:
                continue
            if v0 == 0.0:
                found.append((k, float(ms[i])))
                continue
            try:
                root = brentq(lambda m: _finite_or_raise(f(m)[k]), ms[i], ms[i + 1], xtol=1e-14)
            except ValueError:
                continue
            found.append((k, float(root)))
    return found


def _finite_or_raise(v: float) -> float:
    if not math.isfinite(v):
        raise ValueError("undefined inside bracket")
    return v


def _pairs_at(M: np.ndarray, m: float):
    return conjugate_pairs(ShiftedBluePoly(coeffs=_rows_at(M, m), t=0.0, m=m))


def _candidates_scan(MH: np.ndarray, MHp: np.ndarray) -> list[MCandidate]:
    # every (pair of H, pair of H') combination gets its own product difference
    combos = [(i, j) for i in range((MH.shape[0] - 1) // 2) for j in range((MHp.shape[0] - 1) // 2)]

    def f(m):
        pH, pHp = _pairs_at(MH, m), _pairs_at(MHp, m)
        return [pH[i].product - pHp[j].product if i < len(pH) and j < len(pHp) else math.nan
                for i, j in combos]

    out = []
    for k, m in _scan_roots(f, len(combos), *SCAN_RANGE, SCAN_POINTS):
        i, j = combos[k]
        pH, pHp = _pairs_at(MH, m), _pairs_at(MHp, m)
        if i >= len(pH) or j >= len(pHp):
            continue
        a, b = pH[i], pHp[j]
        out.append(MCandidate(m, a.sum, a.product, b.sum, b.product,
                              _admissible(a.sum, a.product, b.sum, b.product)))
    return out


def candidates_general(ensH: EnsembleSpec, ensHp: EnsembleSpec, z: complex) -> list[MCandidate]:
    """All real step-2 roots at ``z`` (admissible or not), sorted by ``m``."""
    z = complex(z)
    MH = _mpoly_h(ensH, z.real)
    MHp = _mpoly_hp(ensHp, z.imag)
    if MH.shape[0] == 3 and MHp.shape[0] == 3:
        return _candidates_quadratic(MH, MHp)
    return sorted(_candidates_scan(MH, MHp), key=lambda c: c.m)


def _best(cands: list[MCandidate]) -> MCandidate | None:
    adm = [c for c in cands if c.admissible]
    if adm:
        return max(adm, key=lambda c: c.im_g)
    return None


def _extended_c(cands: list[MCandidate]) -> float:
    if not cands:
        return math.nan
    return min(c.C for c in cands)


def _with_retry(fn, ensH, ensHp, z):
    try:
        return fn(ensH, ensHp, z)
    except DegenerateCoefficientError:
        return fn(ensH, ensHp, z + Z_PERTURB * (1 + 1j))


def solve_general(ensH: EnsembleSpec, ensHp: EnsembleSpec, z: complex, *, holomorphic: bool = True) -> NonHoloSolution:
    """Three-step solve at a single point.

    Among several admissible roots the one with the largest ``|Im g|`` is
    returned; grid solves override this by continuity.
    """
    z = complex(z)
    cands = _with_retry(candidates_general, ensH, ensHp, z)
    best = _best(cands)
    if best is not None:
        return NonHoloSolution.from_candidate(best)
    return _holo_solution(ensH, ensHp, z, _extended_c(cands), holomorphic)


def _holo_solution(ensH, ensHp, z, c_ext, holomorphic):
    if not holomorphic:
        return NonHoloSolution.holomorphic(complex(math.nan, math.nan), c_ext, outside=True)
    try:
        A = solve_holomorphic(ensH, ensHp, z)
    except (ContinuationError, UnsupportedDegreeError):
        return NonHoloSolution.holomorphic(complex(math.nan, math.nan), c_ext, outside=True)
    return NonHoloSolution.holomorphic(A, c_ext)


# --- GUE-special path -------------------------------------------------------


@lru_cache(maxsize=64)
def _h_mpoly(ensHp: EnsembleSpec) -> np.ndarray:
    """``P_H'(m - h, h)`` as a bivariate array ``[i_h, j_m]``."""
    p = ensHp.relation()
    s = np.array([[0.0, 1.0], [-1.0, 0.0]])  # m - h
    w = np.array([[0.0], [1.0]])  # h
    out = np.zeros((1, 1))
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            if p[i, j] != 0.0:
                out = bp.add(out, p[i, j] * bp.mul(bp.power(s, i), bp.power(w, j)))
    return bp.trim(out)


def _gue_candidate(x: float, y: float, m: float, h_sum: float, h_prod: float) -> MCandidate:
    # map back to the step-3 variables of the general algorithm:
    # g + conj g = x, g^I + conj g^I = m - y, |g|^2 = |g^I|^2 = h_prod - y m
    p = h_prod - y * m
    adm = h_prod > 0 and h_sum**2 < 4 * h_prod and 0.25 * (x * x + h_sum**2) - h_prod <= 0.0
    return MCandidate(1.0 - p, x, p, m - y, p, bool(adm))


def candidates_gue_special(ensHp: EnsembleSpec, z: complex) -> list[MCandidate]:
    z = complex(z)
    x, y = z.real, z.imag
    R = _h_mpoly(ensHp)
    deg = R.shape[0] - 1
    out = []
    if deg == 2:
        a0, a1, a2 = R
        # -a1/a2 = y + m
        eq = bp.add(-a1[None, :], -np.convolve(a2, [y, 1.0])[None, :])[0]
        for m in _poly_real_roots(eq):
            c = _rows_at(R, m)
            if abs(c[2]) <= LEAD_TOL * np.max(np.abs(c)):
                continue
            out.append(_gue_candidate(x, y, m, y + m, c[0] / c[2]))
    elif deg == 3:
        a = list(R)
        # real root rho = -a2/a3 - (y + m) = num/a3
        num = bp.add(-a[2][None, :], -np.convolve(a[3], [y, 1.0])[None, :])[0]
        eq = np.zeros(1)
        for k in range(4):
            term = a[k]
            for _ in range(k):
                term = np.convolve(term, num)
            for _ in range(3 - k):
                term = np.convolve(term, a[3])
            eq = bp.add(eq[None, :], term[None, :])[0]
        for m in _poly_real_roots(eq):
            c = _rows_at(R, m)
            rho = -c[2] / c[3] - (y + m)
            if abs(c[3]) <= LEAD_TOL * np.max(np.abs(c)) or rho == 0.0:
                continue
            out.append(_gue_candidate(x, y, m, y + m, -c[0] / (c[3] * rho)))
    else:
        n_pairs = deg // 2

        def f(m):
            pairs = _pairs_at(R, m)
            return [pairs[k].sum - (y + m) if k < len(pairs) else math.nan for k in range(n_pairs)]

        for k, m in _scan_roots(f, n_pairs, *SCAN_RANGE, SCAN_POINTS):
            pairs = _pairs_at(R, m)
            if k < len(pairs):
                out.append(_gue_candidate(x, y, m, y + m, pairs[k].product))
    return sorted(out, key=lambda c: c.m)


def solve_gue_special(ensHp: EnsembleSpec, z: complex, *, holomorphic: bool = True) -> NonHoloSolution:
    """Two-unknown solve for ``H`` a unit semicircle; ``G = (z - i m)/2``."""
    z = complex(z)
    try:
        cands = candidates_gue_special(ensHp, z)
    except DegenerateCoefficientError:
        cands = candidates_gue_special(ensHp, z + Z_PERTURB * (1 + 1j))
    best = _best(cands)
    if best is not None:
        return NonHoloSolution.from_candidate(best)
    return _holo_solution(ScaledSemicircle(1.0), ensHp, z, _extended_c(cands), holomorphic)


# --- holomorphic branch -----------------------------------------------------


@lru_cache(maxsize=64)
def holomorphic_poly(ensH: EnsembleSpec, ensHp: EnsembleSpec) -> np.ndarray:
    """Bivariate ``P[i_A, j_z]`` whose roots in ``A`` contain ``G_X(z)``."""
    PH = ensH.relation().astype(complex)
    PHp = ensHp.relation().astype(complex)
    A = bp.row([0.0, 1.0]).astype(complex)
    z = bp.col([0.0, 1.0]).astype(complex)
    if PHp.shape[1] == 2:
        p0 = bp.scale_u(bp.row(PHp[:, 0]), 1j)
        p1 = bp.scale_u(bp.row(PHp[:, 1]), 1j)
        N = bp.add(bp.add(bp.mul(bp.mul(z, A), p1), 1j * bp.mul(A, p0)), p1)
        D = bp.mul(A, p1)
        outer, J = PH, PH.shape[1] - 1

        def coeff(j):
            return bp.row(outer[:, j])
    elif PH.shape[1] == 2:
        q0, q1 = bp.row(PH[:, 0]), bp.row(PH[:, 1])
        N = -1j * bp.add(bp.add(bp.mul(bp.mul(z, A), q1), bp.mul(A, q0)), q1)
        D = bp.mul(A, q1)
        outer, J = PHp, PHp.shape[1] - 1

        def coeff(j):
            return bp.scale_u(bp.row(outer[:, j]), 1j)
    else:
        raise UnsupportedDegreeError("holomorphic solve needs one ensemble with a relation linear in w")
    total = np.zeros((1, 1), dtype=complex)
    for j in range(J + 1):
        term = bp.mul(coeff(j), bp.mul(bp.power(N, j), bp.power(D, J - j)))
        total = bp.add(total, term)
    return bp.trim(bp.strip_low_u(total, tol=1e-14), tol=1e-14)


def _roots_at(P: np.ndarray, z: complex) -> np.ndarray:
    c = bp.eval_v(P, np.asarray(z))
    scale = np.max(np.abs(c))
    k = c.size
    while k > 1 and abs(c[k - 1]) <= LEAD_TOL * scale:
        k -= 1
    if k < 2:
        return np.zeros(0, dtype=complex)
    return np.roots(c[:k][::-1])


def _nearest(roots: np.ndarray, target: complex) -> tuple[complex, float]:
    """Nearest root and the ratio of nearest to second-nearest distance."""
    if roots.size == 0:
        raise ContinuationError("no roots to continue on")
    d = np.abs(roots - target)
    order = np.argsort(d)
    ratio = 0.0 if roots.size == 1 else d[order[0]] / max(d[order[1]], 1e-300)
    return complex(roots[order[0]]), float(ratio)


def track_root(P: np.ndarray, z_from: complex, A_from: complex, z_to: complex, *, max_steps: int = 20000) -> complex:
    """Continue a root of ``P(., z)`` along the segment ``z_from -> z_to``."""
    z, A = complex(z_from), complex(A_from)
    total = abs(z_to - z)
    if total == 0:
        return _nearest(_roots_at(P, z), A)[0]
    unit = (z_to - z) / total
    done, slope = 0.0, 0.0
    h = min(total, 0.1 * (1 + abs(z)))
    for _ in range(max_steps):
        step = min(h, total - done)
        z_new = z + step * unit
        pred = A + slope * (z_new - z)
        A_new, ratio = _nearest(_roots_at(P, z_new), pred)
        if ratio > 0.3 and step > 1e-12 * (1 + abs(z)):
            h = step / 2
            continue
        slope = (A_new - A) / (z_new - z)
        z, A = z_new, A_new
        done += step
        if done >= total * (1 - 1e-15):
            return A
        h = min(step * 1.5, 0.25 * (1 + abs(z)))
    raise ContinuationError(f"root continuation to {z_to} did not finish")


def support_centre(ensH: EnsembleSpec, ensHp: EnsembleSpec) -> complex:
    lo, hi = ensH.hull()
    loI, hiI = ensHp.hull()
    return complex(0.5 * (lo + hi), 0.5 * (loI + hiI))


def far_anchor(z: complex, centre: complex, radius: float = 1e3) -> tuple[complex, complex]:
    d = z - centre
    direction = d / abs(d) if abs(d) > 0 else 1j
    z0 = centre + radius * direction
    return z0, 1.0 / z0


def solve_holomorphic(ensH: EnsembleSpec, ensHp: EnsembleSpec, z: complex, *, centre: complex | None = None) -> complex:
    """Holomorphic ``G_X(z)``: the root ~1/z at infinity continued radially inward."""
    z = complex(z)
    P = holomorphic_poly(ensH, ensHp)
    if centre is None:
        centre = support_centre(ensH, ensHp)
    z0, guess = far_anchor(z, centre)
    A0, _ = _nearest(_roots_at(P, z0), guess)
    return track_root(P, z0, A0, z)


def holomorphic_along(ensH: EnsembleSpec, ensHp: EnsembleSpec, points: np.ndarray) -> np.ndarray:
    """Holomorphic branch along an ordered polyline.

    The topmost point is reached vertically from far above, so the approach
    never crosses the domain it bounds; the root is then continued from
    vertex to vertex in both directions.
    """
    P = holomorphic_poly(ensH, ensHp)
    pts = np.asarray(points, dtype=complex)
    out = np.empty(pts.size, dtype=complex)
    k0 = int(np.argmax(pts.imag))
    z0 = pts[k0] + 1e3j
    A, _ = _nearest(_roots_at(P, z0), 1.0 / z0)
    out[k0] = track_root(P, z0, A, pts[k0])
    for step in (1, -1):
        A = out[k0]
        k = k0 + step
        while 0 <= k < pts.size:
            A = track_root(P, pts[k - step], A, pts[k])
            out[k] = A
            k += step
    return out


def _ray_clear(z: complex, polylines: list[np.ndarray], direction: int) -> bool:
    """True if the vertical ray from ``z`` (up for +1, down for -1) meets no curve."""
    for p in polylines:
        x0, y0, x1, y1 = p[:-1, 0], p[:-1, 1], p[1:, 0], p[1:, 1]
        span = (np.minimum(x0, x1) <= z.real) & (z.real < np.maximum(x0, x1))
        if not span.any():
            continue
        t = (z.real - x0[span]) / (x1[span] - x0[span])
        y = y0[span] + t * (y1[span] - y0[span])
        if np.any(direction * (y - z.imag) > 1e-12):
            return False
    return True


def holomorphic_on_curves(ensH: EnsembleSpec, ensHp: EnsembleSpec, polylines: list[np.ndarray]) -> list[np.ndarray]:
    """Holomorphic branch at every vertex of a set of closed curves.

    Each vertex is reached along a vertical ray from whichever side does not
    meet any curve, so the path stays outside the domain; following the
    curve itself could pass through a branch point where it touches the
    real axis.  Vertices with both rays blocked use the radial trace.
    """
    P = holomorphic_poly(ensH, ensHp)
    out = []
    for p in polylines:
        vals = np.empty(len(p), dtype=complex)
        for k, (x, y) in enumerate(p):
            z = complex(x, y)
            for direction in (1, -1):
                if _ray_clear(z, polylines, direction):
                    z0 = z + direction * 1e3j
                    A0, _ = _nearest(_roots_at(P, z0), 1.0 / z0)
                    vals[k] = track_root(P, z0, A0, z)
                    break
            else:
                vals[k] = solve_holomorphic(ensH, ensHp, z)
        out.append(vals)
    return out


def holomorphic_fill(ensH: EnsembleSpec, ensHp: EnsembleSpec, Z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Holomorphic ``G`` on the masked cells of a grid by breadth-first continuation.

    Each connected component is seeded at its first cell (raster order) by a
    radial trace; neighbours take the root nearest to the parent's value.
    """
    P = holomorphic_poly(ensH, ensHp)
    centre = support_centre(ensH, ensHp)
    ny, nx = Z.shape
    out = np.full(Z.shape, complex(math.nan, math.nan))
    seen = np.zeros(Z.shape, dtype=bool)
    for iy in range(ny):
        for ix in range(nx):
            if not mask[iy, ix] or seen[iy, ix]:
                continue
            try:
                out[iy, ix] = solve_holomorphic(ensH, ensHp, Z[iy, ix], centre=centre)
            except ContinuationError:
                continue
            seen[iy, ix] = True
            queue = deque([(iy, ix)])
            while queue:
                cy, cx = queue.popleft()
                for ny_, nx_ in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                    if 0 <= ny_ < ny and 0 <= nx_ < nx and mask[ny_, nx_] and not seen[ny_, nx_]:
                        try:
                            out[ny_, nx_] = track_root(P, Z[cy, cx], out[cy, cx], Z[ny_, nx_])
                        except ContinuationError:
                            continue
                        seen[ny_, nx_] = True
                        queue.append((ny_, nx_))
    return out
