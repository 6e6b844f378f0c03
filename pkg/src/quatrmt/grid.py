"""Grid solves, density extraction and borderline tracing.

A grid solve runs in three passes:

1. every cell independently collects all real step-2 roots (parallelisable);
2. a single breadth-first sweep picks one root per cell by continuity in
   ``m``, preferring admissible roots;
3. cells without an admissible root get the holomorphic branch by
   continuation across the grid.
"""

from __future__ import annotations

import io
import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from skimage.measure import find_contours, points_in_poly

from .errors import ConfigError, DegenerateCoefficientError
from .solver import (
    Branch,
    MCandidate,
    NonHoloSolution,
    Z_PERTURB,
    candidates_general,
    candidates_gue_special,
    holomorphic_fill,
)
from .transforms import EnsembleSpec, ScaledSemicircle

BRANCH_CODES = {Branch.NonHolomorphic: 0, Branch.Holomorphic: 1, Branch.Outside: 2}
BRANCH_NAMES = {v: k.value for k, v in BRANCH_CODES.items()}
MIN_GRID = 8
CURVE_TOL = 1e-9


# --- pass 1 ----------------------------------------------------------------


def _cell_candidates(ensH, ensHp, solver: str, z: complex) -> list[MCandidate]:
    fn = candidates_gue_special if solver == "gue" else None
    for shift in (0.0, Z_PERTURB):
        zz = z + shift * (1 + 1j)
        try:
            if fn is not None:
                return fn(ensHp, zz)
            return candidates_general(ensH, ensHp, zz)
        except DegenerateCoefficientError:
            continue
    return []


def _row_candidates(args) -> list[list[MCandidate]]:
    ensH, ensHp, solver, y, xs = args
    return [_cell_candidates(ensH, ensHp, solver, complex(x, y)) for x in xs]


def grid_axis(lo: float, hi: float, n: int, singular: tuple[float, ...] = ()) -> np.ndarray:
    """Uniform axis with points on singular lines moved by half a cell."""
    xs = np.linspace(lo, hi, n)
    h = (hi - lo) / (n - 1)
    for s in singular:
        hit = np.abs(xs - s) <= 1e-9 * max(h, 1e-300)
        xs[hit] += 0.5 * h
    return xs


# --- grid container -----------------------------------------------------------


@dataclass
class SpectralGrid:
    ensH: EnsembleSpec
    ensHp: EnsembleSpec
    x: np.ndarray
    y: np.ndarray
    G: np.ndarray
    C: np.ndarray
    c_ext: np.ndarray
    m: np.ndarray
    m_ext: np.ndarray
    g_sum: np.ndarray
    g_prod: np.ndarray
    gI_sum: np.ndarray
    gI_prod: np.ndarray
    branch: np.ndarray
    rho: np.ndarray | None = None
    rho_imag_max: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def nx(self) -> int:
        return self.x.size

    @property
    def ny(self) -> int:
        return self.y.size

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    @property
    def y_range(self) -> tuple[float, float]:
        return float(self.y[0]), float(self.y[-1])

    @property
    def Z(self) -> np.ndarray:
        return self.x[None, :] + 1j * self.y[:, None]

    def cell(self, iy: int, ix: int) -> NonHoloSolution:
        code = int(self.branch[iy, ix])
        return NonHoloSolution(
            m=float(self.m[iy, ix]),
            g_sum=float(self.g_sum[iy, ix]),
            g_prod=float(self.g_prod[iy, ix]),
            gI_sum=float(self.gI_sum[iy, ix]),
            gI_prod=float(self.gI_prod[iy, ix]),
            G=complex(self.G[iy, ix]),
            C=float(self.C[iy, ix]),
            branch=Branch(BRANCH_NAMES[code]),
            c_ext=float(self.c_ext[iy, ix]),
        )

    @property
    def cells(self) -> list[NonHoloSolution]:
        return [self.cell(iy, ix) for iy in range(self.ny) for ix in range(self.nx)]

    def weights(self) -> np.ndarray:
        """Trapezoid cell areas (exactly dx*dy in the interior of a uniform grid)."""
        return np.outer(_axis_weights(self.y), _axis_weights(self.x))

    def mass(self, curve: "BorderlineCurve | None" = None, *, subcells: int = 8) -> float:
        """Integral of ``rho`` over the grid.

        With a traced ``curve`` the cells next to the borderline are cut:
        each contributes the fraction of its area inside the curves, found by
        sub-sampling, times its own density or, for outside cells, a linear
        extrapolation from the two nearest inside cells along an axis.
        """
        if self.rho is None:
            raise ConfigError("density not computed")
        w = self.weights()
        if curve is None or not curve.polylines:
            return float(np.sum(self.rho * w))
        inside = self.branch == BRANCH_CODES[Branch.NonHolomorphic]
        band = _boundary_band(inside)
        total = float(np.sum(np.where(inside & ~band, self.rho, 0.0) * w))
        iy_b, ix_b = np.nonzero(band)
        if iy_b.size == 0:
            return total
        s = (np.arange(subcells) + 0.5) / subcells - 0.5
        wx, wy = _axis_weights(self.x), _axis_weights(self.y)
        px = self.x[ix_b, None, None] + s[None, None, :] * wx[ix_b, None, None]
        py = self.y[iy_b, None, None] + s[None, :, None] * wy[iy_b, None, None]
        pts = np.column_stack([np.broadcast_to(px, (iy_b.size, subcells, subcells)).ravel(),
                               np.broadcast_to(py, (iy_b.size, subcells, subcells)).ravel()])
        parity = np.zeros(len(pts), dtype=bool)
        for poly in curve.polylines:
            parity ^= points_in_poly(pts, poly)
        frac = parity.reshape(iy_b.size, -1).mean(axis=1)
        for f, iy, ix in zip(frac, iy_b, ix_b):
            if f > 0:
                total += f * self._rho_extended(inside, iy, ix) * w[iy, ix]
        return total

    def _rho_extended(self, inside: np.ndarray, iy: int, ix: int) -> float:
        if inside[iy, ix]:
            return float(self.rho[iy, ix])
        ny, nx = inside.shape
        ext = []
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a1, b1, a2, b2 = iy + dy, ix + dx, iy + 2 * dy, ix + 2 * dx
            if 0 <= a2 < ny and 0 <= b2 < nx and inside[a1, b1] and inside[a2, b2]:
                ext.append(2 * self.rho[a1, b1] - self.rho[a2, b2])
        if not ext:
            ext = [self.rho[a, b] for a in range(max(iy - 1, 0), min(iy + 2, ny))
                   for b in range(max(ix - 1, 0), min(ix + 2, nx)) if inside[a, b]]
        return max(float(np.mean(ext)), 0.0) if ext else 0.0

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        if header:
            for key in sorted(header):
                buf.write(f"# {key}: {json.dumps(header[key], sort_keys=True)}\n")
        buf.write("x,y,re_g,im_g,c,rho,branch,m\n")
        rho = self.rho if self.rho is not None else np.full(self.C.shape, math.nan)
        for iy in range(self.ny):
            for ix in range(self.nx):
                g = self.G[iy, ix]
                row = (self.x[ix], self.y[iy], g.real, g.imag, self.C[iy, ix], rho[iy, ix])
                buf.write(",".join(_fmt(v) for v in row))
                buf.write(f",{BRANCH_NAMES[int(self.branch[iy, ix])]},{_fmt(self.m[iy, ix])}\n")
        return buf.getvalue()


def _fmt(v: float) -> str:
    return format(float(v) + 0.0, ".17g")  # no "-0"


def _boundary_band(inside: np.ndarray) -> np.ndarray:
    """Cells within one step of the inside/outside transition."""
    ny, nx = inside.shape
    pad = np.pad(inside, 1, mode="edge")
    near_in = np.zeros_like(inside)
    all_in = inside.copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            shifted = pad[1 + dy:ny + 1 + dy, 1 + dx:nx + 1 + dx]
            near_in |= shifted
            all_in &= shifted
    return near_in & ~all_in


def _axis_weights(a: np.ndarray) -> np.ndarray:
    w = np.empty_like(a)
    w[1:-1] = 0.5 * (a[2:] - a[:-2])
    w[0] = 0.5 * (a[1] - a[0])
    w[-1] = 0.5 * (a[-1] - a[-2])
    return w


# --- pass 2 -----------------------------------------------------------------


def _nearest(cands: list[MCandidate], m_ref: float) -> MCandidate:
    return min(cands, key=lambda c: (abs(c.m - m_ref), c.m))


def _select(cands: list[list[list[MCandidate]]], ny: int, nx: int) -> list[list[MCandidate | None]]:
    """Pick one root per cell, propagating ``m`` by breadth-first continuity.

    Cells with exactly one admissible root seed the sweep.  Elsewhere the
    admissible root (or, failing that, any real root) nearest in ``m`` to
    the parent's choice wins.
    """
    chosen: list[list[MCandidate | None]] = [[None] * nx for _ in range(ny)]
    m_ref = np.full((ny, nx), math.nan)
    seen = np.zeros((ny, nx), dtype=bool)
    queue: deque = deque()
    for iy in range(ny):
        for ix in range(nx):
            adm = [c for c in cands[iy][ix] if c.admissible]
            if len(adm) == 1:
                chosen[iy][ix] = adm[0]
                m_ref[iy, ix] = adm[0].m
                seen[iy, ix] = True
                queue.append((iy, ix))

    def sweep():
        while queue:
            cy, cx = queue.popleft()
            for ny_, nx_ in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                if not (0 <= ny_ < ny and 0 <= nx_ < nx) or seen[ny_, nx_]:
                    continue
                seen[ny_, nx_] = True
                here = cands[ny_][nx_]
                ref = m_ref[cy, cx]
                if here:
                    adm = [c for c in here if c.admissible]
                    pick = _nearest(adm or here, ref) if math.isfinite(ref) else _fallback(here)
                    chosen[ny_][nx_] = pick
                    m_ref[ny_, nx_] = pick.m
                else:
                    m_ref[ny_, nx_] = ref
                queue.append((ny_, nx_))

    sweep()
    for iy in range(ny):
        for ix in range(nx):
            if seen[iy, ix]:
                continue
            seen[iy, ix] = True
            if cands[iy][ix]:
                pick = _fallback(cands[iy][ix])
                chosen[iy][ix] = pick
                m_ref[iy, ix] = pick.m
            queue.append((iy, ix))
            sweep()
    return chosen


def _fallback(cands: list[MCandidate]) -> MCandidate:
    adm = [c for c in cands if c.admissible]
    if adm:
        return max(adm, key=lambda c: (c.im_g, c.m))
    return min(cands, key=lambda c: (c.C, c.m))


# --- driver -------------------------------------------------------------------


def solve_grid(
    ensH: EnsembleSpec,
    ensHp: EnsembleSpec,
    bbox: tuple[float, float, float, float],
    nx: int,
    ny: int,
    *,
    solver: str = "general",
    workers: int = 1,
    holomorphic: bool = True,
    extra_singular: tuple[tuple[float, ...], tuple[float, ...]] = ((), ()),
) -> SpectralGrid:
    """Solve every cell of a rectangular grid.

    ``solver="gue"`` uses the two-unknown path and requires ``ensH`` to be
    the unit semicircle.
    """
    if nx < 2 or ny < 2:
        raise ConfigError("grid needs at least 2 points per axis")
    x0, x1, y0, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise ConfigError(f"degenerate bounding box {bbox!r}")
    if solver not in ("general", "gue"):
        raise ConfigError(f"unknown solver {solver!r}")
    if solver == "gue" and ensH != ScaledSemicircle(1.0):
        raise ConfigError("the GUE-special solver needs H = semicircle(r=1)")
    xs = grid_axis(x0, x1, nx, tuple(ensH.singular_shifts()) + tuple(extra_singular[0]))
    ys = grid_axis(y0, y1, ny, tuple(ensHp.singular_shifts()) + tuple(extra_singular[1]))

    tasks = [(ensH, ensHp, solver, float(y), [float(x) for x in xs]) for y in ys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cands = list(pool.map(_row_candidates, tasks, chunksize=max(1, ny // (4 * workers))))
    else:
        cands = [_row_candidates(t) for t in tasks]

    chosen = _select(cands, ny, nx)
    shape = (ny, nx)
    nan = math.nan
    arrays = {k: np.full(shape, nan) for k in ("C", "c_ext", "m", "m_ext", "g_sum", "g_prod", "gI_sum", "gI_prod")}
    G = np.full(shape, complex(nan, nan))
    branch = np.full(shape, BRANCH_CODES[Branch.Outside], dtype=np.int8)
    for iy in range(ny):
        for ix in range(nx):
            c = chosen[iy][ix]
            if c is None:
                continue
            arrays["c_ext"][iy, ix] = c.C
            arrays["m_ext"][iy, ix] = c.m
            if c.admissible:
                branch[iy, ix] = BRANCH_CODES[Branch.NonHolomorphic]
                G[iy, ix] = c.G
                arrays["C"][iy, ix] = c.C
                for k in ("m", "g_sum", "g_prod", "gI_sum", "gI_prod"):
                    arrays[k][iy, ix] = getattr(c, k)

    Z = xs[None, :] + 1j * ys[:, None]
    outside = branch != BRANCH_CODES[Branch.NonHolomorphic]
    arrays["C"][outside] = 0.0
    if holomorphic and outside.any():
        H = holomorphic_fill(ensH, ensHp, Z, outside)
        ok = outside & np.isfinite(H)
        G[ok] = H[ok]
        branch[ok] = BRANCH_CODES[Branch.Holomorphic]
    return SpectralGrid(ensH=ensH, ensHp=ensHp, x=xs, y=ys, G=G, branch=branch,
                        meta={"bbox": list(bbox), "nx": nx, "ny": ny, "solver": solver}, **arrays)


# --- density ------------------------------------------------------------------


def _derivative(G: np.ndarray, coord: np.ndarray, inside: np.ndarray, axis: int) -> np.ndarray:
    """d G / d coord along ``axis`` using only cells inside the domain."""
    Gm = np.moveaxis(G, axis, -1)
    In = np.moveaxis(inside, axis, -1)
    out = np.zeros(Gm.shape, dtype=complex)
    n = Gm.shape[-1]
    for j in range(n):
        has_l = (In[..., j - 1] if j > 0 else np.zeros(In.shape[:-1], bool)) & In[..., j]
        has_r = (In[..., j + 1] if j < n - 1 else np.zeros(In.shape[:-1], bool)) & In[..., j]
        if 0 < j < n - 1:
            central = (Gm[..., j + 1] - Gm[..., j - 1]) / (coord[j + 1] - coord[j - 1])
            out[..., j] = np.where(has_l & has_r, central, out[..., j])
        if j < n - 1:
            fwd = (Gm[..., j + 1] - Gm[..., j]) / (coord[j + 1] - coord[j])
            out[..., j] = np.where(has_r & ~has_l, fwd, out[..., j])
            if j < n - 2:
                fwd2 = _one_sided(Gm[..., j], Gm[..., j + 1], Gm[..., j + 2], coord[j + 1] - coord[j], coord[j + 2] - coord[j])
                out[..., j] = np.where(has_r & ~has_l & In[..., j + 2], fwd2, out[..., j])
        if j > 0:
            bwd = (Gm[..., j] - Gm[..., j - 1]) / (coord[j] - coord[j - 1])
            out[..., j] = np.where(has_l & ~has_r, bwd, out[..., j])
            if j > 1:
                bwd2 = _one_sided(Gm[..., j], Gm[..., j - 1], Gm[..., j - 2], coord[j - 1] - coord[j], coord[j - 2] - coord[j])
                out[..., j] = np.where(has_l & ~has_r & In[..., j - 2], bwd2, out[..., j])
    return np.moveaxis(out, -1, axis)


def _one_sided(f0, f1, f2, d1: float, d2: float):
    """Second-order derivative at offset 0 from samples at offsets 0, d1, d2."""
    return -(d1 + d2) / (d1 * d2) * f0 + d2 / (d1 * (d2 - d1)) * f1 - d1 / (d2 * (d2 - d1)) * f2


def density(grid: SpectralGrid, *, richardson: bool = False) -> SpectralGrid:
    """``rho = (1/pi) dG/dzbar`` by finite differences on the solved grid.

    Differences never reach across the borderline: cells next to it use
    one-sided stencils inside the domain.  Cells off the domain get 0.
    """
    if grid.nx < MIN_GRID or grid.ny < MIN_GRID:
        raise ConfigError(f"density needs at least {MIN_GRID} points per axis")
    inside = grid.branch == BRANCH_CODES[Branch.NonHolomorphic]
    G = np.where(inside, grid.G, 0.0)
    dx = _derivative(G, grid.x, inside, axis=1)
    dy = _derivative(G, grid.y, inside, axis=0)
    if richardson:
        dx = _richardson(G, grid.x, inside, axis=1, d1=dx)
        dy = _richardson(G, grid.y, inside, axis=0, d1=dy)
    d = 0.5 * (dx + 1j * dy) / math.pi
    rho = np.where(inside, d.real, 0.0)
    interior = inside.copy()
    interior[1:-1, 1:-1] &= inside[:-2, 1:-1] & inside[2:, 1:-1] & inside[1:-1, :-2] & inside[1:-1, 2:]
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    grid.rho = rho
    grid.rho_imag_max = float(np.max(np.abs(d.imag[interior]))) if interior.any() else 0.0
    return grid


def _richardson(G, coord, inside, axis, d1):
    """Combine step-h and step-2h central differences where both fit."""
    Gm = np.moveaxis(G, axis, -1)
    In = np.moveaxis(inside, axis, -1)
    out = np.moveaxis(d1.copy(), axis, -1)
    n = Gm.shape[-1]
    for j in range(2, n - 2):
        ok = In[..., j - 2] & In[..., j - 1] & In[..., j] & In[..., j + 1] & In[..., j + 2]
        d2 = (Gm[..., j + 2] - Gm[..., j - 2]) / (coord[j + 2] - coord[j - 2])
        out[..., j] = np.where(ok, (4 * out[..., j] - d2) / 3, out[..., j])
    return np.moveaxis(out, -1, axis)


# --- borderline ---------------------------------------------------------------


@dataclass
class BorderlineCurve:
    polylines: list[np.ndarray]
    closed: list[bool]
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def to_json(self) -> dict:
        return {
            "curves": [
                {"closed": bool(c), "points": [[float(x), float(y)] for x, y in p]}
                for p, c in zip(self.polylines, self.closed)
            ]
        }

    @property
    def all_closed(self) -> bool:
        return all(self.closed)


def _c_near(ensH, ensHp, solver, z: complex, m_ref: float) -> float:
    cands = _cell_candidates(ensH, ensHp, solver, z)
    if not cands:
        return math.nan
    if math.isfinite(m_ref):
        return _nearest(cands, m_ref).C
    return min(c.C for c in cands)


def _refine_vertex(grid: SpectralGrid, solver: str, r: float, c: float) -> tuple[float, float, float]:
    """Locate ``C = 0`` on the grid edge carrying a marching-squares vertex."""
    ny, nx = grid.ny, grid.nx
    if abs(r - round(r)) < 1e-9:
        iy = int(round(r))
        ix0 = min(int(math.floor(c)), nx - 2)
        a, b = (iy, ix0), (iy, ix0 + 1)
        t = c - ix0
    else:
        ix = int(round(c))
        iy0 = min(int(math.floor(r)), ny - 2)
        a, b = (iy0, ix), (iy0 + 1, ix)
        t = r - iy0
    za = complex(grid.x[a[1]], grid.y[a[0]])
    zb = complex(grid.x[b[1]], grid.y[b[0]])
    ma, mb = grid.m_ext[a], grid.m_ext[b]
    m_ref = ma if math.isfinite(ma) else mb

    def f(s):
        return _c_near(grid.ensH, grid.ensHp, solver, za + s * (zb - za), m_ref)

    z_lin = za + t * (zb - za)
    fa, fb = f(0.0), f(1.0)
    for s_end, f_end in ((0.0, fa), (1.0, fb)):
        if abs(s_end - t) < 1e-9 and abs(f_end) <= CURVE_TOL:
            z = za + s_end * (zb - za)
            return z.real, z.imag, abs(f_end)
    if math.isfinite(fa) and math.isfinite(fb) and fa * fb <= 0:
        try:
            s = brentq(f, 0.0, 1.0, xtol=1e-15)
            z = za + s * (zb - za)
            return z.real, z.imag, abs(f(s))
        except ValueError:
            pass
    return z_lin.real, z_lin.imag, math.inf


def trace_borderline(grid: SpectralGrid, solver: str = "general", *, tol: float = CURVE_TOL,
                     min_valid: float = 0.5) -> BorderlineCurve:
    """Zero level set of the extended correlator field, refined on grid edges.

    Vertices whose refined ``|C|`` exceeds ``tol`` are dropped; curves made
    mostly of such vertices come from jumps between root branches rather
    than from a true zero and are discarded.
    """
    F = grid.c_ext.copy()
    finite = np.isfinite(F)
    fill = max(float(np.max(np.abs(F[finite]))) if finite.any() else 1.0, 1.0)
    F[~finite] = fill
    polylines, closed = [], []
    for contour in find_contours(F, 0.0):
        is_closed = bool(np.allclose(contour[0], contour[-1]))
        pts = []
        for r, c in contour:
            x, y, res = _refine_vertex(grid, solver, float(r), float(c))
            if res <= tol and (not pts or pts[-1] != (x, y)):
                pts.append((x, y))
        n_used = len(contour) - (1 if is_closed else 0)
        if len(pts) < max(3, min_valid * n_used):
            continue
        arr = np.array(pts)
        if is_closed and not np.allclose(arr[0], arr[-1]):
            arr = np.vstack([arr, arr[:1]])
        polylines.append(arr)
        closed.append(is_closed)
    x0, x1 = grid.x_range
    y0, y1 = grid.y_range
    return BorderlineCurve(polylines, closed, (x0, x1, y0, y1))


def default_bbox(ensH: EnsembleSpec, ensHp: EnsembleSpec, pad: float = 3.0) -> tuple[float, float, float, float]:
    lo, hi = ensH.hull()
    loI, hiI = ensHp.hull()
    return (lo - pad, hi + pad, loI - pad, hiI + pad)


def borderline(
    ensH: EnsembleSpec,
    ensHp: EnsembleSpec,
    bbox: tuple[float, float, float, float] | None = None,
    n: tuple[int, int] = (201, 201),
    *,
    solver: str = "general",
    workers: int = 1,
    auto_expand: bool = True,
    max_expand: int = 4,
    extra_singular: tuple[tuple[float, ...], tuple[float, ...]] = ((), ()),
    tol: float = CURVE_TOL,
) -> BorderlineCurve:
    """Borderline of the eigenvalue domain; the box doubles until every curve closes.

    A box lying entirely inside the domain also triggers doubling.
    """
    if bbox is None:
        bbox = default_bbox(ensH, ensHp)
    for attempt in range(max_expand + 1):
        grid = solve_grid(ensH, ensHp, bbox, n[0], n[1], solver=solver, workers=workers,
                          holomorphic=False, extra_singular=extra_singular)
        curve = trace_borderline(grid, solver, tol=tol)
        # no curve at all while cells are inside: the box sits within the support
        enclosed = not curve.polylines and bool(np.any(grid.branch == BRANCH_CODES[Branch.NonHolomorphic]))
        if (curve.all_closed and not enclosed) or not auto_expand or attempt == max_expand:
            return curve
        x0, x1, y0, y1 = bbox
        cx, cy, hx, hy = 0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0
        bbox = (cx - hx, cx + hx, cy - hy, cy + hy)
    return curve

