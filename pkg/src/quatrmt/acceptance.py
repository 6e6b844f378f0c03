"""Acceptance checks shared by ``quatrmt selftest`` and the test suite.

Each check returns a :class:`CriterionResult` carrying the measured metrics
next to the thresholds they are held to.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .grid import BorderlineCurve, SpectralGrid, default_bbox, density, solve_grid, trace_borderline
from .montecarlo import SampleConfig, run_comparison
from .qcalculus import qblue_hermitian, qgreen_hermitian, symmetric_coeffs
from .quaternion import Quaternion, i_rotate, quat_eigenvalues, quat_inv, random_quaternion
from .references import Ginibre, Pastur, Scattering
from .solver import candidates_general, holomorphic_on_curves, solve_general
from .transforms import ScaledSemicircle

MC_SEED = 12345
QUAT_SEED = 2024


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title} ({self.seconds:.1f}s): {shown}"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "seconds": self.seconds, "metrics": {k: _jsonable(v) for k, v in self.metrics.items()}}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


# --- shared grids ---------------------------------------------------------------

_MODELS = {
    "ginibre": Ginibre(),
    "ellipse": Ginibre(2.0, 1.0),
    "scattering": Scattering(1.0, 1.0),
    "pastur_0.5": Pastur(0.5),
    "pastur_1.2": Pastur(1.2),
}
_BBOX = {
    "ginibre": (-2.0, 2.0, -2.0, 2.0),
    "ellipse": (-3.0, 3.0, -1.6, 1.6),
    "pastur_1.2": (-2.5, 2.5, -2.5, 2.5),
}


def _bbox(name: str) -> tuple[float, float, float, float]:
    if name in _BBOX:
        return _BBOX[name]
    return default_bbox(*_MODELS[name].ensembles())


def _shape(name: str, n: int) -> tuple[int, int]:
    if name == "ellipse":
        return 151, 81  # square cells of 0.04
    if name == "pastur_1.2" and n == 201:
        return 251, 251  # the islands are about 0.34 wide
    return n, n


@lru_cache(maxsize=None)
def model_grid(name: str, n: int = 201, solver: str = "general", workers: int = 1) -> SpectralGrid:
    """Non-holomorphic grid with density for one of the reference models."""
    model = _MODELS[name]
    nx, ny = _shape(name, n)
    return density(solve_grid(*model.ensembles(), _bbox(name), nx, ny, solver=solver, workers=workers,
                              holomorphic=False, extra_singular=model.singular_lines()))


@lru_cache(maxsize=None)
def model_curve(name: str, n: int = 201, workers: int = 1) -> BorderlineCurve:
    return trace_borderline(model_grid(name, n, workers=workers))


def _cell(grid: SpectralGrid) -> float:
    return max((grid.x[-1] - grid.x[0]) / (grid.nx - 1), (grid.y[-1] - grid.y[0]) / (grid.ny - 1))


def _vertices(curve: BorderlineCurve) -> np.ndarray:
    if not curve.polylines:
        return np.empty((0, 2))
    return np.vstack(curve.polylines)


def _inside(grid: SpectralGrid) -> np.ndarray:
    return grid.branch == 0


def _closed_form_fields(model, grid: SpectralGrid) -> tuple[np.ndarray, np.ndarray]:
    G = np.empty(grid.G.shape, dtype=complex)
    C = np.empty(grid.C.shape)
    for iy, y in enumerate(grid.y):
        for ix, x in enumerate(grid.x):
            s = model.solve(float(x), float(y))
            G[iy, ix], C[iy, ix] = s.G, s.C
    return G, C


def _timed(fn: Callable[[], tuple[bool, dict]], number: int, title: str) -> CriterionResult:
    t0 = time.perf_counter()
    passed, metrics = fn()
    return CriterionResult(number, title, bool(passed), metrics, time.perf_counter() - t0)


# --- criteria -------------------------------------------------------------------


def criterion_1(workers: int = 1) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        grid = solve_grid(*_MODELS["ginibre"].ensembles(), _BBOX["ginibre"], 101, 101, holomorphic=False)
        curve = trace_borderline(grid)
        elapsed = time.perf_counter() - t0
        X, Y = np.meshgrid(grid.x, grid.y)
        C_exact = 0.25 * (X**2 + Y**2) - 0.5
        interior = C_exact < -1e-6
        inside = _inside(grid)
        g_err = float(np.max(np.abs(grid.G[interior] - np.conj(grid.Z[interior]) / 2)))
        c_err = float(np.max(np.abs(grid.C[interior] - C_exact[interior])))
        # direct route through solve_general at scattered interior points
        rng = np.random.default_rng(1)
        pts = [z for z in (rng.uniform(-1.4, 1.4, 40) + 1j * rng.uniform(-1.4, 1.4, 40)) if abs(z) < 1.4]
        sols = [solve_general(*_MODELS["ginibre"].ensembles(), z, holomorphic=False) for z in pts]
        point_err = max(max(abs(s.G - z.conjugate() / 2), abs(s.C - (0.25 * abs(z) ** 2 - 0.5))) for s, z in zip(sols, pts))
        V = _vertices(curve)
        radial = float(np.max(np.abs(np.hypot(V[:, 0], V[:, 1]) - math.sqrt(2)))) if V.size else math.inf
        cell = _cell(grid)
        ok = (bool(np.all(inside[interior])) and max(g_err, c_err, point_err) < 1e-8
              and len(curve.polylines) == 1 and curve.all_closed and radial < 2 * cell and elapsed < 10)
        return ok, {"max_err_G": g_err, "max_err_C": c_err, "point_err": point_err,
                    "radial_dev": radial, "limit_radial": 2 * cell, "runtime_s": elapsed}

    return _timed(run, 1, "Ginibre law")


def criterion_2(workers: int = 1) -> CriterionResult:
    def run():
        model = _MODELS["ellipse"]
        grid = model_grid("ellipse", workers=workers)
        curve = model_curve("ellipse", workers=workers)
        V = _vertices(curve)
        residual = float(np.max(np.abs(V[:, 0] ** 2 / 4 + V[:, 1] ** 2 - 4 / 3))) if V.size else math.inf
        rho0 = 3 / (8 * math.pi)
        inside = _inside(grid)
        fd_err = float(np.max(np.abs(grid.rho[inside] - rho0)))
        # density from the solver itself: dG/dzbar by a tight central difference
        ensH, ensHp = model.ensembles()
        h = 1e-5
        an_err = 0.0
        for z in (0j, 0.5 + 0.3j, -1.2 - 0.4j, 1.5 + 0.1j, -0.3 + 0.8j):
            gx = (solve_general(ensH, ensHp, z + h, holomorphic=False).G
                  - solve_general(ensH, ensHp, z - h, holomorphic=False).G) / (2 * h)
            gy = (solve_general(ensH, ensHp, z + 1j * h, holomorphic=False).G
                  - solve_general(ensH, ensHp, z - 1j * h, holomorphic=False).G) / (2 * h)
            rho = (0.5 * (gx + 1j * gy)).real / math.pi
            an_err = max(an_err, abs(rho - rho0))
        mass = grid.mass(curve)
        ok = residual < 1e-6 and an_err < 1e-3 and fd_err < 5e-3 and abs(mass - 1) < 0.01
        return ok, {"curve_residual": residual, "rho_err_analytic": an_err, "rho_err_fd": fd_err, "mass": mass}

    return _timed(run, 2, "Ellipse law")


def criterion_3(workers: int = 1) -> CriterionResult:
    def run():
        model = _MODELS["scattering"]
        grid = model_grid("scattering", workers=workers)
        G_ref, C_ref = _closed_form_fields(model, grid)
        interior = C_ref < -1e-6
        inside = _inside(grid)
        g_err = float(np.max(np.abs(grid.G[interior] - G_ref[interior])))
        c_err = float(np.max(np.abs(grid.C[interior] - C_ref[interior])))
        V = _vertices(model_curve("scattering", workers=workers))
        residual = max((abs(model.borderline_residual(x, y)) for x, y in V), default=math.inf)
        ok = bool(np.all(inside[interior])) and max(g_err, c_err) < 1e-8 and residual < 1e-6
        return ok, {"max_err_G": g_err, "max_err_C": c_err, "curve_residual": residual}

    return _timed(run, 3, "Scattering model")


def _crossings_x0(curve: BorderlineCurve) -> list[float]:
    ys = []
    for p in curve.polylines:
        for (xa, ya), (xb, yb) in zip(p[:-1], p[1:]):
            if xa == 0.0:
                ys.append(ya)
            elif xa * xb < 0:
                ys.append(ya + (yb - ya) * (-xa) / (xb - xa))
    return ys


def criterion_4(workers: int = 1) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        metrics = {}
        ok = True
        for name in ("pastur_0.5", "pastur_1.2"):
            model = _MODELS[name]
            curve = model_curve(name, workers=workers)
            V = _vertices(curve)
            residual = max((abs(model.borderline_residual(x, y)) for x, y in V), default=math.inf)
            metrics[f"{name}_residual"] = residual
            metrics[f"{name}_curves"] = len(curve.polylines)
            ok &= residual < 1e-6 and curve.all_closed
            if name == "pastur_0.5":
                ys = _crossings_x0(curve)
                cell = _cell(model_grid(name, workers=workers))
                top = min((abs(y - math.sqrt(3)) for y in ys if y > 0), default=math.inf)
                bottom = min((abs(y + math.sqrt(3)) for y in ys if y < 0), default=math.inf)
                metrics["crossing_err"] = max(top, bottom)
                ok &= len(curve.polylines) == 1 and max(top, bottom) < 2 * cell
            else:
                xs = [(p[:, 0].min(), p[:, 0].max()) for p in curve.polylines]
                disjoint = len(xs) == 2 and (xs[0][1] < xs[1][0] or xs[1][1] < xs[0][0])
                metrics["disjoint"] = disjoint
                ok &= disjoint
        elapsed = time.perf_counter() - t0
        metrics["runtime_s"] = elapsed
        return ok and elapsed < 30, metrics

    return _timed(run, 4, "Pastur borderline")


def criterion_5(workers: int = 1) -> CriterionResult:
    def run():
        metrics, ok = {}, True
        for name in ("ginibre", "scattering"):
            a = model_grid(name, 101, "general", workers)
            b = model_grid(name, 101, "gue", workers)
            # cells on the borderline to rounding may tip either way
            decided = np.abs(a.c_ext) > 1e-12
            same = bool(np.array_equal(a.branch[decided], b.branch[decided]))
            inside = _inside(a) & _inside(b)
            err = float(max(np.max(np.abs(a.G[inside] - b.G[inside])), np.max(np.abs(a.C[inside] - b.C[inside]))))
            metrics[f"{name}_max_diff"] = err
            metrics[f"{name}_same_branches"] = same
            ok &= same and err < 1e-8
        return ok, metrics

    return _timed(run, 5, "Solver equivalence")


def _random_disk_quaternion(rng: np.random.Generator, r_lo: float, r_hi: float) -> Quaternion:
    """Quaternion whose eigenvalue modulus lies in ``[r_lo, r_hi]``."""
    Q = random_quaternion(rng)
    s = rng.uniform(r_lo, r_hi) / math.sqrt(Q.det())
    return Q * s


def _conj(S: Quaternion, Q: Quaternion) -> Quaternion:
    return quat_inv(S) * Q * S


def criterion_6(workers: int = 1, n: int = 10_000) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        ens = ScaledSemicircle(1.0)
        rng = np.random.default_rng(QUAT_SEED)
        inv_gb = inv_bg = sim_g = sim_b = cross = rot = imag = 0.0
        for _ in range(n):
            # inside the image of G the two functions are mutual inverses
            Q = _random_disk_quaternion(rng, 0.2, 0.9)
            P = random_quaternion(rng, 2.0)
            S = random_quaternion(rng)
            B = qblue_hermitian(ens, Q)
            inv_gb = max(inv_gb, qgreen_hermitian(ens, B.value).value.norm_diff(Q))
            Gp = qgreen_hermitian(ens, P)
            inv_bg = max(inv_bg, qblue_hermitian(ens, Gp.value).value.norm_diff(P))
            sim_g = max(sim_g, qgreen_hermitian(ens, _conj(S, P)).value.norm_diff(_conj(S, Gp.value)))
            sim_b = max(sim_b, qblue_hermitian(ens, _conj(S, Q)).value.norm_diff(_conj(S, B.value)))
            ev = quat_eigenvalues(Q)
            beta, beta_p = symmetric_coeffs(ens.blue, ev.q, ev.qbar)
            gam, gam_p = symmetric_coeffs(ens.green, ens.blue(ev.q), ens.blue(ev.qbar))
            cross = max(cross, abs(gam - beta / beta_p), abs(gam_p - 1 / beta_p))
            imag = max(imag, abs(beta.imag), abs(beta_p.imag), abs(gam.imag), abs(gam_p.imag))
            rot = max(rot, abs(abs(quat_eigenvalues(P).q) - abs(quat_eigenvalues(i_rotate(P)).q)))
        elapsed = time.perf_counter() - t0
        ok = (max(inv_gb, inv_bg, sim_g, sim_b, cross) < 1e-9 and imag < 1e-10 and rot < 1e-12 and elapsed < 5)
        return ok, {"inversion_GB": inv_gb, "inversion_BG": inv_bg, "similarity_G": sim_g,
                    "similarity_B": sim_b, "cross_check": cross, "coeff_imag": imag,
                    "modulus_rotation": rot, "runtime_s": elapsed}

    return _timed(run, 6, "Quaternion calculus")


def _nonholo_g(ensH, ensHp, z: complex) -> complex:
    """Non-holomorphic G at a borderline point: the candidate with the smallest |C|."""
    cands = candidates_general(ensH, ensHp, z)
    return min(cands, key=lambda c: abs(c.C)).G


def criterion_7(workers: int = 1) -> CriterionResult:
    def run():
        metrics, ok = {}, True
        for name in ("ginibre", "ellipse", "scattering", "pastur_0.5", "pastur_1.2"):
            ensH, ensHp = _MODELS[name].ensembles()
            curve = model_curve(name, workers=workers)
            worst = 0.0 if curve.polylines else math.inf
            for p, holo in zip(curve.polylines, holomorphic_on_curves(ensH, ensHp, curve.polylines)):
                nonholo = np.array([_nonholo_g(ensH, ensHp, complex(x, y)) for x, y in p])
                worst = max(worst, float(np.max(np.abs(holo - nonholo))))
            metrics[name] = worst
            ok &= worst < 1e-3
        return ok, metrics

    return _timed(run, 7, "Branch matching")


def criterion_8(workers: int = 1) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        ensH, ensHp = _MODELS["ginibre"].ensembles()
        grid = model_grid("ginibre", 201, workers=workers)
        report = run_comparison(SampleConfig(1024, 20, MC_SEED, ensH, ensHp), grid, workers=workers,
                                curve=model_curve("ginibre", 201, workers=workers))
        elapsed = time.perf_counter() - t0
        ok = (report.l1_density < 0.05 and report.support_hausdorff < 0.1
              and abs(report.overlap_center_ratio - 1) <= 0.15 and elapsed < 120)
        return ok, {"l1_density": report.l1_density, "support_hausdorff": report.support_hausdorff,
                    "overlap_center_ratio": report.overlap_center_ratio, "runtime_s": elapsed}

    return _timed(run, 8, "Monte Carlo Ginibre")


def criterion_9(workers: int = 1) -> CriterionResult:
    def run():
        ensH, ensHp = _MODELS["pastur_1.2"].ensembles()
        grid = model_grid("pastur_1.2", 201, workers=workers)
        report = run_comparison(SampleConfig(1024, 20, MC_SEED, ensH, ensHp), grid, workers=workers,
                                overlaps=False, curve=model_curve("pastur_1.2", 201, workers=workers))
        ok = report.n_curves_empirical == 2 and report.n_curves_analytic == 2 and report.support_hausdorff < 0.1
        return ok, {"islands_empirical": report.n_curves_empirical, "support_hausdorff": report.support_hausdorff,
                    "l1_density": report.l1_density}

    return _timed(run, 9, "Monte Carlo Pastur")


def criterion_10(workers: int = 1) -> CriterionResult:
    def run():
        metrics, ok = {}, True
        for name in _MODELS:
            grid = model_grid(name, workers=workers)
            mass, low = grid.mass(model_curve(name, workers=workers)), float(np.min(grid.rho))
            metrics[f"{name}_mass"] = mass
            metrics[f"{name}_min_rho"] = low
            ok &= abs(mass - 1) <= 0.01 and low >= -1e-6
        return ok, metrics

    return _timed(run, 10, "Conservation")


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run_all(numbers=None, workers: int = 1, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    results = []
    for k in numbers or sorted(CRITERIA):
        res = CRITERIA[k](workers=workers)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
