"""Monte Carlo oracle: sample X = H + i H', diagonalise, compare with the solver.

Random streams are keyed by ``(seed, sample, matrix)`` through
``SeedSequence`` spawn keys feeding a counter-based Philox generator, so the
draws do not depend on how samples are spread over workers.  Per-sample
results are merged in sample order, which keeps every float reduction
bit-reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import directed_hausdorff
from skimage.measure import find_contours

from .errors import ConfigError, DecompositionError
from .grid import BorderlineCurve, SpectralGrid, trace_borderline
from .solver import Branch, solve_general
from .transforms import AtomicGeneral, EnsembleSpec, ScaledSemicircle, WishartLike

DEFAULT_BUDGET = 1 << 22
CALIBRATION_POINTS = (3j, -2 + 2j, 1 + 1j, -5 + 0.5j, 0.5 + 4j)
MATRIX_H, MATRIX_HP = 0, 1


@dataclass(frozen=True)
class SampleConfig:
    n: int
    n_samples: int
    seed: int
    ensH: EnsembleSpec
    ensHp: EnsembleSpec
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("matrix size must be at least 2")
        if self.n_samples < 1:
            raise ConfigError("need at least one sample")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.n * self.n_samples > self.budget:
            raise ConfigError(f"n * n_samples = {self.n * self.n_samples} exceeds budget {self.budget}")

    def effective_n(self) -> tuple[int, list[str]]:
        """Matrix size actually sampled; two-atom laws need an even size."""
        n, warnings = self.n, []
        for ens in (self.ensH, self.ensHp):
            if isinstance(ens, AtomicGeneral) and len(ens.atoms) == 2 and ens.atoms[0][1] == ens.atoms[1][1] and n % 2:
                warnings.append(f"n={n} is odd; rounded down to {n - 1} for equal atom multiplicities")
                n -= 1
        return n, warnings

    def to_json(self) -> dict:
        return {"n": self.n, "n_samples": self.n_samples, "seed": self.seed,
                "ensemble_h": self.ensH.to_json(), "ensemble_hp": self.ensHp.to_json()}


def stream(seed: int, sample: int, matrix: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(sample, matrix))))


def _ginibre_block(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Complex Gaussian entries with ``E|a|^2 = 1``."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)


def wishart_aspect(ens: WishartLike, n: int) -> int:
    return max(1, int(round(ens.r * n)))


def sample_hermitian(ens: EnsembleSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """One ``n x n`` Hermitian draw whose spectrum follows ``ens`` at large ``n``."""
    if n < 2:
        raise ConfigError("matrix size must be at least 2")
    if isinstance(ens, ScaledSemicircle):
        A = _ginibre_block(rng, n, n)
        return math.sqrt(ens.r / n) * (A + A.conj().T) / math.sqrt(2)
    if isinstance(ens, WishartLike):
        # free Poisson of rate r and jump -c: -c/n * A A^dagger with A n x rn
        A = _ginibre_block(rng, n, wishart_aspect(ens, n))
        W = -(ens.c / n) * (A @ A.conj().T)
        return 0.5 * (W + W.conj().T)
    if isinstance(ens, AtomicGeneral):
        counts = [int(round(w * n)) for _, w in ens.atoms]
        counts[-1] = n - sum(counts[:-1])
        diag = np.repeat([lam for lam, _ in ens.atoms], counts)
        return np.diag(rng.permutation(diag)).astype(complex)
    raise ConfigError(f"no sampler for ensemble kind {ens.kind!r}")


@dataclass
class EigenData:
    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray  # rows; left_vectors @ right_vectors = identity

    def overlaps(self) -> np.ndarray:
        return np.sum(np.abs(self.left_vectors) ** 2, axis=1) * np.sum(np.abs(self.right_vectors) ** 2, axis=0)

    def biorthogonality_error(self) -> float:
        n = self.eigenvalues.size
        return float(np.max(np.abs(self.left_vectors @ self.right_vectors - np.eye(n))))

    def reconstruction_error(self, X: np.ndarray) -> float:
        R = self.right_vectors * self.eigenvalues[None, :]
        return float(np.linalg.norm(X - R @ self.left_vectors) / np.linalg.norm(X))


def eig_full(X: np.ndarray) -> EigenData:
    """Dense non-symmetric eigendecomposition (LAPACK Hessenberg + shifted QR)."""
    X = np.asarray(X, dtype=complex)
    try:
        w, R = np.linalg.eig(X)
        L = np.linalg.inv(R)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(X) if np.all(np.isfinite(X)) else math.inf
        raise DecompositionError(f"eigendecomposition failed ({exc}); cond(X) = {cond:.3e}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(L))):
        raise DecompositionError(f"non-finite eigendecomposition; cond(R) = {np.linalg.cond(R):.3e}")
    return EigenData(eigenvalues=w, right_vectors=R, left_vectors=L)


def _one_sample(args) -> tuple[np.ndarray, np.ndarray | None]:
    cfg, n, k, with_overlaps = args
    H = sample_hermitian(cfg.ensH, n, stream(cfg.seed, k, MATRIX_H))
    Hp = sample_hermitian(cfg.ensHp, n, stream(cfg.seed, k, MATRIX_HP))
    X = H + 1j * Hp
    if not with_overlaps:
        return np.linalg.eigvals(X), None
    ed = eig_full(X)
    return ed.eigenvalues, ed.overlaps()


def sample_spectra(cfg: SampleConfig, *, overlaps: bool = True, workers: int = 1) -> tuple[np.ndarray, np.ndarray | None, list[str]]:
    """All eigenvalues (and overlaps) in sample order."""
    n, warnings = cfg.effective_n()
    tasks = [(cfg, n, k, overlaps) for k in range(cfg.n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_sample, tasks))
    else:
        results = [_one_sample(t) for t in tasks]
    ev = np.concatenate([r[0] for r in results])
    ov = np.concatenate([r[1] for r in results]) if overlaps else None
    return ev, ov, warnings


def overlap_field(ev: np.ndarray, ov: np.ndarray, xedges: np.ndarray, yedges: np.ndarray, norm: float) -> np.ndarray:
    """Histogram of ``sum_a O_a delta(z - lambda_a)`` per unit area, divided by ``norm``.

    Indexed ``[iy, ix]`` like the solver grids.
    """
    H, _, _ = np.histogram2d(ev.imag, ev.real, bins=[yedges, xedges], weights=ov)
    area = np.outer(np.diff(yedges), np.diff(xedges))
    return H / (area * norm)


def density_histogram(ev: np.ndarray, xedges: np.ndarray, yedges: np.ndarray) -> np.ndarray:
    H, _, _ = np.histogram2d(ev.imag, ev.real, bins=[yedges, xedges])
    area = np.outer(np.diff(yedges), np.diff(xedges))
    return H / (area * ev.size)


def stieltjes_check(ens: EnsembleSpec, n: int, n_samples: int, seed: int, points=CALIBRATION_POINTS) -> dict:
    """Empirical ``(1/n) Tr (z - H)^-1`` against the ensemble's Green's function."""
    errs = []
    for z in points:
        acc = 0j
        for k in range(n_samples):
            lam = np.linalg.eigvalsh(sample_hermitian(ens, n, stream(seed, k, MATRIX_H)))
            acc += np.mean(1.0 / (z - lam))
        emp = acc / n_samples
        exact = ens.green(z)
        errs.append({"z": [z.real, z.imag], "empirical": [emp.real, emp.imag],
                     "exact": [exact.real, exact.imag], "rel_err": abs(emp - exact) / abs(exact)})
    return {"points": errs, "max_rel_err": max(e["rel_err"] for e in errs)}


def wishart_calibration(ens: WishartLike, n: int = 400, n_samples: int = 4, seed: int = 0) -> dict:
    """Record of the sampling map and its accuracy at the calibration points."""
    rec = stieltjes_check(ens, n, n_samples, seed)
    rec.update({"map": "-(c/n) A A^dagger, A complex Gaussian n x round(r n)",
                "aspect": wishart_aspect(ens, n) / n, "scale": -ens.c, "n": n, "n_samples": n_samples})
    return rec


# --- comparison ---------------------------------------------------------------


def _cell_edges(a: np.ndarray, lo: float, hi: float) -> np.ndarray:
    h = (hi - lo) / (a.size - 1)
    return lo - 0.5 * h + h * np.arange(a.size + 1)


def _block_mean(A: np.ndarray, k: int) -> np.ndarray:
    ny, nx = (A.shape[0] // k) * k, (A.shape[1] // k) * k
    return A[:ny, :nx].reshape(ny // k, k, nx // k, k).mean(axis=(1, 3))


def _densify(p: np.ndarray, step: float) -> np.ndarray:
    out = [p[:1]]
    for a, b in zip(p[:-1], p[1:]):
        k = max(1, int(math.ceil(np.hypot(*(b - a)) / step)))
        t = (np.arange(1, k + 1) / k)[:, None]
        out.append(a + t * (b - a))
    return np.vstack(out)


def empirical_boundary(ev: np.ndarray, xedges: np.ndarray, yedges: np.ndarray, *, level: float = 0.05,
                       min_length_bins: float = 8.0) -> list[np.ndarray]:
    """Threshold contour of the eigenvalue histogram at ``level`` x median occupied-bin density.

    Contours shorter than ``min_length_bins`` bin widths enclose isolated
    stray eigenvalues or empty bins inside the bulk and are discarded.
    """
    rho = density_histogram(ev, xedges, yedges)
    occupied = rho[rho > 0]
    if occupied.size == 0:
        return []
    thr = level * float(np.median(occupied))
    padded = np.pad(rho, 1)
    bx, by = np.diff(xedges)[0], np.diff(yedges)[0]
    xc0, yc0 = xedges[0] + 0.5 * bx - bx, yedges[0] + 0.5 * by - by
    curves = []
    for c in find_contours(padded, thr):
        pts = np.column_stack([xc0 + c[:, 1] * bx, yc0 + c[:, 0] * by])
        length = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
        if length >= min_length_bins * max(bx, by):
            curves.append(pts)
    return curves


def hausdorff(curves_a: list[np.ndarray], curves_b: list[np.ndarray], step: float = 0.005) -> float:
    if not curves_a or not curves_b:
        return math.inf
    A = np.vstack([_densify(c, step) for c in curves_a])
    B = np.vstack([_densify(c, step) for c in curves_b])
    return float(max(directed_hausdorff(A, B)[0], directed_hausdorff(B, A)[0]))


def _disk_integral(ensH: EnsembleSpec, ensHp: EnsembleSpec, centre: complex, radius: float, n: int) -> float:
    """``int_disk -(n/pi) C dA`` by Gauss-Legendre in r and the trapezoid rule in angle."""
    xr, wr = np.polynomial.legendre.leggauss(12)
    rs, wr = 0.5 * radius * (xr + 1), 0.5 * radius * wr
    n_th = 24
    total = 0.0
    for r, w in zip(rs, wr):
        for j in range(n_th):
            z = centre + r * np.exp(2j * math.pi * j / n_th)
            sol = solve_general(ensH, ensHp, z, holomorphic=False)
            c = sol.C if sol.branch == Branch.NonHolomorphic else 0.0
            total += w * r * (2 * math.pi / n_th) * (-(n / math.pi) * c)
    return total


@dataclass
class McReport:
    config: dict
    xedges: np.ndarray
    yedges: np.ndarray
    density_hist: np.ndarray
    overlap_hist: np.ndarray | None
    l1_density: float
    overlap_center_ratio: float
    support_hausdorff: float
    support_bin: float
    n_curves_empirical: int
    n_curves_analytic: int
    im_sign: dict
    calibration: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        def num(v):
            return None if v is None or not math.isfinite(v) else float(v)

        return {
            "config": self.config,
            "l1_density": num(self.l1_density),
            "overlap_center_ratio": num(self.overlap_center_ratio),
            "support_hausdorff": num(self.support_hausdorff),
            "support_bin": self.support_bin,
            "n_curves_empirical": self.n_curves_empirical,
            "n_curves_analytic": self.n_curves_analytic,
            "im_sign": self.im_sign,
            "bins": {"x": self.xedges.tolist(), "y": self.yedges.tolist()},
            "density_hist": self.density_hist.tolist(),
            "overlap_hist": None if self.overlap_hist is None else self.overlap_hist.tolist(),
            "calibration": self.calibration,
            "warnings": self.warnings,
        }


def run_comparison(
    cfg: SampleConfig,
    grid: SpectralGrid,
    *,
    density_block: int | None = None,
    support_block: int | None = None,
    overlaps: bool = True,
    overlap_radius: float = 0.5,
    overlap_centre: complex = 0j,
    workers: int = 1,
    curve: BorderlineCurve | None = None,
) -> McReport:
    """Compare sampled spectra with a solved grid (which must carry ``rho``).

    Density bins are blocks of ``density_block`` grid cells (default about
    0.2 wide); the analytic bin value is the mean of the grid density over
    the block.  The support boundary uses finer blocks (about 0.04 wide).
    """
    if grid.rho is None:
        raise ConfigError("grid density must be computed before the comparison")
    if grid.ensH != cfg.ensH or grid.ensHp != cfg.ensHp:
        raise ConfigError("grid and sample config describe different ensembles")
    x0, x1 = grid.meta["bbox"][0], grid.meta["bbox"][1]
    y0, y1 = grid.meta["bbox"][2], grid.meta["bbox"][3]
    h = (x1 - x0) / (grid.nx - 1)
    if density_block is None:
        density_block = max(1, int(round(0.2 / h)))
    if support_block is None:
        support_block = max(1, int(round(0.04 / h)))
    xe_cells = _cell_edges(grid.x, x0, x1)
    ye_cells = _cell_edges(grid.y, y0, y1)

    ev, ov, warnings = sample_spectra(cfg, overlaps=overlaps, workers=workers)
    n, _ = cfg.effective_n()

    # density L1 on coarse blocks; eigenvalues outside the binned area count fully
    xe = xe_cells[:: density_block][: grid.nx // density_block + 1]
    ye = ye_cells[:: density_block][: grid.ny // density_block + 1]
    emp = density_histogram(ev, xe, ye)
    ana = _block_mean(grid.rho, density_block)
    area = np.outer(np.diff(ye), np.diff(xe))
    inside = (ev.real >= xe[0]) & (ev.real < xe[-1]) & (ev.imag >= ye[0]) & (ev.imag < ye[-1])
    l1 = float(np.sum(np.abs(emp - ana) * area) + (1.0 - inside.mean()))

    # support boundary on fine blocks
    xs = xe_cells[:: support_block]
    ys = ye_cells[:: support_block]
    emp_curves = empirical_boundary(ev, xs, ys)
    if curve is None:
        curve = trace_borderline(grid, grid.meta.get("solver", "general"))
    hd = hausdorff(emp_curves, curve.polylines)

    ratio, ohist = math.nan, None
    if overlaps:
        ohist = overlap_field(ev, ov, xe, ye, norm=ev.size)
        near = np.abs(ev - overlap_centre) < overlap_radius
        emp_mass = float(np.sum(ov[near])) / ev.size
        ana_mass = _disk_integral(cfg.ensH, cfg.ensHp, overlap_centre, overlap_radius, n)
        ratio = emp_mass / ana_mass if ana_mass > 0 else math.nan

    im = ev.imag
    im_sign = {"positive": int(np.sum(im > 1e-12)), "negative": int(np.sum(im < -1e-12)),
               "zero": int(np.sum(np.abs(im) <= 1e-12))}
    calibration = {}
    for role, ens in (("h", cfg.ensH), ("hp", cfg.ensHp)):
        if isinstance(ens, WishartLike):
            calibration[role] = wishart_calibration(ens)
    return McReport(
        config={**cfg.to_json(), "effective_n": n, "density_block": density_block,
                "support_block": support_block, "overlap_radius": overlap_radius,
                "overlap_centre": [overlap_centre.real, overlap_centre.imag], "grid": grid.meta},
        xedges=xe, yedges=ye, density_hist=emp, overlap_hist=ohist, l1_density=l1,
        overlap_center_ratio=ratio, support_hausdorff=hd, support_bin=float(xs[1] - xs[0]),
        n_curves_empirical=len(emp_curves), n_curves_analytic=len(curve.polylines),
        im_sign=im_sign, calibration=calibration, warnings=warnings,
    )
