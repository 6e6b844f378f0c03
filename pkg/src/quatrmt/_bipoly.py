"""Dense bivariate polynomials as 2D coefficient arrays.

``p[i, j]`` multiplies ``u**i * v**j``.  Only the handful of operations the
transforms and solvers need.
"""

from __future__ import annotations

import numpy as np


def as2d(p) -> np.ndarray:
    p = np.atleast_2d(np.asarray(p))
    return p if np.iscomplexobj(p) else p.astype(float)


def mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    dtype = np.result_type(p, q)
    out = np.zeros((p.shape[0] + q.shape[0] - 1, p.shape[1] + q.shape[1] - 1), dtype=dtype)
    for i in range(p.shape[0]):
        for k in range(q.shape[0]):
            out[i + k] += np.convolve(p[i], q[k])
    return out


def add(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    dtype = np.result_type(p, q)
    out = np.zeros((max(p.shape[0], q.shape[0]), max(p.shape[1], q.shape[1])), dtype=dtype)
    out[: p.shape[0], : p.shape[1]] += p
    out[: q.shape[0], : q.shape[1]] += q
    return out


def power(p: np.ndarray, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=p.dtype)
    for _ in range(n):
        out = mul(out, p)
    return out


def scale_u(p: np.ndarray, c: complex) -> np.ndarray:
    """Substitute ``u -> c*u``."""
    return p * (c ** np.arange(p.shape[0]))[:, None]


def row(u_coeffs) -> np.ndarray:
    """Polynomial in ``u`` only (a column vector in our layout)."""
    return np.asarray(u_coeffs)[:, None]


def col(v_coeffs) -> np.ndarray:
    """Polynomial in ``v`` only."""
    return np.asarray(v_coeffs)[None, :]


def trim(p: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Drop identically-zero leading rows/columns."""
    mag = np.abs(p)
    thresh = tol * (mag.max() if mag.size else 0.0)
    rows = np.nonzero((mag > thresh).any(axis=1))[0]
    cols = np.nonzero((mag > thresh).any(axis=0))[0]
    if rows.size == 0:
        return np.zeros((1, 1), dtype=p.dtype)
    return p[: rows[-1] + 1, : cols[-1] + 1]


def strip_low_u(p: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Divide out the largest power of ``u`` dividing ``p``."""
    mag = np.abs(p)
    thresh = tol * (mag.max() if mag.size else 0.0)
    nz = np.nonzero((mag > thresh).any(axis=1))[0]
    if nz.size == 0:
        return p
    return p[nz[0]:]


def eval_v(p: np.ndarray, v) -> np.ndarray:
    """Coefficients in ``u`` at fixed ``v`` (vectorised over ``v``).

    Returns an array of shape ``v.shape + (deg_u + 1,)``.
    """
    v = np.asarray(v)
    powers = v[..., None] ** np.arange(p.shape[1])
    return powers @ p.T


def substitute_v_affine(p: np.ndarray, c0: float, c1: float) -> np.ndarray:
    """Substitute ``v -> c0 + c1*v``."""
    lin = np.array([c0, c1])
    out = np.zeros_like(p)
    acc = np.array([1.0])
    for j in range(p.shape[1]):
        out[:, : acc.size] += np.outer(p[:, j], acc)
        acc = np.convolve(acc, lin)
    return out
