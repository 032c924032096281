"""Complex dense linear algebra and seeded randomness used by every other module.

Conventions fixed here once and used everywhere:

* inner products are conjugate-linear in the second argument,
  ``<r, a> = sum_k r[k] * conj(a[k])``;
* matrices are dense ``complex128`` in Fortran (column-major) order so that
  column extraction is contiguous;
* random streams are keyed by ``(seed, stream_id)`` so that parallel workers
  reproduce the draws of a serial run regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "as_complex_matrix",
    "as_complex_vector",
    "stream_rng",
    "LeastSquaresSolution",
    "solve_least_squares",
    "correlations",
]

# Relative pivot threshold below which a triangular factor is treated as
# rank deficient (times the largest column norm of the input).
RANK_TOLERANCE = 1e-12


def as_complex_matrix(entries) -> np.ndarray:
    """Validate and return a dense complex matrix in column-major order.

    Raises ``ValueError`` for empty shapes or non-finite entries.
    """
    a = np.asfortranarray(entries, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix dimensions must be positive, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def as_complex_vector(entries) -> np.ndarray:
    """Validate and return a dense complex vector."""
    v = np.ascontiguousarray(entries, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d array, got ndim={v.ndim}")
    if v.size < 1:
        raise ValueError("vector length must be positive")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def stream_rng(seed: int, stream_id) -> np.random.Generator:
    """Return a generator for the stream ``(seed, stream_id)``.

    Identical ``(seed, stream_id)`` pairs reproduce identical draw sequences
    across runs, platforms and thread schedules.  ``stream_id`` may be an
    integer or a tuple of integers (e.g. ``(trial, substream)``).
    """
    if isinstance(stream_id, (int, np.integer)):
        key = (int(stream_id),)
    else:
        key = tuple(int(k) for k in stream_id)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Coefficients of a least-squares solve plus a rank-deficiency flag."""

    coeffs: np.ndarray
    rank: int
    rank_deficient: bool


def solve_least_squares(a_sub: np.ndarray, b: np.ndarray) -> LeastSquaresSolution:
    """Minimize ``||a_sub @ z - b||_2`` over ``z``.

    Uses QR with column pivoting; the magnitudes on the diagonal of the
    triangular factor are compared against ``RANK_TOLERANCE`` times the
    largest column norm of ``a_sub``.  A full-rank system is solved by back
    substitution; a rank-deficient one falls back to the minimum-norm
    minimizer (truncated SVD) and flags the deficiency.

    Parameters
    ----------
    a_sub : (n, k) complex ndarray, k <= n
    b : (n,) complex ndarray

    Returns
    -------
    LeastSquaresSolution
    """
    a_sub = np.asarray(a_sub, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a_sub.ndim != 2 or b.ndim != 1 or a_sub.shape[0] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix {a_sub.shape} vs vector {b.shape}"
        )
    n, k = a_sub.shape
    if k > n:
        raise ValueError(f"least squares requires n_cols <= n_rows, got {a_sub.shape}")

    q, r, piv = scipy.linalg.qr(a_sub, mode="economic", pivoting=True)
    col_norms = np.linalg.norm(a_sub, axis=0)
    tol = RANK_TOLERANCE * np.max(col_norms)
    diag = np.abs(np.diagonal(r))
    # Pivoting makes the diagonal magnitudes non-increasing.
    rank = int(np.count_nonzero(diag > tol))

    if rank == k:
        zp = scipy.linalg.solve_triangular(r, q.conj().T @ b, lower=False)
        z = np.empty(k, dtype=np.complex128)
        z[piv] = zp
        return LeastSquaresSolution(coeffs=z, rank=rank, rank_deficient=False)

    # Minimum-norm minimizer of the rank-truncated problem.
    u, s, vh = np.linalg.svd(a_sub, full_matrices=False)
    keep = s > (RANK_TOLERANCE * s[0] if s[0] > 0 else np.inf)
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    z = vh.conj().T @ (inv_s * (u.conj().T @ b))
    return LeastSquaresSolution(coeffs=z, rank=rank, rank_deficient=True)


def correlations(a: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Inner products ``<r, a_i>`` of a residual with every column of ``a``.

    Follows the global convention of conjugating the second argument, so
    entry ``i`` equals ``sum_k r[k] * conj(a[k, i])``.
    """
    a = np.asarray(a)
    r = np.asarray(r)
    if a.ndim != 2 or r.ndim != 1 or a.shape[0] != r.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {a.shape} vs vector {r.shape}")
    return a.conj().T @ r
