"""Greedy pursuit algorithms: OMP, band-excluded OMP, local optimization and
their combination.

All four share the same skeleton: pick the column most correlated with the
residual, grow the support, re-fit amplitudes by least squares on the
support, repeat.  The band-excluded variant (BOMP) restricts each pick to
indices outside the secondary coherence band of the running support, which
stops the pursuit from stacking estimates inside one coherence band.  Local
optimization (LO) sweeps the support once, letting each index move within
its own coherence band whenever the move lowers the residual; BLOOMP runs LO
after every pick.

Determinism: correlation argmax ties break to the lowest index, and an LO
swap is taken only when it strictly lowers the residual (scanning candidates
in ascending index order), so identical inputs replay identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coherence import CoherenceBands, secondary_band
from .ensembles import SensingMatrix, SparseSignal
from .numerics import RANK_TOLERANCE, correlations, solve_least_squares

__all__ = [
    "PursuitParams",
    "RecoveryResult",
    "omp",
    "bomp",
    "local_optimization",
    "bloomp",
]


@dataclass(frozen=True)
class PursuitParams:
    """Knobs shared by the pursuit algorithms.

    ``bands`` must be built from the same matrix the pursuit runs on (at the
    experiment's eta); it is ignored by plain OMP.  The pursuit stops early
    once the residual drops below ``residual_tolerance * ||b||``.
    """

    sparsity: int
    bands: CoherenceBands | None = None
    residual_tolerance: float = 1e-10

    def __post_init__(self):
        if self.sparsity < 1:
            raise ValueError(f"sparsity must be positive, got {self.sparsity}")
        if self.residual_tolerance < 0:
            raise ValueError("residual_tolerance must be >= 0")


@dataclass(frozen=True)
class RecoveryResult:
    """Outcome of one pursuit run.

    ``estimate`` is None only in the degenerate case of an empty support
    (e.g. ``b = 0`` stops the pursuit before the first pick).
    ``support_history`` starts at the empty set; ``residual_norms`` starts at
    ``||b||`` and is non-increasing.  ``termination`` is one of
    ``completed | candidate_set_exhausted | rank_deficient_ls``.
    """

    estimate: SparseSignal | None
    support_history: tuple
    residual_norms: tuple
    termination: str


def _matrix_of(a) -> np.ndarray:
    return a.matrix if isinstance(a, SensingMatrix) else np.asarray(a)


def _insert_sorted(support: np.ndarray, index: int) -> np.ndarray:
    pos = int(np.searchsorted(support, index))
    return np.insert(support, pos, index)


def _finish(
    grid_length: int,
    support: np.ndarray,
    coeffs: np.ndarray | None,
    history: list,
    norms: list,
    termination: str,
) -> RecoveryResult:
    if support.size == 0 or coeffs is None:
        estimate = None
    else:
        keep = coeffs != 0
        if np.any(keep):
            estimate = SparseSignal(
                grid_length=grid_length,
                support=support[keep],
                amplitudes=coeffs[keep],
            )
        else:
            estimate = None
    return RecoveryResult(
        estimate=estimate,
        support_history=tuple(history),
        residual_norms=tuple(norms),
        termination=termination,
    )


def _greedy_pursuit(
    a, b: np.ndarray, params: PursuitParams, band_excluded: bool, locally_optimized: bool
) -> RecoveryResult:
    matrix = _matrix_of(a)
    b = np.asarray(b, dtype=np.complex128)
    if matrix.shape[0] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix {matrix.shape} vs data {b.shape}"
        )
    cbands = params.bands
    if band_excluded and cbands is None:
        raise ValueError("band-excluded pursuit requires coherence bands")

    m = matrix.shape[1]
    b_norm = float(np.linalg.norm(b))
    stop_at = params.residual_tolerance * b_norm

    support = np.empty(0, dtype=np.int64)
    coeffs: np.ndarray | None = None
    residual = b.copy()
    history = [support]
    norms = [b_norm]
    termination = "completed"

    for _ in range(params.sparsity):
        if norms[-1] <= stop_at:
            break
        magnitudes = np.abs(correlations(matrix, residual))
        if band_excluded:
            if support.size:
                magnitudes[secondary_band(cbands, support)] = -1.0
        else:
            magnitudes[support] = -1.0
        i_max = int(np.argmax(magnitudes))
        if magnitudes[i_max] < 0:
            termination = "candidate_set_exhausted"
            break
        support = _insert_sorted(support, i_max)
        if locally_optimized:
            support = local_optimization(a, b, cbands, support)
        solution = solve_least_squares(matrix[:, support], b)
        coeffs = solution.coeffs
        residual = b - matrix[:, support] @ coeffs
        history.append(support)
        norms.append(float(np.linalg.norm(residual)))
        if solution.rank_deficient:
            termination = "rank_deficient_ls"
            break

    return _finish(m, support, coeffs, history, norms, termination)


def omp(a, b: np.ndarray, params: PursuitParams) -> RecoveryResult:
    """Orthogonal Matching Pursuit: unrestricted greedy selection."""
    return _greedy_pursuit(a, b, params, band_excluded=False, locally_optimized=False)


def bomp(a, b: np.ndarray, params: PursuitParams) -> RecoveryResult:
    """Band-excluded OMP: each pick avoids the secondary coherence band of
    the support selected so far."""
    return _greedy_pursuit(a, b, params, band_excluded=True, locally_optimized=False)


def bloomp(a, b: np.ndarray, params: PursuitParams) -> RecoveryResult:
    """Band-excluded, locally optimized OMP: BOMP with an LO sweep after
    every pick."""
    return _greedy_pursuit(a, b, params, band_excluded=True, locally_optimized=True)


def local_optimization(
    a, b: np.ndarray, cbands: CoherenceBands, s0
) -> np.ndarray:
    """One residual-reduction sweep over a support, one index at a time.

    Visits the input indices in ascending order; for each, tries every
    candidate in its coherence band (the incumbent included) while holding
    the other indices fixed, and keeps the candidate whose least-squares
    residual is smallest.  The incumbent wins ties, and candidates that
    would shrink the support or make it rank deficient are skipped, so the
    output always has the input's size.

    The candidate residuals are evaluated by projecting onto the fixed
    columns once per incumbent: with ``r0`` the residual of the fixed
    support and ``w_j`` the component of candidate column ``j`` orthogonal
    to it, the least-squares residual of the swapped support is
    ``||r0||^2 - |<w_j, r0>|^2 / ||w_j||^2``.  One thin QR per incumbent
    replaces one solve per candidate; the winner is identical.
    """
    matrix = _matrix_of(a)
    b = np.asarray(b, dtype=np.complex128)
    incumbents = np.unique(np.asarray(list(s0), dtype=np.int64))
    if incumbents.size == 0:
        raise ValueError("local optimization requires a nonempty support")

    current = incumbents.copy()
    for i_n in incumbents:
        i_n = int(i_n)
        base = current[current != i_n]
        if base.size:
            base_cols = matrix[:, base]
            q0, r0 = np.linalg.qr(base_cols)
            diag = np.abs(np.diagonal(r0))
            base_norm_max = float(np.max(np.linalg.norm(base_cols, axis=0)))
            if np.any(diag <= RANK_TOLERANCE * base_norm_max):
                # Fixed columns already dependent: every candidate support is
                # rank deficient, so the sweep keeps the incumbent.
                continue
            residual0 = b - q0 @ (q0.conj().T @ b)
        else:
            q0 = None
            base_norm_max = 0.0
            residual0 = b

        candidates = cbands.band_of(i_n)
        candidates = candidates[~np.isin(candidates, base)]
        cols = matrix[:, candidates]
        if q0 is not None:
            w = cols - q0 @ (q0.conj().T @ cols)
        else:
            w = cols
        w_norms = np.linalg.norm(w, axis=0)
        col_norms = np.linalg.norm(cols, axis=0)
        tol = RANK_TOLERANCE * np.maximum(col_norms, base_norm_max)
        valid = w_norms > tol

        res0_sq = float(np.real(np.vdot(residual0, residual0)))
        gains = np.zeros(candidates.size)
        gains[valid] = (
            np.abs(w[:, valid].conj().T @ residual0) / w_norms[valid]
        ) ** 2
        residual_sq = np.maximum(res0_sq - gains, 0.0)

        at_incumbent = int(np.searchsorted(candidates, i_n))
        best_index = i_n
        best_res = residual_sq[at_incumbent] if valid[at_incumbent] else np.inf
        others = valid.copy()
        others[at_incumbent] = False
        if np.any(others):
            scores = np.where(others, residual_sq, np.inf)
            j_best = int(np.argmin(scores))
            if scores[j_best] < best_res:
                best_index = int(candidates[j_best])
        if best_index != i_n:
            current = _insert_sorted(base, best_index)
    return current
