"""Coherence pattern of a sensing matrix, eta-coherence bands and band algebra.

The pattern is the full matrix of normalized column inner products
``mu(j, k) = |<a_j, a_k>| / (||a_j|| ||a_k||)`` with diagonal fixed at 1.
The eta-coherence band of an index collects every index whose coherence with
it exceeds ``eta`` (plus the index itself, so that swap candidates always
include the incumbent); the secondary band is the band of the band and is
the exclusion zone used by the band-excluded pursuit.

Paraxial matrices have a translation-invariant pattern
(``mu(j, k)`` depends only on ``j - k``), which this module exploits: the
whole pattern collapses to a cross-section profile computable in ``O(N M)``
instead of ``O(N M^2)``.  Both routes produce identical band structures and
are cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import SensingMatrix

__all__ = [
    "CoherencePattern",
    "CoherenceBands",
    "coherence_pattern",
    "paraxial_coherence_profile",
    "mutual_coherence",
    "mutual_coherence_of",
    "bands",
    "bands_from_matrix",
    "bands_from_profile",
    "pattern_row",
    "band_of_set",
    "secondary_band",
    "check_separation",
    "recovery_guarantee_margin",
    "swap_stability_threshold",
    "band_limited_eta",
]

# Column chunk size for Gram computations; bounds peak memory at large M.
_GRAM_CHUNK = 512


@dataclass(frozen=True)
class CoherencePattern:
    """Symmetric matrix of pairwise column coherences, diagonal 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"pattern must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValueError("pattern must be symmetric")
        if np.any(v < 0) or np.any(v > 1 + 1e-12):
            raise ValueError("pattern values must lie in [0, 1]")
        if not np.all(np.diagonal(v) == 1.0):
            raise ValueError("pattern diagonal must be 1")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CoherenceBands:
    """Per-index neighbor lists ``{i : mu(i, k) > eta} + {k}``, sorted."""

    eta: float
    n: int
    neighbors: tuple

    def band_of(self, k: int) -> np.ndarray:
        return self.neighbors[k]


def _column_norms(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=0)
    if np.any(norms == 0):
        raise ValueError("matrix has a zero column; coherence undefined")
    return norms


def _as_matrix(a) -> tuple[np.ndarray, str | None]:
    if isinstance(a, SensingMatrix):
        return a.matrix, a.ensemble
    return np.asarray(a), None


def paraxial_coherence_profile(a: SensingMatrix) -> np.ndarray:
    """Cross-section ``mu(j, j + delta)`` of a paraxial pattern, all deltas.

    Valid because the normalized paraxial entries make the column inner
    products depend on the index difference only.
    """
    if a.ensemble != "paraxial":
        raise ValueError("profile shortcut only applies to the paraxial ensemble")
    u = a.sensor_positions / a.grid.aperture
    m = a.n_cols
    deltas = np.arange(m) / a.grid.refinement
    phases = np.exp(2j * np.pi * np.outer(u, deltas))
    profile = np.abs(phases.mean(axis=0))
    profile[0] = 1.0
    return profile


def coherence_pattern(a, method: str = "auto") -> CoherencePattern:
    """Full pairwise coherence pattern of the columns of ``a``.

    ``method='gram'`` forms the normalized Gram matrix directly
    (``O(N M^2)``, fine at desk scale); ``'profile'`` uses the paraxial
    cross-section shortcut; ``'auto'`` picks the shortcut when valid.
    """
    matrix, ensemble = _as_matrix(a)
    if method not in ("auto", "gram", "profile"):
        raise ValueError(f"unknown method {method!r}")
    use_profile = method == "profile" or (method == "auto" and ensemble == "paraxial")
    if use_profile:
        if ensemble != "paraxial":
            raise ValueError("profile method requires a paraxial SensingMatrix")
        profile = paraxial_coherence_profile(a)
        values = toeplitz_from_profile(profile)
    else:
        norms = _column_norms(matrix)
        gram = np.abs(matrix.conj().T @ matrix)
        values = gram / np.outer(norms, norms)
        values = 0.5 * (values + values.T)
        np.clip(values, 0.0, 1.0, out=values)
        np.fill_diagonal(values, 1.0)
    return CoherencePattern(values=values)


def toeplitz_from_profile(profile: np.ndarray) -> np.ndarray:
    """Symmetric Toeplitz matrix whose first column is the given profile."""
    m = profile.size
    idx = np.abs(np.arange(m)[:, None] - np.arange(m)[None, :])
    return profile[idx]


def mutual_coherence(pattern: CoherencePattern) -> float:
    """Largest off-diagonal coherence."""
    if pattern.n < 2:
        raise ValueError("mutual coherence needs at least two columns")
    v = pattern.values.copy()
    np.fill_diagonal(v, -np.inf)
    return float(np.max(v))


def mutual_coherence_of(a) -> float:
    """Mutual coherence of a matrix, via the cheapest valid route."""
    matrix, ensemble = _as_matrix(a)
    if matrix.shape[1] < 2:
        raise ValueError("mutual coherence needs at least two columns")
    if ensemble == "paraxial":
        profile = paraxial_coherence_profile(a)
        return float(np.max(profile[1:]))
    return mutual_coherence(coherence_pattern(a, method="gram"))


def _bands_from_adjacency(adj: np.ndarray, eta: float) -> CoherenceBands:
    neighbors = tuple(np.flatnonzero(adj[k]) for k in range(adj.shape[0]))
    return CoherenceBands(eta=eta, n=adj.shape[0], neighbors=neighbors)


def bands(pattern: CoherencePattern, eta: float) -> CoherenceBands:
    """Eta-coherence bands from a precomputed pattern."""
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    adj = pattern.values > eta
    np.fill_diagonal(adj, True)
    return _bands_from_adjacency(adj, eta)


def bands_from_matrix(a, eta: float, chunk: int = _GRAM_CHUNK) -> CoherenceBands:
    """Eta-coherence bands straight from the matrix, chunked over columns.

    Equivalent to ``bands(coherence_pattern(a, 'gram'), eta)`` but never
    stores the dense pattern; this is the working route inside Monte Carlo
    trials at large M.
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    matrix, _ = _as_matrix(a)
    m = matrix.shape[1]
    norms = _column_norms(matrix)
    normalized = matrix / norms[None, :]
    ah = normalized.conj().T
    cut = eta * eta
    adj = np.zeros((m, m), dtype=bool)
    for start in range(0, m, chunk):
        cols = slice(start, min(start + chunk, m))
        gram = ah @ normalized[:, cols]
        # Threshold on squared magnitudes; avoids the hypot over M^2 entries.
        adj[:, cols] = gram.real**2 + gram.imag**2 > cut
    # Enforce exact membership symmetry despite floating-point Gram noise.
    adj |= adj.T
    np.fill_diagonal(adj, True)
    return _bands_from_adjacency(adj, eta)


def bands_from_profile(profile: np.ndarray, eta: float) -> CoherenceBands:
    """Bands of a translation-invariant pattern given its cross-section."""
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    m = profile.size
    offsets = np.flatnonzero(profile[1:] > eta) + 1
    rel = np.concatenate((-offsets[::-1], [0], offsets))
    neighbors = []
    for k in range(m):
        idx = k + rel
        neighbors.append(idx[(idx >= 0) & (idx < m)])
    return CoherenceBands(eta=eta, n=m, neighbors=tuple(neighbors))


def pattern_row(a, j0: int, deltas: np.ndarray) -> np.ndarray:
    """Coherences ``mu(j0, j0 + delta)`` for the given deltas, one Gram row."""
    matrix, _ = _as_matrix(a)
    norms = _column_norms(matrix)
    g = np.abs(matrix.conj().T @ matrix[:, j0]) / (norms * norms[j0])
    out = g[j0 + deltas]
    out[deltas == 0] = 1.0
    return out


def band_of_set(cbands: CoherenceBands, indices) -> np.ndarray:
    """Union of the bands of every index in the set (empty set -> empty)."""
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size == 0:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate([cbands.neighbors[k] for k in idx]))


def secondary_band(cbands: CoherenceBands, indices) -> np.ndarray:
    """Band of the band: the exclusion zone around a set of indices."""
    return band_of_set(cbands, band_of_set(cbands, indices))


def check_separation(cbands: CoherenceBands, support) -> bool:
    """True iff every pair of support indices has disjoint band / secondary band.

    This is the separation hypothesis under which the band-excluded pursuit
    is guaranteed to land inside the bands of the true support.
    """
    idx = np.asarray(list(support), dtype=np.int64)
    secondary = {int(j): secondary_band(cbands, [j]) for j in idx}
    for i in idx:
        band_i = cbands.neighbors[int(i)]
        for j in idx:
            if i == j:
                continue
            if np.intersect1d(band_i, secondary[int(j)], assume_unique=True).size:
                return False
    return True


def recovery_guarantee_margin(
    eta: float, s: int, x_max: float, x_min: float, noise_norm: float
) -> float:
    """Sufficient-condition margin for band-accurate greedy recovery.

    Evaluates ``eta (5 s - 4) x_max / x_min + 5 ||e|| / (2 x_min)``; the
    guarantee applies when the result is below 1.  Strictly increasing in
    each of eta, s, the dynamic range and the noise norm.
    """
    if x_min <= 0:
        raise ValueError(f"x_min must be positive, got {x_min}")
    return eta * (5 * s - 4) * (x_max / x_min) + 5.0 * noise_norm / (2.0 * x_min)


def swap_stability_threshold(
    eta: float, s: int, noise_norm: float, x_min: float
) -> tuple[float, bool]:
    """Smallest-amplitude threshold under which local swaps stay band-accurate.

    Returns ``(threshold, holds)`` with
    ``threshold = (noise + 2 (s-1) eta) * (1/(1-eta) + sqrt(1/(1-eta)^2 + 1/(1-eta^2)))``
    and ``holds`` true iff ``x_min`` exceeds it.
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    one_minus = 1.0 - eta
    factor = 1.0 / one_minus + math.sqrt(1.0 / one_minus**2 + 1.0 / (1.0 - eta**2))
    threshold = (noise_norm + 2.0 * (s - 1) * eta) * factor
    return threshold, x_min > threshold


def band_limited_eta(
    profile_means: np.ndarray, half_width_limit: int, step: float = 0.01
) -> float:
    """Smallest grid eta whose band half-width stays within the limit.

    ``profile_means`` is an averaged cross-section (delta 0 upward); the band
    half-width at eta is the largest delta whose mean coherence exceeds eta.
    """
    tail = profile_means[half_width_limit + 1 :]
    floor = float(np.max(tail)) if tail.size else 0.0
    eta = math.floor(floor / step + 1.0) * step
    eta = min(max(eta, step), 1.0 - step)
    return round(eta, 10)
