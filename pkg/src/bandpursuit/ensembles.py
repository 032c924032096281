"""Sensing-matrix ensembles, random sparse objects and off-grid source scenes.

Two measurement ensembles are provided: random-aperture paraxial imaging on a
fractional grid, and a Gaussian measurement matrix composed with an
over-sampled DFT frame.  Both produce unit-norm columns whose pairwise
coherence grows with the refinement (redundancy) factor ``F``.

The paraxial builder works in normalized coordinates: with sensor positions
``u = r / aperture`` in ``[0, 1]`` and grid index ``j``, the matrix entry is
``exp(-2i pi u j / F) / sqrt(N)``.  This makes results unit-independent;
physical units enter only in :func:`simulate_point_sources`, which keeps the
full propagation phases and exposes the gridding (discretization) error of
off-grid sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_complex_vector

__all__ = [
    "ParaxialGeometry",
    "SensingMatrix",
    "SparseSignal",
    "ContinuumScene",
    "build_paraxial_matrix",
    "paraxial_matrix_for_sensors",
    "build_dft_frame",
    "build_gaussian_matrix",
    "compose",
    "generate_objects",
    "synthesize_measurements",
    "simulate_point_sources",
]

# Attempt cap for the separation rejection sampler; configurations this close
# to infeasible are rejected rather than looped on forever.
_MAX_REJECTION_ATTEMPTS = 100_000


@dataclass(frozen=True)
class ParaxialGeometry:
    """Aperture/target-plane geometry for the paraxial imaging model.

    ``rayleigh_length = distance * wavelength / aperture`` is the classical
    resolution limit; the reconstruction grid of ``grid_size`` points has
    spacing ``rayleigh_length / refinement``, i.e. the grid deliberately
    subdivides the Rayleigh length ``refinement`` times.
    """

    wavenumber: float
    distance: float
    aperture: float
    refinement: int
    grid_size: int

    def __post_init__(self):
        if self.wavenumber <= 0 or self.distance <= 0 or self.aperture <= 0:
            raise ValueError("wavenumber, distance and aperture must be positive")
        if self.refinement < 1 or int(self.refinement) != self.refinement:
            raise ValueError(f"refinement must be a positive integer, got {self.refinement}")
        if self.grid_size < 1:
            raise ValueError(f"grid_size must be positive, got {self.grid_size}")

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.wavenumber

    @property
    def rayleigh_length(self) -> float:
        return self.distance * self.wavelength / self.aperture

    @property
    def grid_spacing(self) -> float:
        return self.rayleigh_length / self.refinement

    @property
    def grid_extent(self) -> float:
        return self.grid_size * self.grid_spacing

    def grid_points(self) -> np.ndarray:
        return np.arange(self.grid_size) * self.grid_spacing

    @classmethod
    def normalized(cls, refinement: int, grid_size: int) -> "ParaxialGeometry":
        """Unit geometry (wavelength, distance and aperture all 1)."""
        return cls(
            wavenumber=2.0 * math.pi,
            distance=1.0,
            aperture=1.0,
            refinement=refinement,
            grid_size=grid_size,
        )


@dataclass(frozen=True)
class SensingMatrix:
    """Dense measurement matrix plus the parameters of its ensemble.

    ``ensemble`` is one of ``paraxial | dft_frame | gaussian | composed``.
    Paraxial matrices carry their sensor positions and grid geometry;
    composed matrices keep references to both factors.
    """

    matrix: np.ndarray
    ensemble: str
    params: dict = field(default_factory=dict)
    sensor_positions: np.ndarray | None = None
    grid: ParaxialGeometry | None = None
    factors: tuple | None = None

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class SparseSignal:
    """Sparse coefficient vector: support indices plus complex amplitudes."""

    grid_length: int
    support: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if support.ndim != 1 or amplitudes.shape != support.shape:
            raise ValueError("support and amplitudes must be 1-d and equally long")
        if support.size < 1:
            raise ValueError("support must be nonempty")
        if np.any(np.diff(support) <= 0):
            raise ValueError("support indices must be strictly increasing")
        if support[0] < 0 or support[-1] >= self.grid_length:
            raise ValueError("support indices out of range")
        if np.any(amplitudes == 0):
            raise ValueError("amplitudes must be nonzero")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def sparsity(self) -> int:
        return int(self.support.size)

    @property
    def magnitude_max(self) -> float:
        return float(np.max(np.abs(self.amplitudes)))

    @property
    def magnitude_min(self) -> float:
        return float(np.min(np.abs(self.amplitudes)))

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.grid_length, dtype=np.complex128)
        x[self.support] = self.amplitudes
        return x


@dataclass(frozen=True)
class ContinuumScene:
    """Point sources at continuous (not necessarily on-grid) positions."""

    positions: np.ndarray
    strengths: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        strengths = np.asarray(self.strengths, dtype=np.complex128)
        if positions.ndim != 1 or strengths.shape != positions.shape:
            raise ValueError("positions and strengths must be 1-d and equally long")
        if positions.size < 1:
            raise ValueError("scene must contain at least one source")
        if np.unique(positions).size != positions.size:
            raise ValueError("source positions must be pairwise distinct")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "strengths", strengths)


def paraxial_matrix_for_sensors(
    geometry: ParaxialGeometry, sensor_positions: np.ndarray
) -> SensingMatrix:
    """Paraxial matrix for given sensor positions (in ``[0, aperture]``).

    Entry ``(l, j)`` is ``exp(-2i pi u_l j / F) / sqrt(N)`` with
    ``u_l = r_l / aperture``.  The grid index enters only through ``j / F``,
    so refining the grid by an integer factor ``c`` maps column ``j`` of the
    coarse matrix exactly onto column ``c*j`` of the fine one.
    """
    positions = np.asarray(sensor_positions, dtype=np.float64)
    if positions.ndim != 1 or positions.size < 1:
        raise ValueError("sensor_positions must be a nonempty 1-d array")
    if np.any(positions < 0) or np.any(positions > geometry.aperture):
        raise ValueError("sensor positions must lie within [0, aperture]")
    n = positions.size
    u = positions / geometry.aperture
    j_over_f = np.arange(geometry.grid_size) / geometry.refinement
    entries = np.exp(-2j * np.pi * np.outer(u, j_over_f)) / math.sqrt(n)
    return SensingMatrix(
        matrix=np.asfortranarray(entries),
        ensemble="paraxial",
        params={
            "n_sensors": n,
            "grid_size": geometry.grid_size,
            "refinement": geometry.refinement,
        },
        sensor_positions=positions,
        grid=geometry,
    )


def build_paraxial_matrix(
    geometry: ParaxialGeometry, n_sensors: int, rng: np.random.Generator
) -> SensingMatrix:
    """Draw sensor positions i.i.d. uniform on the aperture and build the matrix."""
    if n_sensors < 1:
        raise ValueError(f"n_sensors must be positive, got {n_sensors}")
    positions = rng.random(n_sensors) * geometry.aperture
    return paraxial_matrix_for_sensors(geometry, positions)


def build_dft_frame(r: int, f: int) -> SensingMatrix:
    """Over-sampled DFT frame: ``r x (r*f)``, entries ``exp(-2i pi k j/(r f))/sqrt(r)``."""
    if r < 1 or f < 1:
        raise ValueError(f"frame parameters must be positive, got r={r}, f={f}")
    k = np.arange(r)[:, None]
    j = np.arange(r * f)[None, :]
    entries = np.exp(-2j * np.pi * (k * j) / (r * f)) / math.sqrt(r)
    return SensingMatrix(
        matrix=np.asfortranarray(entries),
        ensemble="dft_frame",
        params={"r": r, "f": f},
    )


def build_gaussian_matrix(
    n: int, r: int, rng: np.random.Generator
) -> SensingMatrix:
    """Real i.i.d. Gaussian matrix, entries N(0, 1/n) so columns have unit norm
    in expectation."""
    if n < 1 or r < 1:
        raise ValueError(f"matrix dimensions must be positive, got n={n}, r={r}")
    entries = rng.standard_normal((n, r)) / math.sqrt(n)
    return SensingMatrix(
        matrix=np.asfortranarray(entries.astype(np.complex128)),
        ensemble="gaussian",
        params={"n": n, "r": r},
    )


def compose(phi: SensingMatrix, psi: SensingMatrix) -> SensingMatrix:
    """Dense product ``phi @ psi`` with both factors recorded."""
    if phi.n_cols != psi.n_rows:
        raise ValueError(
            f"dimension mismatch: {phi.n_rows}x{phi.n_cols} @ {psi.n_rows}x{psi.n_cols}"
        )
    return SensingMatrix(
        matrix=np.asfortranarray(phi.matrix @ psi.matrix),
        ensemble="composed",
        params={"left": dict(phi.params), "right": dict(psi.params)},
        factors=(phi, psi),
    )


def generate_objects(
    m: int,
    s: int,
    min_sep_grid: int,
    dynamic_range: float,
    rng: np.random.Generator,
) -> SparseSignal:
    """Random sparse objects with a guaranteed separation and dynamic range.

    Support indices are drawn by rejection sampling until all pairwise gaps
    are at least ``min_sep_grid``.  Magnitudes are uniform on
    ``[1, dynamic_range]`` with one element pinned to each extreme so the
    max/min ratio equals ``dynamic_range`` exactly; phases are uniform.
    """
    if s < 1:
        raise ValueError(f"sparsity must be positive, got {s}")
    if min_sep_grid < 1:
        raise ValueError(f"min_sep_grid must be positive, got {min_sep_grid}")
    if dynamic_range < 1:
        raise ValueError(f"dynamic_range must be >= 1, got {dynamic_range}")
    if dynamic_range > 1 and s < 2:
        raise ValueError("dynamic_range > 1 requires at least two objects")
    if s * min_sep_grid >= m:
        raise ValueError(
            f"cannot place {s} objects with separation {min_sep_grid} on a grid of {m}"
        )

    for _ in range(_MAX_REJECTION_ATTEMPTS):
        support = np.sort(rng.choice(m, size=s, replace=False))
        if s == 1 or np.all(np.diff(support) >= min_sep_grid):
            break
    else:
        raise ValueError(
            f"separation {min_sep_grid} with {s} objects on a grid of {m} "
            f"not reached in {_MAX_REJECTION_ATTEMPTS} attempts"
        )

    magnitudes = rng.uniform(1.0, dynamic_range, size=s)
    if s >= 2:
        hi, lo = rng.permutation(s)[:2]
        magnitudes[hi] = dynamic_range
        magnitudes[lo] = 1.0
    else:
        magnitudes[0] = 1.0
    phases = rng.uniform(0.0, 2.0 * np.pi, size=s)
    amplitudes = magnitudes * np.exp(1j * phases)
    return SparseSignal(grid_length=m, support=support, amplitudes=amplitudes)


def synthesize_measurements(
    a: SensingMatrix,
    x: SparseSignal,
    relative_noise: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Measurements ``b = A x + e`` with noise of an exact relative norm.

    The noise is drawn i.i.d. circular complex Gaussian and rescaled so that
    ``||e|| = relative_noise * ||A x||`` holds exactly, which makes noise
    levels comparable across trials.
    """
    if relative_noise < 0:
        raise ValueError(f"relative_noise must be >= 0, got {relative_noise}")
    if x.grid_length != a.n_cols:
        raise ValueError(
            f"signal grid length {x.grid_length} does not match matrix columns {a.n_cols}"
        )
    ax = a.matrix[:, x.support] @ x.amplitudes
    if relative_noise == 0:
        e = np.zeros_like(ax)
        return ax.copy(), e
    raw = rng.standard_normal(a.n_rows) + 1j * rng.standard_normal(a.n_rows)
    signal_norm = np.linalg.norm(ax)
    e = raw * (relative_noise * signal_norm / np.linalg.norm(raw))
    return ax + e, e


def _nearest_grid_index(position: float, spacing: float, m: int) -> int:
    # Midpoint ties go to the lower index; positions in the last half-cell
    # clamp to the top grid point.
    q = position / spacing
    j = math.floor(q + 0.5)
    if q + 0.5 == j:
        j -= 1
    return min(max(j, 0), m - 1)


def simulate_point_sources(
    geometry: ParaxialGeometry,
    scene: ContinuumScene,
    sensor_positions: np.ndarray,
    noise: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, SparseSignal]:
    """Propagate continuum point sources to the sensors and grid them.

    Returns the normalized data vector ``b``, the gridding-error vector
    ``d = b - A x_nearest - (normalized noise)``, and ``x_nearest``, the
    scene snapped to nearest grid points (amplitudes carry the quadratic
    grid-point phase so that an exactly on-grid scene yields ``d = 0``).
    """
    positions = np.asarray(sensor_positions, dtype=np.float64)
    if np.any(positions < 0) or np.any(positions > geometry.aperture):
        raise ValueError("sensor positions must lie within [0, aperture]")
    if np.any(scene.positions < 0) or np.any(scene.positions >= geometry.grid_extent):
        raise ValueError("source positions must lie within the grid extent")

    omega = geometry.wavenumber
    big_l = geometry.distance
    n = positions.size

    # Free-space paraxial response of each (sensor, source) pair.
    diff = positions[:, None] - scene.positions[None, :]
    green = (
        np.exp(1j * omega * big_l)
        / (4.0 * np.pi * big_l)
        * np.exp(1j * omega * diff**2 / (2.0 * big_l))
    )
    if noise is None:
        noise_vec = np.zeros(n, dtype=np.complex128)
    else:
        noise_vec = as_complex_vector(noise)
        if noise_vec.size != n:
            raise ValueError("noise length must match the number of sensors")
    y = green @ scene.strengths + noise_vec

    # Normalization that strips the sensor-side phases from the data.
    prefactor = (
        n ** (-0.5)
        * 4.0
        * np.pi
        * big_l
        * np.exp(-1j * omega * big_l)
        * np.exp(-1j * omega * positions**2 / (2.0 * big_l))
    )
    b = prefactor * y

    spacing = geometry.grid_spacing
    indices = [
        _nearest_grid_index(p, spacing, geometry.grid_size) for p in scene.positions
    ]
    if len(set(indices)) != len(indices):
        raise ValueError("two sources snapped to the same grid point; refine the grid")
    order = np.argsort(indices)
    support = np.asarray(indices, dtype=np.int64)[order]
    grid_pos = support * spacing
    amplitudes = scene.strengths[order] * np.exp(
        1j * omega * grid_pos**2 / (2.0 * big_l)
    )
    x_nearest = SparseSignal(
        grid_length=geometry.grid_size, support=support, amplitudes=amplitudes
    )

    a = paraxial_matrix_for_sensors(geometry, positions)
    d = b - a.matrix[:, support] @ amplitudes - prefactor * noise_vec
    return b, d, x_nearest
