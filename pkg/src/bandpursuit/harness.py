"""Monte Carlo benchmark harness: trials, sweeps, metrics and CSV output.

A trial draws a fresh sensing matrix, a random well-separated sparse object
and noise of an exact relative level, runs the requested pursuit algorithms
on the shared data and scores each run.  An experiment sweeps one config
parameter over a value list, repeating ``trials`` independent trials per
value; trials are independent units of work and may be distributed over a
process pool, with a deterministic ordered reduction so the emitted CSV is
byte-identical for any worker count.

Success is judged by bottleneck distance: the reconstruction counts as a
success when a perfect matching pairs every estimated index with a distinct
true index less than one Rayleigh length (``tol_grid = F`` grid steps) away.
"""

from __future__ import annotations

import concurrent.futures
import csv
import functools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import coherence as coh
from . import ensembles as ens
from . import recovery as rec
from .numerics import stream_rng

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "SummaryRow",
    "ExperimentSummary",
    "success",
    "relative_signal_error",
    "supports_match_bands",
    "trial_data",
    "run_trial",
    "run_experiment",
    "band_profile",
    "default_eta",
    "emit_csv",
    "parse_config_file",
]

log = logging.getLogger(__name__)

_ALGORITHMS = {"omp": rec.omp, "bomp": rec.bomp, "bloomp": rec.bloomp}
_INT_FIELDS = {"n", "m", "f", "r", "sparsity", "trials", "base_seed"}
_SWEEPABLE = {
    "n",
    "m",
    "f",
    "r",
    "sparsity",
    "separation_rl",
    "dynamic_range",
    "relative_noise",
    "eta",
}

# Substream ids per purpose, so trial draws never collide.
_STREAM_MATRIX = 0
_STREAM_OBJECTS = 1
_STREAM_NOISE = 2
_STREAM_PROFILE = 3

_WILSON_Z = 1.959963984540054  # two-sided 95%


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep description for one experiment.

    ``ensemble`` is ``paraxial`` (needs ``n``, ``m``, ``f``) or ``frame``
    (needs ``n``, ``r``, ``f``; the grid length is ``r * f``).
    ``separation_rl`` is in Rayleigh lengths and converts to a grid-index
    separation of ``ceil(separation_rl * f)``.  ``eta=None`` asks for the
    band-profile default.  Exactly one parameter is swept.
    """

    ensemble: str
    n: int
    f: int
    m: int | None = None
    r: int | None = None
    sparsity: int = 10
    separation_rl: float = 3.0
    dynamic_range: float = 1.0
    relative_noise: float = 0.0
    algorithms: tuple = ("omp", "bomp", "bloomp")
    eta: float | None = None
    trials: int = 100
    base_seed: int = 0
    sweep_param: str = "n"
    sweep_values: tuple = ()

    def __post_init__(self):
        if self.ensemble not in ("paraxial", "frame"):
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.ensemble == "paraxial" and self.m is None:
            raise ValueError("paraxial ensemble requires the grid size m")
        if self.ensemble == "frame" and self.r is None:
            raise ValueError("frame ensemble requires the frame row count r")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        unknown = set(self.algorithms) - set(_ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        if self.sweep_param not in _SWEEPABLE:
            raise ValueError(f"cannot sweep {self.sweep_param!r}")
        if not self.sweep_values:
            raise ValueError("sweep_values must be a nonempty list")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))

    @property
    def grid_length(self) -> int:
        return self.m if self.ensemble == "paraxial" else self.r * self.f

    @property
    def min_sep_grid(self) -> int:
        return max(1, math.ceil(self.separation_rl * self.f))

    def applied(self, value) -> "ExperimentConfig":
        """Copy of the config with the sweep value substituted in."""
        if self.sweep_param in _INT_FIELDS:
            value = int(value)
        else:
            value = float(value)
        return replace(self, **{self.sweep_param: value})


@dataclass(frozen=True)
class TrialRecord:
    """Scores and diagnostic flags for one algorithm on one trial."""

    trial_index: int
    algorithm: str
    success: bool
    relative_error: float
    residual_amplification: float | None
    separation_ok: bool
    margin_ok: bool
    swap_ok: bool
    support_in_bands: bool
    termination: str
    sweep_value: float | int | None = None
    error: str | None = None


@dataclass(frozen=True)
class SummaryRow:
    sweep_param: str
    sweep_value: float | int
    algorithm: str
    trials: int
    successes: int
    success_rate: float
    rate_lo95: float
    rate_hi95: float
    mean_rel_err: float
    std_rel_err: float
    mean_residual_amp: float


@dataclass(frozen=True)
class ExperimentSummary:
    rows: tuple
    eta_used: float
    records: tuple | None = field(default=None, compare=False)


def _max_bipartite_matching(adjacency: np.ndarray) -> int:
    """Size of a maximum matching; Kuhn's augmenting paths, fine at desk scale."""
    n_left, n_right = adjacency.shape
    match_right = [-1] * n_right

    def augment(i: int, seen: list) -> bool:
        for j in range(n_right):
            if adjacency[i, j] and not seen[j]:
                seen[j] = True
                if match_right[j] == -1 or augment(match_right[j], seen):
                    match_right[j] = i
                    return True
        return False

    size = 0
    for i in range(n_left):
        if augment(i, [False] * n_right):
            size += 1
    return size


def success(support_true, support_est, tol_grid: int) -> bool:
    """Bottleneck-distance success: a perfect matching must pair every
    estimated index with a distinct true index at distance < ``tol_grid``.

    A nearest-neighbor test is not enough: two estimates hugging the same
    true object while another object goes unexplained must count as failure.
    """
    true_idx = np.asarray(list(support_true), dtype=np.int64)
    est_idx = np.asarray(list(support_est), dtype=np.int64)
    if true_idx.size == 0 or est_idx.size == 0:
        raise ValueError("supports must be nonempty")
    if est_idx.size != true_idx.size:
        return False
    adjacency = np.abs(est_idx[:, None] - true_idx[None, :]) < tol_grid
    return _max_bipartite_matching(adjacency) == est_idx.size


def supports_match_bands(
    cbands: coh.CoherenceBands, support_true, support_est
) -> bool:
    """True iff every estimated index sits in the coherence band of a unique
    true index (the conclusion of the recovery guarantee)."""
    true_idx = np.asarray(list(support_true), dtype=np.int64)
    est_idx = np.asarray(list(support_est), dtype=np.int64)
    if est_idx.size == 0:
        return False
    adjacency = np.zeros((est_idx.size, true_idx.size), dtype=bool)
    for jj, t in enumerate(true_idx):
        band = cbands.neighbors[int(t)]
        adjacency[:, jj] = np.isin(est_idx, band)
    return _max_bipartite_matching(adjacency) == est_idx.size


def relative_signal_error(
    psi: ens.SensingMatrix | None,
    x_true: ens.SparseSignal,
    x_est: ens.SparseSignal | None,
) -> float:
    """Relative reconstruction error.

    With a dictionary ``psi`` the error is measured on the represented
    signal, ``||psi (x_est - x_true)|| / ||psi x_true||``; without one it is
    measured directly on the coefficients.
    """
    if x_est is not None and x_est.grid_length != x_true.grid_length:
        raise ValueError("grid lengths do not match")
    diff = x_true.to_dense()
    if x_est is not None:
        diff = x_est.to_dense() - diff
    else:
        diff = -diff
    if psi is not None:
        num = np.linalg.norm(psi.matrix @ diff)
        den = np.linalg.norm(psi.matrix[:, x_true.support] @ x_true.amplitudes)
    else:
        num = np.linalg.norm(diff)
        den = np.linalg.norm(x_true.amplitudes)
    if den == 0:
        raise ValueError("true signal is zero; relative error undefined")
    return float(num / den)


@functools.lru_cache(maxsize=8)
def _cached_frame(r: int, f: int) -> ens.SensingMatrix:
    return ens.build_dft_frame(r, f)


def _trial_matrix_and_bands(config: ExperimentConfig, trial_index: int):
    rng = stream_rng(config.base_seed, (trial_index, _STREAM_MATRIX))
    if config.ensemble == "paraxial":
        geometry = ens.ParaxialGeometry.normalized(config.f, config.m)
        a = ens.build_paraxial_matrix(geometry, config.n, rng)
        profile = coh.paraxial_coherence_profile(a)
        cbands = coh.bands_from_profile(profile, config.eta)
        psi = None
    else:
        psi = _cached_frame(config.r, config.f)
        phi = ens.build_gaussian_matrix(config.n, config.r, rng)
        a = ens.compose(phi, psi)
        cbands = coh.bands_from_matrix(a, config.eta)
    return a, cbands, psi


def trial_data(config: ExperimentConfig, trial_index: int):
    """Shared per-trial data: matrix, bands, dictionary, objects, measurements.

    Streams are keyed by ``(base_seed, trial_index, purpose)``, so a trial
    replays identically no matter where or when it runs.
    """
    if config.eta is None:
        raise ValueError("trials need a resolved eta; see default_eta")
    a, cbands, psi = _trial_matrix_and_bands(config, trial_index)
    x = ens.generate_objects(
        config.grid_length,
        config.sparsity,
        config.min_sep_grid,
        config.dynamic_range,
        stream_rng(config.base_seed, (trial_index, _STREAM_OBJECTS)),
    )
    b, e = ens.synthesize_measurements(
        a,
        x,
        config.relative_noise,
        stream_rng(config.base_seed, (trial_index, _STREAM_NOISE)),
    )
    return a, cbands, psi, x, b, e


def run_trial(config: ExperimentConfig, trial_index: int) -> list:
    """One independent trial: fresh data, every requested algorithm.

    Module errors are recorded on the affected records instead of aborting
    the sweep.
    """

    def failed(algorithm: str, message: str) -> TrialRecord:
        return TrialRecord(
            trial_index=trial_index,
            algorithm=algorithm,
            success=False,
            relative_error=float("nan"),
            residual_amplification=None,
            separation_ok=False,
            margin_ok=False,
            swap_ok=False,
            support_in_bands=False,
            termination="error",
            error=message,
        )

    try:
        a, cbands, psi, x, b, e = trial_data(config, trial_index)
    except Exception as exc:
        return [failed(alg, str(exc)) for alg in config.algorithms]

    noise_norm = float(np.linalg.norm(e))
    separation_ok = coh.check_separation(cbands, x.support)
    margin = coh.recovery_guarantee_margin(
        config.eta, x.sparsity, x.magnitude_max, x.magnitude_min, noise_norm
    )
    _, swap_ok = coh.swap_stability_threshold(
        config.eta, x.sparsity, noise_norm, x.magnitude_min
    )

    params = rec.PursuitParams(sparsity=config.sparsity, bands=cbands)
    records = []
    for algorithm in config.algorithms:
        try:
            result = _ALGORITHMS[algorithm](a, b, params)
            estimate = result.estimate
            est_support = estimate.support if estimate is not None else []
            ok = (
                success(x.support, est_support, tol_grid=config.f)
                if len(est_support)
                else False
            )
            rel_err = relative_signal_error(psi, x, estimate)
            if noise_norm > 0:
                fit = (
                    b - a.matrix[:, estimate.support] @ estimate.amplitudes
                    if estimate is not None
                    else b
                )
                amplification = float(np.linalg.norm(fit) / noise_norm)
            else:
                amplification = None
            records.append(
                TrialRecord(
                    trial_index=trial_index,
                    algorithm=algorithm,
                    success=ok,
                    relative_error=rel_err,
                    residual_amplification=amplification,
                    separation_ok=separation_ok,
                    margin_ok=margin < 1.0,
                    swap_ok=swap_ok,
                    support_in_bands=supports_match_bands(
                        cbands, x.support, est_support
                    ),
                    termination=result.termination,
                )
            )
        except Exception as exc:
            records.append(failed(algorithm, str(exc)))
    return records


def _run_trial_task(task) -> tuple:
    value_index, value, config, trial_index = task
    records = [
        replace(record, sweep_value=value)
        for record in run_trial(config, trial_index)
    ]
    return value_index, trial_index, records


def _wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    z = _WILSON_Z
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def run_experiment(
    config: ExperimentConfig, workers: int = 1, keep_records: bool = False
) -> ExperimentSummary:
    """Run the sweep and aggregate per (sweep value, algorithm).

    Trials may run on a process pool; records are reduced in (sweep value,
    trial) order, so summaries and CSV bytes do not depend on the worker
    count.
    """
    eta_used = config.eta
    if eta_used is None:
        if config.sweep_param == "eta":
            eta_used = float("nan")
        else:
            eta_used = default_eta(config)
            log.info("resolved band threshold eta=%.3f from averaged profile", eta_used)
            config = replace(config, eta=eta_used)

    tasks = []
    for value_index, value in enumerate(config.sweep_values):
        applied = config.applied(value)
        for trial_index in range(config.trials):
            tasks.append((value_index, value, applied, trial_index))

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (8 * workers))
            raw = list(pool.map(_run_trial_task, tasks, chunksize=chunk))
    else:
        raw = [_run_trial_task(task) for task in tasks]
    raw.sort(key=lambda item: (item[0], item[1]))

    by_value: dict = {}
    all_records = []
    for value_index, _trial, records in raw:
        by_value.setdefault(value_index, []).extend(records)
        all_records.extend(records)

    rows = []
    for value_index, value in enumerate(config.sweep_values):
        records = by_value.get(value_index, [])
        for algorithm in config.algorithms:
            alg_records = [r for r in records if r.algorithm == algorithm]
            trials = len(alg_records)
            successes = sum(r.success for r in alg_records)
            rate = successes / trials
            lo, hi = _wilson_interval(successes, trials)
            errors = [
                r.relative_error
                for r in alg_records
                if r.error is None and not math.isnan(r.relative_error)
            ]
            amps = [
                r.residual_amplification
                for r in alg_records
                if r.residual_amplification is not None
            ]
            rows.append(
                SummaryRow(
                    sweep_param=config.sweep_param,
                    sweep_value=value,
                    algorithm=algorithm,
                    trials=trials,
                    successes=successes,
                    success_rate=rate,
                    rate_lo95=lo,
                    rate_hi95=hi,
                    mean_rel_err=float(np.mean(errors)) if errors else float("nan"),
                    std_rel_err=float(np.std(errors)) if errors else float("nan"),
                    mean_residual_amp=float(np.mean(amps)) if amps else float("nan"),
                )
            )
    return ExperimentSummary(
        rows=tuple(rows),
        eta_used=eta_used,
        records=tuple(all_records) if keep_records else None,
    )


def band_profile(
    ensemble: str,
    n: int,
    f: int,
    m: int | None = None,
    r: int | None = None,
    realizations: int = 100,
    base_seed: int = 0,
    max_delta: int | None = None,
) -> list:
    """Averaged coherence cross-section ``(delta, mean mu(j0, j0+delta))``.

    Centered at the middle grid index and averaged over independent matrix
    realizations; the default reach of ``4 f`` covers the main band and the
    first sidelobes.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    grid_length = m if ensemble == "paraxial" else r * f
    j0 = grid_length // 2
    cap = min(grid_length - 1 - j0, 4 * f if max_delta is None else max_delta)
    deltas = np.arange(cap + 1)
    acc = np.zeros(deltas.size)
    for i in range(realizations):
        rng = stream_rng(base_seed, (i, _STREAM_PROFILE))
        if ensemble == "paraxial":
            geometry = ens.ParaxialGeometry.normalized(f, m)
            a = ens.build_paraxial_matrix(geometry, n, rng)
            acc += coh.paraxial_coherence_profile(a)[deltas]
        elif ensemble == "frame":
            phi = ens.build_gaussian_matrix(n, r, rng)
            a = ens.compose(phi, _cached_frame(r, f))
            acc += coh.pattern_row(a, j0, deltas)
        else:
            raise ValueError(f"unknown ensemble {ensemble!r}")
    acc /= realizations
    return [(int(d), float(v)) for d, v in zip(deltas, acc)]


def default_eta(config: ExperimentConfig, realizations: int = 50) -> float:
    """Ensemble default for eta: smallest threshold whose averaged band
    half-width is at most one Rayleigh length (``f`` grid indices)."""
    profile = band_profile(
        config.ensemble,
        n=config.n,
        f=config.f,
        m=config.m,
        r=config.r,
        realizations=realizations,
        base_seed=config.base_seed,
    )
    means = np.asarray([v for _, v in profile])
    return coh.band_limited_eta(means, config.f)


def _format_value(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(payload, path) -> None:
    """Write a summary, a band profile or a single-trial table as CSV.

    UTF-8, header row, '.' decimal separator; floats are written with
    round-trip precision.
    """
    if isinstance(payload, ExperimentSummary):
        header = [
            "sweep_param",
            "sweep_value",
            "algorithm",
            "trials",
            "successes",
            "success_rate",
            "rate_lo95",
            "rate_hi95",
            "mean_rel_err",
            "std_rel_err",
            "mean_residual_amp",
        ]
        rows = [
            [
                row.sweep_param,
                _format_value(row.sweep_value),
                row.algorithm,
                row.trials,
                row.successes,
                _format_value(row.success_rate),
                _format_value(row.rate_lo95),
                _format_value(row.rate_hi95),
                _format_value(row.mean_rel_err),
                _format_value(row.std_rel_err),
                _format_value(row.mean_residual_amp),
            ]
            for row in payload.rows
        ]
    elif payload and isinstance(payload[0], tuple) and len(payload[0]) == 2:
        header = ["delta", "mean_mu"]
        rows = [[d, _format_value(v)] for d, v in payload]
    else:
        header = ["kind", "index", "amplitude_re", "amplitude_im"]
        rows = [
            [kind, index, _format_value(re), _format_value(im)]
            for kind, index, re, im in payload
        ]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


_CONFIG_KEYS = {
    "ensemble": str,
    "n": int,
    "m": int,
    "f": int,
    "r": int,
    "sparsity": int,
    "separation_rl": float,
    "dynamic_range": float,
    "relative_noise": float,
    "algorithms": str,
    "eta": float,
    "trials": int,
    "base_seed": int,
    "sweep_param": str,
    "sweep_values": str,
}


def parse_config_file(path) -> ExperimentConfig:
    """Parse a flat ``key = value`` experiment config; unknown keys are errors."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = _CONFIG_KEYS[key](raw)

    if "algorithms" in values:
        values["algorithms"] = tuple(
            part.strip() for part in values["algorithms"].split(",") if part.strip()
        )
    if "sweep_values" in values:
        parts = [p.strip() for p in values["sweep_values"].split(",") if p.strip()]
        values["sweep_values"] = tuple(float(p) for p in parts)
    return ExperimentConfig(**values)
