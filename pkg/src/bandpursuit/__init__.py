"""Sparse recovery with band exclusion and local optimization for highly
coherent sensing matrices, plus the Monte Carlo benchmark harness."""

from .coherence import (
    CoherenceBands,
    CoherencePattern,
    band_of_set,
    bands,
    bands_from_matrix,
    check_separation,
    coherence_pattern,
    mutual_coherence,
    mutual_coherence_of,
    recovery_guarantee_margin,
    secondary_band,
    swap_stability_threshold,
)
from .ensembles import (
    ContinuumScene,
    ParaxialGeometry,
    SensingMatrix,
    SparseSignal,
    build_dft_frame,
    build_gaussian_matrix,
    build_paraxial_matrix,
    compose,
    generate_objects,
    paraxial_matrix_for_sensors,
    simulate_point_sources,
    synthesize_measurements,
)
from .harness import (
    ExperimentConfig,
    ExperimentSummary,
    TrialRecord,
    band_profile,
    default_eta,
    emit_csv,
    parse_config_file,
    relative_signal_error,
    run_experiment,
    run_trial,
    success,
)
from .numerics import correlations, solve_least_squares, stream_rng
from .recovery import (
    PursuitParams,
    RecoveryResult,
    bloomp,
    bomp,
    local_optimization,
    omp,
)

__version__ = "0.1.0"
