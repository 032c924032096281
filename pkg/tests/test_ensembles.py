import numpy as np
import pytest

from bandpursuit.ensembles import (
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
from bandpursuit.numerics import stream_rng

from oracles import matmul_naive

# Geometry deep in the paraxial regime (quadratic phases stay small across
# the grid), used wherever physical propagation is simulated.
PHYSICAL = dict(wavenumber=2.0 * np.pi, distance=100.0, aperture=100.0)


class TestGeometry:
    def test_derived_quantities(self):
        g = ParaxialGeometry(**PHYSICAL, refinement=20, grid_size=200)
        assert g.wavelength == pytest.approx(1.0)
        assert g.rayleigh_length == pytest.approx(1.0)
        assert g.grid_spacing * g.refinement == pytest.approx(g.rayleigh_length, rel=1e-15)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            ParaxialGeometry(**PHYSICAL, refinement=0, grid_size=10)
        with pytest.raises(ValueError):
            ParaxialGeometry(wavenumber=-1.0, distance=1.0, aperture=1.0,
                             refinement=1, grid_size=10)


class TestParaxialMatrix:
    def test_unit_columns_and_entry_modulus(self):
        geom = ParaxialGeometry.normalized(20, 300)
        a = build_paraxial_matrix(geom, 50, stream_rng(3, 0))
        np.testing.assert_allclose(np.linalg.norm(a.matrix, axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.abs(a.matrix), 1.0 / np.sqrt(50), atol=1e-12)

    def test_refinement_nesting_is_exact(self):
        # Column j of the F-grid equals column c*j of the (c*F)-grid when the
        # sensor draw is shared.
        sensors = stream_rng(4, 0).random(40)
        coarse = paraxial_matrix_for_sensors(ParaxialGeometry.normalized(5, 60), sensors)
        fine = paraxial_matrix_for_sensors(ParaxialGeometry.normalized(15, 180), sensors)
        for j in range(60):
            assert np.array_equal(coarse.matrix[:, j], fine.matrix[:, 3 * j])

    def test_sensor_positions_within_aperture(self):
        geom = ParaxialGeometry.normalized(2, 10)
        with pytest.raises(ValueError):
            paraxial_matrix_for_sensors(geom, np.array([0.5, 1.5]))

    def test_deterministic_given_stream(self):
        geom = ParaxialGeometry.normalized(4, 30)
        a = build_paraxial_matrix(geom, 16, stream_rng(5, 9)).matrix
        b = build_paraxial_matrix(geom, 16, stream_rng(5, 9)).matrix
        assert np.array_equal(a, b)


class TestDftFrame:
    def test_orthonormal_when_not_oversampled(self):
        a = build_dft_frame(2, 1)
        gram = a.matrix.conj().T @ a.matrix
        np.testing.assert_allclose(gram, np.eye(2), atol=1e-14)

    def test_unit_columns(self):
        a = build_dft_frame(7, 3)
        np.testing.assert_allclose(np.linalg.norm(a.matrix, axis=0), 1.0, atol=1e-12)

    def test_adjacent_coherence_closed_form(self):
        # |sum_{k<4} exp(-2 pi i k/8)| / 4 = 1/(4 sin(pi/8)); two apart cancels.
        a = build_dft_frame(4, 2).matrix
        adjacent = abs(np.vdot(a[:, 0], a[:, 1]))
        np.testing.assert_allclose(adjacent, 0.6532814824381883, atol=1e-12)
        np.testing.assert_allclose(abs(np.vdot(a[:, 0], a[:, 2])), 0.0, atol=1e-12)


class TestGaussianMatrix:
    def test_shape_and_determinism(self):
        a = build_gaussian_matrix(100, 200, stream_rng(6, 0))
        assert (a.n_rows, a.n_cols) == (100, 200)
        b = build_gaussian_matrix(100, 200, stream_rng(6, 0))
        assert np.array_equal(a.matrix, b.matrix)

    def test_expected_unit_column_norm(self):
        a = build_gaussian_matrix(100, 200, stream_rng(7, 0))
        mean_sq = float(np.mean(np.linalg.norm(a.matrix, axis=0) ** 2))
        assert abs(mean_sq - 1.0) < 0.2


class TestCompose:
    def test_identity_factor(self):
        psi = build_dft_frame(4, 2)
        eye = SensingMatrix(matrix=np.eye(4, dtype=complex), ensemble="gaussian")
        composed = compose(eye, psi)
        assert np.array_equal(composed.matrix, psi.matrix)
        assert composed.ensemble == "composed"
        assert composed.factors[1] is psi

    def test_shapes_and_mismatch(self):
        phi = build_gaussian_matrix(2, 2, stream_rng(9, 0))
        psi = build_dft_frame(2, 2)
        assert compose(phi, psi).matrix.shape == (2, 4)
        with pytest.raises(ValueError):
            compose(psi, phi)

    def test_matches_naive_product(self):
        rng = stream_rng(10, 0)
        phi = build_gaussian_matrix(3, 4, rng)
        psi = build_dft_frame(4, 2)
        expected = matmul_naive(phi.matrix, psi.matrix)
        np.testing.assert_allclose(compose(phi, psi).matrix, expected, atol=1e-12)


class TestGenerateObjects:
    def test_single_unit_object(self):
        x = generate_objects(50, 1, 3, 1.0, stream_rng(20, 0))
        assert x.sparsity == 1
        np.testing.assert_allclose(abs(x.amplitudes[0]), 1.0)

    def test_separation_and_dynamic_range(self):
        x = generate_objects(4000, 10, 60, 5.0, stream_rng(21, 0))
        assert np.all(np.diff(x.support) >= 60)
        mags = np.abs(x.amplitudes)
        np.testing.assert_allclose(mags.max() / mags.min(), 5.0, rtol=1e-12)
        np.testing.assert_allclose(mags.max(), 5.0)
        np.testing.assert_allclose(mags.min(), 1.0)

    def test_invariants_replay(self):
        for t in range(10):
            x = generate_objects(500, 5, 20, 3.0, stream_rng(22, t))
            assert x.support.size == 5
            assert np.all(np.diff(x.support) > 0)
            assert x.support[0] >= 0 and x.support[-1] < 500
            assert np.all(np.abs(x.amplitudes) >= 1.0 - 1e-12)
            assert np.all(np.abs(x.amplitudes) <= 3.0 + 1e-12)

    def test_infeasible_separation(self):
        with pytest.raises(ValueError):
            generate_objects(100, 10, 10, 1.0, stream_rng(23, 0))

    def test_dynamic_range_requires_two_objects(self):
        with pytest.raises(ValueError):
            generate_objects(100, 1, 5, 2.0, stream_rng(24, 0))


class TestSynthesizeMeasurements:
    def _setup(self, seed):
        geom = ParaxialGeometry.normalized(4, 40)
        a = build_paraxial_matrix(geom, 20, stream_rng(seed, 0))
        x = generate_objects(40, 3, 8, 2.0, stream_rng(seed, 1))
        return a, x

    def test_noiseless_is_exact(self):
        a, x = self._setup(25)
        b, e = synthesize_measurements(a, x, 0.0, stream_rng(25, 2))
        assert np.array_equal(e, np.zeros_like(e))
        np.testing.assert_array_equal(b, a.matrix[:, x.support] @ x.amplitudes)

    def test_exact_noise_ratio(self):
        a, x = self._setup(26)
        b, e = synthesize_measurements(a, x, 0.01, stream_rng(26, 2))
        signal = a.matrix[:, x.support] @ x.amplitudes
        ratio = np.linalg.norm(e) / np.linalg.norm(signal)
        np.testing.assert_allclose(ratio, 0.01, rtol=1e-12)
        np.testing.assert_allclose(b, signal + e)

    def test_deterministic(self):
        a, x = self._setup(27)
        b1, _ = synthesize_measurements(a, x, 0.05, stream_rng(27, 2))
        b2, _ = synthesize_measurements(a, x, 0.05, stream_rng(27, 2))
        assert np.array_equal(b1, b2)

    def test_negative_noise_rejected(self):
        a, x = self._setup(28)
        with pytest.raises(ValueError):
            synthesize_measurements(a, x, -0.1, stream_rng(28, 2))


class TestSimulatePointSources:
    def _geometry(self, refinement, grid_size=120):
        return ParaxialGeometry(**PHYSICAL, refinement=refinement, grid_size=grid_size)

    def test_on_grid_scene_cancels(self):
        geom = self._geometry(10)
        rng = stream_rng(30, 0)
        sensors = rng.random(32) * geom.aperture
        support = np.array([15, 52, 101])
        strengths = np.array([1.0 + 0.5j, -0.7, 0.3j])
        scene = ContinuumScene(support * geom.grid_spacing, strengths)
        b, d, x_near = simulate_point_sources(geom, scene, sensors)
        assert np.linalg.norm(d) <= 1e-10 * np.linalg.norm(b)
        assert np.array_equal(x_near.support, support)

    def test_on_grid_scene_matches_synthesized_measurements(self):
        geom = self._geometry(8)
        rng = stream_rng(31, 0)
        sensors = rng.random(24) * geom.aperture
        support = np.array([10, 40, 90])
        scene = ContinuumScene(support * geom.grid_spacing,
                               np.array([1.0, 2.0j, -0.5 + 0.5j]))
        b, _, x_near = simulate_point_sources(geom, scene, sensors)
        a = paraxial_matrix_for_sensors(geom, sensors)
        reference, _ = synthesize_measurements(a, x_near, 0.0, stream_rng(31, 1))
        assert np.linalg.norm(b - reference) <= 1e-10 * np.linalg.norm(b)

    def test_midpoint_source_has_gridding_error(self):
        # Refinement 4 makes the spacing exactly 0.25, so the midpoint is an
        # exact floating-point tie.
        geom = self._geometry(4)
        assert geom.grid_spacing == 0.25
        sensors = stream_rng(32, 0).random(32) * geom.aperture
        scene = ContinuumScene(np.array([50.5 * geom.grid_spacing]), np.array([1.0 + 0j]))
        b, d, x_near = simulate_point_sources(geom, scene, sensors)
        assert np.linalg.norm(d) / np.linalg.norm(b) > 0
        # Midpoint ties snap to the lower grid index.
        assert x_near.support[0] == 50

    def test_gridding_error_scales_inversely_with_refinement(self):
        sensors = stream_rng(33, 0).random(40) * PHYSICAL["aperture"]
        rng = stream_rng(33, 1)
        # Offsets of 1/3 Rayleigh length sit 1/3 of a cell off-grid at every
        # refinement not divisible by 3, so each source's displacement scales
        # exactly like 1/F and the error ratio per doubling concentrates at 2.
        positions = np.array([12.0, 27.0, 44.0, 61.0, 78.0]) + 1.0 / 3.0
        strengths = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        errors = []
        for refinement in (5, 10):
            geom = ParaxialGeometry(**PHYSICAL, refinement=refinement,
                                    grid_size=90 * refinement)
            scene = ContinuumScene(positions * geom.rayleigh_length, strengths)
            b, d, _ = simulate_point_sources(geom, scene, sensors)
            errors.append(np.linalg.norm(d) / np.linalg.norm(b))
        assert 1.3 <= errors[0] / errors[1] <= 2.8

    def test_source_outside_grid_rejected(self):
        geom = self._geometry(4, grid_size=40)
        sensors = stream_rng(34, 0).random(8) * geom.aperture
        scene = ContinuumScene(np.array([geom.grid_extent + 1.0]), np.array([1.0 + 0j]))
        with pytest.raises(ValueError):
            simulate_point_sources(geom, scene, sensors)

    def test_colliding_sources_rejected(self):
        geom = self._geometry(4, grid_size=40)
        sensors = stream_rng(35, 0).random(8) * geom.aperture
        spacing = geom.grid_spacing
        scene = ContinuumScene(np.array([10.1 * spacing, 10.2 * spacing]),
                               np.array([1.0 + 0j, 1.0 + 0j]))
        with pytest.raises(ValueError):
            simulate_point_sources(geom, scene, sensors)


class TestSparseSignal:
    def test_rejects_unsorted_support(self):
        with pytest.raises(ValueError):
            SparseSignal(10, np.array([3, 1]), np.array([1.0 + 0j, 1.0 + 0j]))

    def test_rejects_zero_amplitude(self):
        with pytest.raises(ValueError):
            SparseSignal(10, np.array([1, 3]), np.array([1.0 + 0j, 0.0 + 0j]))

    def test_to_dense(self):
        x = SparseSignal(5, np.array([1, 4]), np.array([2.0 + 0j, -1j]))
        dense = x.to_dense()
        assert dense[1] == 2.0 and dense[4] == -1j and dense[0] == 0
