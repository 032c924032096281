import numpy as np
import pytest

from bandpursuit.numerics import (
    as_complex_matrix,
    as_complex_vector,
    correlations,
    solve_least_squares,
    stream_rng,
)

from oracles import correlations_naive, lstsq_minnorm


class TestValidation:
    def test_rejects_nan_matrix(self):
        with pytest.raises(ValueError):
            as_complex_matrix([[1.0, np.nan], [0.0, 1.0]])

    def test_rejects_inf_vector(self):
        with pytest.raises(ValueError):
            as_complex_vector([1.0, np.inf])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            as_complex_matrix(np.zeros((0, 3)))

    def test_matrix_is_column_major(self):
        a = as_complex_matrix(np.ones((4, 3)))
        assert a.flags.f_contiguous


class TestStreams:
    def test_same_key_same_draws(self):
        a = stream_rng(7, 3).random(16)
        b = stream_rng(7, 3).random(16)
        assert np.array_equal(a, b)

    def test_different_streams_differ(self):
        a = stream_rng(7, 3).random(16)
        b = stream_rng(7, 4).random(16)
        assert not np.array_equal(a, b)

    def test_tuple_stream_ids(self):
        a = stream_rng(7, (2, 1)).random(8)
        b = stream_rng(7, (2, 1)).random(8)
        c = stream_rng(7, (1, 2)).random(8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSolveLeastSquares:
    def test_identity_system(self):
        a = np.eye(3, dtype=complex)
        b = np.array([1.0, 2.0j, -1.0])
        sol = solve_least_squares(a, b)
        assert not sol.rank_deficient
        np.testing.assert_allclose(sol.coeffs, b, atol=1e-14)

    def test_single_column_by_hand(self):
        # Normal equations for A = (1, 1)^T, b = (1, 0): 2 z = 1.
        a = np.array([[1.0], [1.0]], dtype=complex)
        b = np.array([1.0, 0.0], dtype=complex)
        sol = solve_least_squares(a, b)
        np.testing.assert_allclose(sol.coeffs, [0.5], atol=1e-15)
        residual = np.linalg.norm(b - a @ sol.coeffs)
        np.testing.assert_allclose(residual, 1.0 / np.sqrt(2.0), atol=1e-15)

    def test_residual_orthogonal_to_columns(self):
        rng = stream_rng(11, 0)
        a = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        sol = solve_least_squares(a, b)
        residual = b - a @ sol.coeffs
        assert np.linalg.norm(a.conj().T @ residual) <= 1e-10 * np.linalg.norm(b)

    def test_matches_minnorm_oracle_full_rank(self):
        rng = stream_rng(12, 0)
        for _ in range(20):
            a = rng.standard_normal((10, 4)) + 1j * rng.standard_normal((10, 4))
            b = rng.standard_normal(10) + 1j * rng.standard_normal(10)
            sol = solve_least_squares(a, b)
            np.testing.assert_allclose(sol.coeffs, lstsq_minnorm(a, b), atol=1e-10)

    def test_rank_deficiency_flag_and_minnorm(self):
        rng = stream_rng(13, 0)
        col = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        a = np.stack([col, 2.0 * col], axis=1)
        b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        sol = solve_least_squares(a, b)
        assert sol.rank_deficient
        assert sol.rank == 1
        np.testing.assert_allclose(sol.coeffs, lstsq_minnorm(a, b), atol=1e-10)

    def test_residual_never_exceeds_data_norm(self):
        rng = stream_rng(14, 0)
        for _ in range(25):
            n, k = int(rng.integers(3, 12)), int(rng.integers(1, 4))
            a = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
            b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            sol = solve_least_squares(a, b)
            residual = np.linalg.norm(b - a @ sol.coeffs)
            assert residual <= np.linalg.norm(b) + 1e-12

    def test_deterministic(self):
        rng = stream_rng(15, 0)
        a = rng.standard_normal((9, 3)) + 1j * rng.standard_normal((9, 3))
        b = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        first = solve_least_squares(a, b).coeffs
        second = solve_least_squares(a, b).coeffs
        assert np.array_equal(first, second)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            solve_least_squares(np.eye(3, dtype=complex), np.ones(4, dtype=complex))

    def test_wide_system_rejected(self):
        with pytest.raises(ValueError):
            solve_least_squares(np.ones((2, 3), dtype=complex), np.ones(2, dtype=complex))


class TestCorrelations:
    def test_identity_returns_data(self):
        b = np.array([1.0 + 1j, -2.0, 0.5j])
        np.testing.assert_allclose(correlations(np.eye(3, dtype=complex), b), b)

    def test_zero_residual(self):
        a = stream_rng(16, 0).standard_normal((5, 4)) + 0j
        np.testing.assert_array_equal(correlations(a, np.zeros(5, dtype=complex)),
                                      np.zeros(4, dtype=complex))

    def test_self_inner_product_is_squared_norm(self):
        rng = stream_rng(17, 0)
        a = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        c = correlations(a, a[:, 0])
        np.testing.assert_allclose(c[0], np.linalg.norm(a[:, 0]) ** 2, atol=1e-13)
        assert c[0].real > 0 and abs(c[0].imag) < 1e-13

    def test_matches_loop_oracle_and_convention(self):
        rng = stream_rng(18, 0)
        a = rng.standard_normal((6, 5)) + 1j * rng.standard_normal((6, 5))
        r = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        np.testing.assert_allclose(correlations(a, r), correlations_naive(a, r),
                                   atol=1e-12)

    def test_first_order_optimality_on_support(self):
        rng = stream_rng(19, 0)
        a = rng.standard_normal((12, 5)) + 1j * rng.standard_normal((12, 5))
        b = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        cols = [0, 2, 4]
        sol = solve_least_squares(a[:, cols], b)
        residual = b - a[:, cols] @ sol.coeffs
        on_support = correlations(a, residual)[cols]
        assert np.max(np.abs(on_support)) <= 1e-8 * np.linalg.norm(b)
