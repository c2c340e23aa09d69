import numpy as np
import pytest
from numpy.testing import assert_allclose

from asyncplnc import linalg
from asyncplnc.errors import CfoDomainError, ConfigurationError, NumericalSingularityError
from conftest import crandn
import oracles


class TestTransforms:
    """FFT-backed F, F^H and D against their dense definitions."""

    @pytest.mark.parametrize("n", [1, 2, 8, 16])
    def test_apply_F_matches_dense(self, rng, n):
        v = crandn(rng, n)
        assert_allclose(linalg.apply_F(v), oracles.dense_F(n) @ v, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 8, 32])
    def test_apply_FH_matches_dense(self, rng, n):
        v = crandn(rng, n)
        assert_allclose(linalg.apply_FH(v), oracles.dense_F(n).conj().T @ v, atol=1e-12)

    def test_roundtrip_and_parseval(self, rng):
        v = crandn(rng, 64)
        assert_allclose(linalg.apply_FH(linalg.apply_F(v)), v, atol=1e-12)
        assert np.linalg.norm(linalg.apply_F(v)) == pytest.approx(np.linalg.norm(v), rel=1e-12)

    def test_dense_F_is_unitary(self):
        F = oracles.dense_F(8)
        assert_allclose(F.conj().T @ F, np.eye(8), atol=1e-12)

    @pytest.mark.parametrize("length", [1, 3, 8])
    def test_D_columns(self, rng, length):
        h = crandn(rng, length)
        assert_allclose(linalg.apply_D_cols(h, 8), oracles.dense_D(8, length) @ h, atol=1e-12)

    def test_DH_columns(self, rng):
        v = crandn(rng, 8)
        assert_allclose(linalg.apply_DH_cols(v, 3), oracles.dense_D(8, 3).conj().T @ v, atol=1e-12)

    def test_D_is_unnormalized_dft(self):
        assert_allclose(linalg.apply_D_cols(np.array([1.0]), 4), np.ones(4))

    @pytest.mark.parametrize("n", [3, 6, 12])
    def test_non_power_of_two_rejected(self, n):
        with pytest.raises(ConfigurationError):
            linalg.apply_F(np.ones(n))
        with pytest.raises(ConfigurationError):
            linalg.apply_D_cols(np.ones(2), n)

    def test_cir_longer_than_block_rejected(self):
        with pytest.raises(ConfigurationError):
            linalg.apply_D_cols(np.ones(9), 8)


class TestRamp:
    def test_ramp_matches_dense_E(self):
        assert_allclose(np.diag(oracles.dense_E(0.23, 8)), linalg.cfo_ramp(0.23, 8), atol=1e-14)

    def test_zero_cfo_is_identity(self):
        assert_allclose(linalg.cfo_ramp(0.0, 16), np.ones(16))

    def test_phase_is_folded_in(self):
        assert_allclose(linalg.cfo_ramp(0.1, 8, phase=0.4), np.exp(0.4j) * linalg.cfo_ramp(0.1, 8), atol=1e-14)

    @pytest.mark.parametrize("eps", [0.5, -0.5, 0.7, np.nan])
    def test_domain(self, eps):
        with pytest.raises(CfoDomainError):
            linalg.cfo_ramp(eps, 8)

    def test_ramp_apply_costs_exactly_n_mults(self, rng):
        c = linalg.OpCounter()
        with linalg.counting(c):
            linalg.apply_ramp(linalg.cfo_ramp(0.1, 64), crandn(rng, 64))
        assert (c.adds, c.mults) == (0, 64)

    def test_ramp_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            linalg.apply_ramp(np.ones(4), np.ones(8))


class TestOpCounter:
    def test_fft_convention(self):
        c = linalg.OpCounter()
        with linalg.counting(c):
            linalg.apply_F(np.ones(128))
        assert c.adds == 128 * 7
        assert c.mults == 64 * 7

    def test_stages_are_separate(self):
        c = linalg.OpCounter()
        with linalg.counting(c):
            with linalg.stage("a"):
                linalg.count(adds=3)
            with linalg.stage("b"):
                linalg.count(mults=5)
        assert c.by_stage == {"a": (3, 0), "b": (0, 5)}

    def test_no_counter_is_a_no_op(self):
        linalg.count(adds=10)
        with linalg.stage("x"):
            linalg.apply_F(np.ones(8))

    def test_suspended(self):
        c = linalg.OpCounter()
        with linalg.counting(c):
            with linalg.suspended():
                linalg.apply_F(np.ones(8))
        assert c.adds == 0

    def test_bpsk_products_are_free(self):
        c = linalg.OpCounter()
        with linalg.counting(c):
            linalg.count_symbol_products(np.array([1, -1, 1, -1]))
            linalg.count_symbol_products(np.array([1j, (1 + 1j) / np.sqrt(2)]))
        assert c.mults == 2


class TestHermitianSolve:
    def test_matches_numpy(self, rng):
        m = crandn(rng, 5, 5)
        A = m @ m.conj().T + np.eye(5)
        b = crandn(rng, 5)
        assert_allclose(linalg.solve_hermitian(A, b), np.linalg.solve(A, b), atol=1e-10)

    def test_factor_and_solve(self, rng):
        m = crandn(rng, 4, 4)
        A = m @ m.conj().T + 0.1 * np.eye(4)
        c = linalg.cholesky_factor(A)
        b = crandn(rng, 4)
        assert_allclose(A @ linalg.cholesky_solve(c, b), b, atol=1e-10)

    def test_indefinite_rejected(self):
        with pytest.raises(NumericalSingularityError):
            linalg.solve_hermitian(np.diag([1.0, -1.0]), np.ones(2))

    def test_nearly_singular_rejected(self):
        with pytest.raises(NumericalSingularityError):
            linalg.solve_hermitian(np.diag([1.0, 1e-16]), np.ones(2))
