"""Randomized invariants driven by hypothesis."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from asyncplnc import ici, ldpc, linalg, plnc
from asyncplnc.ofdm import SubcarrierAllocation

seeds = st.integers(min_value=0, max_value=2**32 - 1)
log_sizes = st.integers(min_value=0, max_value=7)
cfos = st.floats(min_value=-0.499, max_value=0.499, allow_nan=False)


def _cvec(seed, n):
    r = np.random.default_rng(seed)
    return r.standard_normal(n) + 1j * r.standard_normal(n)


class TestTransformInvariants:
    @given(seeds, log_sizes)
    def test_parseval(self, seed, p):
        v = _cvec(seed, 2**p)
        assert np.isclose(np.linalg.norm(linalg.apply_F(v)), np.linalg.norm(v), rtol=1e-12)

    @given(seeds, log_sizes)
    def test_roundtrip(self, seed, p):
        v = _cvec(seed, 2**p)
        assert_allclose(linalg.apply_F(linalg.apply_FH(v)), v, atol=1e-10)

    @given(cfos, cfos)
    def test_ramp_composition(self, a, b):
        assert_allclose(linalg.cfo_ramp(a, 16) * linalg.cfo_ramp(b, 16),
                        np.exp(2j * np.pi * (a + b) * np.arange(16) / 16), atol=1e-12)


class TestInterferenceInvariants:
    @given(seeds, cfos, st.integers(min_value=1, max_value=6))
    def test_unitary_and_circulant(self, seed, eps, p):
        n = 2**p
        m = ici.interference_matrix(eps, n)
        v = _cvec(seed, n)
        assert np.isclose(np.linalg.norm(m.apply(v)), np.linalg.norm(v), rtol=1e-12)
        d = m.dense()
        assert_allclose(np.roll(d, (1, 1), axis=(0, 1)), d, atol=1e-15)

    @given(cfos)
    def test_diagonal_magnitude_at_most_one(self, eps):
        assert abs(ici.dirichlet_mean(eps, 128)) <= 1 + 1e-12


class TestAllocationInvariants:
    @given(seeds, st.integers(min_value=1, max_value=16))
    def test_roundtrip(self, seed, k):
        r = np.random.default_rng(seed)
        alloc = SubcarrierAllocation(np.sort(r.choice(16, size=k, replace=False)), 16)
        u = _cvec(seed, k)
        assert np.array_equal(alloc.deallocate(alloc.allocate(u)), u)


class TestCodeInvariants:
    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_xor_of_codewords_is_a_codeword(self, seed):
        c = ldpc.preset("test-96")
        a, b = np.random.default_rng(seed).integers(0, 2, (2, c.k))
        assert np.array_equal(c.encode(a ^ b), c.encode(a) ^ c.encode(b))
        assert c.is_codeword(c.encode(a) ^ c.encode(b))[0]


class TestMappingInvariants:
    @given(seeds, st.floats(min_value=0.01, max_value=10.0))
    def test_llr_swap_symmetry(self, seed, s2):
        y, g1, g2 = _cvec(seed, 4), _cvec(seed + 1, 4), _cvec(seed + 2, 4)
        assert_allclose(plnc.xor_llr(plnc.pair_posterior(y, g1, g2, s2)),
                        plnc.xor_llr(plnc.pair_posterior(y, g2, g1, s2)), atol=1e-9)

    @given(seeds, st.floats(min_value=0.1, max_value=10.0), st.floats(min_value=-np.pi, max_value=np.pi))
    def test_scaling_invariance(self, seed, mag, phase):
        y, g1, g2 = _cvec(seed, 4), _cvec(seed + 1, 4), _cvec(seed + 2, 4)
        c = mag * np.exp(1j * phase)
        assert_allclose(plnc.pair_posterior(y, g1, g2, 0.5),
                        plnc.pair_posterior(c * y, c * g1, c * g2, 0.5 * mag**2), atol=1e-9)

    @given(seeds, st.integers(min_value=1, max_value=2000))
    def test_extract_involution(self, seed, n):
        x, a = np.random.default_rng(seed).integers(0, 2, (2, n))
        assert np.array_equal(plnc.terminal_extract(plnc.terminal_extract(x, a), a), x)
