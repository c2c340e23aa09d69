"""Per-terminal OFDM plumbing: allocation, BPSK mapping and the MAC-phase model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigurationError


class SubcarrierAllocation:
    """The ``N x K`` allocation matrix ``A``, kept as the list of active subcarriers.

    Both terminals share one allocation in PLNC, so a single instance is used
    for the whole MAC phase.
    """

    def __init__(self, indices, n: int):
        idx = np.asarray(indices, dtype=int)
        if idx.ndim != 1 or len(idx) == 0:
            raise ConfigurationError("allocation needs at least one subcarrier")
        if idx.min() < 0 or idx.max() >= n:
            raise ConfigurationError(f"subcarrier index out of range for N={n}")
        if len(np.unique(idx)) != len(idx):
            raise ConfigurationError("a subcarrier is allocated twice")
        self.indices = idx
        self.n = n

    @classmethod
    def full(cls, n: int) -> "SubcarrierAllocation":
        return cls(np.arange(n), n)

    @property
    def k(self) -> int:
        return len(self.indices)

    @property
    def is_full(self) -> bool:
        return self.k == self.n and np.array_equal(self.indices, np.arange(self.n))

    def allocate(self, u: np.ndarray) -> np.ndarray:
        """``A @ u``: place ``K`` symbols on their subcarriers, zeros elsewhere."""
        u = np.asarray(u)
        if u.shape != (self.k,):
            raise ConfigurationError(f"expected {self.k} symbols, got {u.shape}")
        x = np.zeros(self.n, dtype=complex)
        x[self.indices] = u
        return x

    def deallocate(self, x: np.ndarray) -> np.ndarray:
        """``A^T @ x``."""
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ConfigurationError(f"expected a length-{self.n} block, got {x.shape}")
        return x[self.indices]

    def matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.k))
        a[self.indices, np.arange(self.k)] = 1.0
        return a


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power point set with Gray bit labels (row ``j`` labels ``points[j]``)."""

    name: str
    points: np.ndarray
    labels: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @property
    def size(self) -> int:
        return len(self.points)

    def map(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol)[::-1]
        label_idx = self.labels @ weights
        lookup = np.empty(self.size, dtype=int)
        lookup[label_idx] = np.arange(self.size)
        return self.points[lookup[bits @ weights]]

    def contains(self, symbols: np.ndarray) -> bool:
        d = np.abs(np.asarray(symbols)[:, None] - self.points[None, :])
        return bool(np.all(d.min(axis=1) < 1e-12))


# 0 -> +1, 1 -> -1
BPSK = Constellation("bpsk", np.array([1.0 + 0j, -1.0 + 0j]), np.array([[0], [1]]))

CONSTELLATIONS = {"bpsk": BPSK}


def bpsk_map(bits) -> np.ndarray:
    return BPSK.map(bits)


def bpsk_llr_demap(y, h, noise_var: float) -> np.ndarray:
    """Single-user BPSK LLRs ``log P(b=0)/P(b=1)`` for ``y = h*s + w``.

    ``noise_var`` is the complex noise variance, so the LLR is
    ``4 Re{conj(h) y} / noise_var``; positive means the ``+1`` symbol.
    """
    y = np.asarray(y)
    h = np.broadcast_to(np.asarray(h), y.shape)
    return 4.0 * np.real(np.conj(h) * y) / noise_var


def frequency_response(h: np.ndarray, n: int) -> np.ndarray:
    return linalg.apply_D_cols(h, n)


def terminal_component(x: np.ndarray, h: np.ndarray, eps: float) -> np.ndarray:
    """``E(eps) F X D h`` for one terminal; ``x`` is the length-N frequency block."""
    n = len(x)
    s = x * frequency_response(h, n)
    linalg.count(mults=n)
    return linalg.apply_ramp(linalg.cfo_ramp(eps, n), linalg.apply_F(s))


def mac_signal_model(x1, x2, h1, h2, eps1: float, eps2: float) -> np.ndarray:
    """Noiseless time-domain relay observation of one block (CP already removed)."""
    x1 = np.asarray(x1, dtype=complex)
    x2 = np.asarray(x2, dtype=complex)
    if x1.shape != x2.shape:
        raise ConfigurationError("terminal blocks differ in length")
    return terminal_component(x1, h1, eps1) + terminal_component(x2, h2, eps2)


def sample_level_mac(x1, x2, h1, h2, eps1: float, eps2: float, cp_len: int) -> np.ndarray:
    """Validation path for :func:`mac_signal_model` that materializes the CP.

    Each terminal's block is IDFT-modulated, prefixed with ``cp_len`` samples,
    linearly convolved with its CIR and rotated by its CFO; the phase reference
    is the first sample after the CP. The prefix is then stripped.
    """
    out = 0
    for x, h, eps in ((x1, h1, eps1), (x2, h2, eps2)):
        x = np.asarray(x, dtype=complex)
        h = np.asarray(h, dtype=complex)
        n = len(x)
        if len(h) > cp_len:
            raise ConfigurationError(f"CIR length {len(h)} exceeds CP length {cp_len}")
        linalg.check_cfo(eps)
        t = np.fft.ifft(x) * np.sqrt(n)
        tx = np.concatenate([t[n - cp_len:], t]) if cp_len else t
        rx = np.convolve(tx, h)[: n + cp_len]
        k = np.arange(-cp_len, n)
        rx = rx * np.exp(2j * np.pi * eps * k / n)
        out = out + rx[cp_len:]
    return out


class FrameLayout:
    """How coded bits fill the ``blocks x K`` symbol grid of one uplink frame.

    As many whole codewords as fit are placed back to back; the remaining
    slots carry known zero bits (the ``+1`` symbol for BPSK) that the relay
    treats as pilots.
    """

    def __init__(self, n_code: int, k: int, blocks: int, bits_per_symbol: int = 1):
        if blocks < 1:
            raise ConfigurationError("a frame needs at least one block")
        slots = k * blocks * bits_per_symbol
        self.codewords = slots // n_code
        if self.codewords < 1:
            raise ConfigurationError(
                f"codeword of {n_code} bits does not fit in {blocks} blocks of {k} subcarriers"
            )
        self.n_code = n_code
        self.k = k
        self.blocks = blocks
        self.bits_per_symbol = bits_per_symbol
        self.pad_bits = slots - self.codewords * n_code

    @property
    def coded_bits(self) -> int:
        return self.codewords * self.n_code

    def to_grid(self, coded: np.ndarray) -> np.ndarray:
        """Concatenated codewords -> ``(blocks, K*bits_per_symbol)`` bit grid with padding."""
        coded = np.asarray(coded, dtype=np.int8).ravel()
        if len(coded) != self.coded_bits:
            raise ConfigurationError(f"expected {self.coded_bits} coded bits, got {len(coded)}")
        full = np.concatenate([coded, np.zeros(self.pad_bits, dtype=np.int8)])
        return full.reshape(self.blocks, self.k * self.bits_per_symbol)

    def from_grid(self, grid: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_grid`; returns ``(codewords, n_code)``."""
        flat = np.asarray(grid).reshape(-1)[: self.coded_bits]
        return flat.reshape(self.codewords, self.n_code)

    def known_mask(self) -> np.ndarray:
        """Boolean ``(blocks, K)`` mask of symbol slots that carry only padding."""
        per_slot = np.zeros(self.blocks * self.k * self.bits_per_symbol, dtype=bool)
        per_slot[self.coded_bits:] = True
        return per_slot.reshape(self.blocks, self.k, self.bits_per_symbol).all(axis=2)
