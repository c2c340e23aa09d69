"""Relay mapping of ICI-cancelled samples to XOR-bit LLRs, and the XOR decode."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .ofdm import BPSK, Constellation

LLR_CLAMP = 40.0


def pair_posterior(y, gamma1, gamma2, noise_var: float, constellation: Constellation = BPSK):
    """Normalized ``p(u1=a, u2=b | Y')`` per subcarrier, shape ``(K, M, M)``.

    Each subcarrier is handled on its own: the metric is
    ``exp(-|Y'(k) - a G1(k) - b G2(k)|^2 / noise_var)``.
    """
    if not noise_var > 0:
        raise ConfigurationError("posterior needs a positive noise variance")
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    g1 = np.broadcast_to(np.asarray(gamma1, dtype=complex), y.shape)
    g2 = np.broadcast_to(np.asarray(gamma2, dtype=complex), y.shape)
    pts = constellation.points
    mean = pts[None, :, None] * g1[:, None, None] + pts[None, None, :] * g2[:, None, None]
    logp = -np.abs(y[:, None, None] - mean) ** 2 / noise_var
    logp -= logp.max(axis=(1, 2), keepdims=True)
    p = np.exp(logp)
    return p / p.sum(axis=(1, 2), keepdims=True)


def xor_masks(constellation: Constellation = BPSK) -> np.ndarray:
    """``(bits_per_symbol, M, M)`` boolean: pair ``(a, b)`` has XOR bit 1 at that position."""
    lab = constellation.labels
    return (lab[:, None, :] ^ lab[None, :, :]).transpose(2, 0, 1).astype(bool)


def xor_llr(post, constellation: Constellation = BPSK, return_flags: bool = False):
    """LLRs ``log P(c1^c2 = 1) / P(c1^c2 = 0)`` per coded bit, clamped to +-40.

    ``post`` is a ``(K, M, M)`` table from :func:`pair_posterior`; the output
    has ``K * bits_per_symbol`` entries in symbol-major order.
    """
    post = np.asarray(post)
    masks = xor_masks(constellation)
    one = np.einsum("kab,jab->kj", post, masks)
    zero = np.einsum("kab,jab->kj", post, ~masks)
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.log(one) - np.log(zero)
    degenerate = ~np.isfinite(llr)
    llr = np.where(np.isnan(llr), 0.0, llr)
    llr = np.clip(llr, -LLR_CLAMP, LLR_CLAMP).reshape(-1)
    if return_flags:
        return llr, degenerate.reshape(-1)
    return llr


def relay_decode_xor(llr, code, max_iters: int = 50):
    """Belief-propagation decode of XOR LLRs into the XOR message bits.

    Returns ``(message_bits, status)``. The XOR of two codewords of a linear
    code is itself a codeword, so the shared code decodes it directly.
    """
    # the decoder takes log P(0)/P(1)
    return code.decode(-np.asarray(llr, dtype=float), max_iters=max_iters)


def terminal_extract(xor_bits, own_bits) -> np.ndarray:
    """Recover the other terminal's bits from the broadcast XOR message."""
    a = np.asarray(xor_bits, dtype=np.int8)
    b = np.asarray(own_bits, dtype=np.int8)
    if a.shape != b.shape:
        raise ConfigurationError(f"length mismatch {a.shape} vs {b.shape}")
    return a ^ b
