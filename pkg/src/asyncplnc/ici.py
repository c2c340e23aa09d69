"""Interference matrices ``Pi = F^H E(eps) F``, ICI reconstruction and cancellation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .ofdm import SubcarrierAllocation


def dirichlet_mean(eps: float, n: int) -> complex:
    """``(1/n) * sum_k exp(2j*pi*k*eps/n)`` in closed form (the diagonal of ``Pi``).

    The geometric-series ratio ``(1 - e^{j2 pi eps}) / (n (1 - e^{j2 pi eps/n}))``
    is evaluated as ``e^{j pi eps (n-1)/n} sinc(eps) / sinc(eps/n)``, which
    stays accurate for offsets down to the subnormal range.
    """
    eps = linalg.check_cfo(eps)
    if eps == 0.0:
        return 1.0 + 0j
    return complex(np.exp(1j * np.pi * eps * (n - 1) / n) * np.sinc(eps) / np.sinc(eps / n))


@dataclass(frozen=True)
class InterferenceMatrix:
    """Circulant ``Pi`` for one terminal; ``Pi[p, q] = column[(p - q) % n]``."""

    eps: float
    n: int
    column: np.ndarray
    diag: complex

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``Pi @ v`` through the ``F^H E F`` factorization."""
        if self.eps == 0.0:
            return np.asarray(v, dtype=complex).copy()
        return linalg.apply_FH(linalg.apply_ramp(linalg.cfo_ramp(self.eps, self.n), linalg.apply_F(v)))

    def apply_offdiag(self, v: np.ndarray) -> np.ndarray:
        """``(Pi - Lambda) @ v``."""
        if self.eps == 0.0:
            return np.zeros(self.n, dtype=complex)
        out = self.apply(v) - self.diag * v
        linalg.count(adds=self.n, mults=self.n)
        return out

    def dense(self) -> np.ndarray:
        p = np.arange(self.n)
        return self.column[(p[:, None] - p[None, :]) % self.n]


def interference_matrix(eps: float, n: int) -> InterferenceMatrix:
    eps = linalg.check_cfo(eps)
    if eps == 0.0:
        col = np.zeros(n, dtype=complex)
        col[0] = 1.0
    else:
        col = np.fft.fft(linalg.cfo_ramp(eps, n)) / n
    return InterferenceMatrix(eps=eps, n=n, column=col, diag=dirichlet_mean(eps, n))


def reconstruct_ici(eps_hat, h_hat, x_hat, alloc: SubcarrierAllocation) -> np.ndarray:
    """Length-N ICI estimate ``sum_i (Pi_i - Lambda_i) X_i D h_i`` from per-terminal estimates.

    ``x_hat`` holds the ``K`` symbol decisions of each terminal.
    """
    n = alloc.n
    total = np.zeros(n, dtype=complex)
    for eps, h, x in zip(eps_hat, h_hat, x_hat):
        if eps == 0.0:
            continue
        s = alloc.allocate(x) * linalg.apply_D_cols(h, n)
        linalg.count(mults=alloc.k)
        total += interference_matrix(eps, n).apply_offdiag(s)
        linalg.count(adds=n)
    return total


def cancel(y_freq: np.ndarray, ici: np.ndarray, alloc: SubcarrierAllocation) -> np.ndarray:
    """``Y'_R = Y_R - A^T I_R`` on the ``K`` allocated subcarriers."""
    linalg.count(adds=alloc.k)
    return np.asarray(y_freq) - alloc.deallocate(ici)
