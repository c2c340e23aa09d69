"""Transform kernels, CFO phase ramps and a small Hermitian solver.

Conventions follow the two transform matrices used throughout the package:

* ``F[p, q] = N**-0.5 * exp(+2j*pi*p*q/N)`` -- unitary, maps subcarriers to
  time samples (``F @ v == sqrt(N) * ifft(v)``).
* ``D[p, q] = exp(-2j*pi*p*q/N)`` -- unnormalized DFT, maps a channel impulse
  response to its frequency response (``D @ h == fft(h, N)``).

Every kernel reports its cost to the active :class:`OpCounter`, if any, using
the FFT accounting of ``N log2 N`` complex additions and ``N/2 log2 N``
complex multiplications per length-``N`` transform.
"""
from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CfoDomainError, ConfigurationError, NumericalSingularityError


@dataclass
class OpCounter:
    """Complex addition/multiplication tally, optionally split by stage."""

    adds: int = 0
    mults: int = 0
    by_stage: dict = field(default_factory=dict)
    stage: str = "other"

    def add(self, adds: int = 0, mults: int = 0) -> None:
        self.adds += adds
        self.mults += mults
        a, m = self.by_stage.get(self.stage, (0, 0))
        self.by_stage[self.stage] = (a + adds, m + mults)


_counter: contextvars.ContextVar[OpCounter | None] = contextvars.ContextVar(
    "asyncplnc_op_counter", default=None
)


@contextlib.contextmanager
def counting(counter: OpCounter | None = None):
    """Route kernel op counts into ``counter`` for the duration of the block."""
    counter = counter if counter is not None else OpCounter()
    token = _counter.set(counter)
    try:
        yield counter
    finally:
        _counter.reset(token)


@contextlib.contextmanager
def stage(name: str):
    """Attribute counts inside the block to ``name``."""
    c = _counter.get()
    if c is None:
        yield
        return
    prev, c.stage = c.stage, name
    try:
        yield
    finally:
        c.stage = prev


def count(adds: int = 0, mults: int = 0) -> None:
    c = _counter.get()
    if c is not None:
        c.add(adds, mults)


def _count_fft(n: int) -> None:
    lg = int(np.log2(n))
    count(adds=n * lg, mults=n * lg // 2)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_n(v: np.ndarray) -> int:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ConfigurationError(f"expected a 1-D block, got shape {v.shape}")
    n = v.shape[0]
    if not is_power_of_two(n):
        raise ConfigurationError(f"block length {n} is not a power of two")
    return n


def apply_F(v: np.ndarray) -> np.ndarray:
    """Frequency block -> time block, ``F @ v``."""
    n = _check_n(v)
    _count_fft(n)
    return np.fft.ifft(v) * np.sqrt(n)


def apply_FH(v: np.ndarray) -> np.ndarray:
    """Time block -> frequency block, ``F^H @ v`` (exact adjoint of :func:`apply_F`)."""
    n = _check_n(v)
    _count_fft(n)
    return np.fft.fft(v) / np.sqrt(n)


def apply_D_cols(h: np.ndarray, n: int) -> np.ndarray:
    """Frequency response ``D @ h`` of an ``L``-tap CIR on ``n`` subcarriers.

    Only the first ``L`` columns of ``D`` take part; no normalization.
    """
    h = np.asarray(h)
    if h.ndim != 1 or h.shape[0] > n:
        raise ConfigurationError(f"CIR of length {h.shape} does not fit in N={n}")
    if not is_power_of_two(n):
        raise ConfigurationError(f"block length {n} is not a power of two")
    _count_fft(n)
    return np.fft.fft(h, n)


def apply_DH_cols(v: np.ndarray, length: int) -> np.ndarray:
    """First ``length`` entries of ``D^H @ v``."""
    n = _check_n(v)
    if length > n:
        raise ConfigurationError(f"cannot take {length} taps from N={n}")
    _count_fft(n)
    return (np.fft.ifft(v) * n)[:length]


def check_cfo(eps: float) -> float:
    eps = float(eps)
    if not -0.5 < eps < 0.5:
        raise CfoDomainError(f"normalized CFO {eps} outside (-1/2, 1/2)")
    return eps


def cfo_ramp(eps: float, n: int, phase: float = 0.0) -> np.ndarray:
    """Diagonal of ``E(eps)``: ``exp(2j*pi*k*eps/n)`` for ``k = 0..n-1``.

    A constant ``phase`` is folded into the exponent, so a common phase
    rotation costs nothing once the ramp is being generated anyway.
    """
    eps = check_cfo(eps)
    return np.exp(1j * (2 * np.pi * eps * np.arange(n) / n + phase))


def apply_ramp(ramp: np.ndarray, v: np.ndarray) -> np.ndarray:
    if len(ramp) != len(v):
        raise ConfigurationError(f"ramp length {len(ramp)} != block length {len(v)}")
    count(mults=len(v))
    return ramp * v


def count_symbol_products(x) -> None:
    """Count one complex multiplication per entry of ``x`` that is not +-1.

    Scaling by +-1 is a sign change, so BPSK symbol products are free.
    """
    x = np.asarray(x)
    count(mults=int(np.count_nonzero((x != 1) & (x != -1))))


def cholesky_factor(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a Hermitian positive-definite matrix.

    Raises :class:`NumericalSingularityError` if ``A`` is not positive
    definite or its smallest squared pivot is below ``1e-14`` of the largest
    diagonal entry. Costs ``L**3 / 6`` multiplications.
    """
    A = np.asarray(A, dtype=complex)
    scale = np.max(np.abs(np.diag(A)).real) if A.size else 0.0
    try:
        c = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalSingularityError("matrix is not positive definite") from exc
    piv = np.abs(np.diag(c)) ** 2
    if scale <= 0 or piv.min() < 1e-14 * scale:
        raise NumericalSingularityError(
            f"pivot {piv.min():.3e} below 1e-14 of max diagonal {scale:.3e}"
        )
    count(mults=A.shape[0] ** 3 // 6)
    return c


def cholesky_solve(c: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``(c c^H) x = b`` by two triangular sweeps (``L**2`` multiplications)."""
    count(mults=c.shape[0] ** 2)
    z = scipy.linalg.solve_triangular(c, b, lower=True)
    return scipy.linalg.solve_triangular(c.conj().T, z, lower=False)


def solve_hermitian(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for Hermitian positive-definite ``A`` via Cholesky."""
    return cholesky_solve(cholesky_factor(A), b)


@contextlib.contextmanager
def suspended():
    """Stop counting inside the block (diagnostics that are not part of the receiver)."""
    token = _counter.set(None)
    try:
        yield
    finally:
        _counter.reset(token)
