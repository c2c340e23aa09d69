"""Random CIRs with an exponential power delay profile, CFO schedules and AWGN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CfoDomainError, ConfigurationError


def power_delay_profile(length: int) -> np.ndarray:
    """Tap variances proportional to ``exp(-l/2)``, normalized to sum to one."""
    if length < 1:
        raise ConfigurationError("a CIR needs at least one tap")
    p = np.exp(-np.arange(length) / 2.0)
    return p / p.sum()


@dataclass(frozen=True)
class Cir:
    taps: np.ndarray
    cov: np.ndarray

    @property
    def length(self) -> int:
        return len(self.taps)


def draw_cir(length: int, rng: np.random.Generator) -> Cir:
    pdp = power_delay_profile(length)
    g = (rng.standard_normal(length) + 1j * rng.standard_normal(length)) / np.sqrt(2)
    return Cir(taps=g * np.sqrt(pdp), cov=np.diag(pdp).astype(complex))


def signal_power(k: int, n: int, terminals: int = 2) -> float:
    """Expected per-sample received power with unit-power symbols on ``k`` of ``n`` subcarriers."""
    return terminals * k / n


def noise_variance(snr_db: float, k: int, n: int) -> float:
    """Complex noise variance for an SNR measured against the combined two-terminal power."""
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power(k, n) / 10.0 ** (snr_db / 10.0)


def add_awgn(v: np.ndarray, snr_db: float, rng: np.random.Generator, k: int | None = None):
    """Add circular complex Gaussian noise at ``snr_db``; returns ``(v + w, noise_var)``.

    The noise level follows :func:`noise_variance` for ``k`` active
    subcarriers out of ``len(v)`` (all of them by default). ``snr_db = inf``
    returns an unchanged copy with zero variance.
    """
    v = np.asarray(v, dtype=complex)
    n = v.shape[-1]
    noise_var = noise_variance(snr_db, n if k is None else k, n)
    if noise_var == 0:
        return v.copy(), 0.0
    w = (rng.standard_normal(v.shape) + 1j * rng.standard_normal(v.shape)) * np.sqrt(noise_var / 2)
    return v + w, noise_var


@dataclass(frozen=True)
class CfoSchedule:
    """Per-block CFO pair.

    ``constant``: ``(sign[0]*xi, sign[1]*xi)`` in every block, unless ``eps``
    pins both values explicitly. ``sinusoidal``: ``sign[i]*xi +
    amplitude*sin(2*pi*n/period)`` for block ``n`` (the preamble is ``n = 0``).
    """

    mode: str = "constant"
    xi: float = 0.0
    signs: tuple = (-1, 1)
    eps: tuple | None = None
    amplitude: float = 0.05
    period: float = 5.0

    def __post_init__(self):
        if self.mode not in ("constant", "sinusoidal"):
            raise ConfigurationError(f"unknown CFO mode {self.mode!r}")

    def at(self, block: int) -> tuple[float, float]:
        base = self.eps if self.eps is not None else (self.signs[0] * self.xi, self.signs[1] * self.xi)
        if self.mode == "sinusoidal":
            d = self.amplitude * np.sin(2 * np.pi * block / self.period)
            base = (base[0] + d, base[1] + d)
        e1, e2 = float(base[0]), float(base[1])
        for e in (e1, e2):
            if not -0.5 < e < 0.5:
                raise CfoDomainError(f"CFO schedule reaches {e} at block {block}")
        return e1, e2


def cfo_schedule(mode: str, xi: float, block: int, signs=(-1, 1)) -> tuple[float, float]:
    return CfoSchedule(mode=mode, xi=xi, signs=tuple(signs)).at(block)
