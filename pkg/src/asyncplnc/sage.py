"""Joint CFO / channel / symbol estimation at the relay by space-alternating EM.

Terminal indices are 0-based here: index 0 is the first terminal. Each
parameter group ``(eps_i, h_i, X_i)`` is updated against its hidden signal
(the relay observation minus the other terminal's current reconstruction)
in the order channel -> CFO -> symbols.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np

from . import ici, linalg
from .errors import ConfigurationError, UnderdeterminedError
from .ofdm import BPSK, Constellation, SubcarrierAllocation


@dataclass(frozen=True)
class ParamEstimate:
    eps: tuple
    h: tuple
    x: tuple | None = None
    iteration: int = 0

    def with_terminal(self, i: int, eps=None, h=None, x=None) -> "ParamEstimate":
        eps_l, h_l = list(self.eps), list(self.h)
        x_l = list(self.x) if self.x is not None else [None, None]
        if eps is not None:
            eps_l[i] = eps
        if h is not None:
            h_l[i] = h
        if x is not None:
            x_l[i] = x
        return replace(self, eps=tuple(eps_l), h=tuple(h_l), x=tuple(x_l))


@dataclass
class SageTrace:
    loglik: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    channel_mse: list = field(default_factory=list)
    symbol_changes: list = field(default_factory=list)
    rejected_cfo_steps: int = 0
    faded_subcarriers: int = 0

    def records(self):
        """Flat per-iteration rows for export."""
        for m, ll in enumerate(self.loglik):
            yield {
                "iteration": m,
                "loglik": ll,
                "eps1": self.eps[m][0],
                "eps2": self.eps[m][1],
                "mse1": self.channel_mse[m][0] if self.channel_mse else float("nan"),
                "mse2": self.channel_mse[m][1] if self.channel_mse else float("nan"),
                "symbol_changes": self.symbol_changes[m],
            }


def reconstruct_terminal(eps, x, H, alloc: SubcarrierAllocation, phase: float = 0.0) -> np.ndarray:
    """``E(eps) F A X D h`` given the precomputed frequency response ``H = D h``.

    ``phase`` is a common rotation of ``H`` that has not been applied to it yet.
    """
    linalg.count_symbol_products(x)
    s = alloc.allocate(x * alloc.deallocate(H))
    return linalg.apply_ramp(linalg.cfo_ramp(eps, alloc.n, phase), linalg.apply_F(s))


def hidden_signal(y_r, est: ParamEstimate, i: int, alloc: SubcarrierAllocation, H_other=None,
                  phase_other: float = 0.0):
    """Hidden-data estimate for terminal ``i``: ``y_R`` minus the other terminal's reconstruction."""
    j = 1 - i
    if H_other is None:
        H_other = linalg.apply_D_cols(est.h[j], alloc.n)
    out = np.asarray(y_r) - reconstruct_terminal(est.eps[j], est.x[j], H_other, alloc, phase_other)
    linalg.count(adds=alloc.n)
    return out


def derotate(y_i, eps_i: float, n: int) -> np.ndarray:
    """``E^H(eps) y``: remove a CFO ramp (``N`` multiplications)."""
    return linalg.apply_ramp(np.conj(linalg.cfo_ramp(eps_i, n)), y_i)


@functools.lru_cache(maxsize=32)
def _gram_unit(n: int, indices: tuple, length: int) -> np.ndarray:
    d = np.exp(-2j * np.pi * np.outer(np.asarray(indices), np.arange(length)) / n)
    return d.conj().T @ d


def _is_constant_modulus(x) -> bool:
    p = np.abs(np.asarray(x)) ** 2
    return bool(np.allclose(p, p[0]))


def _gram(x, alloc: SubcarrierAllocation, length: int) -> np.ndarray:
    """``D_L^H A |X|^2 A^T D_L`` for the first ``length`` CIR taps."""
    p = np.abs(np.asarray(x)) ** 2
    if _is_constant_modulus(x):
        return p[0] * _gram_unit(alloc.n, tuple(alloc.indices.tolist()), length)
    d = np.exp(-2j * np.pi * np.outer(alloc.indices, np.arange(length)) / alloc.n)
    return (d.conj().T * p) @ d


def mmse_factor(x_i, cov, noise_var: float, alloc: SubcarrierAllocation) -> np.ndarray:
    """Cholesky factor of the channel-update normal matrix ``s2 R^-1 + D^H X^H X D``.

    For constant-modulus symbols the matrix does not depend on the decisions,
    so one factor serves every update of a terminal within a block.
    """
    cov = np.asarray(cov, dtype=complex)
    a = _gram(x_i, alloc, cov.shape[0])
    if noise_var > 0:
        with linalg.suspended():
            a = a + noise_var * linalg.solve_hermitian(cov, np.eye(cov.shape[0]))
    return linalg.cholesky_factor(a)


def update_channel_mmse(y_i, eps_i, x_i, cov, noise_var: float, alloc: SubcarrierAllocation,
                        factor=None, derotated=None):
    """Prior-regularized channel update ``(s2 R^-1 + D^H X^H X D)^-1 D^H X^H F^H E^H y``.

    ``factor`` (from :func:`mmse_factor`) and ``derotated`` (``E^H y``) may be
    passed in when the caller already has them.
    """
    if derotated is None:
        derotated = derotate(y_i, eps_i, alloc.n)
    v = alloc.deallocate(linalg.apply_FH(derotated))
    linalg.count_symbol_products(x_i)
    r = alloc.allocate(np.conj(x_i) * v)
    b = linalg.apply_DH_cols(r, np.asarray(cov).shape[0])
    if factor is None:
        factor = mmse_factor(x_i, cov, noise_var, alloc)
    return linalg.cholesky_solve(factor, b)


def _cfo_correlation(y_i, eps_i, x_i, h_i, alloc, H_i, derotated):
    """``z(n) = conj(y(n)) Omega(n) exp(2j pi eps n / N)`` and ``Omega = F A X D h``."""
    n = alloc.n
    if H_i is None:
        H_i = linalg.apply_D_cols(h_i, n)
    if derotated is None:
        derotated = derotate(y_i, eps_i, n)
    linalg.count_symbol_products(x_i)
    omega = linalg.apply_F(alloc.allocate(x_i * alloc.deallocate(H_i)))
    z = np.conj(derotated) * omega
    linalg.count(adds=2 * n, mults=n)
    return z, omega


def update_cfo(y_i, eps_i: float, x_i, h_i, alloc: SubcarrierAllocation, H_i=None, derotated=None):
    """One second-order Taylor (Newton) step on ``Re{y^H E(eps) F X D h}``.

    Returns ``(eps_new, accepted)``. The step is rejected, keeping ``eps_i``,
    when the curvature term is numerically zero or the result would leave
    ``(-1/2, 1/2)``.
    """
    n = alloc.n
    z, omega = _cfo_correlation(y_i, eps_i, x_i, h_i, alloc, H_i, derotated)
    k = np.arange(n)
    num = np.sum(k * z.imag)
    den = np.sum(k**2 * z.real)
    floor = 1e-9 * np.sum(k**2 * np.abs(y_i) * np.abs(omega))
    if not abs(den) >= floor or floor == 0:
        return float(eps_i), False
    cand = eps_i - n / (2 * np.pi) * num / den
    if not -0.5 < cand < 0.5:
        return float(eps_i), False
    return float(cand), True


def update_cfo_phase_aware(y_i, eps_i: float, x_i, h_i, alloc: SubcarrierAllocation, H_i=None,
                           derotated=None):
    """Second-order Taylor step taken jointly in the CFO and a common channel phase.

    The channel update that precedes the CFO step absorbs the mean phase of
    the residual CFO ramp, which the plain step then treats as correct; the
    plain step therefore removes only about a quarter of the offset per
    iteration. Expanding ``Re{sum_k z(k) exp(j(theta*k + phi))}`` to second
    order in both ``theta = 2*pi*d_eps/N`` and ``phi`` and solving the 2x2
    system removes that coupling. With ``phi`` pinned to zero this is exactly
    :func:`update_cfo`.

    Returns ``(eps_new, phase, accepted)``; the caller rotates the channel
    estimate by ``exp(1j*phase)``.
    """
    n = alloc.n
    z, omega = _cfo_correlation(y_i, eps_i, x_i, h_i, alloc, H_i, derotated)
    k = np.arange(n)
    s0, s1, s2 = np.sum(z.real), np.sum(k * z.real), np.sum(k**2 * z.real)
    t0, t1 = np.sum(z.imag), np.sum(k * z.imag)
    det = s2 * s0 - s1 * s1
    floor = 1e-9 * np.sum(k**2 * np.abs(y_i) * np.abs(omega)) * np.sum(np.abs(y_i) * np.abs(omega))
    if not abs(det) >= floor or floor == 0:
        return float(eps_i), 0.0, False
    theta = -(s0 * t1 - s1 * t0) / det
    phi = -(s2 * t0 - s1 * t1) / det
    cand = eps_i + n / (2 * np.pi) * theta
    if not -0.5 < cand < 0.5:
        return float(eps_i), 0.0, False
    return float(cand), float(phi), True


def update_symbols(y_i, eps_i, h_i, alloc: SubcarrierAllocation,
                   constellation: Constellation = BPSK, H_i=None, known=None, phase: float = 0.0):
    """Per-subcarrier nearest-point decisions ``argmin_a |Y(k) - a H(k)|^2``.

    ``known`` is an optional ``(mask, values)`` pair of slots whose symbols
    the relay already knows; those are returned unchanged. Ties go to the
    lowest constellation index. ``phase`` is a pending common rotation of
    ``H``; it is applied to the observation through the ramp instead.

    For constant-modulus constellations the rule reduces to maximizing
    ``Re{conj(a) conj(H(k)) Y(k)}``, which needs one product per subcarrier.
    """
    n = alloc.n
    y = alloc.deallocate(linalg.apply_FH(linalg.apply_ramp(np.conj(linalg.cfo_ramp(eps_i, n, phase)), y_i)))
    if H_i is None:
        H_i = linalg.apply_D_cols(h_i, n)
    hk = alloc.deallocate(H_i)
    pts = constellation.points
    if _is_constant_modulus(pts):
        w = np.conj(hk) * y
        linalg.count(mults=alloc.k)
        for a in pts:
            linalg.count_symbol_products(np.full(alloc.k, np.conj(a)))
        score = (np.conj(pts)[None, :] * w[:, None]).real
        linalg.count(adds=alloc.k * len(pts))
        x = pts[np.argmax(score, axis=1)]
    else:
        dist = np.abs(y[:, None] - pts[None, :] * hk[:, None]) ** 2
        linalg.count(adds=alloc.k * len(pts), mults=2 * alloc.k * len(pts))
        x = pts[np.argmin(dist, axis=1)]
    if known is not None:
        mask, values = known
        x = np.where(mask, values, x)
    return x


def log_likelihood(y_r, est: ParamEstimate, noise_var: float, alloc: SubcarrierAllocation) -> float:
    """``-||y_R - sum_i E(eps_i) F X_i D h_i||^2 / noise_var`` (constant dropped)."""
    if noise_var <= 0:
        raise ConfigurationError("log-likelihood needs a positive noise variance")
    with linalg.suspended():
        r = np.asarray(y_r, dtype=complex).copy()
        for i in range(2):
            r -= reconstruct_terminal(est.eps[i], est.x[i], linalg.apply_D_cols(est.h[i], alloc.n), alloc)
    return float(-np.vdot(r, r).real / noise_var)


def _pair_decide(y, gains, constellation):
    pts = constellation.points
    cand = pts[:, None, None] * gains[0][None, None, :] + pts[None, :, None] * gains[1][None, None, :]
    flat = (np.abs(y[None, None, :] - cand) ** 2).reshape(-1, len(y)).argmin(axis=0)
    return [pts[flat // len(pts)], pts[flat % len(pts)]]


def joint_symbol_bootstrap(y_r, est: ParamEstimate, alloc: SubcarrierAllocation,
                           constellation: Constellation = BPSK, known=None, ici_passes: int = 2):
    """Initial decisions from the pairwise nearest point ``|Y - a G1 - b G2|^2``.

    ``G_i`` is terminal ``i``'s direct gain ``Lambda(eps_i) H_i``. After the
    first decision the inter-carrier interference implied by the current
    decisions is subtracted and the pair decision repeated ``ici_passes``
    times. Without these passes the ICI left in the observation causes
    pair errors that per-terminal hard-decision updates cannot undo.
    """
    n = alloc.n

    def pin(xs):
        if known is None:
            return xs
        mask, values = known
        return [np.where(mask, values, x) for x in xs]

    with linalg.suspended():
        y = alloc.deallocate(linalg.apply_FH(np.asarray(y_r, dtype=complex)))
        gains = [ici.dirichlet_mean(est.eps[i], n) * alloc.deallocate(linalg.apply_D_cols(est.h[i], n))
                 for i in range(2)]
        xs = pin(_pair_decide(y, gains, constellation))
        if any(e != 0.0 for e in est.eps):
            for _ in range(ici_passes):
                leak = ici.reconstruct_ici(est.eps, est.h, xs, alloc)
                xs = pin(_pair_decide(ici.cancel(y, leak, alloc), gains, constellation))
    return tuple(xs)


def run_sage(y_r, init: ParamEstimate, noise_var: float, covs, alloc: SubcarrierAllocation,
             constellation: Constellation = BPSK, iterations: int = 2, estimate_cfo: bool = True,
             known=None, truth: ParamEstimate | None = None, bootstrap: str = "joint",
             cfo_step: str = "phase-aware"):
    """Run ``iterations`` full SAGE cycles (terminal 1's group, then terminal 2's).

    If ``init.x`` is ``None`` the symbol decisions are bootstrapped from the
    raw observation with the initial CFO/channel estimates: either one
    single-user decision pass per terminal (``"per-terminal"``) or an
    ICI-aware joint pairwise decision (``"joint"``, see
    :func:`joint_symbol_bootstrap`). ``cfo_step`` selects :func:`update_cfo`
    (``"plain"``) or :func:`update_cfo_phase_aware` (``"phase-aware"``).

    Returns ``(estimate, trace)``.
    """
    n = alloc.n
    if cfo_step not in ("plain", "phase-aware"):
        raise ConfigurationError(f"unknown cfo_step {cfo_step!r}")
    y_r = np.asarray(y_r, dtype=complex)
    est = replace(init, eps=tuple(float(e) for e in init.eps), h=tuple(np.asarray(h, dtype=complex) for h in init.h))
    with linalg.stage("setup"):
        H = [linalg.apply_D_cols(est.h[i], n) for i in range(2)]
        if est.x is None:
            if bootstrap == "joint":
                xs = joint_symbol_bootstrap(y_r, est, alloc, constellation, known)
            elif bootstrap == "per-terminal":
                xs = tuple(update_symbols(y_r, est.eps[i], est.h[i], alloc, constellation, H_i=H[i], known=known)
                           for i in range(2))
            else:
                raise ConfigurationError(f"unknown bootstrap {bootstrap!r}")
            est = replace(est, x=xs)

    trace = SageTrace()
    with linalg.suspended():
        trace.faded_subcarriers = int(sum(np.sum(alloc.deallocate(Hi) == 0) for Hi in H))

    def record(changes):
        if noise_var > 0:
            trace.loglik.append(log_likelihood(y_r, est, noise_var, alloc))
        else:
            trace.loglik.append(float("nan"))
        trace.eps.append(tuple(est.eps))
        if truth is not None:
            trace.channel_mse.append(tuple(float(np.mean(np.abs(est.h[i] - truth.h[i]) ** 2)) for i in range(2)))
        trace.symbol_changes.append(changes)

    record(0)
    # phase[i]: common rotation already applied to est.h[i] but not yet to H[i]
    phase = [0.0, 0.0]
    factors = [None, None]
    for m in range(iterations):
        changes = 0
        for i in range(2):
            with linalg.stage("hidden"):
                y_i = hidden_signal(y_r, est, i, alloc, H_other=H[1 - i], phase_other=phase[1 - i])
            with linalg.stage("channel"):
                u = derotate(y_i, est.eps[i], n)
                factor = factors[i]
                if factor is None:
                    with linalg.stage("setup"):
                        factor = mmse_factor(est.x[i], covs[i], noise_var, alloc)
                    if _is_constant_modulus(constellation.points):
                        factors[i] = factor
                h_i = update_channel_mmse(y_i, est.eps[i], est.x[i], covs[i], noise_var, alloc,
                                          factor=factor, derotated=u)
                H[i] = linalg.apply_D_cols(h_i, n)
                phase[i] = 0.0
            eps_i = est.eps[i]
            if estimate_cfo:
                with linalg.stage("cfo"):
                    if cfo_step == "plain":
                        eps_i, ok = update_cfo(y_i, eps_i, est.x[i], h_i, alloc, H_i=H[i], derotated=u)
                    else:
                        eps_i, phi, ok = update_cfo_phase_aware(y_i, eps_i, est.x[i], h_i, alloc,
                                                                H_i=H[i], derotated=u)
                        if ok and phi:
                            h_i = h_i * np.exp(1j * phi)
                            linalg.count(mults=len(h_i))
                            phase[i] = phi
                trace.rejected_cfo_steps += int(not ok)
            with linalg.stage("symbols"):
                x_i = update_symbols(y_i, eps_i, h_i, alloc, constellation, H_i=H[i], known=known,
                                     phase=phase[i])
            changes += int(np.sum(x_i != est.x[i]))
            est = est.with_terminal(i, eps=eps_i, h=h_i, x=x_i)
        est = replace(est, iteration=est.iteration + 1)
        record(changes)
    return est, trace


def comb_pilots(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Training block: terminal 1 on even subcarriers, terminal 2 on odd ones.

    Pilot values are a fixed +-sqrt(2) pattern so each terminal's preamble
    carries the same power as a full data block.
    """
    bits = np.random.default_rng(0x5EED).integers(0, 2, n)
    vals = np.sqrt(2.0) * (1 - 2 * bits).astype(complex)
    p1 = np.zeros(n, dtype=complex)
    p2 = np.zeros(n, dtype=complex)
    p1[0::2] = vals[0::2]
    p2[1::2] = vals[1::2]
    return p1, p2


def preamble_channel_estimate(y_pre, pilots, length: int):
    """Least-squares ``length``-tap CIR of each terminal from its pilot comb."""
    y_pre = np.asarray(y_pre, dtype=complex)
    n = len(y_pre)
    with linalg.suspended():
        Y = linalg.apply_FH(y_pre)
    out = []
    for p in pilots:
        idx = np.flatnonzero(p)
        if len(idx) < 2 * length:
            raise UnderdeterminedError(f"{len(idx)} pilots cannot fit {length} taps (need {2 * length})")
        d = np.exp(-2j * np.pi * np.outer(idx, np.arange(length)) / n)
        h, *_ = np.linalg.lstsq(d, Y[idx] / p[idx], rcond=None)
        out.append(h)
    return tuple(out)
