"""Relay receivers: the proposed SAGE + ICI-cancelling chain and the three baselines.

All receivers turn one uplink frame into a ``(blocks, K)`` grid of XOR LLRs
and share :func:`decode_frame` for the channel-decoding stage, so they only
differ in their front end.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import ici, linalg, plnc, sage
from .ldpc import QcLdpcCode
from .ofdm import BPSK, Constellation, FrameLayout, SubcarrierAllocation

NOISE_FLOOR = 1e-12


@dataclass
class FrameObservation:
    """What the relay sees for one frame, plus the ground truth for scoring and genies."""

    y_pre: np.ndarray          # (N,) preamble block, asynchronous
    y: np.ndarray              # (blocks, N) payload blocks, asynchronous
    y_pre_sync: np.ndarray     # same frame with both CFOs forced to zero
    y_sync: np.ndarray
    noise_var: float
    eps: list                  # per block (eps1, eps2); index 0 is the preamble
    h_true: tuple
    symbols: np.ndarray        # (2, blocks, K)
    xor_message: np.ndarray    # (codewords, k)


@dataclass
class ReceiverContext:
    alloc: SubcarrierAllocation
    code: QcLdpcCode
    layout: FrameLayout
    covs: tuple
    cir_length: int
    iterations: int = 2
    cfo_update: str = "every-block"
    bootstrap: str = "joint"
    cfo_step: str = "phase-aware"
    constellation: Constellation = BPSK
    decoder_iters: int = 50
    pilots: tuple = field(default=None)

    def __post_init__(self):
        if self.pilots is None:
            self.pilots = sage.comb_pilots(self.alloc.n)


def _freq(y, alloc):
    with linalg.stage("map"):
        return alloc.deallocate(linalg.apply_FH(y))


def _gammas(h_pair, diag_pair, alloc):
    return [diag_pair[i] * alloc.deallocate(linalg.apply_D_cols(h_pair[i], alloc.n)) for i in range(2)]


def _llrs(y, gammas, noise_var, ctx):
    post = plnc.pair_posterior(y, gammas[0], gammas[1], max(noise_var, NOISE_FLOOR), ctx.constellation)
    return plnc.xor_llr(post, ctx.constellation)


def _known(ctx, block):
    mask = ctx.layout.known_mask()[block]
    return mask, np.full(ctx.alloc.k, ctx.constellation.points[0])


def proposed(obs: FrameObservation, ctx: ReceiverContext, traces: list | None = None,
             oracle_estimates: bool = False):
    """SAGE estimation, ICI reconstruction/cancellation and per-subcarrier XOR mapping.

    ``oracle_estimates`` replaces the SAGE output with the true parameters,
    which is how the chain is checked against the synchronous genie.
    """
    alloc = ctx.alloc
    blocks = obs.y.shape[0]
    out = np.zeros((blocks, alloc.k * ctx.constellation.bits_per_symbol))
    h0 = sage.preamble_channel_estimate(obs.y_pre, ctx.pilots, ctx.cir_length)
    est = sage.ParamEstimate(eps=(0.0, 0.0), h=h0)
    for b in range(blocks):
        if oracle_estimates:
            est = sage.ParamEstimate(eps=obs.eps[b + 1], h=obs.h_true, x=(obs.symbols[0, b], obs.symbols[1, b]))
        else:
            estimate_cfo = ctx.cfo_update == "every-block" or b == 0
            est, tr = sage.run_sage(
                obs.y[b], replace(est, x=None, iteration=0), obs.noise_var, ctx.covs, alloc,
                ctx.constellation, ctx.iterations, estimate_cfo=estimate_cfo,
                known=_known(ctx, b), bootstrap=ctx.bootstrap, cfo_step=ctx.cfo_step,
                truth=sage.ParamEstimate(eps=obs.eps[b + 1], h=obs.h_true),
            )
            if traces is not None:
                traces.append(tr)
        with linalg.stage("ici"):
            y_f = _freq(obs.y[b], alloc)
            ici_hat = ici.reconstruct_ici(est.eps, est.h, est.x, alloc)
            y_c = ici.cancel(y_f, ici_hat, alloc)
            diags = [ici.dirichlet_mean(e, alloc.n) for e in est.eps]
            gammas = _gammas(est.h, diags, alloc)
        out[b] = _llrs(y_c, gammas, obs.noise_var, ctx)
    return out


def sync_genie(obs: FrameObservation, ctx: ReceiverContext):
    """Zero-CFO observation decoded with the true CIRs; no estimation, no cancellation."""
    gammas = _gammas(obs.h_true, (1.0, 1.0), ctx.alloc)
    return np.stack([_llrs(_freq(y, ctx.alloc), gammas, obs.noise_var, ctx) for y in obs.y_sync])


def _compensated(obs, ctx, shifts):
    alloc = ctx.alloc
    n = alloc.n

    def derotate(y, s):
        return y if s == 0.0 else y * np.exp(-2j * np.pi * s * np.arange(n) / n)

    h = sage.preamble_channel_estimate(derotate(obs.y_pre, shifts[0]), ctx.pilots, ctx.cir_length)
    gammas = _gammas(h, (1.0, 1.0), alloc)
    return np.stack([
        _llrs(_freq(derotate(y, shifts[b + 1]), alloc), gammas, obs.noise_var, ctx)
        for b, y in enumerate(obs.y)
    ])


def mean_cfo(obs: FrameObservation, ctx: ReceiverContext):
    """Rotate every block by minus the average of the two (true) CFOs, then map as if synchronous."""
    return _compensated(obs, ctx, [0.5 * (e1 + e2) for e1, e2 in obs.eps])


def no_compensation(obs: FrameObservation, ctx: ReceiverContext):
    return _compensated(obs, ctx, [0.0] * len(obs.eps))


RECEIVERS = {
    "proposed": proposed,
    "mean": mean_cfo,
    "none": no_compensation,
    "sync": sync_genie,
}


def decode_frame(llr_grid: np.ndarray, ctx: ReceiverContext):
    """Shared tail: regroup the XOR LLRs into codewords and decode them.

    Returns ``(xor_message_bits (codewords, k), status)``.
    """
    words = ctx.layout.from_grid(llr_grid)
    with linalg.stage("decode"):
        return plnc.relay_decode_xor(words, ctx.code, max_iters=ctx.decoder_iters)
