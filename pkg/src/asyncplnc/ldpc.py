"""Quasi-cyclic LDPC codes: lifting, systematic encoding and sum-product decoding.

LLR convention inside this module: ``log P(bit=0) / P(bit=1)``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.sparse as sp

from .errors import CodeConstructionError, ConfigurationError

PRESETS = {
    "test-96": ("test-96.txt", 6),
    "paper-scale": ("paper-scale.txt", 80),
}


def load_base_matrix(text: str) -> np.ndarray:
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([int(v) for v in line.split()])
    if not rows or len({len(r) for r in rows}) != 1:
        raise CodeConstructionError("base matrix rows are empty or ragged")
    return np.array(rows, dtype=int)


def lift(base: np.ndarray, z: int) -> sp.csr_matrix:
    """Expand each base entry ``s >= 0`` into the ``z x z`` identity cyclically shifted by ``s``."""
    base = np.asarray(base, dtype=int)
    if np.any(base >= z):
        raise CodeConstructionError(f"shift {base.max()} not below lift size {z}")
    r_idx, c_idx = [], []
    ar = np.arange(z)
    for (i, j), s in np.ndenumerate(base):
        if s < 0:
            continue
        r_idx.append(i * z + ar)
        c_idx.append(j * z + (ar + s) % z)
    r = np.concatenate(r_idx)
    c = np.concatenate(c_idx)
    mb, nb = base.shape
    return sp.csr_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(mb * z, nb * z))


def has_four_cycles(H: sp.spmatrix) -> bool:
    overlap = (H.T.astype(np.int32) @ H.astype(np.int32)).tocoo()
    off = overlap.row != overlap.col
    return bool(np.any(overlap.data[off] >= 2))


def gf2_row_reduce(H: np.ndarray):
    """Reduced row echelon form over GF(2); returns ``(R, pivot_columns)``."""
    R = np.array(H, dtype=bool)
    m, n = R.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.flatnonzero(R[row:, col])
        if len(hits) == 0:
            continue
        p = row + hits[0]
        if p != row:
            R[[row, p]] = R[[p, row]]
        others = np.flatnonzero(R[:, col])
        others = others[others != row]
        R[others] ^= R[row]
        pivots.append(col)
        row += 1
    return R[:row], np.array(pivots, dtype=int)


@dataclass(frozen=True, eq=False)
class QcLdpcCode:
    name: str
    base: np.ndarray
    z: int
    H: sp.csr_matrix
    message_positions: np.ndarray
    parity_positions: np.ndarray
    parity_map: np.ndarray  # (m, k) bool: parity bits = parity_map @ message

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return len(self.message_positions)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def encode(self, bits) -> np.ndarray:
        """Systematic encoding; accepts ``(k,)`` or ``(batch, k)``."""
        u = np.asarray(bits, dtype=np.int64)
        if u.shape[-1] != self.k:
            raise ConfigurationError(f"expected {self.k} message bits, got {u.shape[-1]}")
        single = u.ndim == 1
        u = np.atleast_2d(u)
        c = np.zeros((u.shape[0], self.n), dtype=np.int8)
        c[:, self.message_positions] = u
        c[:, self.parity_positions] = (u @ self.parity_map.T.astype(np.int64)) % 2
        return c[0] if single else c

    def syndrome(self, words) -> np.ndarray:
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return (self.H @ w.T).T % 2

    def is_codeword(self, words) -> np.ndarray:
        return ~np.any(self.syndrome(words), axis=1)

    def message(self, words) -> np.ndarray:
        return np.asarray(words)[..., self.message_positions]

    @functools.cached_property
    def _edges(self):
        coo = self.H.tocoo()
        order = np.lexsort((coo.col, coo.row))
        rows, cols = coo.row[order], coo.col[order]
        starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
        return rows, cols, starts

    def decode(self, llr, max_iters: int = 50):
        """Sum-product decoding with early stop on a satisfied syndrome.

        ``llr`` is ``(n,)`` or ``(batch, n)``. Returns ``(message_bits,
        status)`` where ``status`` has per-word ``converged`` flags,
        ``iterations`` and the full hard-decision ``codewords``.
        """
        L = np.asarray(llr, dtype=float)
        if L.shape[-1] != self.n:
            raise ConfigurationError(f"expected {self.n} LLRs, got {L.shape[-1]}")
        single = L.ndim == 1
        L = np.atleast_2d(L)
        rows, cols, starts = self._edges
        B, E = L.shape[0], len(rows)
        m = self.H.shape[0]

        def check_ok(hard):
            par = np.add.reduceat(hard[:, cols].astype(np.int8), starts, axis=1) % 2
            return ~np.any(par, axis=1)

        hard = (L < 0).astype(np.int8)
        done = check_ok(hard)
        iters = np.zeros(B, dtype=int)
        c2v = np.zeros((B, E))
        active = np.flatnonzero(~done)
        for it in range(1, max_iters + 1):
            if len(active) == 0:
                break
            La = L[active]
            msg = c2v[active]
            total = La.copy()
            for b in range(len(active)):
                total[b] += np.bincount(cols, weights=msg[b], minlength=self.n)
            v2c = total[:, cols] - msg
            t = np.tanh(np.clip(v2c, -40, 40) / 2)
            sign = np.where(t < 0, -1.0, 1.0)
            mag = np.maximum(np.abs(t), 1e-300)
            logmag = np.log(mag)
            neg = (sign < 0).astype(np.int64)
            row_log = np.add.reduceat(logmag, starts, axis=1)
            row_neg = np.add.reduceat(neg, starts, axis=1)
            excl_log = row_log[:, rows] - logmag
            excl_sign = np.where((row_neg[:, rows] - neg) % 2 == 1, -1.0, 1.0)
            prod = excl_sign * np.exp(excl_log)
            prod = np.clip(prod, -1 + 1e-15, 1 - 1e-15)
            msg = 2 * np.arctanh(prod)
            c2v[active] = msg
            post = La.copy()
            for b in range(len(active)):
                post[b] += np.bincount(cols, weights=msg[b], minlength=self.n)
            h = (post < 0).astype(np.int8)
            hard[active] = h
            iters[active] = it
            ok = check_ok(h)
            done[active[ok]] = True
            active = active[~ok]
        status = {"converged": done, "iterations": iters, "codewords": hard}
        msgs = hard[:, self.message_positions]
        if single:
            status = {"converged": bool(done[0]), "iterations": int(iters[0]), "codewords": hard[0]}
            return msgs[0], status
        return msgs, status


def build_code(base, z: int, name: str = "custom") -> QcLdpcCode:
    base = np.asarray(base, dtype=int)
    H = lift(base, z)
    if has_four_cycles(H):
        raise CodeConstructionError("lifted graph contains 4-cycles")
    R, pivots = gf2_row_reduce(H.toarray())
    n = H.shape[1]
    free = np.setdiff1d(np.arange(n), pivots)
    # rows of R: x[pivot_r] = sum_{free} R[r, free] x[free]
    parity_map = R[:, free]
    return QcLdpcCode(
        name=name, base=base, z=z, H=H,
        message_positions=free, parity_positions=pivots, parity_map=parity_map,
    )


@functools.lru_cache(maxsize=None)
def preset(name: str) -> QcLdpcCode:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown code preset {name!r}; choose from {sorted(PRESETS)}")
    fname, z = PRESETS[name]
    text = resources.files("asyncplnc").joinpath("data", fname).read_text()
    return build_code(load_base_matrix(text), z, name=name)
