"""Independent brute-force references for the fast kernels.

Nothing here imports the package under test. Matrices are built entry by
entry from their definitions, sums are written out as loops, and GF(2)
algebra runs on Python integers, so a shared bug between an oracle and the
implementation would have to be written twice in different ways.
"""
import cmath
import itertools
import math

import numpy as np


def dense_F(n):
    """``F[p, q] = exp(+2j pi p q / n) / sqrt(n)``."""
    return np.array([[cmath.exp(2j * math.pi * p * q / n) / math.sqrt(n) for q in range(n)] for p in range(n)])


def dense_D(n, length=None):
    """``D[p, q] = exp(-2j pi p q / n)``, first ``length`` columns."""
    length = n if length is None else length
    return np.array([[cmath.exp(-2j * math.pi * p * q / n) for q in range(length)] for p in range(n)])


def dense_E(eps, n):
    return np.diag([cmath.exp(2j * math.pi * k * eps / n) for k in range(n)])


def dense_A(indices, n):
    a = np.zeros((n, len(indices)))
    for col, row in enumerate(indices):
        a[row, col] = 1.0
    return a


def dense_Pi(eps, n):
    F = dense_F(n)
    return F.conj().T @ dense_E(eps, n) @ F


def dense_Lambda(eps, n):
    """Diagonal part of ``Pi`` as a scalar (all diagonal entries agree)."""
    return sum(cmath.exp(2j * math.pi * k * eps / n) for k in range(n)) / n


def dense_mac(x1, x2, h1, h2, eps1, eps2, indices, n):
    """Time-domain relay block ``sum_i E(eps_i) F A X_i D h_i``.

    ``x_i`` are the ``K`` allocated symbols, ``h_i`` length-``L`` CIRs.
    """
    A = dense_A(indices, n)
    out = np.zeros(n, dtype=complex)
    for x, h, eps in ((x1, h1, eps1), (x2, h2, eps2)):
        X = np.diag(x)
        out += dense_E(eps, n) @ dense_F(n) @ A @ X @ A.T @ dense_D(n, len(h)) @ h
    return out


def dense_frequency_decomposition(x1, x2, h1, h2, eps1, eps2, indices, n):
    """``A^T F^H y`` split into desired part ``sum Lambda_i S_i`` and ICI ``sum (Pi_i - Lambda_i) S_i``."""
    A = dense_A(indices, n)
    desired = np.zeros(len(indices), dtype=complex)
    leak = np.zeros(n, dtype=complex)
    for x, h, eps in ((x1, h1, eps1), (x2, h2, eps2)):
        s = A @ np.diag(x) @ A.T @ dense_D(n, len(h)) @ h
        lam = dense_Lambda(eps, n)
        desired += lam * (A.T @ s)
        leak += (dense_Pi(eps, n) - lam * np.eye(n)) @ s
    return desired, leak


def dense_hidden(y, x_other, h_other, eps_other, indices, n):
    A = dense_A(indices, n)
    return y - dense_E(eps_other, n) @ dense_F(n) @ A @ np.diag(x_other) @ A.T @ dense_D(n, len(h_other)) @ h_other


def dense_mmse(y_i, eps_i, x_i, cov, noise_var, indices, n):
    """``(s2 R^-1 + D^H A X^H X A^T D)^-1 D^H A X^H A^T F^H E^H y``."""
    A = dense_A(indices, n)
    D = dense_D(n, cov.shape[0])
    X = A @ np.diag(x_i) @ A.T
    K = np.linalg.inv(noise_var * np.linalg.inv(cov) + D.conj().T @ X.conj().T @ X @ D)
    return K @ D.conj().T @ X.conj().T @ dense_F(n).conj().T @ dense_E(eps_i, n).conj().T @ y_i


def dense_omega(x_i, h_i, indices, n):
    A = dense_A(indices, n)
    return dense_F(n) @ A @ np.diag(x_i) @ A.T @ dense_D(n, len(h_i)) @ h_i


def cfo_objective(y_i, eps, x_i, h_i, indices, n):
    """``Re{ y^H E(eps) Omega }`` evaluated by a plain loop."""
    omega = dense_omega(x_i, h_i, indices, n)
    return sum((np.conj(y_i[k]) * cmath.exp(2j * math.pi * eps * k / n) * omega[k]).real for k in range(n))


def loop_cfo_step(y_i, eps, x_i, h_i, indices, n):
    """Newton step written as explicit sums."""
    omega = dense_omega(x_i, h_i, indices, n)
    num = den = 0.0
    for k in range(n):
        z = np.conj(y_i[k]) * omega[k] * cmath.exp(2j * math.pi * eps * k / n)
        num += k * z.imag
        den += k * k * z.real
    return eps - n / (2 * math.pi) * num / den


def dense_log_likelihood(y, x1, x2, h1, h2, eps1, eps2, indices, n, noise_var):
    r = y - dense_mac(x1, x2, h1, h2, eps1, eps2, indices, n)
    return -float(np.vdot(r, r).real) / noise_var


def enumerate_symbol_decision(Y, H, points):
    """Exhaustive nearest point per subcarrier, ties to the lowest index."""
    out = []
    for y, h in zip(Y, H):
        best, best_d = None, None
        for p in points:
            d = abs(y - p * h) ** 2
            if best_d is None or d < best_d:
                best, best_d = p, d
        out.append(best)
    return np.array(out)


def enumerate_pair_posterior(y, g1, g2, noise_var, points):
    """Direct ``exp(-|y - a g1 - b g2|^2 / s2)`` normalization, no log-domain tricks."""
    m = len(points)
    out = np.zeros((len(y), m, m))
    for k in range(len(y)):
        total = 0.0
        for a, b in itertools.product(range(m), repeat=2):
            out[k, a, b] = math.exp(-abs(y[k] - points[a] * g1[k] - points[b] * g2[k]) ** 2 / noise_var)
            total += out[k, a, b]
        out[k] /= total
    return out


def enumerate_xor_llr(post, labels):
    """``log sum_{xor=1} p / sum_{xor=0} p`` for each bit position."""
    m, bps = labels.shape
    out = []
    for k in range(post.shape[0]):
        for j in range(bps):
            one = zero = 0.0
            for a, b in itertools.product(range(m), repeat=2):
                if labels[a, j] ^ labels[b, j]:
                    one += post[k, a, b]
                else:
                    zero += post[k, a, b]
            out.append(math.log(one / zero))
    return np.array(out)


def dense_circulant_from_column(col):
    n = len(col)
    return np.array([[col[(p - q) % n] for q in range(n)] for p in range(n)])


# -- GF(2) on Python integers ------------------------------------------------

def rows_as_ints(H):
    """Each row of a 0/1 matrix as an integer bitmask (column j -> bit j)."""
    H = np.asarray(H)
    return [sum(1 << int(j) for j in np.flatnonzero(row)) for row in H]


def gf2_rank(H):
    rows = rows_as_ints(H)
    rank = 0
    for bit in range(np.asarray(H).shape[1]):
        pivot = next((r for r in rows if r >> bit & 1), None)
        if pivot is None:
            continue
        rows.remove(pivot)
        rows = [r ^ pivot if r >> bit & 1 else r for r in rows]
        rank += 1
    return rank


def gf2_syndrome(H, word):
    w = sum(1 << j for j, b in enumerate(word) if b)
    return [bin(r & w).count("1") % 2 for r in rows_as_ints(H)]


def brute_four_cycle(H):
    """Any two columns sharing two or more rows."""
    cols = [set(np.flatnonzero(c)) for c in np.asarray(H).T]
    return any(len(a & b) >= 2 for a, b in itertools.combinations(cols, 2))


def circular_convolution(x, h, n):
    return np.array([sum(h[l] * x[(t - l) % n] for l in range(len(h))) for t in range(n)])


def central_difference(f, x, step=1e-6):
    return (f(x + step) - f(x - step)) / (2 * step)
