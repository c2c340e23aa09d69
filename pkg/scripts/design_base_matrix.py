"""Search for a 4-cycle-free QC-LDPC base matrix with a dual-diagonal parity part.

Writes the asset format read by ``asyncplnc.ldpc.load_base_matrix``: one row of
circulant shifts per line, -1 for an all-zero block.

    python scripts/design_base_matrix.py --rows 8 --cols 16 --lift 80 --seed 1 out.txt
"""
import argparse
import itertools

import numpy as np


def parity_part(mb):
    p = -np.ones((mb, mb), dtype=int)
    p[0, 0], p[mb // 2, 0], p[mb - 1, 0] = 1, 0, 1
    for j in range(1, mb):
        p[j - 1, j] = 0
        p[j, j] = 0
    return p


def has_4cycle(base, z, col, cols_done):
    rows = np.flatnonzero(base[:, col] >= 0)
    for other in cols_done:
        shared = [r for r in rows if base[r, other] >= 0]
        for r1, r2 in itertools.combinations(shared, 2):
            if (base[r1, col] - base[r1, other] + base[r2, other] - base[r2, col]) % z == 0:
                return True
    return False


def search(mb, nb, z, weight, seed, tries=20000):
    rng = np.random.default_rng(seed)
    kb = nb - mb
    base = -np.ones((mb, nb), dtype=int)
    base[:, kb:] = parity_part(mb)
    done = list(range(kb, nb))
    # within-column check for the parity part is trivially satisfied
    for c in range(kb):
        for _ in range(tries):
            rows = rng.choice(mb, size=weight, replace=False)
            base[:, c] = -1
            base[rows, c] = rng.integers(0, z, size=weight)
            if not has_4cycle(base, z, c, done):
                done.append(c)
                break
        else:
            raise SystemExit(f"no shift assignment found for column {c}")
    return base


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, required=True)
    ap.add_argument("--cols", type=int, required=True)
    ap.add_argument("--lift", type=int, required=True)
    ap.add_argument("--weight", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("out")
    a = ap.parse_args()
    base = search(a.rows, a.cols, a.lift, a.weight, a.seed)
    with open(a.out, "w") as fh:
        fh.write(f"# QC-LDPC base matrix, lift {a.lift}, rate 1/2, seed {a.seed}\n")
        for row in base:
            fh.write(" ".join(str(v) for v in row) + "\n")


if __name__ == "__main__":
    main()
