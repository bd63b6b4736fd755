"""Independent reference implementations used only by the tests."""

import itertools

import numpy as np


def dense_h_by_index(inst):
    """H built entry by entry from basis-state bit arithmetic (no reshapes,
    no kron), qubit 0 most significant."""
    n, k = inst.n, inst.k
    dim = 2**n
    h = np.zeros((dim, dim), dtype=np.complex128)
    for e, frame in zip(inst.edges, inst.phis):
        p = frame.T @ frame.conj()  # (2^k, 2^k)
        for x in range(dim):
            loc_x = 0
            for q in e:
                loc_x = (loc_x << 1) | ((x >> (n - 1 - q)) & 1)
            base = x
            for q in e:
                base &= ~(1 << (n - 1 - q))
            for loc_y in range(2**k):
                y = base
                for j, q in enumerate(e):
                    if (loc_y >> (k - 1 - j)) & 1:
                        y |= 1 << (n - 1 - q)
                h[y, x] += p[loc_y, loc_x]
    return h


def dense_kernel_dim(inst, tol=1e-9):
    w = np.linalg.eigvalsh(dense_h_by_index(inst))
    return int(np.sum(w < tol)), float(w[0])


def brute_force_sat_count(n, edges, clauses):
    count = 0
    for bits in itertools.product((0, 1), repeat=n):
        if all("".join(str(bits[q]) for q in e) != c for e, c in zip(edges, clauses)):
            count += 1
    return count
