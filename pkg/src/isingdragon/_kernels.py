"""Numba kernels for the sampler hot path and exhaustive enumeration.

All kernels work on a CSR adjacency (indptr, indices, data) of the symmetric
coupling matrix. Spins are int8 arrays of +1/-1.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def local_fields(indptr, indices, data, biases, s):
    n = s.shape[0]
    f = biases.copy()
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * s[indices[k]]
        f[i] += acc
    return f


@njit(cache=True)
def full_energy(indptr, indices, data, biases, s):
    n = s.shape[0]
    e = 0.0
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j > i:
                acc += data[k] * s[j]
        e += s[i] * (acc + biases[i])
    return e


@njit(cache=True, nogil=True)
def metropolis_anneal(indptr, indices, data, biases, free_idx, init, betas,
                      sweeps_per_beta, restarts, randomize_init, seed):
    """Single-spin-flip Metropolis over a beta schedule, tracking the best state.

    Energies are updated incrementally with the flip delta -2 s_i f_i. Each
    restart begins at ``init`` (or a random draw of the free spins when
    ``randomize_init``). Returns (best, best_energy, last, last_energy).
    """
    np.random.seed(seed)
    n = init.shape[0]
    nfree = free_idx.shape[0]
    best = init.copy()
    best_e = np.inf
    s = init.copy()
    e = 0.0
    for r in range(restarts):
        for q in range(n):
            s[q] = init[q]
        if randomize_init:
            for q in range(nfree):
                s[free_idx[q]] = 1 if np.random.random() < 0.5 else -1
        f = local_fields(indptr, indices, data, biases, s)
        e = full_energy(indptr, indices, data, biases, s)
        if e < best_e:
            best_e = e
            for q in range(n):
                best[q] = s[q]
        for t in range(betas.shape[0]):
            beta = betas[t]
            for _ in range(sweeps_per_beta):
                for q in range(nfree):
                    i = free_idx[q]
                    de = -2.0 * s[i] * f[i]
                    if de <= 0.0 or np.random.random() < np.exp(-beta * de):
                        s[i] = -s[i]
                        e += de
                        two_s = 2.0 * s[i]
                        for k in range(indptr[i], indptr[i + 1]):
                            f[indices[k]] += two_s * data[k]
                        if e < best_e:
                            best_e = e
                            for p in range(n):
                                best[p] = s[p]
    return best, best_e, s, e


@njit(cache=True)
def random_flip_walk(indptr, indices, data, biases, init, n_flips, seed):
    """Flip uniformly random spins, tracking energy incrementally."""
    np.random.seed(seed)
    n = init.shape[0]
    s = init.copy()
    f = local_fields(indptr, indices, data, biases, s)
    e = full_energy(indptr, indices, data, biases, s)
    for _ in range(n_flips):
        i = np.random.randint(0, n)
        e += -2.0 * s[i] * f[i]
        s[i] = -s[i]
        two_s = 2.0 * s[i]
        for k in range(indptr[i], indptr[i + 1]):
            f[indices[k]] += two_s * data[k]
    return s, e


@njit(cache=True)
def _ctz(t):
    b = 0
    while (t & 1) == 0:
        t >>= 1
        b += 1
    return b


@njit(cache=True)
def enumerate_energies(indptr, indices, data, biases):
    """Energies of all 2^n states, indexed lexicographically.

    Index bit (n-1-p) holds position p, bit value 1 meaning spin +1, so
    integer order equals lexicographic order with -1 < +1.
    """
    n = biases.shape[0]
    total = 1 << n
    out = np.empty(total, dtype=np.float64)
    s = -np.ones(n, dtype=np.int8)
    f = local_fields(indptr, indices, data, biases, s)
    e = full_energy(indptr, indices, data, biases, s)
    idx = 0
    out[0] = e
    for t in range(1, total):
        bit = _ctz(t)
        p = n - 1 - bit
        e += -2.0 * s[p] * f[p]
        s[p] = -s[p]
        two_s = 2.0 * s[p]
        for k in range(indptr[p], indptr[p + 1]):
            f[indices[k]] += two_s * data[k]
        idx ^= 1 << bit
        out[idx] = e
    return out


@njit(cache=True)
def enumerate_ground(indptr, indices, data, biases, tol):
    """Lowest energy over all 2^n states with lexicographic tie-break."""
    n = biases.shape[0]
    total = 1 << n
    s = -np.ones(n, dtype=np.int8)
    f = local_fields(indptr, indices, data, biases, s)
    e = full_energy(indptr, indices, data, biases, s)
    idx = 0
    best_e = e
    best_idx = 0
    for t in range(1, total):
        bit = _ctz(t)
        p = n - 1 - bit
        e += -2.0 * s[p] * f[p]
        s[p] = -s[p]
        two_s = 2.0 * s[p]
        for k in range(indptr[p], indptr[p + 1]):
            f[indices[k]] += two_s * data[k]
        idx ^= 1 << bit
        if e < best_e - tol or (e <= best_e + tol and idx < best_idx):
            best_e = e
            best_idx = idx
    return best_idx, best_e


@njit(cache=True)
def conditional_energies(a_bias, coupling_ab, b_bias):
    """Best completion energy for every assignment of side A.

    ``coupling_ab`` is the dense (|A|, |B|) coupling block; there are no
    couplings inside A or inside B. For each lexicographically indexed A
    assignment the B spins are set to -sign(field), giving the energy
    sum_a b_a s_a - sum_b |g_b|.
    """
    na = a_bias.shape[0]
    nb = b_bias.shape[0]
    total = 1 << na
    out = np.empty(total, dtype=np.float64)
    s = -np.ones(na, dtype=np.int8)
    g = b_bias.copy()
    ea = 0.0
    for a in range(na):
        ea -= a_bias[a]
        for b in range(nb):
            g[b] -= coupling_ab[a, b]
    acc = 0.0
    for b in range(nb):
        acc -= abs(g[b])
    out[0] = ea + acc
    idx = 0
    for t in range(1, total):
        bit = _ctz(t)
        p = na - 1 - bit
        s[p] = -s[p]
        ea += 2.0 * s[p] * a_bias[p]
        two_s = 2.0 * s[p]
        acc = 0.0
        for b in range(nb):
            g[b] += two_s * coupling_ab[p, b]
            acc -= abs(g[b])
        idx ^= 1 << bit
        out[idx] = ea + acc
    return out
