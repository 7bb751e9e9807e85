"""Loop kernels compiled with numba; same contracts as ``_numpy``.

Every kernel walks the state as ``(outer, dim, inner)`` blocks with the
contiguous ``inner`` run innermost, so no index arithmetic uses division.
Dense gates are contracted with BLAS, which loops cannot beat at these sizes.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def apply_dense(psi, u, dim, site):
    # the contraction itself goes to BLAS through np.dot on contiguous views
    inner = dim**site
    block = dim * inner
    outer = psi.size // block
    if inner == 1:
        return np.dot(psi.reshape((outer, dim)), np.ascontiguousarray(u.T)).reshape(psi.size)
    if outer == 1:
        return np.dot(u, psi.reshape((dim, inner))).reshape(psi.size)
    out = np.empty_like(psi)
    for a in range(outer):
        seg = psi[a * block:(a + 1) * block].reshape((dim, inner))
        out[a * block:(a + 1) * block] = np.dot(u, seg).reshape(block)
    return out


@njit(cache=True, fastmath=True)
def apply_diag(psi, phases, dim, site):
    inner = dim**site
    block = dim * inner
    out = np.empty_like(psi)
    for a in range(psi.size // block):
        for i in range(dim):
            ph = phases[i]
            o = a * block + i * inner
            for b in range(inner):
                out[o + b] = psi[o + b] * ph
    return out


@njit(cache=True, fastmath=True)
def apply_pair_diag(psi, table, dim, site_j, site_k):
    lo = min(site_j, site_k)
    hi = max(site_j, site_k)
    n_lo = dim**lo
    n_mid = dim ** (hi - lo - 1)
    n_hi_block = dim**hi * dim
    out = np.empty_like(psi)
    for a in range(psi.size // n_hi_block):
        for h in range(dim):
            for m in range(n_mid):
                for l in range(dim):
                    ph = table[h, l] if site_j == hi else table[l, h]
                    o = ((a * dim + h) * n_mid + m) * dim * n_lo + l * n_lo
                    for b in range(n_lo):
                        out[o + b] = psi[o + b] * ph
    return out


@njit(cache=True, fastmath=True)
def marginal(psi, dim, site):
    inner = dim**site
    block = dim * inner
    out = np.zeros(dim)
    for a in range(psi.size // block):
        for i in range(dim):
            o = a * block + i * inner
            acc = 0.0
            for b in range(inner):
                z = psi[o + b]
                acc += z.real * z.real + z.imag * z.imag
            out[i] += acc
    return out


@njit(cache=True)
def apply_all_sites(psi, u, dim, sites):
    for j in range(sites):
        psi = apply_dense(psi, u, dim, j)
    return psi


@njit(cache=True, fastmath=True)
def apply_chain_diag(psi, table, dim, pairs):
    # site 0 is the contiguous inner run; the digits of sites >= 1 advance
    # like an odometer once per run
    sites = 0
    n = 1
    while n < psi.size:
        n *= dim
        sites += 1
    digits = np.zeros(max(sites, 1), dtype=np.int64)
    row = np.empty(dim, dtype=psi.dtype)
    out = np.empty_like(psi)
    for q in range(psi.size // dim):
        base = 1.0 + 0j
        for i in range(dim):
            row[i] = 1.0
        for p in range(pairs.shape[0]):
            j = pairs[p, 0]
            k = pairs[p, 1]
            if j == 0:
                for i in range(dim):
                    row[i] *= table[i, digits[k]]
            elif k == 0:
                for i in range(dim):
                    row[i] *= table[digits[j], i]
            else:
                base *= table[digits[j], digits[k]]
        o = q * dim
        for i in range(dim):
            out[o + i] = psi[o + i] * (base * row[i])
        s = 1
        while s < sites:
            digits[s] += 1
            if digits[s] < dim:
                break
            digits[s] = 0
            s += 1
    return out
