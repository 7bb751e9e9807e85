"""Reference kernels: reshape the flat state so the addressed site is an axis.

Basis index convention: ``index = sum_s n_s * dim**s`` (site 0 fastest).
"""
from __future__ import annotations

import numpy as np


def _site_view(psi, dim, site):
    return psi.reshape(-1, dim, dim**site)


def apply_dense(psi, u, dim, site):
    return np.matmul(u, _site_view(psi, dim, site)).reshape(-1)


def apply_diag(psi, phases, dim, site):
    return (_site_view(psi, dim, site) * phases[None, :, None]).reshape(-1)


def apply_pair_diag(psi, table, dim, site_j, site_k):
    lo, hi = sorted((site_j, site_k))
    # table is indexed [n_j, n_k]; the view below wants [n_hi, n_lo]
    t = table if site_j == hi else table.T
    v = psi.reshape(-1, dim, dim ** (hi - lo - 1), dim, dim**lo)
    return (v * t[None, :, None, :, None]).reshape(-1)


def marginal(psi, dim, site):
    v = _site_view(psi, dim, site)
    return np.einsum("aib,aib->i", v.conj(), v).real


def apply_all_sites(psi, u, dim, sites):
    for j in range(sites):
        psi = apply_dense(psi, u, dim, j)
    return psi


def apply_chain_diag(psi, table, dim, pairs):
    for j, k in pairs:
        psi = apply_pair_diag(psi, table, dim, int(j), int(k))
    return psi
