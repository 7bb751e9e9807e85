"""Exact dense-matrix reference for the discretized phi^4 model.

Everything here is built directly from operator definitions (field grid,
DFT-conjugated momentum, Kronecker products) and diagonalized with LAPACK.
It shares no code path with the Trotter circuit beyond the DFT matrix and
is meant for desk-scale checks only.

Operators live on the full ``total_dim`` site space with zero rows and
columns on bumper levels, so their propagators act as the identity there.
"""
from __future__ import annotations

import math
from functools import reduce

import numpy as np

from .gates import centered_dft
from .model import ModelParams
from .state import DenseGate, QuditSpec, StateVector

__all__ = [
    "DEFAULT_DENSE_CAP",
    "OracleSizeError",
    "build_lattice_h",
    "build_local_h",
    "build_phi_op",
    "build_pi_op",
    "exact_evolve",
    "exact_propagator_step",
    "ground_state",
    "hermite_functions",
    "ho_eigenfunction",
    "logical_indices",
    "site_operator",
    "target_gaussian_state",
]

DEFAULT_DENSE_CAP = 4096
HERMITIAN_TOL = 1e-12


class OracleSizeError(ValueError):
    """The requested dense matrix exceeds the configured size cap."""


def hermite_functions(nu_max: int, x) -> np.ndarray:
    """Normalized Hermite functions ``phi_0 .. phi_nu_max`` at ``x``.

    Upward recurrence on the normalized functions themselves,
    ``phi_n = sqrt(2/n) x phi_{n-1} - sqrt((n-1)/n) phi_{n-2}``,
    never forms ``H_n`` or ``2^n n!`` and so stays finite for large ``n``.
    """
    if nu_max < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.empty((nu_max + 1,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x**2)
    if nu_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(2, nu_max + 1):
        out[n] = math.sqrt(2.0 / n) * x * out[n - 1] - math.sqrt((n - 1) / n) * out[n - 2]
    return out


def ho_eigenfunction(nu: int, x):
    """Scaled harmonic-oscillator eigenfunction ``phi_nu(x)``."""
    vals = hermite_functions(nu, x)[nu]
    return float(vals) if np.ndim(vals) == 0 else vals


def target_gaussian_state(spec: QuditSpec) -> StateVector:
    """Discretized oscillator ground state on the logical levels, bumpers empty."""
    x = spec.field_grid() * math.sqrt(spec.mass)
    amps = np.zeros(spec.total_dim, dtype=complex)
    amps[: spec.n_logical] = ho_eigenfunction(0, x)
    amps /= np.linalg.norm(amps)
    return StateVector(spec, 1, amps)


def _embed_block(block: np.ndarray, spec: QuditSpec) -> np.ndarray:
    out = np.zeros((spec.total_dim, spec.total_dim), dtype=complex)
    out[: spec.n_logical, : spec.n_logical] = block
    return out


def build_phi_op(spec: QuditSpec) -> np.ndarray:
    return _embed_block(np.diag(spec.field_grid()).astype(complex), spec)


def build_pi_op(spec: QuditSpec) -> np.ndarray:
    """``mass * F phi F^dag`` with ``F`` centered on the field grid."""
    f = centered_dft(spec.n_logical, spec.grid_center)
    block = spec.mass * (f * spec.field_grid()) @ f.conj().T
    return _embed_block(block, spec)


def _hermitize(h: np.ndarray) -> np.ndarray:
    err = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if err > HERMITIAN_TOL * scale:
        raise ArithmeticError(f"operator not Hermitian (deviation {err:.2e})")
    return 0.5 * (h + h.conj().T)


def build_local_h(spec: QuditSpec, params: ModelParams, g_value: float | None = None):
    """Single-site ``Pi^2/2 + (mu2+2d) phi^2/2 + g phi^4/4!``."""
    g = params.g if g_value is None else g_value
    phi = build_phi_op(spec)
    pi = build_pi_op(spec)
    phi2 = phi @ phi
    h = 0.5 * pi @ pi + 0.5 * params.harmonic_coeff * phi2 + (g / 24.0) * phi2 @ phi2
    return _hermitize(h)


def site_operator(op: np.ndarray, site: int, sites: int) -> np.ndarray:
    """Embed a single-site operator; site 0 is the fastest tensor index."""
    eye = np.eye(op.shape[0], dtype=complex)
    factors = [op if s == site else eye for s in range(sites - 1, -1, -1)]
    return reduce(np.kron, factors)


def _pairs(sites: int, periodic: bool):
    pairs = [(j, j + 1) for j in range(sites - 1)]
    if periodic and sites > 2:
        pairs.append((sites - 1, 0))
    return pairs


def build_lattice_h(
    spec: QuditSpec,
    params: ModelParams,
    *,
    g_value: float | None = None,
    f_value: float | None = None,
    periodic: bool = False,
    cap: int = DEFAULT_DENSE_CAP,
) -> np.ndarray:
    """``sum_j h_local(j) - f sum_j phi_j phi_{j+1}`` on an open (or periodic) chain."""
    sites = params.sites
    dim = spec.total_dim**sites
    if dim > cap:
        raise OracleSizeError(f"dense lattice Hamiltonian would have {dim} rows (cap {cap})")
    f = params.f if f_value is None else f_value
    local = build_local_h(spec, params, g_value)
    phi = build_phi_op(spec)
    h = sum(site_operator(local, j, sites) for j in range(sites))
    if f != 0:
        for j, k in _pairs(sites, periodic):
            h = h - f * site_operator(phi, j, sites) @ site_operator(phi, k, sites)
    return _hermitize(np.asarray(h, dtype=complex))


def logical_indices(spec: QuditSpec, sites: int) -> np.ndarray:
    """Flat indices whose every site occupation is a logical level."""
    idx = np.arange(spec.total_dim**sites)
    keep = np.ones(idx.size, dtype=bool)
    for s in range(sites):
        keep &= (idx // spec.total_dim**s) % spec.total_dim < spec.n_logical
    return idx[keep]


def ground_state(h: np.ndarray, spec: QuditSpec, sites: int = 1, n_levels: int = 1):
    """Lowest eigenpairs of ``h`` restricted to the logical subspace.

    Returns ``(energies, states)``; the states are embedded back into the
    full space. ``n_levels == 1`` returns a scalar energy and one state.
    """
    keep = logical_indices(spec, sites)
    block = h[np.ix_(keep, keep)]
    w, v = np.linalg.eigh(block)
    states = []
    for i in range(n_levels):
        amps = np.zeros(h.shape[0], dtype=complex)
        amps[keep] = v[:, i]
        # fix the arbitrary eigenvector phase: largest entry real positive
        j = np.argmax(np.abs(amps))
        amps *= np.abs(amps[j]) / amps[j]
        states.append(StateVector(spec, sites, amps))
    if n_levels == 1:
        return float(w[0]), states[0]
    return w[:n_levels], states


def exact_propagator_step(h: np.ndarray, dt: float) -> DenseGate:
    """``exp(-i h dt)`` by Hermitian eigendecomposition."""
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigendecomposition failed: {exc}") from exc
    return DenseGate((v * np.exp(-1j * w * dt)) @ v.conj().T)


def exact_evolve(state: StateVector, hamiltonians, dt: float) -> StateVector:
    """Apply ``exp(-i H_s dt)`` for each ``H_s`` in order (piecewise-constant ramp)."""
    amps = state.amplitudes.copy()
    for h in hamiltonians:
        amps = exact_propagator_step(h, dt).matrix @ amps
    return StateVector(state.spec, state.sites, amps)
