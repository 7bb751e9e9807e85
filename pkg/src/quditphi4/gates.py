"""Closed-form gate constructors for the qudit phi^4 Trotter circuit.

Field-dependent diagonals take a ``center`` level index. ``None`` means
``N/2``, the form in which the SNAP factorizations are usually written.
The simulator passes ``QuditSpec.grid_center`` (``(N-1)/2``) so that the
gates, the field grid and the exact reference all describe the same
Hamiltonian. Any center gives a valid SNAP factorization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import comb

from .state import DenseGate, DiagonalGate

__all__ = [
    "SnapDecomposition",
    "centered_dft",
    "coupling_phase_fn",
    "coupling_phase_table",
    "displacement",
    "displacement_eigh",
    "dressed_kinetic",
    "embed_logical",
    "fourier",
    "kinetic_diagonal",
    "kinetic_step",
    "snap",
    "snap_phases",
    "truncated_ladder",
    "v_phi2_diag",
    "v_phi2_snap",
    "v_phi4_diag",
    "v_phi4_snap",
]


def _center(n_logical: int, center: float | None) -> float:
    return n_logical / 2 if center is None else float(center)


def snap_phases(n_logical: int, r: int, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n_logical,):
        raise ValueError(f"theta must have length {n_logical}, got shape {theta.shape}")
    if r < 0:
        raise ValueError("SNAP exponent must be non-negative")
    # 0**0 == 1 in numpy, so r=0 gives plain per-level phases
    powers = np.arange(n_logical, dtype=float) ** r
    return np.exp(1j * theta * powers)


def snap(n_logical: int, r: int, theta) -> DiagonalGate:
    """SNAP gate with entries ``exp(i * theta_n * n**r)``."""
    return DiagonalGate(snap_phases(n_logical, r, theta))


def truncated_ladder(dim: int) -> np.ndarray:
    """Annihilation operator truncated to ``dim`` Fock levels."""
    if dim < 1:
        raise ValueError("ladder dimension must be positive")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def displacement_eigh(dim: int, alpha: complex):
    """Eigenpairs of the Hermitian generator ``i(alpha a - alpha* a^dag)``.

    ``D(alpha) = V @ diag(exp(-1j * w)) @ V^dag`` for the returned ``(w, V)``.
    """
    a = truncated_ladder(dim)
    gen = alpha * a - np.conj(alpha) * a.conj().T
    w, v = np.linalg.eigh(1j * gen)
    return w, v


def displacement(dim: int, alpha: complex) -> DenseGate:
    """Truncated displacement ``exp(alpha a - alpha* a^dag)``."""
    if alpha == 0:
        return DenseGate(np.eye(dim, dtype=complex))
    w, v = displacement_eigh(dim, alpha)
    return DenseGate((v * np.exp(-1j * w)) @ v.conj().T)


def centered_dft(n_logical: int, center: float | None = None) -> np.ndarray:
    """``F[l, m] = exp(2 pi i (l - c)(m - c) / N) / sqrt(N)``."""
    c = _center(n_logical, center)
    k = np.arange(n_logical) - c
    return np.exp(2j * np.pi * np.outer(k, k) / n_logical) / math.sqrt(n_logical)


def fourier(n_logical: int) -> DenseGate:
    """The N x N Fourier gate, centered at ``N/2``."""
    if n_logical < 2:
        raise ValueError("Fourier gate needs N >= 2")
    return DenseGate(centered_dft(n_logical))


def embed_logical(gate, n_bumper: int):
    """Direct sum of ``gate`` with the identity on ``n_bumper`` bumper levels."""
    if isinstance(gate, DiagonalGate):
        return DiagonalGate(np.concatenate([gate.phases, np.ones(n_bumper, dtype=complex)]))
    matrix = gate.matrix if isinstance(gate, DenseGate) else np.asarray(gate, dtype=complex)
    n = matrix.shape[0]
    out = np.eye(n + n_bumper, dtype=complex)
    out[:n, :n] = matrix
    check = gate.check if isinstance(gate, DenseGate) else True
    return DenseGate(out, check=check)


@dataclass(frozen=True)
class SnapDecomposition:
    """Product of uniform-angle SNAP factors ``[(r, theta_vector), ...]``."""

    n_logical: int
    factors: tuple

    def phases(self) -> np.ndarray:
        out = np.ones(self.n_logical, dtype=complex)
        for r, theta in self.factors:
            out = out * snap_phases(self.n_logical, r, theta)
        return out

    def gates(self) -> list[DiagonalGate]:
        return [snap(self.n_logical, r, theta) for r, theta in self.factors]


def _shifted_power_diag(n_logical, coeff, power, center):
    c = _center(n_logical, center)
    return np.exp(-1j * coeff * (np.arange(n_logical) - c) ** power)


def _shifted_power_snap(n_logical, coeff, power, center):
    # -coeff (n - c)^p = sum_r [-coeff C(p, r) (-c)^(p - r)] n^r
    c = _center(n_logical, center)
    factors = []
    for r in range(power, -1, -1):
        angle = -coeff * comb(power, r, exact=True) * (-c) ** (power - r)
        factors.append((r, np.full(n_logical, angle, dtype=float)))
    return SnapDecomposition(n_logical, tuple(factors))


def _omega(mu2, d, delta_phi, dt):
    return 0.5 * (mu2 + 2 * d) * delta_phi**2 * dt


def _lambda(g_s, delta_phi, dt):
    return g_s * delta_phi**4 * dt / 24.0


def v_phi2_diag(n_logical, mu2, d, delta_phi, dt, center=None) -> DiagonalGate:
    """Quadratic-potential step ``exp(-i Omega (n - c)^2)``,
    ``Omega = (mu2 + 2d) delta_phi^2 dt / 2``. Negative ``mu2`` is allowed."""
    return DiagonalGate(
        _shifted_power_diag(n_logical, _omega(mu2, d, delta_phi, dt), 2, center)
    )


def v_phi2_snap(n_logical, mu2, d, delta_phi, dt, center=None) -> SnapDecomposition:
    """Same step as SNAP factors with exponents 2, 1, 0."""
    return _shifted_power_snap(n_logical, _omega(mu2, d, delta_phi, dt), 2, center)


def v_phi4_diag(n_logical, g_s, delta_phi, dt, center=None) -> DiagonalGate:
    """Quartic step ``exp(-i lambda (n - c)^4)``, ``lambda = g_s delta_phi^4 dt / 4!``."""
    return DiagonalGate(_shifted_power_diag(n_logical, _lambda(g_s, delta_phi, dt), 4, center))


def v_phi4_snap(n_logical, g_s, delta_phi, dt, center=None) -> SnapDecomposition:
    """Quartic step as five SNAP factors with exponents 4 down to 0.

    Factor ``r`` carries angle ``-lambda * C(4, r) * (-c)**(4 - r)``; the
    alternating signs come straight from the binomial expansion.
    """
    return _shifted_power_snap(n_logical, _lambda(g_s, delta_phi, dt), 4, center)


def kinetic_diagonal(n_logical, delta_phi, mass, dt, center=None) -> np.ndarray:
    """``exp(-i dt Pi_n^2 / 2)`` on the momentum grid ``Pi_n = (n - c) mass delta_phi``."""
    c = _center(n_logical, center)
    pi_n = (np.arange(n_logical) - c) * mass * delta_phi
    return np.exp(-0.5j * dt * pi_n**2)


def kinetic_step(n_logical, delta_phi, mass, dt, center=None) -> DenseGate:
    """Momentum step ``F diag(exp(-i dt Pi_n^2 / 2)) F^dag`` on the logical block.

    ``F`` is the DFT centered at the same ``center`` as the field grid, so
    its columns are plane waves ``exp(i Pi_l phi_m)`` of that grid.
    """
    f = centered_dft(n_logical, center)
    diag = kinetic_diagonal(n_logical, delta_phi, mass, dt, center)
    return DenseGate((f * diag) @ f.conj().T)


def dressed_kinetic(fourier_full, n_logical, n_bumper, delta_phi, mass, dt, center=None):
    """Momentum step built from a (possibly synthesized) ``N/2``-centered Fourier gate.

    The DFT centered at ``c`` equals ``L F L`` up to a global phase, with
    ``L = diag(exp(2 pi i (N/2 - c)(n - N/2) / N))`` a linear SNAP. The
    global phase cancels in ``F K F^dag``.
    """
    c = _center(n_logical, center)
    shift = n_logical / 2 - c
    dim = n_logical + n_bumper
    lam = np.ones(dim, dtype=complex)
    lam[:n_logical] = np.exp(2j * np.pi * shift * (np.arange(n_logical) - n_logical / 2) / n_logical)
    kin = np.ones(dim, dtype=complex)
    kin[:n_logical] = kinetic_diagonal(n_logical, delta_phi, mass, dt, center)
    f = np.asarray(fourier_full.matrix if isinstance(fourier_full, DenseGate) else fourier_full)
    if f.shape != (dim, dim):
        raise ValueError(f"Fourier gate must be {dim}x{dim}")
    core = (f * kin) @ f.conj().T
    return DenseGate(lam[:, None] * core * lam.conj()[None, :], check=False)


def coupling_phase_fn(n_logical, f_s, delta_phi, dt, center=None) -> Callable[[int, int], complex]:
    """Two-site phase ``exp(-i f_s delta_phi^2 (n_j - c)(n_k - c) dt)``.

    Bumper levels (``n >= N``) get phase 1.
    """
    c = _center(n_logical, center)
    scale = f_s * delta_phi**2 * dt

    def phase(n_j: int, n_k: int) -> complex:
        if n_j >= n_logical or n_k >= n_logical:
            return 1.0 + 0j
        return complex(np.exp(-1j * scale * (n_j - c) * (n_k - c)))

    return phase


def coupling_phase_table(n_logical, n_bumper, f_s, delta_phi, dt, center=None) -> np.ndarray:
    """Vectorized ``coupling_phase_fn`` over all ``(n_j, n_k)`` pairs."""
    c = _center(n_logical, center)
    x = np.zeros(n_logical + n_bumper)
    x[:n_logical] = np.arange(n_logical) - c
    return np.exp(-1j * f_s * delta_phi**2 * dt * np.outer(x, x))
