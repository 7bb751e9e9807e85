"""Dense state vectors over a chain of identical qudits.

A site holds ``n_logical`` field-grid levels followed by ``n_bumper``
bumper levels. Fock level ``n < n_logical`` stores grid point ``n``.
Multi-site amplitudes are flattened with site 0 as the fastest index:
``index = sum_s n_s * total_dim**s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import _kernels

__all__ = [
    "DenseGate",
    "DiagonalGate",
    "Gate",
    "InvalidSpecError",
    "QuditSpec",
    "StateVector",
    "apply_single_site",
    "apply_two_site_diagonal",
    "basis_index",
    "basis_digits",
    "bumper_leakage",
    "field_expectations",
    "marginal_probabilities",
    "new_vacuum",
    "overlap",
    "product_state",
]

UNIT_MODULUS_TOL = 1e-12
UNITARY_TOL = 1e-10


class InvalidSpecError(ValueError):
    """Raised for inconsistent qudit layouts or site addressing."""


@dataclass(frozen=True)
class QuditSpec:
    """Single-site layout shared by every lattice site.

    ``delta_phi`` defaults to ``sqrt(2*pi / (n_logical * mass))``.
    """

    n_logical: int
    n_bumper: int = 0
    mass: float = 1.0
    delta_phi: float | None = None

    def __post_init__(self):
        if int(self.n_logical) != self.n_logical or self.n_logical < 1:
            raise InvalidSpecError(f"n_logical must be a positive integer, got {self.n_logical}")
        if int(self.n_bumper) != self.n_bumper or self.n_bumper < 0:
            raise InvalidSpecError(f"n_bumper must be a non-negative integer, got {self.n_bumper}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise InvalidSpecError(f"mass must be positive and finite, got {self.mass}")
        if self.delta_phi is None:
            object.__setattr__(
                self, "delta_phi", math.sqrt(2 * math.pi / (self.n_logical * self.mass))
            )
        elif not (self.delta_phi > 0 and math.isfinite(self.delta_phi)):
            raise InvalidSpecError(f"delta_phi must be positive, got {self.delta_phi}")

    @property
    def total_dim(self) -> int:
        return self.n_logical + self.n_bumper

    @property
    def grid_center(self) -> float:
        """Fractional level index of field value zero, ``(N - 1) / 2``."""
        return (self.n_logical - 1) / 2

    @property
    def delta_pi(self) -> float:
        """Conjugate-momentum grid spacing ``2*pi / (N * delta_phi)``."""
        return 2 * math.pi / (self.n_logical * self.delta_phi)

    def field_grid(self) -> np.ndarray:
        """Field eigenvalue for each logical level."""
        return (np.arange(self.n_logical) - self.grid_center) * self.delta_phi


@dataclass(frozen=True, eq=False)
class DiagonalGate:
    phases: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=complex)
        if phases.ndim != 1:
            raise ValueError("diagonal gate phases must be a vector")
        if phases.size and np.max(np.abs(np.abs(phases) - 1.0)) > UNIT_MODULUS_TOL:
            raise ValueError("diagonal gate entries must have unit modulus")
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    @property
    def dim(self) -> int:
        return self.phases.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.phases)

    def dagger(self) -> DiagonalGate:
        return DiagonalGate(self.phases.conj())


@dataclass(frozen=True, eq=False)
class DenseGate:
    """Dense single-site operator.

    Exact factories construct with ``check=True``; synthesized
    approximations pass ``check=False`` and report their own fidelity.
    """

    matrix: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"dense gate must be square, got shape {m.shape}")
        if self.check:
            err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
            if err > UNITARY_TOL:
                raise ValueError(f"dense gate is not unitary (max deviation {err:.2e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> DenseGate:
        return DenseGate(self.matrix.conj().T, check=False)


Gate = Union[DiagonalGate, DenseGate]


@dataclass(eq=False)
class StateVector:
    spec: QuditSpec
    sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if int(self.sites) != self.sites or self.sites < 1:
            raise InvalidSpecError(f"sites must be a positive integer, got {self.sites}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.spec.total_dim**self.sites:
            raise ValueError(
                f"expected {self.spec.total_dim ** self.sites} amplitudes, got {amps.size}"
            )
        self.amplitudes = amps

    @property
    def dim(self) -> int:
        return self.spec.total_dim

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> StateVector:
        return StateVector(self.spec, self.sites, self.amplitudes.copy())

    def _check_site(self, site: int) -> None:
        if not 0 <= site < self.sites:
            raise IndexError(f"site {site} out of range for {self.sites} sites")


def basis_index(digits, dim: int) -> int:
    """Flat index of the basis state with occupation ``digits[s]`` on site ``s``."""
    return int(sum(int(n) * dim**s for s, n in enumerate(digits)))


def basis_digits(index: int, dim: int, sites: int) -> tuple[int, ...]:
    return tuple((index // dim**s) % dim for s in range(sites))


def new_vacuum(spec: QuditSpec, sites: int = 1) -> StateVector:
    if int(sites) != sites or sites < 1 or spec.total_dim < 1:
        raise InvalidSpecError(f"cannot build vacuum on {sites} sites")
    amps = np.zeros(spec.total_dim**sites, dtype=complex)
    amps[0] = 1.0
    return StateVector(spec, sites, amps)


def product_state(spec: QuditSpec, site_vectors) -> StateVector:
    """Tensor product; ``site_vectors[s]`` lands on site ``s``."""
    vecs = [np.asarray(v, dtype=complex) for v in site_vectors]
    amps = np.ones(1, dtype=complex)
    for v in vecs:
        if v.shape != (spec.total_dim,):
            raise ValueError(f"site vector must have length {spec.total_dim}")
        # later sites vary slowest
        amps = np.kron(v, amps)
    return StateVector(spec, len(vecs), amps)


def _gate_dim_check(state: StateVector, dim: int) -> None:
    if dim != state.dim:
        raise ValueError(f"gate acts on dimension {dim}, site dimension is {state.dim}")


def apply_single_site(state: StateVector, gate: Gate, site: int) -> StateVector:
    """Return ``(1 x ... x gate_site x ... x 1) |state>`` as a new state."""
    state._check_site(site)
    _gate_dim_check(state, gate.dim)
    if isinstance(gate, DiagonalGate):
        amps = _kernels.apply_diag(state.amplitudes, gate.phases, state.dim, site)
    else:
        amps = _kernels.apply_dense(state.amplitudes, gate.matrix, state.dim, site)
    return StateVector(state.spec, state.sites, amps)


def apply_two_site_diagonal(
    state: StateVector,
    phase_fn: Callable[[int, int], complex] | np.ndarray,
    site_j: int,
    site_k: int,
) -> StateVector:
    """Multiply each amplitude by ``phase_fn(n_j, n_k)``.

    ``phase_fn`` may also be a precomputed ``(dim, dim)`` table indexed
    ``[n_j, n_k]``.
    """
    state._check_site(site_j)
    state._check_site(site_k)
    if site_j == site_k:
        raise InvalidSpecError("two-site gate needs two distinct sites")
    dim = state.dim
    if callable(phase_fn):
        table = np.array(
            [[phase_fn(a, b) for b in range(dim)] for a in range(dim)], dtype=complex
        )
    else:
        table = np.asarray(phase_fn, dtype=complex)
        if table.shape != (dim, dim):
            raise ValueError(f"phase table must be {dim}x{dim}")
    amps = _kernels.apply_pair_diag(state.amplitudes, table, dim, site_j, site_k)
    return StateVector(state.spec, state.sites, amps)


def marginal_probabilities(state: StateVector, site: int) -> np.ndarray:
    state._check_site(site)
    return np.asarray(_kernels.marginal(state.amplitudes, state.dim, site))


def bumper_leakage(state: StateVector, site: int) -> float:
    """Population of the bumper levels on ``site``; 0 when there are none."""
    probs = marginal_probabilities(state, site)
    if state.spec.n_bumper == 0:
        return 0.0
    return float(np.sum(probs[state.spec.n_logical :]))


def field_expectations(state: StateVector, site: int, spec: QuditSpec | None = None):
    """``(<phi>, <phi^2>)`` on one site, summed over logical levels only."""
    spec = spec or state.spec
    probs = marginal_probabilities(state, site)[: spec.n_logical]
    grid = spec.field_grid()
    return float(probs @ grid), float(probs @ grid**2)


def overlap(a: StateVector, b: StateVector) -> complex:
    """Inner product ``<a|b>``."""
    if a.amplitudes.shape != b.amplitudes.shape or a.dim != b.dim:
        raise ValueError("states have different shapes")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
