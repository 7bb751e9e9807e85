"""First-order Trotterized adiabatic evolution of the qudit phi^4 lattice.

One Trotter step applies, on every site, the quartic SNAP diagonal, the
quadratic SNAP diagonal and the momentum step ``F K F^dag``; the
nearest-neighbour coupling phases follow once all site-local gates are
done. Ramped couplings use step index ``s = 1..K``, so the last step runs
at the final coupling value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .gates import (
    coupling_phase_fn,
    coupling_phase_table,
    dressed_kinetic,
    embed_logical,
    kinetic_step,
    v_phi2_diag,
    v_phi4_diag,
)
from .model import ModelParams, Schedule
from .oracle import target_gaussian_state
from .state import (
    DenseGate,
    QuditSpec,
    StateVector,
    apply_single_site,
    apply_two_site_diagonal,
    bumper_leakage,
    field_expectations,
    marginal_probabilities,
    product_state,
)

__all__ = [
    "IntegrityError",
    "ModelParams",
    "Schedule",
    "TrajectoryRecord",
    "evolve_fixed",
    "prepare_and_evolve_lattice",
    "prepare_ground_state_single",
    "ramp_linear",
    "record_state",
    "trotter_step_coupling",
    "trotter_step_site",
]

NORM_DRIFT_LIMIT = 1e-6


class IntegrityError(RuntimeError):
    """The state norm drifted beyond what unitary evolution allows."""


@dataclass
class TrajectoryRecord:
    step: int
    time: float
    marginals: np.ndarray  # (sites, total_dim)
    phi_mean: np.ndarray
    phi_sq: np.ndarray
    leakage: np.ndarray
    norm: float
    meta: dict = field(default_factory=dict)


def ramp_linear(final: float, s: int, steps: int) -> float:
    """Coupling at step ``s`` of a linear ramp from 0 to ``final`` over ``steps``."""
    if not 0 <= s <= steps:
        raise ValueError(f"ramp index {s} outside [0, {steps}]")
    if steps == 0:
        return final
    return final * s / steps


def record_state(state: StateVector, step: int, time: float) -> TrajectoryRecord:
    n = state.sites
    marg = np.array([marginal_probabilities(state, j) for j in range(n)])
    fe = [field_expectations(state, j) for j in range(n)]
    return TrajectoryRecord(
        step=step,
        time=time,
        marginals=marg,
        phi_mean=np.array([v[0] for v in fe]),
        phi_sq=np.array([v[1] for v in fe]),
        leakage=np.array([bumper_leakage(state, j) for j in range(n)]),
        norm=state.norm(),
    )


def _coupling_strength(f_s: float) -> float:
    # the lattice term is -f phi_j phi_{j+1}; the phase helpers take the
    # coefficient of +phi_j phi_k
    return -f_s


def trotter_step_site(
    state: StateVector,
    site: int,
    g_s: float,
    params: ModelParams,
    spec: QuditSpec,
    dt: float,
    kinetic: DenseGate | None = None,
) -> StateVector:
    """One local Trotter step on ``site``: quartic, quadratic, then momentum."""
    c = spec.grid_center
    n, m = spec.n_logical, spec.n_bumper
    state = apply_single_site(
        state, embed_logical(v_phi4_diag(n, g_s, spec.delta_phi, dt, c), m), site
    )
    state = apply_single_site(
        state,
        embed_logical(v_phi2_diag(n, params.mu2, params.d, spec.delta_phi, dt, c), m),
        site,
    )
    if kinetic is None:
        kinetic = embed_logical(kinetic_step(n, spec.delta_phi, spec.mass, dt, c), m)
    return apply_single_site(state, kinetic, site)


def _pairs(sites: int, periodic: bool):
    pairs = [(j, j + 1) for j in range(sites - 1)]
    if periodic and sites > 2:
        pairs.append((sites - 1, 0))
    return pairs


def trotter_step_coupling(
    state: StateVector,
    f_s: float,
    params: ModelParams,
    spec: QuditSpec,
    dt: float,
    periodic: bool = False,
) -> StateVector:
    """Coupling phases on every nearest-neighbour pair."""
    fn = coupling_phase_fn(
        spec.n_logical, _coupling_strength(f_s), spec.delta_phi, dt, spec.grid_center
    )
    for j, k in _pairs(state.sites, periodic):
        state = apply_two_site_diagonal(state, fn, j, k)
    return state


class _Stepper:
    """Precomputed gate pieces for fast repeated Trotter steps."""

    def __init__(self, spec, params, dt, kinetic=None, fourier_gate=None, periodic=False):
        n, m = spec.n_logical, spec.n_bumper
        c = spec.grid_center
        self.spec = spec
        self.params = params
        self.dt = dt
        self.dim = spec.total_dim
        self.periodic = periodic
        self.v2 = embed_logical(
            v_phi2_diag(n, params.mu2, params.d, spec.delta_phi, dt, c), m
        ).phases
        q4 = np.zeros(self.dim)
        q4[:n] = (np.arange(n) - c) ** 4
        self.q4_scale = spec.delta_phi**4 * dt / 24.0
        self.q4 = q4
        if kinetic is not None:
            self.kin = np.ascontiguousarray(kinetic.matrix)
        elif fourier_gate is not None:
            self.kin = np.ascontiguousarray(
                dressed_kinetic(fourier_gate, n, m, spec.delta_phi, spec.mass, dt, c).matrix
            )
        else:
            self.kin = np.ascontiguousarray(
                embed_logical(kinetic_step(n, spec.delta_phi, spec.mass, dt, c), m).matrix
            )
        self._coupling_cache = (None, None)
        self._pairs = None

    def local_phases(self, g_s):
        return self.v2 * np.exp(-1j * g_s * self.q4_scale * self.q4)

    def coupling_table(self, f_s):
        if self._coupling_cache[0] != f_s:
            spec = self.spec
            table = coupling_phase_table(
                spec.n_logical, spec.n_bumper, _coupling_strength(f_s),
                spec.delta_phi, self.dt, spec.grid_center,
            )
            self._coupling_cache = (f_s, table)
        return self._coupling_cache[1]

    def step(self, psi, sites, g_s, f_s):
        # distinct sites commute, so the per-site diagonal folds into the
        # momentum step: one dense pass per site
        local = self.kin * self.local_phases(g_s)[None, :]
        psi = _kernels.apply_all_sites(psi, local, self.dim, sites)
        if sites > 1 and f_s != 0:
            pairs = self._pair_array(sites)
            psi = _kernels.apply_chain_diag(psi, self.coupling_table(f_s), self.dim, pairs)
        return psi

    def _pair_array(self, sites):
        if self._pairs is None or self._pairs[0] != sites:
            self._pairs = (sites, np.array(_pairs(sites, self.periodic), dtype=np.int64).reshape(-1, 2))
        return self._pairs[1]


def _run(
    state: StateVector,
    stepper: _Stepper,
    steps: int,
    g_at: Callable[[int], float],
    f_at: Callable[[int], float],
    record_stride: int | None,
    trajectory: list,
    step0: int = 0,
    time0: float = 0.0,
    record_first: bool = True,
) -> StateVector:
    psi = state.amplitudes.copy()
    sites = state.sites
    dt = stepper.dt

    def snapshot(s):
        st = StateVector(state.spec, sites, psi)
        rec = record_state(st, step0 + s, time0 + s * dt)
        if abs(rec.norm - 1.0) > NORM_DRIFT_LIMIT:
            raise IntegrityError(
                f"norm drifted to {rec.norm!r} at step {step0 + s}", trajectory + [rec]
            )
        trajectory.append(rec)

    if record_stride and record_first:
        snapshot(0)
    for s in range(1, steps + 1):
        psi = stepper.step(psi, sites, g_at(s), f_at(s))
        if record_stride and (s % record_stride == 0 or s == steps):
            snapshot(s)
    out = StateVector(state.spec, sites, psi)
    drift = abs(out.norm() - 1.0)
    if drift > NORM_DRIFT_LIMIT:
        raise IntegrityError(f"norm drifted by {drift:.3e}", trajectory)
    return out


def _default_init(spec: QuditSpec, sites: int, init) -> StateVector:
    if init is None:
        site_vec = target_gaussian_state(spec).amplitudes
        return product_state(spec, [site_vec] * sites)
    if isinstance(init, StateVector):
        if init.sites == sites:
            return init.copy()
        if init.sites == 1:
            return product_state(spec, [init.amplitudes] * sites)
        raise ValueError(f"initial state has {init.sites} sites, need {sites}")
    vec = np.asarray(init, dtype=complex)
    return product_state(spec, [vec] * sites)


def prepare_ground_state_single(
    spec: QuditSpec,
    params: ModelParams,
    schedule: Schedule,
    init: StateVector | None = None,
    *,
    record_stride: int | None = 100,
    kinetic: DenseGate | None = None,
    fourier_gate: DenseGate | None = None,
):
    """Adiabatically ramp the quartic coupling on one qudit.

    ``g_s = g * s / K`` for steps ``s = 1..K``. Starts from ``init`` (the
    exact discretized Gaussian by default). Returns ``(state, trajectory)``.
    """
    state = _default_init(spec, 1, init)
    stepper = _Stepper(spec, params, schedule.dt, kinetic, fourier_gate)
    traj: list[TrajectoryRecord] = []
    k = schedule.steps
    out = _run(
        state, stepper, k,
        lambda s: ramp_linear(params.g, s, k),
        lambda s: 0.0,
        record_stride, traj,
    )
    return out, traj


def prepare_and_evolve_lattice(
    spec: QuditSpec,
    params: ModelParams,
    schedule: Schedule,
    init=None,
    *,
    ground_schedule: Schedule | None = None,
    simultaneous: bool = False,
    periodic: bool = False,
    record_stride: int | None = 100,
    kinetic: DenseGate | None = None,
    fourier_gate: DenseGate | None = None,
):
    """Lattice run: per-site quartic ramp, then the coupling ramp.

    Sequential mode: phase A ramps ``g`` with ``f = 0`` over
    ``ground_schedule`` (defaults to ``schedule``); phase B keeps ``g`` at
    its final value and ramps ``f`` over ``schedule``. With
    ``simultaneous=True`` both couplings ramp together over ``schedule``.
    ``init`` may be a full state, a single-site state or vector (copied to
    every site), or ``None`` for the exact Gaussian product.
    """
    if params.sites < 2:
        raise ValueError("lattice evolution needs at least two sites")
    state = _default_init(spec, params.sites, init)
    traj: list[TrajectoryRecord] = []
    if simultaneous:
        k = schedule.steps
        stepper = _Stepper(spec, params, schedule.dt, kinetic, fourier_gate, periodic)
        out = _run(
            state, stepper, k,
            lambda s: ramp_linear(params.g, s, k),
            lambda s: ramp_linear(params.f, s, k),
            record_stride, traj,
        )
        return out, traj

    ground_schedule = ground_schedule or schedule
    ka = ground_schedule.steps
    stepper_a = _Stepper(spec, params, ground_schedule.dt, kinetic, fourier_gate, periodic)
    mid = _run(
        state, stepper_a, ka,
        lambda s: ramp_linear(params.g, s, ka),
        lambda s: 0.0,
        record_stride, traj,
    )
    for rec in traj:
        rec.meta["phase"] = "A"
    kb = schedule.steps
    stepper_b = (
        stepper_a
        if ground_schedule.dt == schedule.dt
        else _Stepper(spec, params, schedule.dt, kinetic, fourier_gate, periodic)
    )
    n_a = len(traj)
    out = _run(
        mid, stepper_b, kb,
        lambda s: params.g,
        lambda s: ramp_linear(params.f, s, kb),
        record_stride, traj,
        step0=ka, time0=ground_schedule.total_time, record_first=False,
    )
    for rec in traj[n_a:]:
        rec.meta["phase"] = "B"
    return out, traj


def evolve_fixed(
    state: StateVector,
    spec: QuditSpec,
    params: ModelParams,
    dt: float,
    steps: int,
    *,
    periodic: bool = False,
    kinetic: DenseGate | None = None,
) -> StateVector:
    """``steps`` Trotter steps at constant ``params.g`` and ``params.f``."""
    stepper = _Stepper(spec, params, dt, kinetic, None, periodic)
    return _run(state, stepper, steps, lambda s: params.g, lambda s: params.f, None, [])
