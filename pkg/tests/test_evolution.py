from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import expm

from quditphi4.evolution import (
    IntegrityError,
    _Stepper,
    evolve_fixed,
    prepare_and_evolve_lattice,
    prepare_ground_state_single,
    ramp_linear,
    trotter_step_coupling,
    trotter_step_site,
)
from quditphi4.gates import coupling_phase_fn, embed_logical, fourier, kinetic_step, v_phi2_diag
from quditphi4.model import ModelParams, Schedule
from quditphi4.oracle import build_lattice_h, build_local_h, ground_state, target_gaussian_state
from quditphi4.state import (
    DenseGate,
    QuditSpec,
    StateVector,
    apply_single_site,
    marginal_probabilities,
    overlap,
    product_state,
)


def fidelity(a, b):
    return abs(overlap(a, b)) ** 2


# ----------------------------------------------------------------- ramp


def test_ramp_examples():
    assert ramp_linear(0.5, 0, 2000) == 0
    assert ramp_linear(0.5, 2000, 2000) == 0.5
    assert ramp_linear(0.5, 1000, 2000) == 0.25
    assert ramp_linear(3.0, 0, 0) == 3.0


@pytest.mark.parametrize("s", [-1, 11])
def test_ramp_rejects_out_of_range(s):
    with pytest.raises(ValueError):
        ramp_linear(1.0, s, 10)


# ------------------------------------------------------------- params


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(mu2=-2.0)
    with pytest.raises(ValueError):
        ModelParams(mu2=1.0, g=-0.1)
    with pytest.raises(ValueError):
        ModelParams(mu2=1.0, d=0)
    with pytest.raises(ValueError):
        ModelParams(mu2=1.0, sites=0)
    with pytest.raises(ValueError):
        ModelParams(mu2=math.inf)
    assert ModelParams(mu2=-1.0).default_mass == 1.0
    assert ModelParams(mu2=1.0, d=2).harmonic_coeff == 5.0


def test_schedule_validation():
    s = Schedule.from_time(2.0, 1e-3)
    assert s.steps == 2000
    assert Schedule.from_steps(4, 0.25).total_time == 1.0
    assert Schedule.from_time(0.0, 1e-3).steps == 0
    with pytest.raises(ValueError):
        Schedule(1.0, 0.3, 3)
    with pytest.raises(ValueError):
        Schedule(1.0, 0.0, 3)
    with pytest.raises(ValueError):
        Schedule(1.0, 1.0, 0)
    with pytest.raises(ValueError):
        Schedule(-1.0, 1.0, 0)


# ----------------------------------------------------------- one step


def test_site_step_with_zero_potential_is_kinetic_only():
    # with g_s = 0 the quartic factor is the identity
    spec = QuditSpec(8, 2, 1.0)
    params = ModelParams(mu2=1.0)
    dt = 0.01
    init = target_gaussian_state(spec)
    got = trotter_step_site(init, 0, 0.0, params, spec, dt)
    want = apply_single_site(
        init, embed_logical(v_phi2_diag(8, params.mu2, params.d, spec.delta_phi, dt, spec.grid_center), 2), 0
    )
    want = apply_single_site(
        want, embed_logical(kinetic_step(8, spec.delta_phi, spec.mass, dt, spec.grid_center), 2), 0
    )
    assert np.allclose(got.amplitudes, want.amplitudes, atol=1e-14)


def test_stepper_matches_reference_steps(rng):
    spec = QuditSpec(6, 2, 1.2)
    params = ModelParams(mu2=0.5, g=1.0, f=0.7, sites=3)
    dt = 0.02
    vecs = [rng.normal(size=8) + 1j * rng.normal(size=8) for _ in range(3)]
    state = product_state(spec, [v / np.linalg.norm(v) for v in vecs])
    want = state
    for j in range(3):
        want = trotter_step_site(want, j, 0.4, params, spec, dt)
    want = trotter_step_coupling(want, 0.3, params, spec, dt)
    stepper = _Stepper(spec, params, dt)
    got = stepper.step(state.amplitudes.copy(), 3, 0.4, 0.3)
    assert np.max(np.abs(got - want.amplitudes)) < 1e-13


def test_one_step_on_harmonic_ground_state():
    spec = QuditSpec(16, 0, math.sqrt(3))
    params = ModelParams(mu2=1.0, g=0.0)
    _, gs = ground_state(build_local_h(spec, params), spec)
    dt = 1e-3
    out = trotter_step_site(gs, 0, 0.0, params, spec, dt)
    assert fidelity(out, gs) > 1 - 10 * dt**2


def test_site_step_preserves_norm_over_2000_steps():
    spec = QuditSpec(16, 4, math.sqrt(3))
    params = ModelParams(mu2=1.0, g=0.5)
    out = evolve_fixed(target_gaussian_state(spec), spec, params, 1e-3, 2000)
    assert abs(out.norm() - 1) < 1e-9


# ------------------------------------------------------------- coupling


def test_coupling_zero_is_identity(rng):
    spec = QuditSpec(4, 1, 1.0)
    params = ModelParams(mu2=1.0, sites=3)
    v = rng.normal(size=125) + 1j * rng.normal(size=125)
    state = StateVector(spec, 3, v / np.linalg.norm(v))
    out = trotter_step_coupling(state, 0.0, params, spec, 0.1)
    assert np.array_equal(out.amplitudes, state.amplitudes)


def test_coupling_matches_dense_two_site_oracle(rng):
    spec = QuditSpec(4, 2, 1.0)
    params = ModelParams(mu2=1.0, sites=2)
    f_s, dt = 0.8, 0.05
    v = rng.normal(size=36) + 1j * rng.normal(size=36)
    state = StateVector(spec, 2, v / np.linalg.norm(v))
    fn = coupling_phase_fn(4, -f_s, spec.delta_phi, dt, spec.grid_center)
    diag = np.array([fn(i % 6, i // 6) if (i % 6 < 4 and i // 6 < 4) else 1.0 for i in range(36)])
    out = trotter_step_coupling(state, f_s, params, spec, dt)
    assert np.max(np.abs(out.amplitudes - diag * state.amplitudes)) < 1e-14
    # the coupling phase is exp(+i dt f phi_0 phi_1) on the logical block
    phi = (np.arange(4) - spec.grid_center) * spec.delta_phi
    assert fn(0, 3) == pytest.approx(np.exp(1j * dt * f_s * phi[0] * phi[3]))


def test_product_state_stays_product_without_coupling():
    spec = QuditSpec(6, 2, 1.0)
    params = ModelParams(mu2=1.0, g=1.0, f=0.0, sites=2)
    site = target_gaussian_state(spec)
    out = evolve_fixed(product_state(spec, [site.amplitudes] * 2), spec, params, 0.01, 20)
    single = evolve_fixed(site, spec, ModelParams(mu2=1.0, g=1.0), 0.01, 20)
    want = np.kron(single.amplitudes, single.amplitudes)
    assert np.max(np.abs(out.amplitudes - want)) < 1e-12


# --------------------------------------------------------- Trotter error


def test_trotter_error_shrinks_with_dt():
    spec = QuditSpec(8, 0, 1.0)
    params = ModelParams(mu2=1.0, g=0.5, f=0.6, sites=2)
    h = build_lattice_h(spec, params)
    init = product_state(spec, [target_gaussian_state(spec).amplitudes] * 2)
    exact = expm(-0.1j * h) @ init.amplitudes
    errs = []
    for dt in (0.01, 0.005, 0.0025):
        out = evolve_fixed(init, spec, params, dt, int(round(0.1 / dt)))
        errs.append(np.linalg.norm(out.amplitudes - exact))
    for a, b in zip(errs, errs[1:]):
        assert b < 0.6 * a  # first order halves the error
    assert errs[-1] < 1e-3


# ----------------------------------------------------- single qudit ramp


def test_zero_coupling_ramp_keeps_ground_state():
    spec = QuditSpec(16, 4, math.sqrt(2))
    params = ModelParams(mu2=0.0, g=0.0)
    init = target_gaussian_state(spec)
    out, traj = prepare_ground_state_single(spec, params, Schedule.from_time(2.0, 1e-3), init)
    assert fidelity(out, init) > 0.999
    assert traj[0].step == 0 and traj[-1].step == 2000
    assert all(abs(r.norm - 1) < 1e-10 for r in traj)


def test_empty_schedule_returns_init():
    spec = QuditSpec(8, 2, 1.0)
    init = target_gaussian_state(spec)
    out, traj = prepare_ground_state_single(spec, ModelParams(mu2=1.0, g=1.0), Schedule.from_time(0, 1e-3), init)
    assert np.array_equal(out.amplitudes, init.amplitudes) and len(traj) == 1


def test_record_stride_includes_last_step():
    spec = QuditSpec(8, 2, 1.0)
    _, traj = prepare_ground_state_single(
        spec, ModelParams(mu2=1.0, g=1.0), Schedule.from_steps(25, 0.01), record_stride=10
    )
    assert [r.step for r in traj] == [0, 10, 20, 25]
    assert traj[-1].time == pytest.approx(0.25)


@pytest.mark.parametrize("mu2", [1.0, -1.0])
def test_ramped_marginal_symmetric(mu2):
    params = ModelParams(mu2=mu2, g=1.5)
    spec = QuditSpec(16, 4, params.default_mass)
    out, traj = prepare_ground_state_single(spec, params, Schedule.from_time(1.0, 2e-3), record_stride=50)
    p = marginal_probabilities(out, 0)[:16]
    assert np.max(np.abs(p - p[::-1])) < 1e-3
    assert max(abs(r.phi_mean[0]) for r in traj) < 1e-6


def test_negative_mu2_broadens_distribution():
    # same grid for both runs so the widths are comparable
    spec = QuditSpec(16, 4, 1.0)
    sched = Schedule.from_time(1.0, 2e-3)
    widths = []
    for mu2 in (1.0, -1.0):
        _, traj = prepare_ground_state_single(spec, ModelParams(mu2=mu2, g=0.5), sched, record_stride=500)
        widths.append(traj[-1].phi_sq[0])
    assert widths[1] > widths[0]


def test_fidelity_with_interacting_ground_state():
    params = ModelParams(mu2=1.0, g=0.5)
    spec = QuditSpec(16, 4, params.default_mass)
    _, gs = ground_state(build_local_h(spec, params), spec)
    out, _ = prepare_ground_state_single(spec, params, Schedule.from_time(2.0, 1e-3), record_stride=None)
    assert fidelity(out, gs) > 0.95


def test_synthesized_fourier_dressing_matches_exact():
    spec = QuditSpec(8, 2, 1.0)
    params = ModelParams(mu2=1.0, g=1.0)
    sched = Schedule.from_time(0.05, 1e-2)
    exact, _ = prepare_ground_state_single(spec, params, sched, record_stride=None)
    dressed, _ = prepare_ground_state_single(
        spec, params, sched, record_stride=None, fourier_gate=embed_logical(fourier(8), 2)
    )
    assert np.max(np.abs(exact.amplitudes - dressed.amplitudes)) < 1e-12


# ------------------------------------------------------------ integrity


def test_integrity_error_on_non_unitary_kinetic():
    spec = QuditSpec(6, 0, 1.0)
    bad = DenseGate(1.01 * np.eye(6), check=False)
    with pytest.raises(IntegrityError) as exc:
        prepare_ground_state_single(spec, ModelParams(mu2=1.0, g=0.1), Schedule.from_steps(10, 0.01),
                                    kinetic=bad, record_stride=1)
    partial = exc.value.args[1]
    assert partial and partial[0].step == 0 and abs(partial[-1].norm - 1) > 1e-6


# -------------------------------------------------------------- lattice


def test_lattice_requires_two_sites():
    spec = QuditSpec(6, 0, 1.0)
    with pytest.raises(ValueError):
        prepare_and_evolve_lattice(spec, ModelParams(mu2=1.0, sites=1), Schedule.from_steps(1, 0.1))


def test_lattice_without_coupling_is_product_of_single_runs():
    spec = QuditSpec(8, 2, 1.0)
    sched = Schedule.from_steps(40, 0.01)
    single, _ = prepare_ground_state_single(spec, ModelParams(mu2=1.0, g=0.8), sched, record_stride=None)
    # phase B holds g at its final value for a second interval
    single = evolve_fixed(single, spec, ModelParams(mu2=1.0, g=0.8), 0.01, 40)
    out, _ = prepare_and_evolve_lattice(spec, ModelParams(mu2=1.0, g=0.8, f=0.0, sites=3), sched,
                                        record_stride=None)
    want = np.kron(single.amplitudes, np.kron(single.amplitudes, single.amplitudes))
    assert np.max(np.abs(out.amplitudes - want)) < 1e-10


def test_lattice_phases_and_times():
    spec = QuditSpec(6, 2, 1.0)
    params = ModelParams(mu2=1.0, g=0.5, f=1.0, sites=2)
    out, traj = prepare_and_evolve_lattice(
        spec, params, Schedule.from_steps(10, 0.02), ground_schedule=Schedule.from_steps(5, 0.04),
        record_stride=5,
    )
    assert [(r.step, r.meta["phase"]) for r in traj] == [(0, "A"), (5, "A"), (10, "B"), (15, "B")]
    assert traj[-1].time == pytest.approx(0.4)
    assert abs(out.norm() - 1) < 1e-12


def test_simultaneous_ramp_differs_from_sequential():
    spec = QuditSpec(6, 2, 1.0)
    params = ModelParams(mu2=1.0, g=0.5, f=2.0, sites=2)
    sched = Schedule.from_steps(20, 0.02)
    seq, _ = prepare_and_evolve_lattice(spec, params, sched, record_stride=None)
    sim, traj = prepare_and_evolve_lattice(spec, params, sched, simultaneous=True, record_stride=10)
    assert [r.step for r in traj] == [0, 10, 20]
    assert abs(sim.norm() - 1) < 1e-12
    assert np.max(np.abs(seq.amplitudes - sim.amplitudes)) > 1e-6


def test_periodic_boundary_adds_wrap_pair():
    spec = QuditSpec(4, 0, 1.0)
    params = ModelParams(mu2=1.0, g=0.0, f=1.0, sites=3)
    init = product_state(spec, [target_gaussian_state(spec).amplitudes] * 3)
    open_ = evolve_fixed(init, spec, params, 0.05, 4)
    ring = evolve_fixed(init, spec, params, 0.05, 4, periodic=True)
    assert np.max(np.abs(open_.amplitudes - ring.amplitudes)) > 1e-6
    # the ring is symmetric under cyclic relabelling of sites
    amp = ring.amplitudes.reshape(4, 4, 4)
    assert np.allclose(amp, np.transpose(amp, (1, 2, 0)), atol=1e-13)


def test_locality_of_site_steps():
    spec = QuditSpec(6, 2, 1.0)
    params = ModelParams(mu2=1.0, g=1.0, sites=3)
    a = np.zeros(8, dtype=complex)
    a[:6] = np.arange(1, 7)
    b = np.ones(8, dtype=complex)
    state = product_state(spec, [a / np.linalg.norm(a), target_gaussian_state(spec).amplitudes, b / math.sqrt(8)])
    before = marginal_probabilities(state, 0)
    out = state
    for _ in range(5):
        out = trotter_step_site(out, 2, 1.0, params, spec, 0.05)
    assert np.max(np.abs(marginal_probabilities(out, 0) - before)) < 1e-12


def test_lattice_parity_keeps_field_mean_zero():
    spec = QuditSpec(8, 2, 1.0)
    params = ModelParams(mu2=-1.0, g=0.5, f=3.0, sites=3)
    _, traj = prepare_and_evolve_lattice(spec, params, Schedule.from_steps(50, 0.01), record_stride=5)
    assert max(np.max(np.abs(r.phi_mean)) for r in traj) < 1e-6
    assert max(np.max(r.leakage) for r in traj) < 1e-12
