from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import minimize
from scipy.special import eval_hermite, factorial

from quditphi4.gates import embed_logical, kinetic_step, v_phi2_diag, v_phi4_diag
from quditphi4.model import ModelParams
from quditphi4.oracle import (
    OracleSizeError,
    build_lattice_h,
    build_local_h,
    build_phi_op,
    build_pi_op,
    exact_evolve,
    exact_propagator_step,
    ground_state,
    hermite_functions,
    ho_eigenfunction,
    logical_indices,
    site_operator,
    target_gaussian_state,
)
from quditphi4.state import QuditSpec, StateVector, bumper_leakage

FREE = ModelParams(mu2=1.0, g=0.0)


def free_spec(n, m=0):
    return QuditSpec(n, m, FREE.default_mass)


# --------------------------------------------------------------- Hermite


def test_ho_eigenfunction_at_origin():
    assert ho_eigenfunction(0, 0.0) == pytest.approx(math.pi**-0.25, rel=1e-15)
    assert ho_eigenfunction(1, 0.0) == 0.0


def test_hermite_matches_closed_form():
    x = np.linspace(-5, 5, 41)
    funcs = hermite_functions(20, x)
    for nu in range(21):
        norm = 1 / (math.pi**0.25 * math.sqrt(2.0**nu * factorial(nu, exact=True)))
        want = norm * np.exp(-0.5 * x**2) * eval_hermite(nu, x)
        assert np.allclose(funcs[nu], want, rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("nu", [0, 5, 20])
def test_hermite_normalization(nu):
    x = np.linspace(-12, 12, 2001)
    assert np.trapezoid(ho_eigenfunction(nu, x) ** 2, x) == pytest.approx(1, abs=1e-8)


def test_hermite_high_order_finite():
    x = np.linspace(-25, 25, 501)
    vals = hermite_functions(256, x)
    assert np.all(np.isfinite(vals))
    assert np.trapezoid(vals[256] ** 2, x) == pytest.approx(1, abs=1e-6)


def test_hermite_rejects_negative_order():
    with pytest.raises(ValueError):
        hermite_functions(-1, 0.0)


# --------------------------------------------------------- target Gaussian


def test_target_gaussian_symmetric_and_clean():
    spec = QuditSpec(60, 4, math.sqrt(3))
    t = target_gaussian_state(spec)
    logical = t.amplitudes[:60]
    assert np.max(np.abs(logical - logical[::-1])) < 1e-12
    assert bumper_leakage(t, 0) == 0
    assert t.norm() == pytest.approx(1, abs=1e-14)


def test_target_gaussian_is_free_ground_state():
    spec = free_spec(32)
    _, gs = ground_state(build_local_h(spec, FREE), spec)
    assert abs(np.vdot(gs.amplitudes, target_gaussian_state(spec).amplitudes)) ** 2 > 0.9999


# ------------------------------------------------------------- operators


def test_phi_op_traceless_and_bumpers_zero():
    spec = QuditSpec(16, 4)
    phi = build_phi_op(spec)
    assert abs(np.trace(phi)) < 1e-12
    assert np.all(phi[16:, :] == 0) and np.all(phi[:, 16:] == 0)


def test_pi_op_hermitian_with_momentum_spectrum():
    spec = QuditSpec(16, 2, 1.7)
    pi = build_pi_op(spec)
    assert np.max(np.abs(pi - pi.conj().T)) < 1e-12
    w = np.linalg.eigvalsh(pi[:16, :16])
    grid = (np.arange(16) - spec.grid_center) * spec.mass * spec.delta_phi
    assert np.allclose(np.sort(w), np.sort(grid), atol=1e-10)


def test_free_ground_energy_close_to_continuum():
    spec = free_spec(32)
    w = np.linalg.eigvalsh(build_local_h(spec, FREE)[:32, :32])
    omega = math.sqrt(3)
    assert abs(w[0] - omega / 2) / (omega / 2) < 0.02
    gaps = np.diff(w[:5])
    assert np.allclose(gaps, omega, rtol=0.01)


def test_free_ground_energy_converges_with_n():
    errs = []
    for n in (12, 16, 24, 32):
        spec = free_spec(n)
        e0, _ = ground_state(build_local_h(spec, FREE), spec)
        errs.append(abs(e0 - math.sqrt(3) / 2))
    # the error is exponentially small and reaches rounding level by N = 24
    floor = 1e-13
    assert all(a > b or max(a, b) < floor for a, b in zip(errs, errs[1:]))
    assert errs[0] > 1e-8 and errs[-1] < floor


def test_quartic_raises_ground_energy():
    spec = free_spec(16)
    energies = [ground_state(build_local_h(spec, FREE, g_value=g), spec)[0] for g in (0.0, 0.5, 1.0)]
    assert energies[0] < energies[1] < energies[2]


def test_local_h_hermitian():
    spec = QuditSpec(12, 4)
    h = build_local_h(spec, ModelParams(mu2=-1.0, g=2.5))
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12
    assert np.all(h[12:, :] == 0)


def test_ground_state_ignores_bumper_zero_modes():
    spec = free_spec(16, 4)
    e0, gs = ground_state(build_local_h(spec, FREE), spec)
    assert e0 > 0.5
    assert bumper_leakage(gs, 0) == 0


# ------------------------------------------------------------ lattice H


def test_lattice_uncoupled_energy_is_additive():
    spec = QuditSpec(6, 1, 1.0)
    p1 = ModelParams(mu2=1.0, g=0.5, sites=1)
    e1, _ = ground_state(build_local_h(spec, p1), spec)
    for sites in (2, 3):
        p = ModelParams(mu2=1.0, g=0.5, f=0.0, sites=sites)
        e, _ = ground_state(build_lattice_h(spec, p), spec, sites)
        assert e == pytest.approx(sites * e1, abs=1e-10)


def test_lattice_f_sign_flip_is_unitary_equivalent():
    spec = QuditSpec(6, 0, 1.0)
    hp = build_lattice_h(spec, ModelParams(mu2=1.0, g=0.5, f=0.8, sites=3))
    hm = build_lattice_h(spec, ModelParams(mu2=1.0, g=0.5, f=-0.8, sites=3))
    assert np.allclose(np.linalg.eigvalsh(hp), np.linalg.eigvalsh(hm), atol=1e-10)


def test_lattice_ground_energy_below_product_states():
    spec = QuditSpec(6, 0, 1.0)
    params = ModelParams(mu2=1.0, g=0.5, f=1.0, sites=2)
    h = build_lattice_h(spec, params)
    e0, _ = ground_state(h, spec, 2)

    def rayleigh(x):
        a, b = x[:6], x[6:]
        v = np.kron(b, a)
        return float(v @ h.real @ v / (v @ v))

    best = minimize(rayleigh, np.ones(12), method="BFGS").fun
    assert best >= e0 - 1e-10


def test_lattice_coupling_sign():
    # -f phi_0 phi_1 with f > 0 favours aligned fields
    spec = QuditSpec(6, 0, 1.0)
    params = ModelParams(mu2=1.0, g=0.0, f=1.0, sites=2)
    h = build_lattice_h(spec, params)
    _, gs = ground_state(h, spec, 2)
    phi = build_phi_op(spec)
    corr = np.vdot(gs.amplitudes, site_operator(phi, 0, 2) @ site_operator(phi, 1, 2) @ gs.amplitudes).real
    assert corr > 0


def test_lattice_cap_refuses():
    spec = QuditSpec(16, 4)
    with pytest.raises(OracleSizeError):
        build_lattice_h(spec, ModelParams(mu2=1.0, sites=3))


def test_logical_indices():
    spec = QuditSpec(2, 1)
    assert list(logical_indices(spec, 2)) == [0, 1, 3, 4]


# ------------------------------------------------------------ propagators


def test_propagator_examples(rng):
    spec = QuditSpec(8, 2)
    h = build_local_h(spec, ModelParams(mu2=1.0, g=1.0))
    assert np.allclose(exact_propagator_step(h, 0.0).matrix, np.eye(10), atol=1e-13)
    u = exact_propagator_step(h, 0.37).matrix
    assert np.max(np.abs(u @ u.conj().T - np.eye(10))) < 1e-10
    assert np.allclose(u, expm(-0.37j * h), atol=1e-12)
    d = rng.normal(size=5)
    assert np.allclose(exact_propagator_step(np.diag(d).astype(complex), 0.2).matrix,
                       np.diag(np.exp(-0.2j * d)), atol=1e-13)


def test_exact_evolve_chains_steps():
    spec = QuditSpec(6, 0, 1.0)
    hs = [build_local_h(spec, ModelParams(mu2=1.0, g=g)) for g in (0.1, 0.2, 0.3)]
    init = target_gaussian_state(spec)
    out = exact_evolve(init, hs, 0.05)
    want = init.amplitudes
    for h in hs:
        want = expm(-0.05j * h) @ want
    assert np.allclose(out.amplitudes, want, atol=1e-12)


# ---------------------------------------------- oracle vs gate factory


@pytest.mark.parametrize("n", [8, 16])
def test_oracle_pieces_match_factory(n):
    spec = QuditSpec(n, 4, 1.3)
    c, dt = spec.grid_center, 0.01
    phi = build_phi_op(spec)
    params = ModelParams(mu2=0.4, g=0.0)
    quad = expm(-1j * dt * 0.5 * params.harmonic_coeff * phi @ phi)
    quad[n:, n:] = np.eye(4)
    got = embed_logical(v_phi2_diag(n, params.mu2, params.d, spec.delta_phi, dt, c), 4).matrix()
    assert np.max(np.abs(got - quad)) < 1e-12
    quart = expm(-1j * dt * (0.7 / 24) * np.linalg.matrix_power(phi, 4))
    quart[n:, n:] = np.eye(4)
    got = embed_logical(v_phi4_diag(n, 0.7, spec.delta_phi, dt, c), 4).matrix()
    assert np.max(np.abs(got - quart)) < 1e-12
    pi = build_pi_op(spec)
    kin = expm(-0.5j * dt * pi @ pi)
    kin[n:, n:] = np.eye(4)
    got = embed_logical(kinetic_step(n, spec.delta_phi, spec.mass, dt, c), 4).matrix
    assert np.max(np.abs(got - kin)) < 1e-10


def test_ground_state_phase_fixed():
    spec = QuditSpec(8, 0, 1.0)
    _, gs = ground_state(build_local_h(spec, ModelParams(mu2=1.0, g=0.5)), spec)
    j = np.argmax(np.abs(gs.amplitudes))
    assert abs(gs.amplitudes[j].imag) < 1e-15 and gs.amplitudes[j].real > 0
    assert isinstance(gs, StateVector)
