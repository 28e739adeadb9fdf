import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcav.closed import critical_eta, sigma_x_closed
from qcav.fock import CutoffError, annihilation_matrix, displaced_density, make_state
from qcav.oracle import (
    SIGNS,
    FullParams,
    JointDensity,
    SeriesTruncationError,
    StabilityError,
    _rk4,
    dispersive_deviation,
    dispersive_validity,
    field_state,
    full_jc_evolve,
    integrate_rk4,
    joint_initial,
    lindblad_rhs,
    rk4_dt_max,
    sigma_x_expectation,
    superop_evolve,
)

CUT = 24
DT = 4e-4  # rk4_dt_max(1, <=1, 24) = 0.01/25


def exact_phases(rho0, chi, t):
    n = np.arange(rho0.cutoff + 1)
    out = np.empty_like(rho0.blocks)
    for i in range(2):
        for j in range(2):
            ph = np.exp(-1j * chi * (SIGNS[i] * n[:, None] - SIGNS[j] * n[None, :]) * t)
            out[i, j] = ph * rho0.blocks[i, j]
    return out


def dense_lindblad(rho, chi, gamma):
    """The same generator written with Kronecker-product operators."""
    d = rho.cutoff + 1
    a = np.kron(np.eye(2), annihilation_matrix(rho.cutoff))
    num = a.conj().T @ a
    h = chi * np.kron(np.diag(SIGNS), np.diag(np.arange(d)))
    r = rho.to_matrix()
    out = -1j * (h @ r - r @ h) + gamma * (2 * a @ r @ a.conj().T - num @ r - r @ num)
    return JointDensity.from_matrix(out)


def random_joint(rng, cutoff):
    d = 2 * (cutoff + 1)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = g @ g.conj().T
    return JointDensity.from_matrix(r / np.trace(r).real)


def test_joint_initial_vacuum_blocks():
    rho = joint_initial(make_state("vacuum", 8), 0)
    ket0 = np.zeros((9, 9))
    ket0[0, 0] = 0.5
    for i in range(2):
        for j in range(2):
            assert np.array_equal(rho.blocks[i, j], ket0)


def test_joint_initial_trace_and_coherence():
    rho = joint_initial(make_state("coherent:1,0", 32), 0.5 + 0.3j)
    assert rho.trace() == pytest.approx(1.0, abs=1e-10)
    assert np.trace(rho.eg).real == pytest.approx(0.5, abs=1e-10)
    assert sigma_x_expectation(rho) == pytest.approx(1.0, abs=1e-10)


def test_block_shape_validation():
    with pytest.raises(ValueError):
        JointDensity(np.zeros((2, 3, 4, 4)))


def test_matrix_roundtrip():
    rho = random_joint(np.random.default_rng(1), 3)
    assert np.array_equal(JointDensity.from_matrix(rho.to_matrix()).blocks, rho.blocks)


def test_rhs_vanishes_without_dynamics():
    rho = joint_initial(make_state("coherent:1,0", CUT), 0.3)
    assert np.array_equal(lindblad_rhs(rho, 0.0, 0.0).blocks, np.zeros_like(rho.blocks))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), chi=st.floats(-2, 2), gamma=st.floats(0, 1))
def test_rhs_trace_free_and_matches_dense(seed, chi, gamma):
    rho = random_joint(np.random.default_rng(seed), 4)
    drho = lindblad_rhs(rho, chi, gamma)
    assert abs(drho.trace()) < 1e-12
    assert np.max(np.abs(drho.blocks - dense_lindblad(rho, chi, gamma).blocks)) < 1e-12


def test_single_photon_decay_rates():
    blocks = np.zeros((2, 2, 3, 3), dtype=complex)
    blocks[0, 0, 1, 1] = 1.0
    drho = lindblad_rhs(JointDensity(blocks), 0.7, 1.0)
    assert drho.ee[1, 1] == pytest.approx(-2.0)
    assert drho.ee[0, 0] == pytest.approx(2.0)


def test_stability_guard():
    rho = joint_initial(make_state("vacuum", CUT), 0)
    dt_max = rk4_dt_max(1.0, 0.2, CUT)
    with pytest.raises(StabilityError) as info:
        integrate_rk4(rho, 1.0, 0.2, 1.0, 10 * dt_max)
    assert info.value.dt_max == pytest.approx(dt_max)
    with pytest.raises(ValueError):
        integrate_rk4(rho, 1.0, 0.2, -1.0, DT)


def test_rk4_zero_time_returns_input():
    rho = joint_initial(make_state("coherent:1,0", CUT), 0.2)
    assert np.array_equal(integrate_rk4(rho, 1.0, 0.2, 0.0, DT).blocks, rho.blocks)


def test_compiled_rk4_matches_reference_rk4():
    rho = joint_initial(make_state("cat:1.5,0", CUT), 0.2j)
    t, chi, gamma = 0.3, 1.0, 0.2
    ref = _rk4(lambda y: lindblad_rhs(JointDensity(y), chi, gamma).blocks, rho.blocks, t, 3e-4)
    fast = integrate_rk4(rho, chi, gamma, t, 3e-4).blocks
    assert np.max(np.abs(ref - fast)) < 1e-13


def test_rk4_lossless_phases():
    rho = joint_initial(make_state("coherent:1,0", CUT), 0.4 - 0.2j)
    out = integrate_rk4(rho, 1.0, 0.0, 1.3, DT)
    assert np.max(np.abs(out.blocks - exact_phases(rho, 1.0, 1.3))) < 1e-8
    n = np.arange(CUT + 1)
    mean0 = float(np.sum(n * np.diag(field_state(rho).matrix).real))
    mean1 = float(np.sum(n * np.diag(field_state(out).matrix).real))
    assert mean1 == pytest.approx(mean0, abs=1e-10)


def test_rk4_photon_mean_decay():
    gamma, t = 0.3, 1.5
    rho = joint_initial(make_state("coherent:1,0", CUT), 0)
    out = integrate_rk4(rho, 0.0, gamma, t, DT)
    n = np.arange(CUT + 1)
    mean = float(np.sum(n * np.diag(field_state(out).matrix).real))
    assert mean == pytest.approx(math.exp(-2 * gamma * t), abs=1e-7)


def test_rk4_keeps_blocks_decoupled_and_hermitian():
    rho = joint_initial(make_state("coherent:1,0", CUT), 0.5)
    blocks = rho.blocks.copy()
    blocks[0, 1] = blocks[1, 0] = 0
    out = integrate_rk4(JointDensity(blocks), 1.0, 0.2, 0.8, DT)
    assert np.max(np.abs(out.eg)) < 1e-12
    full = integrate_rk4(rho, 1.0, 0.2, 0.8, DT)
    assert abs(full.trace() - 1) < 1e-8
    assert full.hermiticity_error() < 1e-9


def test_rk4_matches_closed_form():
    psi, alpha, tau, eta = make_state("coherent:1,0", 20), 0.5, 0.8, 0.2
    out = integrate_rk4(joint_initial(psi, alpha), 1.0, eta, tau, 4e-4)
    expected = sigma_x_closed(displaced_density(psi, alpha), tau, eta)
    assert sigma_x_expectation(out) == pytest.approx(expected, abs=1e-6)


def test_superop_identity_at_zero():
    rho = joint_initial(make_state("cat:1.5,0", CUT), 0.1)
    assert np.max(np.abs(superop_evolve(rho, 1.0, 0.3, 0.0).blocks - rho.blocks)) < 1e-15


def test_superop_lossless_phases():
    rho = joint_initial(make_state("fock:2", CUT), 0.3j)
    out = superop_evolve(rho, 1.0, 0.0, 2.1)
    assert np.max(np.abs(out.blocks - exact_phases(rho, 1.0, 2.1))) < 1e-13


@pytest.mark.parametrize("spec", ["vacuum", "coherent:1,0", "fock:2", "cat:1.5,0"])
@pytest.mark.parametrize("eta", [0.2, "critical"])
def test_superop_matches_rk4(spec, eta):
    eta = critical_eta() if eta == "critical" else eta
    rho = joint_initial(make_state(spec, CUT), 0.5 + 0.3j)
    a = superop_evolve(rho, 1.0, eta, 0.8)
    b = integrate_rk4(rho, 1.0, eta, 0.8, DT)
    assert np.max(np.abs(a.blocks - b.blocks)) < 1e-9
    psi = make_state(spec, CUT)
    closed = sigma_x_closed(displaced_density(psi, 0.5 + 0.3j), 0.8, eta)
    assert sigma_x_expectation(a) == pytest.approx(closed, abs=1e-9)


def test_superop_gamma_limit_is_continuous():
    rho = joint_initial(make_state("coherent:1,0", CUT), 0.2)
    a = superop_evolve(rho, 1.0, 0.0, 1.0)
    b = superop_evolve(rho, 1.0, 1e-10, 1.0)
    assert np.max(np.abs(a.blocks - b.blocks)) < 1e-8


def test_superop_reports_unconverged_series():
    blocks = np.full((2, 2, 4, 4), 0.25, dtype=complex)
    with pytest.raises(SeriesTruncationError):
        superop_evolve(JointDensity(blocks), 0.0, 50.0, 10.0)


def test_sigma_x_of_incoherent_state():
    rho = joint_initial(make_state("vacuum", 4), 0)
    blocks = rho.blocks.copy()
    blocks[0, 1] = blocks[1, 0] = 0
    assert sigma_x_expectation(JointDensity(blocks)) == 0.0


def test_full_params():
    p = FullParams.from_detuning(10.0, 1.0)
    assert p.delta == 10.0
    assert p.chi == pytest.approx(0.1)
    with pytest.raises(ValueError):
        FullParams.from_detuning(0.0, 1.0)


def test_dispersive_validity_examples():
    assert dispersive_validity(FullParams.from_detuning(100, 1), 0) == pytest.approx(100)
    assert dispersive_validity(FullParams.from_detuning(10, 1), 3) == pytest.approx(5)
    p = FullParams.from_detuning(7, 0.3)
    assert dispersive_validity(p, 8) / dispersive_validity(p, 3) == pytest.approx(math.sqrt(4 / 9), abs=1e-14)
    with pytest.raises(ValueError, match="no coupling"):
        dispersive_validity(FullParams.from_detuning(10, 0), 0)


def test_full_jc_uncoupled_phases():
    delta, t = 3.0, 0.7
    rho = joint_initial(make_state("coherent:1,0", CUT), 0)
    out = full_jc_evolve(rho, FullParams.from_detuning(delta, 0.0), 0.0, t, 1e-3)
    assert np.max(np.abs(out.eg - rho.eg * np.exp(-1j * delta * t))) < 1e-10
    assert np.max(np.abs(out.ee - rho.ee)) < 1e-13
    assert abs(out.trace() - 1) < 1e-8


def test_full_jc_refuses_populated_top_level():
    rho = joint_initial(make_state("fock:4", 4), 0)
    with pytest.raises(CutoffError):
        full_jc_evolve(rho, FullParams.from_detuning(10, 1), 0.0, 0.1, 1e-3)


def test_dispersive_probe_short_window():
    psi = make_state("coherent:1,0", 16)
    p = FullParams.from_detuning(20.0, 1.0)
    dev, states = dispersive_deviation(psi, 0, p, 0.5 / p.chi, 2e-3, samples=10)
    assert len(states) == 10
    assert dev < 0.2
    assert all(abs(s.trace() - 1) < 1e-8 for s in states)
