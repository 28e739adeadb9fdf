import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from qcav.fock import annihilation_matrix, coherent_overlap, embed, make_state
from qcav.quasiprob import (
    Axis,
    GridError,
    GridEvaluationError,
    PhaseGrid,
    grid_points,
    q_direct,
    q_from_wigner_convolution,
    sample_grid,
    wigner_direct,
)


def parity_wigner(psi, alpha, big=120):
    """(2/pi) sum (-1)^n <n|D(-alpha) rho D(-alpha)^dag|n> in a large basis, no cropping."""
    rho = embed(psi, big).matrix
    a = annihilation_matrix(big)
    d = expm(-alpha * a.conj().T + np.conj(alpha) * a)
    disp = d @ rho @ d.conj().T
    return 2 / math.pi * float(np.sum((-1.0) ** np.arange(big + 1) * np.diag(disp).real))


def cat_wigner(beta, alpha):
    """Closed form for the even cat N(|b> + |-b>), real b."""
    norm2 = 1 / (2 * (1 + math.exp(-2 * beta**2)))
    g = lambda c: math.exp(-2 * abs(alpha - c) ** 2)
    interference = 2 * math.exp(-2 * abs(alpha) ** 2) * math.cos(4 * beta * alpha.imag)
    return 2 / math.pi * norm2 * (g(beta) + g(-beta) + interference)


def test_q_direct_vacuum_and_fock1():
    alpha = 0.4 + 0.9j
    r2 = abs(alpha) ** 2
    assert q_direct(make_state("vacuum", 16), alpha) == pytest.approx(math.exp(-r2) / math.pi)
    assert q_direct(make_state("fock:1", 16), alpha) == pytest.approx(r2 * math.exp(-r2) / math.pi)


def test_q_direct_cat_origin():
    # two coherent overlaps: <0|cat> = N (e^{-2} + e^{-2})
    norm2 = 1 / (2 * (1 + math.exp(-8)))
    expected = norm2 * 4 * math.exp(-4) / math.pi
    assert q_direct(make_state("cat:2,0", 32), 0) == pytest.approx(expected, abs=1e-15)


def test_q_direct_is_overlap_over_pi():
    psi = make_state("cat:1.5,0", 32)
    for a in (0, 0.3 - 1j, 1.7):
        assert q_direct(psi, a) == coherent_overlap(psi, a) / math.pi


def test_wigner_parity_points():
    assert wigner_direct(make_state("vacuum", 8), 0) == pytest.approx(2 / math.pi)
    assert wigner_direct(make_state("fock:1", 8), 0) == pytest.approx(-2 / math.pi)


@pytest.mark.parametrize("spec", ["vacuum", "fock:1", "fock:3", "coherent:1,0.5", "cat:1.5,0"])
@pytest.mark.parametrize("alpha", [0, 0.3 + 0.2j, -1.1 + 0.7j, 2 - 2j])
def test_wigner_matches_displaced_parity(spec, alpha):
    psi = make_state(spec, 32)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert wigner_direct(psi, alpha) == pytest.approx(parity_wigner(psi, alpha), abs=1e-12)


@pytest.mark.parametrize("alpha", [0, 0.5j, 1.5, -0.7 + 0.4j])
def test_wigner_cat_closed_form(alpha):
    assert wigner_direct(make_state("cat:1.5,0", 32), alpha) == pytest.approx(
        cat_wigner(1.5, complex(alpha)), abs=1e-12
    )


def test_cat_wigner_negative_q_positive():
    axis = Axis(-2, 2, 41)
    psi = make_state("cat:1.5,0", 32)
    w = sample_grid(lambda a: wigner_direct(psi, a), axis, vectorized=True)
    q = sample_grid(lambda a: q_direct(psi, a), axis, vectorized=True)
    assert w.values.min() < -0.1
    assert q.values.min() >= -1e-10


def test_axis_parse_and_errors():
    ax = Axis.parse("-2:2:41")
    assert (ax.lo, ax.hi, ax.steps) == (-2.0, 2.0, 41)
    assert ax.spacing == pytest.approx(0.1)
    for bad in ("1:2", "a:b:c", "2:1:5", "0:1:1"):
        with pytest.raises(GridError):
            Axis.parse(bad)


def test_grid_point_layout():
    re, im = Axis(0, 1, 3), Axis(-1, 1, 5)
    pts = grid_points(re, im)
    assert pts.shape == (3, 5)
    assert pts[2, 1] == complex(1.0, -0.5)


def test_sample_constant():
    g = sample_grid(lambda a: 1.0, Axis(-1, 1, 3))
    assert np.array_equal(g.values, np.ones((3, 3)))


def test_sample_vacuum_center():
    psi = make_state("vacuum", 16)
    g = sample_grid(lambda a: q_direct(psi, a), Axis(-1, 1, 21))
    assert g.values[10, 10] == pytest.approx(1 / math.pi)


def test_sample_vectorized_equals_pointwise():
    psi = make_state("coherent:0.5,0.5", 16)
    ax = Axis(-1, 1, 7)
    a = sample_grid(lambda z: q_direct(psi, z), ax)
    b = sample_grid(lambda z: q_direct(psi, z), ax, vectorized=True)
    assert np.allclose(a.values, b.values, atol=1e-15)


def test_sample_error_carries_point():
    def f(a):
        if a.real > 0.5:
            raise ZeroDivisionError("boom")
        return 0.0

    with pytest.raises(GridEvaluationError, match="alpha = 1.0") as info:
        sample_grid(f, Axis(0, 1, 3))
    assert info.value.alpha == complex(1.0, 0.0)


def test_phase_grid_rejects_nan():
    ax = Axis(0, 1, 2)
    with pytest.raises(GridError):
        PhaseGrid(ax, ax, np.array([[0, np.nan], [0, 0]]))


def test_q_normalization_on_grid():
    psi = make_state("vacuum", 16)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # grid corners exceed the displacement heuristic
        g = sample_grid(lambda a: q_direct(psi, a), Axis(-4, 4, 81), vectorized=True)
    assert abs(g.integral() - 1) < 5e-3


@pytest.mark.parametrize("spec", ["coherent:1,0", "cat:1.5,0", "fock:2"])
def test_q_and_w_normalization(spec):
    psi = make_state(spec, 32)
    ax = Axis(-5, 5, 101)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        q = sample_grid(lambda a: q_direct(psi, a), ax, vectorized=True)
        w = sample_grid(lambda a: wigner_direct(psi, a), ax, vectorized=True)
    assert abs(q.integral() - 1) < 5e-3
    assert abs(w.integral() - 1) < 5e-3


def _wigner_grid(spec, lo=-5, hi=5, steps=201):
    psi = make_state(spec, 32)
    ax = Axis(lo, hi, steps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return psi, sample_grid(lambda a: wigner_direct(psi, a), ax, vectorized=True)


def test_convolution_vacuum_and_fock1():
    _, w = _wigner_grid("vacuum", steps=101)
    assert q_from_wigner_convolution(w, 0) == pytest.approx(1 / math.pi, abs=2e-3)
    _, w1 = _wigner_grid("fock:1", steps=101)
    assert abs(q_from_wigner_convolution(w1, 0)) < 2e-3


def test_convolution_matches_q_direct_for_cat():
    psi, w = _wigner_grid("cat:1.5,0")
    for a in (0, 1.5, -0.8 + 0.6j, 1.2j):
        assert q_from_wigner_convolution(w, a) == pytest.approx(q_direct(psi, a), abs=2e-3)


def test_convolution_domain_checks():
    _, coarse = _wigner_grid("vacuum", steps=51)  # spacing 0.2
    with pytest.raises(GridError, match="convolution domain too small"):
        q_from_wigner_convolution(coarse, 0)
    _, small = _wigner_grid("vacuum", lo=-3, hi=3, steps=61)
    q_from_wigner_convolution(small, 0)
    with pytest.raises(GridError, match="convolution domain too small"):
        q_from_wigner_convolution(small, 0.5)
