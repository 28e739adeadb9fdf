"""Brute-force dynamics used to check the closed-form dipole signal.

Atom-field states are kept as four field blocks indexed by the atomic
levels (e, g). The dispersive generator never mixes blocks, which keeps
both the RK4 integrator and the superoperator solution cheap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .fock import (
    TAIL_TOLERANCE,
    CutoffError,
    FieldDensity,
    FockVector,
    annihilation_matrix,
    displaced_density,
)

log = logging.getLogger(__name__)

# atomic index 0 = |e>, 1 = |g>; eigenvalues of sigma_z
SIGNS = np.array([1.0, -1.0])


class StabilityError(ValueError):
    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt = {dt:.3g} violates the RK4 stability guard; use dt <= {dt_max:.3g}")
        self.dt = dt
        self.dt_max = dt_max


class SeriesTruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class JointDensity:
    """Atom-field density as blocks[i, j] = <i|rho|j> (field operators), i, j in (e, g)."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        if b.ndim != 4 or b.shape[:2] != (2, 2) or b.shape[2] != b.shape[3]:
            raise ValueError(f"JointDensity blocks must have shape (2, 2, d, d), got {b.shape}")
        object.__setattr__(self, "blocks", b)

    @property
    def cutoff(self) -> int:
        return self.blocks.shape[2] - 1

    @property
    def ee(self) -> np.ndarray:
        return self.blocks[0, 0]

    @property
    def eg(self) -> np.ndarray:
        return self.blocks[0, 1]

    @property
    def ge(self) -> np.ndarray:
        return self.blocks[1, 0]

    @property
    def gg(self) -> np.ndarray:
        return self.blocks[1, 1]

    def trace(self) -> float:
        return float((np.trace(self.ee) + np.trace(self.gg)).real)

    def hermiticity_error(self) -> float:
        b = self.blocks
        return float(np.max(np.abs(b - b.transpose(1, 0, 3, 2).conj())))

    def validate(self, trace_tol: float = 1e-8, herm_tol: float = 1e-10) -> "JointDensity":
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"JointDensity trace {self.trace()!r} differs from 1")
        if self.hermiticity_error() > herm_tol:
            raise ValueError("JointDensity is not Hermitian")
        return self

    def to_matrix(self) -> np.ndarray:
        d = self.blocks.shape[2]
        return self.blocks.transpose(0, 2, 1, 3).reshape(2 * d, 2 * d)

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "JointDensity":
        d = mat.shape[0] // 2
        return cls(np.asarray(mat).reshape(2, d, 2, d).transpose(0, 2, 1, 3))


@dataclass(frozen=True)
class FullParams:
    """Jaynes-Cummings parameters; detuning and dispersive shift are derived."""

    omega: float
    omega_eg: float
    lambda_c: float

    def __post_init__(self):
        if self.delta == 0:
            raise ValueError("detuning must be nonzero")

    @classmethod
    def from_detuning(cls, delta: float, lambda_c: float, omega: float = 0.0) -> "FullParams":
        return cls(omega=omega, omega_eg=omega + delta, lambda_c=lambda_c)

    @property
    def delta(self) -> float:
        return self.omega_eg - self.omega

    @property
    def chi(self) -> float:
        return self.lambda_c**2 / self.delta


def joint_initial(psi_field: FockVector | FieldDensity, alpha: complex) -> JointDensity:
    """Atom in (|e> + |g>)/sqrt(2), field displaced by ``alpha``."""
    rho_f = displaced_density(psi_field, alpha).matrix
    blocks = 0.5 * np.broadcast_to(rho_f, (2, 2) + rho_f.shape)
    return JointDensity(blocks.copy())


def _dispersive_coefficients(dim: int, chi: float, gamma: float) -> np.ndarray:
    n = np.arange(dim, dtype=float)
    left = SIGNS[:, None, None, None] * n[None, None, :, None]
    right = SIGNS[None, :, None, None] * n[None, None, None, :]
    decay = n[:, None] + n[None, :]
    return -1j * chi * (left - right) - gamma * decay


def _jump_weights(dim: int) -> np.ndarray:
    n = np.arange(1, dim, dtype=float)
    return np.sqrt(np.outer(n, n))


def _rhs(b: np.ndarray, coef: np.ndarray, jump: np.ndarray, gamma: float) -> np.ndarray:
    out = coef * b
    if gamma:
        # (a rho a^dag)_{nm} = sqrt((n+1)(m+1)) rho_{n+1, m+1}
        out[..., :-1, :-1] += 2.0 * gamma * jump * b[..., 1:, 1:]
    return out


def lindblad_rhs(rho: JointDensity, chi: float, gamma: float) -> JointDensity:
    """d rho/dt = -i[chi a^dag a sigma_z, rho] + 2 gamma a rho a^dag - gamma {a^dag a, rho}."""
    dim = rho.cutoff + 1
    coef = _dispersive_coefficients(dim, chi, gamma)
    return JointDensity(_rhs(rho.blocks, coef, _jump_weights(dim), gamma))


def rk4_dt_max(chi: float, gamma: float, cutoff: int) -> float:
    return 0.01 / max(abs(chi) * (cutoff + 1), gamma * (cutoff + 1), 1.0)


def _check_dt(dt: float, t_end: float, dt_max: float) -> None:
    if t_end < 0:
        raise ValueError(f"t_end must be >= 0, got {t_end}")
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if dt > dt_max * (1 + 1e-9):
        raise StabilityError(dt, dt_max)


def _rk4(f, y0: np.ndarray, t_end: float, dt: float) -> np.ndarray:
    """Classical RK4 with the last step shortened to land on t_end."""
    y = y0.copy()
    steps, last = _step_plan(t_end, dt)
    for step in range(steps):
        h = dt if step < steps - 1 else last
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _report_drift(rho0: JointDensity, rho: JointDensity) -> None:
    drift = abs(rho.trace() - rho0.trace())
    if drift > 1e-8:
        log.warning("trace drift %.3g exceeds 1e-8", drift)


@njit(cache=True)
def _rk4_dispersive(y, coef, jump, steps, dt, last):
    """RK4 for dy/dt = coef * y + jump * (y shifted by one along both field axes)."""
    d = y.shape[-1]
    k = np.empty((4,) + y.shape, dtype=y.dtype)
    stage = np.empty_like(y)
    for step in range(steps):
        h = dt if step < steps - 1 else last
        for s in range(4):
            src = y if s == 0 else stage
            for i in range(2):
                for j in range(2):
                    for n in range(d):
                        for m in range(d):
                            v = coef[i, j, n, m] * src[i, j, n, m]
                            if n + 1 < d and m + 1 < d:
                                v += jump[n, m] * src[i, j, n + 1, m + 1]
                            k[s, i, j, n, m] = v
            if s < 3:
                w = 0.5 * h if s < 2 else h
                for i in range(2):
                    for j in range(2):
                        for n in range(d):
                            for m in range(d):
                                stage[i, j, n, m] = y[i, j, n, m] + w * k[s, i, j, n, m]
        for i in range(2):
            for j in range(2):
                for n in range(d):
                    for m in range(d):
                        y[i, j, n, m] += (h / 6.0) * (
                            k[0, i, j, n, m] + 2.0 * k[1, i, j, n, m] + 2.0 * k[2, i, j, n, m] + k[3, i, j, n, m]
                        )
    return y


def _step_plan(t_end: float, dt: float) -> tuple[int, float]:
    """Number of steps and length of the final (possibly shortened) step."""
    if t_end == 0:
        return 0, 0.0
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    return steps, t_end - (steps - 1) * dt


def integrate_rk4(
    rho0: JointDensity, chi: float, gamma: float, t_end: float, dt: float
) -> JointDensity:
    """Fixed-step RK4 solution of the dispersive master equation."""
    _check_dt(dt, t_end, rk4_dt_max(chi, gamma, rho0.cutoff))
    dim = rho0.cutoff + 1
    coef = _dispersive_coefficients(dim, chi, gamma)
    # jump[n, m] multiplies rho_{n+1, m+1}; last row/column never used
    jump = np.zeros((dim, dim))
    jump[:-1, :-1] = 2.0 * gamma * _jump_weights(dim)
    steps, last = _step_plan(t_end, dt)
    y = _rk4_dispersive(rho0.blocks.copy(), coef, jump, steps, dt, last)
    out = JointDensity(y)
    _report_drift(rho0, out)
    return out


def superop_evolve(rho0: JointDensity, chi: float, gamma: float, t: float) -> JointDensity:
    """Factored solution exp(L t) exp(f(t) J) applied block by block.

    For block (i, j) the atomic superoperators reduce to the scalars
    G_i = gamma + i chi s_i and conj(G_j); f(t) becomes
    (1 - exp(-(G_i + conj G_j) t)) / (G_i + conj G_j), and exp(L t) is the
    diagonal scaling exp(-G_i n t - conj(G_j) m t).
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    dim = rho0.cutoff + 1
    a = annihilation_matrix(rho0.cutoff)
    ad = a.conj().T
    n = np.arange(dim, dtype=float)
    out = np.empty_like(rho0.blocks)
    for i in range(2):
        for j in range(2):
            g_left = complex(gamma, chi * SIGNS[i])
            g_right = complex(gamma, -chi * SIGNS[j])
            rate = g_left + g_right
            if abs(rate) <= 1e-12 * max(abs(chi), gamma) or rate == 0:
                f_t = complex(t)  # limit of (1 - e^{-rate t}) / rate
            else:
                f_t = (1.0 - np.exp(-rate * t)) / rate
            term = rho0.blocks[i, j].copy()
            acc = term.copy()
            for k in range(1, dim):
                term = (2.0 * gamma * f_t / k) * (a @ term @ ad)
                acc += term
            if dim > 1 and np.max(np.abs(term)) > 1e-14:
                raise SeriesTruncationError(
                    f"jump series not converged at n = {dim - 1}: last term {np.max(np.abs(term)):.3g}"
                )
            scale = np.exp(-g_left * n * t)[:, None] * np.exp(-g_right * n * t)[None, :]
            out[i, j] = scale * acc
    return JointDensity(out)


def sigma_x_expectation(rho: JointDensity) -> float:
    return float(2.0 * np.trace(rho.eg).real)


def _jc_operators(cutoff: int, params: FullParams):
    a = annihilation_matrix(cutoff)
    eye_f = np.eye(cutoff + 1)
    sz = np.diag([1.0, -1.0])
    sp = np.array([[0.0, 1.0], [0.0, 0.0]])  # |e><g|
    sm = sp.T
    h = 0.5 * params.delta * np.kron(sz, eye_f) + params.lambda_c * (
        np.kron(sm, a.conj().T) + np.kron(sp, a)
    )
    big_a = np.kron(np.eye(2), a)
    return h.astype(complex), big_a


def full_jc_evolve(
    rho0: JointDensity, params: FullParams, gamma: float, t_end: float, dt: float
) -> JointDensity:
    """RK4 with H = delta/2 sigma_z + lambda (a^dag sigma_- + a sigma_+) and cavity decay.

    The result is in the frame rotating at the field frequency, so atomic
    coherences still carry the fast detuning phase.
    """
    _check_dt(dt, t_end, rk4_dt_max(params.chi, gamma, rho0.cutoff))
    top = float((rho0.ee[-1, -1] + rho0.gg[-1, -1]).real)
    if top > TAIL_TOLERANCE:
        raise CutoffError(f"top Fock level holds population {top:.3g}; raise the cutoff")
    h, big_a = _jc_operators(rho0.cutoff, params)
    big_ad = big_a.conj().T
    num = big_ad @ big_a

    def f(r):
        out = -1j * (h @ r - r @ h)
        if gamma:
            out += gamma * (2.0 * big_a @ r @ big_ad - num @ r - r @ num)
        return out

    out = JointDensity.from_matrix(_rk4(f, rho0.to_matrix(), t_end, dt))
    _report_drift(rho0, out)
    return out


def sigma_x_dispersive_frame(rho: JointDensity, params: FullParams, t: float) -> float:
    """Dipole expectation of a full-JC state, viewed in the frame of chi a^dag a sigma_z.

    Removes the bare detuning phase and the constant shift chi |e><e| that
    second-order perturbation theory adds on top of chi a^dag a sigma_z.
    """
    phase = np.exp(1j * (params.delta + params.chi) * t)
    return float(2.0 * (phase * np.trace(rho.eg)).real)


def dispersive_deviation(
    psi: FockVector | FieldDensity,
    alpha: complex,
    params: FullParams,
    t_end: float,
    dt: float,
    samples: int = 50,
    gamma: float = 0.0,
) -> tuple[float, list[JointDensity]]:
    """Max |<sigma_x>_JC - <sigma_x>_dispersive| over ``samples`` points in (0, t_end].

    Returns the deviation and the intermediate full-JC states.
    """
    from .closed import sigma_x_closed

    rho_f = displaced_density(psi, alpha)
    rho = joint_initial(psi, alpha)
    chi = params.chi
    times = np.linspace(0.0, t_end, samples + 1)
    worst = 0.0
    states = []
    for t0, t1 in zip(times[:-1], times[1:]):
        rho = full_jc_evolve(rho, params, gamma, t1 - t0, dt)
        states.append(rho)
        full = sigma_x_dispersive_frame(rho, params, t1)
        disp = sigma_x_closed(rho_f, abs(chi) * t1, gamma / abs(chi))
        worst = max(worst, abs(full - disp))
    return worst, states


def dispersive_validity(params: FullParams, n_relevant: int) -> float:
    """|delta| / (lambda sqrt(n+1)); >= 10 is treated as the dispersive regime."""
    if n_relevant < 0:
        raise ValueError("n_relevant must be >= 0")
    if params.lambda_c == 0:
        raise ValueError("no coupling")
    return abs(params.delta) / (abs(params.lambda_c) * math.sqrt(n_relevant + 1))


def field_state(rho: JointDensity) -> FieldDensity:
    """Reduced field density (partial trace over the atom)."""
    m = rho.ee + rho.gg
    return FieldDensity(0.5 * (m + m.conj().T))

