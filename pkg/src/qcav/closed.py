"""Closed-form dipole signal of the dispersive atom in a lossy cavity.

With tau = chi*t and eta = gamma/chi, the dipole expectation after the
dispersive interaction is

    <sigma_x> = Re sum_M z^M rho_MM,   z = (eta + i exp(-2(eta+i)tau)) / (eta + i),

where rho is the displaced field density. mu = |z| and theta = arg z. At
tau = 3pi/4 and eta = eta* (the root of eta = exp(-3 pi eta / 2)) z vanishes
and the signal is the vacuum population of the displaced field, i.e. pi Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock import FieldDensity, FockVector, as_density, displaced_density, photon_distribution

MAGIC_TAU = 0.75 * math.pi


@dataclass(frozen=True)
class DecayParams:
    chi: float
    gamma: float
    tau: float = 0.0

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError("chi must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")

    @property
    def eta(self) -> float:
        return self.gamma / self.chi

    @property
    def t(self) -> float:
        return self.tau / self.chi

    @property
    def xi(self) -> complex:
        return complex(self.gamma, self.chi)


@dataclass(frozen=True)
class PhaseFactor:
    z: complex
    mu: float
    theta: float


def _principal(angle: float) -> float:
    """Map atan2 output onto (-pi, pi]."""
    return math.pi if angle <= -math.pi else angle


def _check_tau_eta(tau: float, eta: float) -> None:
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")


def phase_factor(tau: float, eta: float) -> PhaseFactor:
    _check_tau_eta(tau, eta)
    w = complex(eta, 1.0)
    z = (eta + 1j * np.exp(-2.0 * w * tau)) / w
    z = complex(z)
    return PhaseFactor(z=z, mu=abs(z), theta=_principal(math.atan2(z.imag, z.real)))


def mu_formula(tau: float, eta: float) -> float:
    """Modulus of the decay factor from its real trigonometric form.

    The numerator eta^2 + e^{-4 eta tau} + 2 eta e^{-2 eta tau} sin 2tau is
    summed as (eta + E sin 2tau)^2 + (E cos 2tau)^2 with E = e^{-2 eta tau};
    the expanded sum cancels catastrophically near mu = 0.
    """
    _check_tau_eta(tau, eta)
    e = math.exp(-2.0 * eta * tau)
    s, c = math.sin(2.0 * tau), math.cos(2.0 * tau)
    num = (eta + e * s) ** 2 + (e * c) ** 2
    return math.sqrt(num / (1.0 + eta * eta))


def mu_formula_expanded(tau: float, eta: float) -> float:
    """Same quantity summed term by term as printed; loses ~1e-9 absolute near mu = 0."""
    _check_tau_eta(tau, eta)
    num = (
        eta * eta
        + math.exp(-4.0 * eta * tau)
        + 2.0 * eta * math.exp(-2.0 * eta * tau) * math.sin(2.0 * tau)
    )
    return math.sqrt(max(num, 0.0) / (1.0 + eta * eta))


def theta_formula(tau: float, eta: float) -> float:
    _check_tau_eta(tau, eta)
    e = math.exp(-2.0 * eta * tau)
    s, c = math.sin(2.0 * tau), math.cos(2.0 * tau)
    num = -(eta + e * (s - eta * c))
    den = eta * eta + e * (c + eta * s)
    if abs(num) < 1e-300 and abs(den) < 1e-300:
        raise ValueError("phase undefined at mu=0")
    return _principal(math.atan2(num, den))


def extinction_residual(eta: float) -> float:
    """g(eta) = eta - exp(-3 pi eta / 2); zero where mu(3pi/4) vanishes."""
    return eta - math.exp(-1.5 * math.pi * eta)


@lru_cache(maxsize=None)
def critical_eta(tol: float = 1e-14, max_iter: int = 200) -> float:
    """Root of eta = exp(-3 pi eta / 2) on [0, 1] by bisection.

    g is strictly increasing there, so the bracket g(0) = -1 < 0 < g(1)
    holds exactly one root.
    """
    lo, hi = 0.0, 1.0
    g_lo = extinction_residual(lo)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g_mid = extinction_residual(mid)
        if abs(g_mid) <= tol or mid in (lo, hi):
            break
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return mid


def _diag(rho: FieldDensity | FockVector) -> np.ndarray:
    return photon_distribution(as_density(rho))


def sigma_x_closed(rho_displaced: FieldDensity | FockVector, tau: float, eta: float) -> float:
    """Re sum_M z^M rho_MM, summed up to the cutoff."""
    p = _diag(rho_displaced)
    z = phase_factor(tau, eta).z
    powers = z ** np.arange(p.size)
    return float(np.dot(powers, p).real)


def sigma_x_double_sum(rho_displaced: FieldDensity | FockVector, tau: float, eta: float) -> float:
    """Unresummed double series over (m, k) with m + k <= cutoff.

    Term: [gamma(1 - e^{-2 xi t})/xi]^m / m! * e^{-2 k xi t} (m+k)!/k! * rho_{m+k}.
    The factorial ratio is grown one factor at a time along m.
    """
    _check_tau_eta(tau, eta)
    p = _diag(rho_displaced)
    n = p.size
    w = complex(eta, 1.0)
    decay = complex(np.exp(-2.0 * w * tau))
    jump = eta * (1.0 - decay) / w
    k = np.arange(n)
    decay_k = decay ** k
    coef = np.ones(n, dtype=complex)  # A^m (m+k)!/(m! k!) for the current m
    total = 0j
    for m in range(n):
        if m:
            kk = k[: n - m]
            coef = coef[: n - m] * jump * (m + kk) / m
        total += np.sum(coef * decay_k[: n - m] * p[m:])
    return float(total.real)


def sigma_x_lossless(psi: FockVector | FieldDensity, alpha: complex, tau: float) -> float:
    """sum_m P_m cos(2 m tau), P the photon distribution of D(alpha) psi."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    p = photon_distribution(displaced_density(psi, alpha))
    return float(np.dot(p, np.cos(2.0 * tau * np.arange(p.size))))


def measured_sigma_x(
    state: FockVector | FieldDensity, alpha: complex, tau: float, eta: float
) -> float:
    """Dipole signal when probing phase-space point alpha.

    The field is displaced by -alpha before the interaction, so that the
    vacuum population of the displaced field is <alpha|rho|alpha>.
    """
    return sigma_x_closed(displaced_density(state, -complex(alpha)), tau, eta)


def reconstruct_q_point(
    state: FockVector | FieldDensity,
    alpha: complex,
    *,
    eta: float | None = None,
    tau: float | None = None,
) -> float:
    """Q(alpha) read off the dipole signal at the extinction point (eta*, 3pi/4)."""
    eta = critical_eta() if eta is None else eta
    tau = MAGIC_TAU if tau is None else tau
    return measured_sigma_x(state, alpha, tau, eta) / math.pi


def mu_curve(eta: float, tau_max: float, steps: int) -> np.ndarray:
    """Rows (tau, mu, theta) at uniform tau samples on [0, tau_max]."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if tau_max < 0:
        raise ValueError("tau_max must be >= 0")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    taus = np.linspace(0.0, tau_max, steps)
    w = complex(eta, 1.0)
    z = (eta + 1j * np.exp(-2.0 * w * taus)) / w
    theta = np.angle(z)
    theta[theta <= -math.pi] = math.pi
    return np.column_stack([taus, np.abs(z), theta])
