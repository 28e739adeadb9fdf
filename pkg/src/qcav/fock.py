"""Truncated Fock-space linear algebra for a single field mode.

States live in the number basis |0>, ..., |N> with N the cutoff. Factories
certify that the probability discarded by truncation stays below
``TAIL_TOLERANCE`` and refuse to build a state otherwise.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

DEFAULT_CUTOFF = 32
TAIL_TOLERANCE = 1e-12


class TruncationWarning(UserWarning):
    """Displacement amplitude is large compared to the Fock cutoff."""


class CutoffError(ValueError):
    pass


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FockVector:
    """Pure field state as amplitudes c_0..c_N in the number basis."""

    amps: np.ndarray

    def __post_init__(self):
        amps = _readonly(np.ravel(self.amps))
        if amps.size == 0:
            raise ValueError("FockVector needs at least one amplitude")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"FockVector not normalized: sum |c_n|^2 = {norm!r}")
        object.__setattr__(self, "amps", amps)

    @property
    def cutoff(self) -> int:
        return self.amps.size - 1

    def density(self) -> "FieldDensity":
        return FieldDensity(np.outer(self.amps, self.amps.conj()))


@dataclass(frozen=True)
class FieldDensity:
    """(N+1)x(N+1) density matrix of the field mode.

    Trace may fall short of one when the matrix is a cropped image of a
    state that leaked past the cutoff (e.g. after a displacement), so only
    ``trace <= 1`` is enforced here.
    """

    matrix: np.ndarray

    def __post_init__(self):
        mat = _readonly(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"FieldDensity must be square, got shape {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > 1e-10:
            raise ValueError("FieldDensity is not Hermitian")
        diag = np.diag(mat).real
        if diag.min() < -1e-10:
            raise ValueError("FieldDensity has negative populations")
        if diag.sum() > 1.0 + 1e-8:
            raise ValueError(f"FieldDensity trace {diag.sum()!r} exceeds 1")
        object.__setattr__(self, "matrix", mat)

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True)
class StateSpec:
    """Parsed test-state description: vacuum, fock:n, coherent:re,im or cat:re,im."""

    kind: str
    n: int = 0
    beta: complex = 0j

    def __post_init__(self):
        if self.kind not in ("vacuum", "fock", "coherent", "cat"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        if self.kind == "fock" and self.n < 0:
            raise ValueError("fock:n requires n >= 0")
        if self.kind == "cat" and self.beta == 0:
            raise ValueError("cat:0 is degenerate (collapses to vacuum)")

    @classmethod
    def parse(cls, text: str) -> "StateSpec":
        text = text.strip()
        if text == "vacuum":
            return cls("vacuum")
        m = re.fullmatch(r"fock:(\d+)", text)
        if m:
            return cls("fock", n=int(m.group(1)))
        m = re.fullmatch(r"(coherent|cat):([^,]+),([^,]+)", text)
        if m:
            try:
                beta = complex(float(m.group(2)), float(m.group(3)))
            except ValueError:
                raise ValueError(f"bad amplitude in state spec {text!r}") from None
            if not (math.isfinite(beta.real) and math.isfinite(beta.imag)):
                raise ValueError(f"non-finite amplitude in state spec {text!r}")
            return cls(m.group(1), beta=beta)
        raise ValueError(
            f"cannot parse state spec {text!r}; expected vacuum | fock:<n> | "
            "coherent:<re>,<im> | cat:<re>,<im>"
        )

    def __str__(self) -> str:
        if self.kind == "vacuum":
            return "vacuum"
        if self.kind == "fock":
            return f"fock:{self.n}"
        return f"{self.kind}:{self.beta.real!r},{self.beta.imag!r}"


def annihilation_matrix(cutoff: int) -> np.ndarray:
    """Lowering operator with a[n-1, n] = sqrt(n)."""
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def creation_matrix(cutoff: int) -> np.ndarray:
    return annihilation_matrix(cutoff).conj().T


def padded_dimension(cutoff: int) -> int:
    return 2 * cutoff + 16


def truncation_risk(alpha: complex, cutoff: int) -> bool:
    # relative slack keeps grid corners such as 2+2j at cutoff 32 quiet
    return abs(alpha) ** 2 > cutoff / 4 * (1 + 1e-12)


def _warn_truncation(alpha: complex, cutoff: int) -> None:
    if truncation_risk(alpha, cutoff):
        warnings.warn(
            f"truncation risk: |alpha|^2 = {abs(alpha) ** 2:.4g} > cutoff/4 = {cutoff / 4:.4g}",
            TruncationWarning,
            stacklevel=3,
        )


def displacement_matrix(alpha: complex, cutoff: int) -> np.ndarray:
    """D(alpha) = exp(alpha a^dag - alpha^* a), cropped to (N+1)x(N+1).

    The exponential is taken in a padded space of dimension 2N+16 so that
    the truncation edge does not contaminate the retained block.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    alpha = complex(alpha)
    _warn_truncation(alpha, cutoff)
    if alpha == 0:
        return np.eye(cutoff + 1, dtype=complex)
    a = annihilation_matrix(padded_dimension(cutoff) - 1)
    gen = alpha * a.conj().T - alpha.conjugate() * a
    return expm(gen)[: cutoff + 1, : cutoff + 1]


def coherent_amplitudes(alpha, n_max: int) -> np.ndarray:
    """<n|alpha> for n = 0..n_max; ``alpha`` may be an array (extra leading axes)."""
    alpha = np.asarray(alpha, dtype=complex)
    n = np.arange(n_max + 1)
    out = np.empty(alpha.shape + (n_max + 1,), dtype=complex)
    out[..., 0] = np.exp(-0.5 * np.abs(alpha) ** 2)
    # c_n = c_{n-1} alpha / sqrt(n): no factorial overflow
    for k in n[1:]:
        out[..., k] = out[..., k - 1] * alpha / math.sqrt(k)
    return out


def _coherent_log_weights(beta: complex, n: np.ndarray) -> np.ndarray:
    """log |<n|beta>|^2, valid for large n."""
    r2 = abs(beta) ** 2
    if r2 == 0:
        return np.where(n == 0, 0.0, -np.inf)
    return -r2 + n * math.log(r2) - gammaln(n + 1)


def _tail_probability(spec: StateSpec, cutoff: int) -> float:
    if spec.kind in ("vacuum", "fock"):
        return 0.0
    r2 = abs(spec.beta) ** 2
    n = np.arange(cutoff + 1, cutoff + 200 + int(8 * r2))
    logw = _coherent_log_weights(spec.beta, n)
    if spec.kind == "coherent":
        return float(np.exp(logw).sum())
    norm2 = 1.0 / (2.0 * (1.0 + math.exp(-2.0 * r2)))
    even = n % 2 == 0
    return float((4.0 * norm2 * np.exp(logw[even])).sum())


def make_state(spec: StateSpec | str, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
    """Build a normalized test state, refusing cutoffs that drop > 1e-12 probability."""
    if isinstance(spec, str):
        spec = StateSpec.parse(spec)
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    amps = np.zeros(cutoff + 1, dtype=complex)
    if spec.kind == "vacuum":
        amps[0] = 1.0
    elif spec.kind == "fock":
        if spec.n > cutoff:
            raise CutoffError(f"fock:{spec.n} exceeds cutoff {cutoff}")
        amps[spec.n] = 1.0
    else:
        tail = _tail_probability(spec, cutoff)
        if tail >= TAIL_TOLERANCE:
            raise CutoffError(
                f"cutoff too small: {spec} at cutoff {cutoff} discards probability {tail:.3g}"
            )
        amps = coherent_amplitudes(spec.beta, cutoff)
        if spec.kind == "cat":
            norm = (2.0 * (1.0 + math.exp(-2.0 * abs(spec.beta) ** 2))) ** -0.5
            parity = 1 + (-1.0) ** np.arange(cutoff + 1)
            amps = norm * parity * amps
    return FockVector(amps)


def as_density(state: FockVector | FieldDensity) -> FieldDensity:
    if isinstance(state, FieldDensity):
        return state
    return state.density()


def embed(state: FockVector | FieldDensity, cutoff: int) -> FieldDensity:
    """Zero-pad a state into a larger number basis."""
    rho = as_density(state)
    if cutoff < rho.cutoff:
        raise ValueError(f"cannot embed cutoff {rho.cutoff} into smaller cutoff {cutoff}")
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    out[: rho.cutoff + 1, : rho.cutoff + 1] = rho.matrix
    return FieldDensity(out)


def displaced_density(state: FockVector | FieldDensity, alpha: complex) -> FieldDensity:
    """D(alpha) rho D(alpha)^dag at the state's own cutoff."""
    rho = as_density(state)
    d = displacement_matrix(alpha, rho.cutoff)
    out = d @ rho.matrix @ d.conj().T
    return FieldDensity(0.5 * (out + out.conj().T))


def photon_distribution(rho: FieldDensity) -> np.ndarray:
    return np.diag(as_density(rho).matrix).real.copy()


def coherent_overlap(rho: FieldDensity | FockVector, alpha) -> float | np.ndarray:
    """<alpha|rho|alpha>; vectorized over an array of ``alpha``."""
    rho = as_density(rho)
    alpha_arr = np.asarray(alpha, dtype=complex)
    if alpha_arr.size:
        _warn_truncation(complex(alpha_arr.flat[np.argmax(np.abs(alpha_arr))]), rho.cutoff)
    c = coherent_amplitudes(alpha_arr, rho.cutoff)
    val = np.einsum("...n,nm,...m->...", c.conj(), rho.matrix, c).real
    if val.ndim == 0:
        return float(val)
    return val
