"""Exact Q and Wigner functions of a field state, and phase-space grids.

Conventions: Q(alpha) = <alpha|rho|alpha>/pi and W normalized so that
its integral over d^2 alpha is one (vacuum W(0) = 2/pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fock import FieldDensity, FockVector, as_density, coherent_overlap, _warn_truncation


class GridError(ValueError):
    pass


class GridEvaluationError(RuntimeError):
    """An evaluator failed at a specific grid point."""

    def __init__(self, alpha: complex, cause: Exception):
        super().__init__(f"evaluation failed at alpha = {alpha.real!r}{alpha.imag:+}j: {cause}")
        self.alpha = alpha


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise GridError(f"grid needs at least 2 steps per axis, got {self.steps}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi <= self.lo:
            raise GridError(f"grid bounds must satisfy min < max, got {self.lo}:{self.hi}")

    @classmethod
    def parse(cls, text: str) -> "Axis":
        parts = text.split(":")
        if len(parts) != 3:
            raise GridError(f"grid spec {text!r} is not <min>:<max>:<steps>")
        try:
            lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise GridError(f"grid spec {text!r} is not <min>:<max>:<steps>") from None
        return cls(lo, hi, steps)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.steps - 1)

    def points(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.steps)


@dataclass(frozen=True)
class PhaseGrid:
    """Real values sampled on a uniform grid; ``values[i, j]`` sits at re[i] + 1j*im[j]."""

    re: Axis
    im: Axis
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.re.steps, self.im.steps):
            raise GridError(f"values shape {vals.shape} does not match grid")
        if not np.all(np.isfinite(vals)):
            raise GridError("grid values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def alphas(self) -> np.ndarray:
        return grid_points(self.re, self.im)

    def integral(self) -> float:
        """Trapezoid-rule integral over d^2 alpha = d(re) d(im)."""
        inner = np.trapezoid(self.values, dx=self.im.spacing, axis=1)
        return float(np.trapezoid(inner, dx=self.re.spacing))


def grid_points(re: Axis, im: Axis) -> np.ndarray:
    x, y = np.meshgrid(re.points(), im.points(), indexing="ij")
    return x + 1j * y


def q_direct(rho: FieldDensity | FockVector, alpha):
    """Husimi Q(alpha) = <alpha|rho|alpha>/pi; vectorized over ``alpha``."""
    return coherent_overlap(rho, alpha) / math.pi


def wigner_direct(rho: FieldDensity | FockVector, alpha):
    """Wigner function from the number-basis matrix elements of rho.

    Uses the recursion for the phase-space functions of |m><n| (Laguerre
    polynomials in closed form), so no displacement operator is involved.
    Vectorized over ``alpha``.
    """
    rho = as_density(rho)
    mat = rho.matrix
    dim = rho.cutoff + 1
    a = np.asarray(alpha, dtype=complex)
    if a.size:
        _warn_truncation(complex(a.flat[np.argmax(np.abs(a))]), rho.cutoff)
    a2 = 2.0 * a
    ca2 = a2.conj()

    # wl[n] holds the function of |m><n| for the current row m
    wl = np.empty((dim,) + a.shape, dtype=complex)
    wl[0] = (2.0 / math.pi) * np.exp(-2.0 * np.abs(a) ** 2)
    w = mat[0, 0].real * wl[0].real
    for n in range(1, dim):
        wl[n] = a2 * wl[n - 1] / math.sqrt(n)
        w = w + 2.0 * (mat[0, n] * wl[n]).real
    for m in range(1, dim):
        sm = math.sqrt(m)
        prev = wl[m].copy()
        wl[m] = (ca2 * prev - sm * wl[m - 1]) / sm
        w = w + (mat[m, m] * wl[m]).real
        for n in range(m + 1, dim):
            new = (a2 * wl[n - 1] - sm * prev) / math.sqrt(n)
            prev = wl[n].copy()
            wl[n] = new
            w = w + 2.0 * (mat[m, n] * wl[n]).real
    if np.ndim(w) == 0:
        return float(w)
    return w


def sample_grid(
    f: Callable, re: Axis, im: Axis | None = None, *, vectorized: bool = False
) -> PhaseGrid:
    """Evaluate ``f(alpha)`` on every grid point.

    With ``vectorized=True`` ``f`` receives the whole complex mesh at once.
    """
    im = re if im is None else im
    pts = grid_points(re, im)
    if vectorized:
        values = np.broadcast_to(np.asarray(f(pts), dtype=float), pts.shape)
        return PhaseGrid(re, im, values)
    values = np.empty(pts.shape)
    for idx, alpha in np.ndenumerate(pts):
        try:
            values[idx] = f(complex(alpha))
        except Exception as exc:
            raise GridEvaluationError(complex(alpha), exc) from exc
    return PhaseGrid(re, im, values)


def q_from_wigner_convolution(w: PhaseGrid, alpha: complex) -> float:
    """Q(alpha) = (2/pi) * integral of W(beta) exp(-2|alpha - beta|^2) d^2 beta.

    The grid must contain the origin-centred disk of radius |alpha| + 3
    (which holds the kernel footprint around alpha) at spacing <= 0.1.
    """
    alpha = complex(alpha)
    spacing = max(w.re.spacing, w.im.spacing)
    if spacing > 0.1 + 1e-12:
        raise GridError(f"convolution domain too small: grid spacing {spacing:.3g} > 0.1")
    radius = abs(alpha) + 3.0
    if (
        w.re.lo > -radius
        or w.re.hi < radius
        or w.im.lo > -radius
        or w.im.hi < radius
    ):
        raise GridError(
            f"convolution domain too small: grid must cover |beta| <= {radius:.3g}"
        )
    beta = w.alphas()
    kernel = (2.0 / math.pi) * np.exp(-2.0 * np.abs(alpha - beta) ** 2)
    return PhaseGrid(w.re, w.im, w.values * kernel).integral()
