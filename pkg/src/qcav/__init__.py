"""Dispersive atom-field dynamics in a lossy cavity and direct Q-function measurement."""

from .closed import (
    MAGIC_TAU,
    critical_eta,
    measured_sigma_x,
    mu_curve,
    mu_formula,
    phase_factor,
    reconstruct_q_point,
    sigma_x_closed,
    sigma_x_double_sum,
    sigma_x_lossless,
    theta_formula,
)
from .fock import (
    FieldDensity,
    FockVector,
    StateSpec,
    TruncationWarning,
    annihilation_matrix,
    coherent_overlap,
    displacement_matrix,
    make_state,
    photon_distribution,
)
from .oracle import (
    FullParams,
    JointDensity,
    full_jc_evolve,
    integrate_rk4,
    joint_initial,
    lindblad_rhs,
    sigma_x_expectation,
    superop_evolve,
)
from .quasiprob import PhaseGrid, q_direct, q_from_wigner_convolution, sample_grid, wigner_direct

__version__ = "0.1.0"
