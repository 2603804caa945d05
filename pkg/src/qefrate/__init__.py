"""Growth rates, tail exponents and worst-case cost bounds of
quadratic-exponential functionals for stationary Gaussian quantum processes,
specialized to open quantum harmonic oscillators.

Three mutually cross-checking computation paths are provided: direct
frequency-domain quadrature (:mod:`qefrate.freqrate`), continuation in the
risk parameter (:mod:`qefrate.homotopy`), and finite-horizon determinants on a
time grid (:mod:`qefrate.horizon`), with Monte-Carlo and ladder-basis
validators in :mod:`qefrate.stochastic`.
"""

from . import errors
from .freqrate import (
    QuadConfig,
    RateResult,
    classical_rate,
    d_matrix,
    qef_rate,
    rate_derivative_at_zero,
    small_theta_rate,
)
from .homotopy import (
    HomotopyConfig,
    RiccatiPath,
    StepConfig,
    integrate_riccati,
    rate_via_homotopy,
    u_closed_form,
)
from .horizon import (
    DiscretizedOperators,
    EigenPair,
    TimeGrid,
    build_operators,
    bvp_residual,
    dump_eigenpairs_csv,
    eigenbasis,
    finite_horizon_log_qef,
)
from .model import (
    Admissibility,
    KernelSample,
    OqhoParams,
    SpectralModel,
    SpectralSample,
    StateSpace,
    admissibility,
    build_state_space,
    explicit_state_space,
    find_theta_max,
    kernels,
    load_model,
    spectral_density,
    state_space_model,
)
from .robust import TailBound, WorstCaseBound, tail_exponent, worst_case_bound
from .stochastic import McEstimate, fock_truncation_check, mc_log_qef

__version__ = "0.1.0"

__all__ = [
    "Admissibility",
    "DiscretizedOperators",
    "EigenPair",
    "HomotopyConfig",
    "KernelSample",
    "McEstimate",
    "OqhoParams",
    "QuadConfig",
    "RateResult",
    "RiccatiPath",
    "SpectralModel",
    "SpectralSample",
    "StateSpace",
    "StepConfig",
    "TailBound",
    "TimeGrid",
    "WorstCaseBound",
    "admissibility",
    "build_operators",
    "build_state_space",
    "bvp_residual",
    "classical_rate",
    "d_matrix",
    "dump_eigenpairs_csv",
    "eigenbasis",
    "errors",
    "explicit_state_space",
    "find_theta_max",
    "finite_horizon_log_qef",
    "fock_truncation_check",
    "integrate_riccati",
    "kernels",
    "load_model",
    "mc_log_qef",
    "qef_rate",
    "rate_derivative_at_zero",
    "rate_via_homotopy",
    "small_theta_rate",
    "spectral_density",
    "state_space_model",
    "tail_exponent",
    "u_closed_form",
    "worst_case_bound",
]
