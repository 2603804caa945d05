"""Randomised validators for the closed-form cost expressions.

Two independent checks live here: a Monte-Carlo estimate of the finite-horizon
quadratic-exponential cost through the auxiliary Gaussian increment process
(whose covariance is the tanc-transformed commutator operator), and a
deterministic quadrature verification of the elementary position-momentum
exponential identity on a truncated ladder-operator basis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import horizon, matfun, model as model_mod
from .errors import (
    DegenerateSamples,
    FactorizationFailure,
    SpectralConditionViolated,
    TruncationTooSmall,
)

logger = logging.getLogger(__name__)

_CLIP_TOL = 1e-10
_MIN_EFFECTIVE_SAMPLES = 16.0


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int


def _increment_factor(ops: horizon.DiscretizedOperators) -> np.ndarray:
    """Real factor F with F F^T = K * dt, via eigendecomposition of K.

    Eigen-factorization is used instead of a triangular factorization because
    near-zero eigenvalues appear on fine grids; negatives within tolerance are
    clipped to zero with a logged warning.
    """
    k = ops.k_theta
    kappa, vecs = np.linalg.eigh(0.5 * (k + k.T))
    floor = -_CLIP_TOL * max(kappa[-1], 1.0)
    if kappa[0] < floor:
        raise FactorizationFailure(
            f"increment covariance has eigenvalue {kappa[0]:.3e} below {floor:.3e}")
    if kappa[0] < 0.0:
        logger.warning("clipping %d negative covariance eigenvalues (min %.3e)",
                       int(np.sum(kappa < 0)), kappa[0])
        kappa = np.clip(kappa, 0.0, None)
    return vecs * np.sqrt(kappa * ops.grid.dt)


def mc_log_qef(ss: model_mod.StateSpace, grid: horizon.TimeGrid, theta: float,
               mu=None, n_samples: int = 100_000, seed: int = 0,
               batch_size: int = 20_000,
               ops: horizon.DiscretizedOperators | None = None) -> McEstimate:
    """Monte-Carlo estimate of the finite-horizon log cost.

    Samples the increment vectors of the auxiliary Gaussian process, evaluates
    ln of the sample mean of exp(sqrt(theta) sum mu^T dZ + (theta/2) double
    sum dZ^T P dZ) with a log-sum-exp reduction, and restores the
    deterministic eigenfrequency prefactor.  The standard error comes from the
    delta method applied to the sample mean.
    """
    if theta == 0.0:
        return McEstimate(value=0.0, stderr=0.0, n_samples=int(n_samples),
                          seed=int(seed))
    if ops is None:
        ops = horizon.build_operators(ss, grid, theta)
    lam_pk = horizon.pk_eigenvalues(ops)
    if theta * lam_pk[-1] >= 1.0:
        raise SpectralConditionViolated(
            f"theta * rho(P K) = {theta * lam_pk[-1]:.6g} >= 1",
            spectral_radius=float(lam_pk[-1]))

    factor = _increment_factor(ops)
    p_kernel = ops.p / ops.grid.dt
    mu_vec = None
    if mu is not None:
        mu_vec = horizon._mean_samples(mu, grid, ops.block_dim).reshape(-1)

    rng = np.random.default_rng(seed)
    dim = factor.shape[0]
    exponents = np.empty(n_samples)
    done = 0
    while done < n_samples:
        batch = min(batch_size, n_samples - done)
        dz = rng.standard_normal((batch, dim)) @ factor.T
        e = 0.5 * theta * np.einsum("bi,ij,bj->b", dz, p_kernel, dz)
        if mu_vec is not None:
            e += np.sqrt(theta) * dz @ mu_vec
        exponents[done:done + batch] = e
        done += batch

    shift = float(np.max(exponents))
    if not np.isfinite(shift):
        raise DegenerateSamples("exponent overflowed; theta is too close to "
                                "the spectral bound")
    weights = np.exp(exponents - shift)
    mean_w = float(np.mean(weights))
    ess = float(np.sum(weights)) ** 2 / float(np.sum(weights**2))
    if ess < _MIN_EFFECTIVE_SAMPLES:
        raise DegenerateSamples(
            f"effective sample size {ess:.1f} is too small; theta is too "
            f"close to the spectral bound")

    cosh_term = 0.5 * float(np.sum(matfun.lncosh(theta * ops.il_eigenvalues)))
    value = -cosh_term + shift + np.log(mean_w)
    stderr = float(np.std(weights, ddof=1)) / (mean_w * np.sqrt(n_samples))
    return McEstimate(value=float(value), stderr=stderr,
                      n_samples=int(n_samples), seed=int(seed))


def ladder_position_momentum(n_trunc: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated position and momentum matrices from the ladder construction.

    [xi, eta] = i I except in the bottom-right corner where the truncation
    bites, so comparisons must stay in the upper-left block.
    """
    ladder = np.zeros((n_trunc, n_trunc))
    root = np.sqrt(np.arange(1, n_trunc))
    ladder[np.arange(n_trunc - 1), np.arange(1, n_trunc)] = root
    xi = (ladder + ladder.T) / np.sqrt(2.0)
    eta = 1j * (ladder.T - ladder) / np.sqrt(2.0)
    return xi.astype(complex), eta


def _expm_hermitian(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(w)) @ v.conj().T, (v * np.exp(-w)) @ v.conj().T


def fock_truncation_check(omega: float, n_trunc: int,
                          quad_order: int) -> tuple[float, float]:
    """Verify exp(omega (xi^2 + eta^2)) against its Gaussian-average form.

    The right-hand side averages exp(sigma (a xi + b eta)) with sigma =
    sqrt(2 tanh omega) over a standard normal (a, b), evaluated here by tensor
    Gauss-Hermite quadrature (the average is an exact Gaussian integral, so
    deterministic quadrature keeps statistical noise out of the comparison).
    Returns the max entrywise error over the upper-left block of size
    n_trunc // 4, where truncation artifacts from the ladder edge are
    negligible, together with the sigma used.
    """
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    if n_trunc < 20:
        raise ValueError("n_trunc must be at least 20")
    if quad_order < 20:
        raise ValueError("quad_order must be at least 20")
    sigma = float(np.sqrt(2.0 * np.tanh(omega)))

    xi, eta = ladder_position_momentum(n_trunc)
    lhs, _ = _expm_hermitian(omega * (xi @ xi + eta @ eta))

    nodes, weights = np.polynomial.hermite.hermgauss(quad_order)
    total = np.zeros((n_trunc, n_trunc), dtype=complex)
    seen = np.zeros((quad_order, quad_order), dtype=bool)
    for i in range(quad_order):
        for j in range(quad_order):
            if seen[i, j]:
                continue
            h = sigma * np.sqrt(2.0) * (nodes[i] * xi + nodes[j] * eta)
            plus, minus = _expm_hermitian(h)
            total += weights[i] * weights[j] * plus
            seen[i, j] = True
            i2, j2 = quad_order - 1 - i, quad_order - 1 - j
            if not seen[i2, j2]:
                # mirrored node pair: same matrix with the opposite sign
                total += weights[i2] * weights[j2] * minus
                seen[i2, j2] = True
    rhs = total / (np.pi * np.cosh(omega))

    block = max(n_trunc // 4, 1)
    diff = np.abs(lhs[:block, :block] - rhs[:block, :block])
    max_block_error = float(diff.max())

    # Edge contamination shows up as error piling against the block boundary.
    inner = max(block // 2, 1)
    inner_err = float(diff[:inner, :inner].max())
    if max_block_error > 1e-6 and max_block_error > 50.0 * max(inner_err, 1e-15):
        raise TruncationTooSmall(
            f"error {max_block_error:.3e} concentrates at the block edge "
            f"(inner {inner_err:.3e}); increase n_trunc")
    return max_block_error, sigma
