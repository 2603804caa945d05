"""Infinite-horizon growth rate of the quadratic-exponential cost, computed by
frequency-domain quadrature, together with its classical limit, the small-theta
perturbation expansion and the derivative at zero.

The frequency integral runs over a certified range: an adaptive Gauss-Kronrod
pass over the feature region [0, lam0], a second pass in log-frequency over
[lam0, lam_cut], and an analytic bound on the remaining tail derived from the
quadratic resolvent decay of the spectral density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import matfun, model as model_mod
from .errors import GramianUnavailable, NotAdmissible, TailBoundFailure


@dataclass(frozen=True)
class QuadConfig:
    epsabs: float = 1e-11
    epsrel: float = 1e-10
    tail_tol: float = 1e-9
    limit: int = 200


@dataclass(frozen=True)
class RateResult:
    theta: float
    value: float
    method: str
    lambda_cut: float
    n_nodes: int
    est_quadrature_error: float
    admissibility_margin: float


def d_matrix(sample: model_mod.SpectralSample, theta: float) -> np.ndarray:
    """cos(theta Psi) - theta Phi sinc(theta Psi), sharing one eigh call."""
    cos_m, sinc_m, _ = matfun.skew_trig_bundle(sample.psi, theta)
    return cos_m - theta * sample.phi @ sinc_m


def _neg_log_det_d(sample: model_mod.SpectralSample, theta: float) -> float:
    """-ln det D through the LU route, with the realness sentinel active."""
    return -matfun.log_det_real(d_matrix(sample, theta))


def _neg_log_det_d_split(sample: model_mod.SpectralSample, theta: float) -> float:
    """-ln det D as -sum ln cosh - sum log1p, stable when D is within
    rounding of the identity (far frequency tail)."""
    eig = matfun.hermitian_eig(-1j * sample.psi)
    th = theta * eig.eigenvalues
    v = eig.eigenvectors
    w = (v * np.sqrt(matfun.tanhc(th))) @ v.conj().T
    nu = np.linalg.eigvalsh(w @ sample.phi @ w)
    x = theta * nu
    if np.any(x >= 1.0):
        raise NotAdmissible(
            f"1 - theta*lambda_max crossed zero at frequency {sample.lam}",
            margin=float(1.0 - x.max()))
    return -(float(np.sum(matfun.lncosh(th))) + float(np.sum(np.log1p(-x))))


def _two_region_quad(f, lam0: float, lam_cut: float, cfg: QuadConfig,
                     f_far=None):
    """Integrate an even integrand over [0, inf) as [0, lam0] plus a
    log-frequency panel [lam0, lam_cut]; the tail beyond lam_cut is the
    caller's to bound.  Returns (integral, abserr, neval)."""
    f_far = f_far or f
    total = 0.0
    err = 0.0
    neval = 0
    out = quad(f, 0.0, lam0, epsabs=cfg.epsabs, epsrel=cfg.epsrel,
               limit=cfg.limit, full_output=True)
    total += out[0]
    err += out[1]
    neval += out[2]["neval"]
    if lam_cut > lam0 * (1.0 + 1e-12):
        def g(u):
            lam = math.exp(u)
            return f_far(lam) * lam

        out = quad(g, math.log(lam0), math.log(lam_cut), epsabs=cfg.epsabs,
                   epsrel=cfg.epsrel, limit=cfg.limit, full_output=True)
        total += out[0]
        err += out[1]
        neval += out[2]["neval"]
    return total, err, neval


def _cut_frequencies(model: model_mod.SpectralModel, theta: float,
                     cfg: QuadConfig) -> tuple[float, float, float]:
    """(lam0, lam_cut, tail_bound) for the rate integral at this theta.

    Beyond lam_cut the integrand is bounded by 2 theta tr Phi pointwise (valid
    once theta lambda_max(Phi) <= 1/2 there), and the trace tail integrates to
    trace_tail_coeff / lam_cut.
    """
    lam0 = max(4.0 * model.scale, model.tail_valid_from, 1.0)
    if model.trace_tail_coeff <= 0.0:
        return lam0, lam0, 0.0
    if theta <= 0.0:
        return lam0, lam0, 0.0
    lam_cut = max(
        2.0 * lam0,
        math.sqrt(2.0 * theta * max(model.opnorm_tail_coeff, 1e-300)),
        theta * model.trace_tail_coeff / (math.pi * cfg.tail_tol),
    )
    if not math.isfinite(lam_cut):
        raise TailBoundFailure("could not certify a finite frequency cutoff")
    tail_bound = theta * model.trace_tail_coeff / (math.pi * lam_cut)
    return lam0, lam_cut, tail_bound


def _zero_rate(method: str, margin: float = 1.0) -> RateResult:
    return RateResult(theta=0.0, value=0.0, method=method, lambda_cut=0.0,
                      n_nodes=0, est_quadrature_error=0.0,
                      admissibility_margin=margin)


def qef_rate(obj, theta: float, quad_cfg: QuadConfig | None = None) -> RateResult:
    """Growth rate -(1/4pi) * integral of ln det D over all frequencies.

    Every main-panel integrand evaluation goes through the LU log-determinant
    with its imaginary-part sentinel; the far log-frequency panel switches to
    the split Hermitian evaluation, which stays accurate when the integrand
    falls below rounding of ln det.
    """
    cfg = quad_cfg or QuadConfig()
    if theta == 0.0:
        return _zero_rate("frequency")
    model = model_mod.as_spectral_model(obj)
    adm = model_mod.admissibility(model, theta)
    if not adm.admissible:
        raise NotAdmissible(
            f"margin {adm.margin:.3e} <= 0 at theta={theta}", margin=adm.margin)

    lam0, lam_cut, tail_bound = _cut_frequencies(model, theta, cfg)
    integral, abserr, neval = _two_region_quad(
        lambda lam: _neg_log_det_d(model.sample(lam), theta),
        lam0, lam_cut, cfg,
        f_far=lambda lam: _neg_log_det_d_split(model.sample(lam), theta))
    value = integral / (2.0 * math.pi)
    return RateResult(theta=float(theta), value=value, method="frequency",
                      lambda_cut=lam_cut, n_nodes=neval,
                      est_quadrature_error=abserr / (2.0 * math.pi) + tail_bound,
                      admissibility_margin=adm.margin)


def _neg_log_det_classical(sample: model_mod.SpectralSample, theta: float) -> float:
    nu = np.linalg.eigvalsh(sample.phi)
    x = theta * nu
    if np.any(x >= 1.0):
        raise NotAdmissible(
            f"1 - theta*lambda_max(Phi) crossed zero at frequency {sample.lam}",
            margin=float(1.0 - x.max()))
    return -float(np.sum(np.log1p(-x)))


def classical_rate(obj, theta: float,
                   quad_cfg: QuadConfig | None = None) -> RateResult:
    """Rate of the commuting-kernel limit: -(1/4pi) integral ln det(I - theta Phi)."""
    cfg = quad_cfg or QuadConfig()
    if theta == 0.0:
        return _zero_rate("classical")
    model = model_mod.as_spectral_model(obj)
    adm = model_mod.admissibility(model, theta)
    if theta >= adm.theta_star:
        raise NotAdmissible(
            f"theta={theta} >= classical threshold {adm.theta_star:.6g}",
            margin=1.0 - theta / adm.theta_star)

    lam0, lam_cut, tail_bound = _cut_frequencies(model, theta, cfg)
    integral, abserr, neval = _two_region_quad(
        lambda lam: _neg_log_det_classical(model.sample(lam), theta),
        lam0, lam_cut, cfg)
    return RateResult(theta=float(theta), value=integral / (2.0 * math.pi),
                      method="classical", lambda_cut=lam_cut, n_nodes=neval,
                      est_quadrature_error=abserr / (2.0 * math.pi) + tail_bound,
                      admissibility_margin=adm.margin)


def small_theta_rate(obj, theta: float,
                     quad_cfg: QuadConfig | None = None) -> RateResult:
    """Classical rate plus the quadratic commutator correction.

    The correction integrand Tr((I - theta Phi)^{-1} (I - theta Phi / 3) Psi^2)
    is real and nonpositive (Psi^2 is negative semi-definite), which makes the
    result an under-approximation of the classical rate; the neglected error
    is of third order in theta.
    """
    cfg = quad_cfg or QuadConfig()
    if theta == 0.0:
        return _zero_rate("small_theta")
    model = model_mod.as_spectral_model(obj)
    classical = classical_rate(model, theta, cfg)

    n = model.dim
    eye = np.eye(n)

    def correction(lam: float) -> float:
        sample = model.sample(lam)
        psi2 = sample.psi @ sample.psi
        m = np.linalg.solve(eye - theta * sample.phi,
                            eye - (theta / 3.0) * sample.phi)
        return float(np.trace(m @ psi2).real)

    lam0, lam_cut, _ = _cut_frequencies(model, theta, cfg)
    integral, abserr, neval = _two_region_quad(correction, lam0, lam_cut, cfg)
    corr = theta**2 / (4.0 * math.pi) * integral
    return RateResult(
        theta=float(theta), value=classical.value + corr, method="small_theta",
        lambda_cut=lam_cut, n_nodes=classical.n_nodes + neval,
        est_quadrature_error=(classical.est_quadrature_error
                              + theta**2 / (4.0 * math.pi) * abserr),
        admissibility_margin=classical.admissibility_margin)


def rate_derivative_at_zero(obj, quad_cfg: QuadConfig | None = None) -> float:
    """d(rate)/d(theta) at theta = 0, which is half the mean-square output rate.

    For state-space models this equals Tr(S Gamma S^T) / 2 through the
    Gramian; the frequency integral of Tr Phi / (4 pi) is evaluated as well
    and the two must agree within quadrature accuracy.  Sampler-only models
    return the quadrature value.
    """
    cfg = quad_cfg or QuadConfig()
    model = model_mod.as_spectral_model(obj)

    def trace_phi(lam: float) -> float:
        return float(np.trace(model.sample(lam).phi).real)

    lam0 = max(4.0 * model.scale, model.tail_valid_from, 1.0)
    if model.trace_tail_coeff > 0.0:
        lam_cut = max(2.0 * lam0, model.trace_tail_coeff / (2.0 * math.pi * cfg.tail_tol))
        tail_bound = model.trace_tail_coeff / (2.0 * math.pi * lam_cut)
    else:
        lam_cut, tail_bound = lam0, 0.0
    integral, abserr, _ = _two_region_quad(trace_phi, lam0, lam_cut, cfg)
    by_quadrature = integral / (2.0 * math.pi)

    ss = model.state_space
    if ss is None:
        return by_quadrature
    if ss.gamma is None:
        raise GramianUnavailable("derivative at zero needs the Gramian")
    exact = 0.5 * float(np.trace(ss.s @ ss.gamma @ ss.s.T))
    budget = abserr / (2.0 * math.pi) + tail_bound + 1e-7 * (1.0 + abs(exact))
    if abs(exact - by_quadrature) > budget:
        raise TailBoundFailure(
            f"Gramian value {exact:.12g} and quadrature value "
            f"{by_quadrature:.12g} disagree beyond {budget:.3e}")
    return exact
