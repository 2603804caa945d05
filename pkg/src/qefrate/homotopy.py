"""Rate computation by continuation in the risk parameter.

Per frequency, the logarithmic derivative of the determinant matrix satisfies
the matrix Riccati equation dU/dtheta = Psi^2 + U^2 with U(0) = Phi; the rate
is recovered by integrating Tr U over frequency and then over theta.  This
provides a computation path independent of the direct log-determinant
quadrature, which the two cross-check against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import freqrate, matfun, model as model_mod
from .errors import BlowUp, HermitianDriftError, NotAdmissible, SingularPencil


@dataclass(frozen=True)
class StepConfig:
    step_tol: float = 1e-9          # local error budget per unit theta
    h_initial: float = 0.05
    h_min: float = 1e-10
    norm_ceiling: float = 1e8
    hermitian_drift_max: float = 1e-6


@dataclass(frozen=True)
class HomotopyConfig:
    theta_quad_order: int = 24
    quad: freqrate.QuadConfig = field(default_factory=freqrate.QuadConfig)
    step: StepConfig = field(default_factory=StepConfig)


@dataclass(frozen=True)
class RiccatiPath:
    """One continuation path in theta at a fixed frequency."""

    lam: float
    theta_nodes: np.ndarray
    u_nodes: list[np.ndarray]
    max_step_error: float
    max_hermitian_drift: float

    def at(self, theta: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.theta_nodes - theta)))
        if abs(self.theta_nodes[idx] - theta) > 1e-12 * (1.0 + abs(theta)):
            raise KeyError(f"theta={theta} was not recorded on this path")
        return self.u_nodes[idx]


def u_closed_form(sample: model_mod.SpectralSample, theta: float) -> np.ndarray:
    """Continuation variable in closed form at one (frequency, theta) point.

    U = (cos(theta Psi) - theta Phi sinc(theta Psi))^{-1} (Phi cos(theta Psi)
    + Psi sin(theta Psi)).  The pencil equals the determinant matrix D, so
    this stays well defined when Psi is singular; the result is Hermitian on
    the admissible range.
    """
    cos_m, sinc_m, sin_m = matfun.skew_trig_bundle(sample.psi, theta)
    pencil = cos_m - theta * sample.phi @ sinc_m
    rhs = sample.phi @ cos_m + sample.psi @ sin_m
    try:
        u = np.linalg.solve(pencil, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularPencil(
            f"pencil singular at lam={sample.lam}, theta={theta}") from exc
    if not np.all(np.isfinite(u)):
        raise SingularPencil(
            f"pencil solve returned non-finite values at lam={sample.lam}")
    return u


def _rk4_step(u: np.ndarray, psi2: np.ndarray, h: float) -> np.ndarray:
    k1 = psi2 + u @ u
    u2 = u + 0.5 * h * k1
    k2 = psi2 + u2 @ u2
    u3 = u + 0.5 * h * k2
    k3 = psi2 + u3 @ u3
    u4 = u + h * k3
    k4 = psi2 + u4 @ u4
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_riccati(
    sample: model_mod.SpectralSample,
    theta_max: float,
    step_cfg: StepConfig | None = None,
    record_at=None,
) -> RiccatiPath:
    """Integrate dU/dtheta = Psi^2 + U^2 from U(0) = Phi up to theta_max.

    Classic fourth-order Runge-Kutta with step-doubling error control; each
    accepted state is re-Hermitized, with the drift recorded rather than
    silently discarded.  A norm blow-up means theta crossed the admissibility
    boundary, where the pencil becomes singular.
    """
    cfg = step_cfg or StepConfig()
    psi2 = np.asarray(sample.psi @ sample.psi, dtype=complex)
    u = np.asarray(sample.phi, dtype=complex).copy()

    record_at = [] if record_at is None else record_at
    targets = sorted(set(float(t) for t in record_at) | {float(theta_max)})
    if any(t < 0 or t > theta_max + 1e-15 for t in targets):
        raise ValueError("record_at values must lie in [0, theta_max]")

    thetas = [0.0]
    states = [u.copy()]
    max_err = 0.0
    max_drift = 0.0
    t = 0.0
    h = min(cfg.h_initial, theta_max) if theta_max > 0 else 0.0

    for target in targets:
        if target <= 0.0:
            continue
        while t < target - 1e-15:
            h = min(h, target - t)
            if h < cfg.h_min:
                h = cfg.h_min
            one = _rk4_step(u, psi2, h)
            half = _rk4_step(_rk4_step(u, psi2, 0.5 * h), psi2, 0.5 * h)
            err = float(np.linalg.norm(one - half)) / 15.0
            budget = cfg.step_tol * h
            if err <= budget or h <= cfg.h_min * 1.0000001:
                t += h
                u = half
                norm_u = float(np.linalg.norm(u))
                if not np.isfinite(norm_u) or norm_u > cfg.norm_ceiling:
                    raise BlowUp(
                        f"||U|| exceeded {cfg.norm_ceiling:.1e} at theta={t:.6g}, "
                        f"lam={sample.lam}; theta crossed the admissibility boundary")
                drift = float(np.linalg.norm(u - u.conj().T)) / max(norm_u, 1.0)
                if drift > cfg.hermitian_drift_max:
                    raise HermitianDriftError(
                        f"Hermitian drift {drift:.3e} at theta={t:.6g}, "
                        f"lam={sample.lam}")
                u = 0.5 * (u + u.conj().T)
                max_drift = max(max_drift, drift)
                max_err = max(max_err, err)
                thetas.append(t)
                states.append(u.copy())
            if err > 0:
                h *= min(4.0, max(0.2, 0.9 * (budget / err) ** 0.25))
            else:
                h *= 4.0

    return RiccatiPath(lam=sample.lam, theta_nodes=np.asarray(thetas),
                       u_nodes=states, max_step_error=max_err,
                       max_hermitian_drift=max_drift)


def rate_via_homotopy(obj, theta: float,
                      grid_cfg: HomotopyConfig | None = None) -> freqrate.RateResult:
    """Rate recovered as the (frequency x theta) double integral of Tr U / 4 pi.

    The inner theta integral uses Gauss-Legendre nodes fed by one Riccati path
    per frequency; the outer frequency integral reuses the same certified
    cutoff machinery as the direct quadrature path, so discrepancies between
    the two methods isolate the continuation error.
    """
    cfg = grid_cfg or HomotopyConfig()
    if theta == 0.0:
        return freqrate.RateResult(theta=0.0, value=0.0, method="homotopy",
                                   lambda_cut=0.0, n_nodes=0,
                                   est_quadrature_error=0.0,
                                   admissibility_margin=1.0)
    model = model_mod.as_spectral_model(obj)
    adm = model_mod.admissibility(model, theta)
    if not adm.admissible:
        raise NotAdmissible(
            f"margin {adm.margin:.3e} <= 0 at theta={theta}", margin=adm.margin)

    x, w = np.polynomial.legendre.leggauss(cfg.theta_quad_order)
    v_nodes = 0.5 * theta * (x + 1.0)
    v_weights = 0.5 * theta * w

    def theta_integral_of_trace(lam: float) -> float:
        path = integrate_riccati(model.sample(lam), theta, cfg.step,
                                 record_at=v_nodes)
        traces = np.array([float(np.trace(path.at(v)).real) for v in v_nodes])
        return float(v_weights @ traces)

    lam0, lam_cut, tail_bound = freqrate._cut_frequencies(model, theta, cfg.quad)
    integral, abserr, neval = freqrate._two_region_quad(
        theta_integral_of_trace, lam0, lam_cut, cfg.quad)
    return freqrate.RateResult(
        theta=float(theta), value=integral / (2.0 * math.pi), method="homotopy",
        lambda_cut=lam_cut, n_nodes=neval,
        est_quadrature_error=abserr / (2.0 * math.pi) + tail_bound,
        admissibility_margin=adm.margin)
