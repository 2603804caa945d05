"""Oscillator models: state-space construction, kernels and spectral data.

A model enters the rate pipeline either as a :class:`StateSpace` built from
physical oscillator parameters, or as a user-supplied sampler of the spectral
pair (Phi, Psi).  Both are wrapped in a :class:`SpectralModel`, which carries
the decay metadata the quadrature code needs for certified frequency cutoffs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import matfun
from .errors import (
    GramianUnavailable,
    GridTooCoarse,
    InvalidParams,
    NotHurwitz,
    SingularResolvent,
)

BJ = np.array([[0.0, 1.0], [-1.0, 0.0]])

_SYM_TOL = 1e-9


def _as_matrix(value, name: str) -> np.ndarray:
    try:
        mat = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidParams(f"{name} is not numeric", field=name) from exc
    if mat.ndim != 2:
        raise InvalidParams(f"{name} must be a 2-d matrix", field=name)
    if not np.all(np.isfinite(mat)):
        raise InvalidParams(f"{name} contains non-finite entries", field=name)
    return mat


@dataclass(frozen=True)
class OqhoParams:
    """Physical parameters of an open quantum harmonic oscillator.

    theta: CCR matrix (real antisymmetric, nu x nu)
    r:     energy matrix (real symmetric, nu x nu)
    m:     field coupling matrix (real m x nu, m even)
    s:     output weighting matrix (real n x nu, full row rank)
    """

    theta: np.ndarray
    r: np.ndarray
    m: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        theta = _as_matrix(self.theta, "theta")
        r = _as_matrix(self.r, "r_matrix")
        m = _as_matrix(self.m, "m_matrix")
        s = _as_matrix(self.s, "s_matrix")
        nu = theta.shape[0]
        if theta.shape != (nu, nu):
            raise InvalidParams("theta must be square", field="theta")
        scale = max(np.linalg.norm(theta), 1.0)
        if np.linalg.norm(theta + theta.T) > _SYM_TOL * scale:
            raise InvalidParams("theta must be antisymmetric", field="theta")
        if r.shape != (nu, nu):
            raise InvalidParams(f"r_matrix must be {nu}x{nu}", field="r_matrix")
        if np.linalg.norm(r - r.T) > _SYM_TOL * max(np.linalg.norm(r), 1.0):
            raise InvalidParams("r_matrix must be symmetric", field="r_matrix")
        if m.shape[1] != nu:
            raise InvalidParams(f"m_matrix must have {nu} columns", field="m_matrix")
        if m.shape[0] % 2 != 0:
            raise InvalidParams("m_matrix must have an even number of rows",
                                field="m_matrix")
        if s.shape[1] != nu:
            raise InvalidParams(f"s_matrix must have {nu} columns", field="s_matrix")
        if s.shape[0] > nu:
            raise InvalidParams("s_matrix cannot have more rows than theta",
                                field="s_matrix")
        if np.linalg.matrix_rank(s) < s.shape[0]:
            raise InvalidParams("s_matrix must have full row rank", field="s_matrix")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "s", s)

    @property
    def nu(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class StateSpace:
    """Derived state-space data of a stationary oscillator model.

    gamma is the controllability Gramian (steady-state real covariance of the
    internal variables); it is None when the drift is not Hurwitz.
    """

    a: np.ndarray
    b: np.ndarray
    s: np.ndarray
    theta: np.ndarray
    j: np.ndarray
    mho: np.ndarray
    gamma: np.ndarray | None
    hurwitz: bool
    pr_residual: float
    spectral_abscissa: float

    @property
    def nu(self) -> int:
        return self.a.shape[0]

    @property
    def n_out(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True)
class SpectralSample:
    """Spectral pair at one frequency: Phi Hermitian PSD, Psi skew-Hermitian."""

    lam: float
    phi: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class KernelSample:
    """Covariance kernel P and commutator kernel Lambda at one time lag."""

    tau: float
    p: np.ndarray | None
    lam: np.ndarray


def field_coupling_ccr(m_rows: int) -> np.ndarray:
    """The block CCR matrix of an m-channel bosonic field (m even)."""
    return np.kron(BJ, np.eye(m_rows // 2))


def _finish_state_space(a, b, s, theta, j) -> StateSpace:
    mho = b @ j @ b.T
    pr_residual = float(np.linalg.norm(a @ theta + theta @ a.T + mho))
    hurwitz, abscissa = matfun.stability_and_radius(a)
    gamma = matfun.solve_lyapunov(a, b @ b.T) if hurwitz else None
    return StateSpace(a=a, b=b, s=s, theta=theta, j=j, mho=mho, gamma=gamma,
                      hurwitz=hurwitz, pr_residual=pr_residual,
                      spectral_abscissa=abscissa)


def build_state_space(params: OqhoParams) -> StateSpace:
    """Assemble the drift, input and commutator matrices of the oscillator.

    The construction guarantees the physical-realizability identity
    A Theta + Theta A^T + B J B^T = 0 up to rounding; the residual is stored.
    """
    j = field_coupling_ccr(params.m.shape[0])
    a = 2.0 * params.theta @ (params.r + params.m.T @ j @ params.m)
    b = 2.0 * params.theta @ params.m.T
    return _finish_state_space(a, b, params.s, params.theta, j)


def explicit_state_space(a, b, s, theta) -> StateSpace:
    """Wrap user-supplied (A, B, S, Theta) without the oscillator parameterisation.

    No physical-realizability or rank enforcement: this entry point exists for
    classical-limit studies and deliberately degenerate output maps.  The PR
    residual is computed and recorded; when it is not small, the time-domain
    kernels (driven by Theta) and the frequency-domain pair (driven by
    B J B^T) describe different processes, which is the caller's lookout.
    """
    a = _as_matrix(a, "a_matrix")
    b = _as_matrix(b, "b_matrix")
    s = _as_matrix(s, "s_matrix")
    theta = _as_matrix(theta, "theta_matrix")
    nu = a.shape[0]
    if a.shape != (nu, nu) or theta.shape != (nu, nu):
        raise InvalidParams("a_matrix and theta_matrix must be square of equal size",
                            field="a_matrix")
    if b.shape[0] != nu:
        raise InvalidParams(f"b_matrix must have {nu} rows", field="b_matrix")
    if b.shape[1] % 2 != 0:
        raise InvalidParams("b_matrix must have an even number of columns",
                            field="b_matrix")
    if s.shape[1] != nu:
        raise InvalidParams(f"s_matrix must have {nu} columns", field="s_matrix")
    j = field_coupling_ccr(b.shape[1])
    return _finish_state_space(a, b, s, theta, j)


def kernels(ss: StateSpace, tau: float) -> KernelSample:
    """Covariance and commutator kernels of the output process at lag tau.

    Lambda(tau) = S e^{tau A} Theta S^T for tau >= 0 and the transposed-negated
    continuation for tau < 0; P(tau) is the same expression with the Gramian in
    place of Theta, and needs the model to be stable.
    """
    if tau >= 0:
        e = sla.expm(tau * ss.a)
        lam = ss.s @ e @ ss.theta @ ss.s.T
        p = ss.s @ e @ ss.gamma @ ss.s.T if ss.gamma is not None else None
    else:
        e = sla.expm(-tau * ss.a.T)
        lam = ss.s @ ss.theta @ e @ ss.s.T
        p = ss.s @ ss.gamma @ e @ ss.s.T if ss.gamma is not None else None
    return KernelSample(tau=float(tau), p=p, lam=lam)


def covariance_kernel(ss: StateSpace, tau: float) -> np.ndarray:
    sample = kernels(ss, tau)
    if sample.p is None:
        raise GramianUnavailable("covariance kernel needs a Hurwitz drift")
    return sample.p


def spectral_density(ss: StateSpace, lam: float) -> SpectralSample:
    """Fourier pair (Phi, Psi) of the output kernels at frequency lam."""
    if not ss.hurwitz:
        raise NotHurwitz("spectral density needs a Hurwitz drift")
    nu = ss.nu
    try:
        resolvent = np.linalg.solve(1j * lam * np.eye(nu) - ss.a,
                                    np.eye(nu, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularResolvent(f"resolvent singular at frequency {lam}") from exc
    f = ss.s @ resolvent
    fh = f.conj().T
    phi = f @ (ss.b @ ss.b.T) @ fh
    psi = f @ ss.mho @ fh
    phi = 0.5 * (phi + phi.conj().T)
    psi = 0.5 * (psi - psi.conj().T)
    return SpectralSample(lam=float(lam), phi=phi, psi=psi)


class SpectralModel:
    """Sampler of (Phi, Psi) plus the decay metadata used for certified tails.

    trace_tail_coeff bounds tr Phi(lam) <= c / lam^2 for lam >= tail_valid_from,
    and similarly opnorm_tail_coeff for the largest eigenvalue of Phi and
    psi_opnorm_tail_coeff for the norm of Psi.  scale is the characteristic
    frequency of the spectral features.
    """

    def __init__(self, phi_psi: Callable[[float], tuple[np.ndarray, np.ndarray]],
                 dim: int, trace_tail_coeff: float, opnorm_tail_coeff: float,
                 tail_valid_from: float, scale: float,
                 psi_opnorm_tail_coeff: float = 0.0,
                 state_space: StateSpace | None = None):
        self._phi_psi = phi_psi
        self.dim = int(dim)
        self.trace_tail_coeff = float(trace_tail_coeff)
        self.opnorm_tail_coeff = float(opnorm_tail_coeff)
        self.psi_opnorm_tail_coeff = float(psi_opnorm_tail_coeff)
        self.tail_valid_from = float(tail_valid_from)
        self.scale = float(scale)
        self.state_space = state_space

    def sample(self, lam: float) -> SpectralSample:
        phi, psi = self._phi_psi(lam)
        return SpectralSample(lam=float(lam),
                              phi=np.asarray(phi, dtype=complex),
                              psi=np.asarray(psi, dtype=complex))


def state_space_model(ss: StateSpace) -> SpectralModel:
    """Spectral model of a stable state-space system, with resolvent-based tails.

    For lam >= 2 ||A||, the resolvent norm is at most 2 / lam, which gives the
    quadratic-decay coefficients used to certify frequency cutoffs.
    """
    if not ss.hurwitz:
        raise NotHurwitz("spectral model needs a Hurwitz drift")
    s_norm = np.linalg.norm(ss.s, 2)
    a_norm = np.linalg.norm(ss.a, 2)
    bbt_norm = np.linalg.norm(ss.b @ ss.b.T, 2)
    mho_norm = np.linalg.norm(ss.mho, 2)
    c_op = 4.0 * s_norm**2 * bbt_norm
    n = ss.n_out

    def phi_psi(lam: float):
        sample = spectral_density(ss, lam)
        return sample.phi, sample.psi

    return SpectralModel(phi_psi, dim=n, trace_tail_coeff=n * c_op,
                         opnorm_tail_coeff=c_op,
                         psi_opnorm_tail_coeff=4.0 * s_norm**2 * mho_norm,
                         tail_valid_from=2.0 * a_norm,
                         scale=max(a_norm, 1e-6), state_space=ss)


def as_spectral_model(obj) -> SpectralModel:
    if isinstance(obj, SpectralModel):
        return obj
    if isinstance(obj, StateSpace):
        return state_space_model(obj)
    raise TypeError(f"expected a StateSpace or SpectralModel, got {type(obj)!r}")


@dataclass(frozen=True)
class Admissibility:
    """Outcome of the risk-parameter feasibility check at one theta."""

    admissible: bool
    margin: float
    theta_star: float
    lambda_grid_max: float = 0.0
    n_grid: int = 0


@dataclass(frozen=True)
class AdmissibilityConfig:
    n_initial: int = 129
    max_refinements: int = 6
    sup_change_tol: float = 1e-6
    max_jump_ratio: float = 50.0


def _sup_scan(model: SpectralModel, theta: float, lambdas: np.ndarray):
    """Per-grid-point largest eigenvalues of Phi and of the symmetrized
    sqrt(tanc) Phi sqrt(tanc) product (the two products are isospectral; the
    symmetric form keeps the eigenproblem Hermitian)."""
    phi_sup = np.empty(len(lambdas))
    q_sup = np.empty(len(lambdas))
    for i, lam in enumerate(lambdas):
        sample = model.sample(lam)
        phi_sup[i] = float(np.linalg.eigvalsh(sample.phi)[-1])
        if theta > 0:
            k = matfun.apply_skew_function(sample.psi, "tanc", theta)
            w = matfun.hermitian_sqrt(k)
            q_sup[i] = float(np.linalg.eigvalsh(w @ sample.phi @ w)[-1])
        else:
            q_sup[i] = phi_sup[i]
    return phi_sup, q_sup


def admissibility(obj, theta: float,
                  cfg: AdmissibilityConfig | None = None) -> Admissibility:
    """Check theta * sup_lam lambda_max(Phi tanc(theta Psi)) < 1.

    The supremum is evaluated on a logarithmically refined grid extended until
    the quadratic-decay tail bound certifies that no larger values hide beyond
    the last grid point; the grid is then densified until the supremum is
    stable.  Since tanc has range (0, 1], 1 / sup lambda_max(Phi) is always a
    lower bound for the admissible range, and is returned as theta_star.
    """
    model = as_spectral_model(obj)
    cfg = cfg or AdmissibilityConfig()
    scale = model.scale

    lam_hi = max(4.0 * scale, model.tail_valid_from, 1e-6)
    n = cfg.n_initial

    def build_grid(hi, count):
        return np.concatenate(([0.0], np.geomspace(1e-3 * scale, hi, count)))

    lambdas = build_grid(lam_hi, n)
    phi_sup, q_sup = _sup_scan(model, theta, lambdas)

    # Extend until the tail cannot contain the supremum of either scan.
    extensions = 0
    while model.opnorm_tail_coeff > 0 and extensions < 8:
        tail_value = model.opnorm_tail_coeff / lam_hi**2
        if tail_value <= 0.5 * max(phi_sup.max(), 1e-300):
            break
        lam_hi *= 4.0
        lambdas = build_grid(lam_hi, n)
        phi_sup, q_sup = _sup_scan(model, theta, lambdas)
        extensions += 1

    sup_phi, sup_q = phi_sup.max(), q_sup.max()
    for _ in range(cfg.max_refinements):
        n = 2 * n - 1
        lambdas = build_grid(lam_hi, n)
        phi_sup, q_sup = _sup_scan(model, theta, lambdas)
        new_phi, new_q = phi_sup.max(), q_sup.max()
        converged = (abs(new_phi - sup_phi) < cfg.sup_change_tol * (1.0 + new_phi)
                     and abs(new_q - sup_q) < cfg.sup_change_tol * (1.0 + new_q))
        sup_phi, sup_q = new_phi, new_q
        if converged:
            break
    else:
        raise GridTooCoarse("supremum scan did not stabilise under refinement")

    # Gross undersampling check: a resonance narrower than the grid shows up
    # as a huge jump between adjacent significant samples.
    significant = phi_sup > 1e-3 * sup_phi
    vals = phi_sup[significant]
    if len(vals) > 1:
        ratio = np.max(np.maximum(vals[1:], 1e-300) / np.maximum(vals[:-1], 1e-300))
        if ratio > cfg.max_jump_ratio:
            raise GridTooCoarse(
                f"adjacent-sample eigenvalue ratio {ratio:.1f} exceeds "
                f"{cfg.max_jump_ratio}")

    theta_star = 1.0 / sup_phi if sup_phi > 0 else np.inf
    margin = 1.0 - theta * sup_q
    return Admissibility(admissible=margin > 0.0, margin=float(margin),
                         theta_star=float(theta_star),
                         lambda_grid_max=float(lam_hi), n_grid=int(n))


def find_theta_max(obj, cap_factor: float = 64.0, rel_tol: float = 1e-6,
                   safety: float = 0.999, margin_floor: float = 1e-9) -> float:
    """Largest usable risk parameter, from bisection on the admissibility margin.

    The root is taken where the margin falls to ``margin_floor`` rather than
    to zero: below that the margin is rounding noise and log-determinant
    phases are no longer trustworthy, so the range would not be certified in
    any meaningful sense.  Returns ``safety`` times the root; if the margin
    stays above the floor all the way to ``cap_factor`` times the classical
    threshold (strongly quantum models), the capped value itself is returned.
    """
    model = as_spectral_model(obj)
    base = admissibility(model, 0.0)
    theta_star = base.theta_star
    if not np.isfinite(theta_star):
        theta_star = 1.0

    lo = 0.5 * theta_star
    hi = theta_star
    cap = cap_factor * theta_star
    while admissibility(model, hi).margin > margin_floor:
        lo = hi
        hi *= 2.0
        if hi >= cap:
            return min(hi, cap) * safety
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if admissibility(model, mid).margin > margin_floor:
            lo = mid
        else:
            hi = mid
    return safety * lo


# -- model files -------------------------------------------------------------

def _matrix_from_json(doc, name: str) -> np.ndarray:
    if name not in doc:
        raise InvalidParams(f"missing field {name}", field=name)
    entry = doc[name]
    if not isinstance(entry, dict) or not {"rows", "cols", "data"} <= set(entry):
        raise InvalidParams(f"{name} must be an object with rows, cols, data",
                            field=name)
    rows, cols = entry["rows"], entry["cols"]
    data = entry["data"]
    if len(data) != rows * cols:
        raise InvalidParams(f"{name} data length {len(data)} != rows*cols "
                            f"{rows * cols}", field=name)
    return np.asarray(data, dtype=float).reshape(rows, cols)


def load_model(path) -> StateSpace:
    """Load a model file (JSON) and build its state space.

    Two layouts are accepted: oscillator parameters (fields theta, r_matrix,
    m_matrix, s_matrix) or mode "explicit_ss" with a_matrix, b_matrix,
    s_matrix, theta_matrix.  Matrices are stored row-major with explicit dims.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParams(f"model file is not valid JSON: {exc}",
                                field="model_path") from exc
    mode = doc.get("mode", "oqho")
    if mode == "explicit_ss":
        return explicit_state_space(
            _matrix_from_json(doc, "a_matrix"),
            _matrix_from_json(doc, "b_matrix"),
            _matrix_from_json(doc, "s_matrix"),
            _matrix_from_json(doc, "theta_matrix"),
        )
    if mode != "oqho":
        raise InvalidParams(f"unknown model mode {mode!r}", field="mode")
    params = OqhoParams(
        theta=_matrix_from_json(doc, "theta"),
        r=_matrix_from_json(doc, "r_matrix"),
        m=_matrix_from_json(doc, "m_matrix"),
        s=_matrix_from_json(doc, "s_matrix"),
    )
    return build_state_space(params)
