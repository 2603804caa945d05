"""Dense matrix-function and structured linear-algebra kernel.

Everything here works on small dense matrices.  Functions of skew-Hermitian
arguments are evaluated through the Hermitian eigendecomposition of -i*Psi,
never by series summation, so the bounded scalar functions used elsewhere in
the package (cos, sinc, tanc, ln cos) are unconditionally stable to apply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    EigFailure,
    IllConditioned,
    ImaginaryResidual,
    NotHurwitz,
    NotSkewHermitian,
    SingularMatrix,
)

# Structural checks default to 1e-9 * scale, reconstruction to 1e-10.
STRUCTURAL_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-10
LYAPUNOV_TOL = 1e-10
IM_TOL_PER_DIM = 1e-8


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian_eig(h: np.ndarray, validate: bool = False) -> HermitianEig:
    """Eigendecompose a Hermitian matrix, optionally checking the factors."""
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"Hermitian eigendecomposition failed: {exc}") from exc
    eig = HermitianEig(w, v)
    if validate:
        scale = max(np.linalg.norm(h), 1.0)
        if np.linalg.norm(eig.reconstruct() - h) > RECONSTRUCTION_TOL * scale:
            raise EigFailure("eigendecomposition does not reconstruct the input")
        n = h.shape[0]
        if np.linalg.norm(v.conj().T @ v - np.eye(n)) > RECONSTRUCTION_TOL * n:
            raise EigFailure("eigenvector matrix is not unitary")
    return eig


def sinhc(x: np.ndarray) -> np.ndarray:
    """sinh(x)/x with the continuity extension sinhc(0) = 1."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 0.0, x)
    out = np.where(small, 1.0 + x * x / 6.0 + x**4 / 120.0,
                   np.sinh(xs) / np.where(small, 1.0, xs))
    return out


def tanhc(x: np.ndarray) -> np.ndarray:
    """tanh(x)/x with the continuity extension tanhc(0) = 1; range (0, 1]."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 0.0, x)
    out = np.where(small, 1.0 - x * x / 3.0 + 2.0 * x**4 / 15.0,
                   np.tanh(xs) / np.where(small, 1.0, xs))
    return out


def lncosh(x: np.ndarray) -> np.ndarray:
    """ln cosh(x), accurate for tiny and very large arguments alike."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    tiny = x < 1e-3
    big = x > 30.0
    mid = ~tiny & ~big
    xt = x[tiny]
    out[tiny] = xt * xt / 2.0 - xt**4 / 12.0 + xt**6 / 45.0
    out[mid] = np.log(np.cosh(x[mid]))
    xb = x[big]
    out[big] = xb - np.log(2.0) + np.log1p(np.exp(-2.0 * xb))
    return out


_SCALAR_EVAL = {
    # fn(theta * Psi) has eigenvalues fn(i * theta * h) for h in spec(-i Psi).
    "cos": lambda t: np.cosh(t),
    "sinc": sinhc,
    "tanc": tanhc,
    "lncos": lncosh,
    "exp": lambda t: np.exp(1j * t),
}

SKEW_FUNCTIONS = tuple(_SCALAR_EVAL)


def check_skew_hermitian(psi: np.ndarray, tol: float = STRUCTURAL_TOL) -> None:
    psi = np.asarray(psi)
    if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
        raise NotSkewHermitian(f"expected a square matrix, got shape {psi.shape}")
    defect = np.linalg.norm(psi + psi.conj().T)
    if defect > tol * max(np.linalg.norm(psi), defect):
        raise NotSkewHermitian(
            f"matrix is not skew-Hermitian: ||Psi + Psi*|| = {defect:.3e}"
        )


def apply_skew_function(
    psi: np.ndarray,
    fn: str,
    theta: float,
    tol: float = STRUCTURAL_TOL,
) -> np.ndarray:
    """Evaluate fn(theta * Psi) for skew-Hermitian Psi.

    fn is one of 'cos', 'sinc', 'tanc', 'lncos', 'exp'.  The computation goes
    through the real spectrum of the Hermitian matrix -i*Psi, where the even
    functions become cosh, sinhc, tanhc and ln cosh; the result is Hermitian
    for those and unitary for 'exp'.
    """
    if fn not in _SCALAR_EVAL:
        raise ValueError(f"unknown scalar function {fn!r}; expected one of {SKEW_FUNCTIONS}")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    psi = np.asarray(psi, dtype=complex)
    check_skew_hermitian(psi, tol)
    eig = hermitian_eig(-1j * psi)
    values = _SCALAR_EVAL[fn](theta * eig.eigenvalues)
    v = eig.eigenvectors
    return (v * values) @ v.conj().T


def skew_trig_bundle(
    psi: np.ndarray, theta: float, tol: float = STRUCTURAL_TOL
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """cos(theta*Psi), sinc(theta*Psi) and sin(theta*Psi) from one eigh call.

    Sharing the decomposition matters because these three always appear
    together in the rate integrands, where the eigendecomposition dominates
    the per-frequency cost.
    """
    psi = np.asarray(psi, dtype=complex)
    check_skew_hermitian(psi, tol)
    eig = hermitian_eig(-1j * psi)
    th = theta * eig.eigenvalues
    v = eig.eigenvectors
    vh = v.conj().T
    cos_m = (v * np.cosh(th)) @ vh
    sinc_m = (v * sinhc(th)) @ vh
    sin_m = (v * (1j * np.sinh(th))) @ vh
    return cos_m, sinc_m, sin_m


def hermitian_sqrt(h: np.ndarray, clip_tol: float = STRUCTURAL_TOL) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix (tiny negatives clipped)."""
    eig = hermitian_eig(np.asarray(h, dtype=complex))
    w = eig.eigenvalues
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    if w[0] < -clip_tol * scale:
        raise EigFailure(f"matrix is not PSD: min eigenvalue {w[0]:.3e}")
    v = eig.eigenvectors
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def log_det_with_residual(d: np.ndarray) -> tuple[float, float]:
    """Re and Im of ln det D, via LU with partial pivoting (slogdet)."""
    d = np.asarray(d, dtype=complex)
    sign, logabs = np.linalg.slogdet(d)
    if sign == 0 or not np.isfinite(logabs):
        raise SingularMatrix("determinant is zero or not finite")
    return float(logabs), float(np.angle(sign))


def log_det_real(d: np.ndarray, im_tol: float | None = None) -> float:
    """Re(ln det D), asserting that the imaginary part is negligible.

    The imaginary part accumulates from the pivot phases; it must vanish for
    the determinants this package produces on the admissible range, so a
    violation signals either an inadmissible risk parameter or a matrix built
    incorrectly upstream.
    """
    d = np.asarray(d, dtype=complex)
    if im_tol is None:
        im_tol = IM_TOL_PER_DIM * d.shape[0]
    re, im = log_det_with_residual(d)
    if abs(im) > im_tol:
        raise ImaginaryResidual(
            f"ln det has imaginary part {im:.3e} exceeding tolerance {im_tol:.3e}",
            residual=im,
        )
    return re


def stability_and_radius(a: np.ndarray) -> tuple[bool, float]:
    """(is_hurwitz, spectral_abscissa) of a real square matrix."""
    a = np.asarray(a, dtype=float)
    try:
        eigvals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"eigenvalue computation failed: {exc}") from exc
    abscissa = float(np.max(eigvals.real))
    return abscissa < 0.0, abscissa


def solve_lyapunov(
    a: np.ndarray, q: np.ndarray, tol: float = LYAPUNOV_TOL
) -> np.ndarray:
    """Solve A X + X A^T + Q = 0 for Hurwitz A, residual-checked.

    The result feeds every downstream covariance kernel, so the relative
    residual is verified against ``tol`` rather than trusted.
    """
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    hurwitz, abscissa = stability_and_radius(a)
    if not hurwitz:
        raise NotHurwitz(f"matrix has spectral abscissa {abscissa:.3e} >= 0")
    x = sla.solve_continuous_lyapunov(a, -q)
    x = 0.5 * (x + x.T)
    q_norm = np.linalg.norm(q)
    residual = np.linalg.norm(a @ x + x @ a.T + q)
    if residual > tol * max(q_norm, np.finfo(float).tiny):
        raise IllConditioned(
            f"Lyapunov residual {residual:.3e} exceeds {tol:.1e} * ||Q|| = {tol * q_norm:.3e}"
        )
    return x
