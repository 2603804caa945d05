import numpy as np
import pytest

from qefrate import matfun
from qefrate.errors import (
    EigFailure,
    IllConditioned,
    ImaginaryResidual,
    NotHurwitz,
    NotSkewHermitian,
    SingularMatrix,
)

from conftest import BJ, random_skew_hermitian


class TestApplySkewFunction:
    def test_cos_of_zero_is_identity(self):
        out = matfun.apply_skew_function(np.zeros((2, 2)), "cos", 1.0)
        assert np.allclose(out, np.eye(2))

    def test_tanc_of_rotation_generator(self):
        # eigenvalues of BJ are +-i, so the scalar evaluation gives tanh(1)
        out = matfun.apply_skew_function(BJ, "tanc", 1.0)
        assert np.allclose(out, np.tanh(1.0) * np.eye(2), atol=1e-12)

    def test_lncos_trace(self):
        out = matfun.apply_skew_function(BJ, "lncos", 1.0)
        assert np.trace(out).real == pytest.approx(2.0 * np.log(np.cosh(1.0)),
                                                   abs=1e-12)

    def test_exp_gives_rotation(self):
        out = matfun.apply_skew_function(BJ, "exp", 0.7)
        expected = np.array([[np.cos(0.7), np.sin(0.7)],
                             [-np.sin(0.7), np.cos(0.7)]])
        assert np.allclose(out, expected, atol=1e-12)

    def test_rejects_non_skew(self):
        with pytest.raises(NotSkewHermitian):
            matfun.apply_skew_function(np.eye(2), "cos", 1.0)

    def test_rejects_unknown_function(self):
        with pytest.raises(ValueError):
            matfun.apply_skew_function(BJ, "sqrt", 1.0)

    @pytest.mark.parametrize("fn", ["cos", "sinc", "tanc", "lncos"])
    def test_even_functions_return_hermitian(self, fn):
        rng = np.random.default_rng(11)
        for n in (1, 2, 3, 5, 8):
            psi = random_skew_hermitian(rng, n)
            out = matfun.apply_skew_function(psi, fn, 0.7)
            scale = max(np.linalg.norm(out), 1.0)
            assert np.linalg.norm(out - out.conj().T) <= 1e-12 * scale

    def test_tanc_cos_equals_sinc(self):
        rng = np.random.default_rng(5)
        for n in (2, 4, 8):
            psi = random_skew_hermitian(rng, n)
            tanc = matfun.apply_skew_function(psi, "tanc", 0.9)
            cos = matfun.apply_skew_function(psi, "cos", 0.9)
            sinc = matfun.apply_skew_function(psi, "sinc", 0.9)
            assert np.allclose(tanc @ cos, sinc, atol=1e-10 * np.linalg.norm(cos))

    def test_tanc_eigenvalues_in_unit_interval(self):
        rng = np.random.default_rng(17)
        for n in (2, 4, 8):
            psi = random_skew_hermitian(rng, n)
            out = matfun.apply_skew_function(psi, "tanc", 1.3)
            eigs = np.linalg.eigvalsh(out)
            assert np.all(eigs > 0.0)
            assert np.all(eigs <= 1.0 + 1e-12)

    def test_bundle_matches_individual_calls(self):
        rng = np.random.default_rng(3)
        psi = random_skew_hermitian(rng, 4)
        cos_m, sinc_m, sin_m = matfun.skew_trig_bundle(psi, 0.6)
        assert np.allclose(cos_m, matfun.apply_skew_function(psi, "cos", 0.6))
        assert np.allclose(sinc_m, matfun.apply_skew_function(psi, "sinc", 0.6))
        # sin(theta Psi) = theta * Psi @ sinc(theta Psi)
        assert np.allclose(sin_m, 0.6 * psi @ sinc_m, atol=1e-12)


class TestScalarHelpers:
    def test_sinhc_matches_reference_away_from_zero(self):
        x = np.array([0.5, 1.0, 3.0])
        assert np.allclose(matfun.sinhc(x), np.sinh(x) / x)

    def test_sinhc_series_region(self):
        assert matfun.sinhc(np.array([0.0]))[0] == 1.0
        x = 1e-6
        assert matfun.sinhc(np.array([x]))[0] == pytest.approx(1.0 + x * x / 6.0,
                                                               rel=1e-15)

    def test_tanhc_range_and_zero(self):
        assert matfun.tanhc(np.array([0.0]))[0] == 1.0
        x = np.linspace(-20, 20, 401)
        vals = matfun.tanhc(x)
        assert np.all(vals > 0) and np.all(vals <= 1.0)

    def test_lncosh_accuracy_all_scales(self):
        # mid range against direct formula, far range against the asymptote
        x = np.array([0.5, 2.0, 10.0])
        assert np.allclose(matfun.lncosh(x), np.log(np.cosh(x)))
        big = np.array([50.0, 300.0])
        assert np.allclose(matfun.lncosh(big), big - np.log(2.0))
        tiny = 1e-8
        assert matfun.lncosh(np.array([tiny]))[0] == pytest.approx(
            tiny**2 / 2.0, rel=1e-10)


class TestLogDet:
    def test_identity(self):
        assert matfun.log_det_real(np.eye(2)) == 0.0

    def test_diagonal(self):
        assert matfun.log_det_real(0.5 * np.eye(2)) == pytest.approx(
            2.0 * np.log(0.5), abs=1e-14)

    def test_negative_determinant_raises(self):
        with pytest.raises(ImaginaryResidual):
            matfun.log_det_real(np.diag([1.0, -1.0]))

    def test_singular_raises(self):
        with pytest.raises(SingularMatrix):
            matfun.log_det_real(np.zeros((2, 2)))

    def test_additivity_on_commuting_positive_definite(self):
        rng = np.random.default_rng(23)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        q, _ = np.linalg.qr(g)
        d1 = (q * rng.uniform(0.5, 2.0, size=4)) @ q.conj().T
        d2 = (q * rng.uniform(0.5, 2.0, size=4)) @ q.conj().T
        lhs = matfun.log_det_real(d1 @ d2)
        rhs = matfun.log_det_real(d1) + matfun.log_det_real(d2)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_residual_reported(self):
        re, im = matfun.log_det_with_residual(np.diag([1.0, -2.0]))
        assert re == pytest.approx(np.log(2.0))
        assert abs(im) == pytest.approx(np.pi)


class TestLyapunov:
    def test_scalar(self):
        out = matfun.solve_lyapunov(np.array([[-1.0]]), np.array([[2.0]]))
        assert out[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_one_mode_drift(self):
        a = 2.0 * BJ - 2.0 * np.eye(2)
        out = matfun.solve_lyapunov(a, 4.0 * np.eye(2))
        assert np.allclose(out, np.eye(2), atol=1e-12)

    def test_not_hurwitz_raises(self):
        with pytest.raises(NotHurwitz):
            matfun.solve_lyapunov(np.eye(2), np.eye(2))

    def test_symmetric_psd_on_random_stable(self):
        rng = np.random.default_rng(41)
        for n in (2, 3, 5):
            g = rng.normal(size=(n, n))
            a = -(g @ g.T) - 0.5 * np.eye(n) + random_skew_hermitian(rng, n).real
            q = rng.normal(size=(n, n))
            q = q @ q.T
            x = matfun.solve_lyapunov(a, q)
            assert np.linalg.norm(x - x.T) <= 1e-10 * max(np.linalg.norm(x), 1.0)
            assert np.linalg.eigvalsh(x)[0] >= -1e-10 * np.linalg.norm(x)
            assert np.linalg.norm(a @ x + x @ a.T + q) <= 1e-10 * np.linalg.norm(q)


class TestStability:
    def test_stable_spiral(self):
        hurwitz, abscissa = matfun.stability_and_radius(-2 * np.eye(2) + 2 * BJ)
        assert hurwitz and abscissa == pytest.approx(-2.0, abs=1e-12)

    def test_zero_matrix(self):
        hurwitz, abscissa = matfun.stability_and_radius(np.zeros((1, 1)))
        assert not hurwitz and abscissa == 0.0

    def test_mixed_spectrum(self):
        hurwitz, abscissa = matfun.stability_and_radius(np.diag([-1.0, 3.0]))
        assert not hurwitz and abscissa == pytest.approx(3.0)


class TestHermitianHelpers:
    def test_eig_reconstruction(self):
        rng = np.random.default_rng(2)
        h = random_skew_hermitian(rng, 5) * 1j
        eig = matfun.hermitian_eig(h, validate=True)
        assert np.all(np.diff(eig.eigenvalues) >= 0)
        assert np.allclose(eig.reconstruct(), h, atol=1e-12 * np.linalg.norm(h))

    def test_sqrt_squares_back(self):
        rng = np.random.default_rng(9)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = g @ g.conj().T
        root = matfun.hermitian_sqrt(h)
        assert np.allclose(root @ root, h, atol=1e-10 * np.linalg.norm(h))

    def test_sqrt_rejects_indefinite(self):
        with pytest.raises(EigFailure):
            matfun.hermitian_sqrt(np.diag([1.0, -1.0]))


def test_lyapunov_residual_guard_is_relative():
    # a tiny Q must not trip the residual check through absolute scaling
    a = np.array([[-3.0]])
    out = matfun.solve_lyapunov(a, np.array([[1e-14]]))
    assert out[0, 0] == pytest.approx(1e-14 / 6.0, rel=1e-10)
