import numpy as np
import pytest
from scipy.integrate import quad

from qefrate import freqrate, matfun, model
from qefrate.errors import NotAdmissible

from conftest import BJ, OU_RATE


def one_mode_branches(lam):
    """Scalar eigenvalue data of the one-mode spectral pair, from the
    hand-derived rational expressions (independent of the matrix code).

    Returns (phi_plus, y_plus, phi_minus, y_minus) where the determinant
    matrix eigenvalue on each branch is cosh(theta y) - theta phi sinhc(theta y).
    """
    den = lam**4 + 64.0
    p = 4.0 * (8.0 + lam**2) / den
    q = -16.0 * lam / den
    r = 4.0 * (8.0 + lam**2) / den
    s = 16.0 * lam / den
    return p - q, r + s, p + q, r - s


def scalar_neg_log_det(lam, theta):
    import math
    total = 0.0
    for phi, y in zip(*[iter(one_mode_branches(lam))] * 2):
        ty = theta * y
        sinhc = math.sinh(ty) / ty if abs(ty) > 1e-8 else 1.0 + ty * ty / 6.0
        total -= math.log(math.cosh(ty) - theta * phi * sinhc)
    return total


class TestDMatrix:
    def test_zero_theta_gives_identity(self, two_mode_ss):
        sample = model.spectral_density(two_mode_ss, 1.0)
        assert np.allclose(freqrate.d_matrix(sample, 0.0), np.eye(2))

    def test_commuting_limit_is_affine(self, ou_model):
        sample = ou_model.sample(0.7)
        out = freqrate.d_matrix(sample, 0.3)
        assert np.allclose(out, np.eye(1) - 0.3 * sample.phi)

    def test_one_mode_zero_frequency(self, one_mode_ss):
        sample = model.spectral_density(one_mode_ss, 0.0)
        out = freqrate.d_matrix(sample, 1.0)
        expected = (np.cosh(0.5) - 0.5 * np.sinh(0.5) / 0.5) * np.eye(2)
        assert np.allclose(out, expected, atol=1e-12)
        assert expected[0, 0] == pytest.approx(0.6065306597126333, abs=1e-12)


class TestQefRate:
    def test_zero_theta_short_circuit(self, one_mode_ss):
        result = freqrate.qef_rate(one_mode_ss, 0.0)
        assert result.value == 0.0 and result.n_nodes == 0

    def test_ou_closed_form(self, ou_model):
        result = freqrate.qef_rate(ou_model, 0.25)
        assert result.value == pytest.approx(OU_RATE(0.25), abs=1e-7)

    def test_one_mode_scalar_oracle(self, one_mode_ss):
        theta = 0.1
        oracle = quad(lambda lam: scalar_neg_log_det(lam, theta), 0.0, np.inf,
                      limit=400)[0] / (2.0 * np.pi)
        result = freqrate.qef_rate(one_mode_ss, theta)
        assert result.value == pytest.approx(oracle, abs=1e-7)
        # the branches satisfy phi = y, which collapses each determinant
        # eigenvalue to exp(-theta y): the rate is exactly theta
        assert result.value == pytest.approx(theta, abs=1e-8)

    def test_small_theta_cross_oracle(self, one_mode_ss):
        full = freqrate.qef_rate(one_mode_ss, 0.05)
        approx = freqrate.small_theta_rate(one_mode_ss, 0.05)
        assert abs(full.value - approx.value) <= 5e-4

    def test_not_admissible_raises(self, ou_model):
        with pytest.raises(NotAdmissible):
            freqrate.qef_rate(ou_model, 0.6)

    def test_certification_under_tolerance_halving(self, two_mode_ss):
        theta = 0.1
        loose = freqrate.qef_rate(two_mode_ss, theta)
        tight = freqrate.qef_rate(
            two_mode_ss, theta,
            freqrate.QuadConfig(epsabs=5e-12, epsrel=5e-11, tail_tol=5e-10))
        assert abs(loose.value - tight.value) <= loose.est_quadrature_error

    def test_monotone_and_convex_on_grid(self, two_mode_ss):
        thetas = np.linspace(0.0, 0.08, 9)
        values = [0.0] + [freqrate.qef_rate(two_mode_ss, th).value
                          for th in thetas[1:]]
        diffs = np.diff(values)
        assert np.all(diffs >= -1e-12)
        second = np.diff(values, 2)
        assert np.all(second >= -1e-9)

    def test_integrand_frequency_symmetry(self, two_mode_ss):
        for lam in (0.4, 1.9, 6.0):
            plus = matfun.log_det_real(
                freqrate.d_matrix(model.spectral_density(two_mode_ss, lam), 0.1))
            minus = matfun.log_det_real(
                freqrate.d_matrix(model.spectral_density(two_mode_ss, -lam), 0.1))
            assert plus == pytest.approx(minus, abs=1e-12)


class TestClassicalRate:
    def test_zero_spectrum(self):
        flat = model.SpectralModel(
            lambda lam: (np.zeros((1, 1), complex), np.zeros((1, 1), complex)),
            dim=1, trace_tail_coeff=0.0, opnorm_tail_coeff=0.0,
            tail_valid_from=0.0, scale=1.0)
        assert freqrate.classical_rate(flat, 0.3).value == pytest.approx(0.0,
                                                                         abs=1e-12)

    def test_ou_values_and_monotonicity(self, ou_model):
        v02 = freqrate.classical_rate(ou_model, 0.2).value
        v03 = freqrate.classical_rate(ou_model, 0.3).value
        assert v02 == pytest.approx(OU_RATE(0.2), abs=1e-7)
        assert v03 == pytest.approx(OU_RATE(0.3), abs=1e-7)
        assert v03 > v02

    def test_threshold_enforced(self, ou_model):
        with pytest.raises(NotAdmissible):
            freqrate.classical_rate(ou_model, 0.5)


class TestSmallThetaRate:
    def test_commuting_limit_equals_classical(self, ou_model):
        small = freqrate.small_theta_rate(ou_model, 0.2)
        classical = freqrate.classical_rate(ou_model, 0.2)
        assert small.value == classical.value

    def test_zero_theta(self, one_mode_ss):
        assert freqrate.small_theta_rate(one_mode_ss, 0.0).value == 0.0

    def test_strictly_below_classical(self, one_mode_ss, two_mode_ss):
        for ss, theta in ((one_mode_ss, 0.05), (two_mode_ss, 0.04)):
            small = freqrate.small_theta_rate(ss, theta)
            classical = freqrate.classical_rate(ss, theta)
            assert small.value < classical.value


class TestDerivativeAtZero:
    def test_one_mode_exact(self, one_mode_ss):
        assert freqrate.rate_derivative_at_zero(one_mode_ss) == pytest.approx(
            1.0, abs=1e-12)

    def test_ou_by_quadrature(self, ou_model):
        # (1/4pi) integral of 2/(1+lam^2) over R = 1/2 = P(0)/2
        assert freqrate.rate_derivative_at_zero(ou_model) == pytest.approx(
            0.5, abs=1e-7)

    def test_matches_small_theta_slope(self, two_mode_ss):
        slope = freqrate.rate_derivative_at_zero(two_mode_ss)
        h = 1e-5
        fd = freqrate.qef_rate(two_mode_ss, h).value / h
        assert fd == pytest.approx(slope, rel=1e-3)
