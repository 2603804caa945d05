import json

import numpy as np
import pytest

from qefrate import model

BJ = np.array([[0.0, 1.0], [-1.0, 0.0]])

# Closed-form rate of the scalar Ornstein-Uhlenbeck spectrum Phi = 2/(1+lam^2):
# (1 - sqrt(1 - 2 theta)) / 2 on [0, 1/2).
OU_RATE = lambda theta: (1.0 - np.sqrt(1.0 - 2.0 * theta)) / 2.0


@pytest.fixture(scope="session")
def one_mode_ss():
    """One-mode oscillator with Theta=J, R=I, M=I, S=I (the standard fixture)."""
    params = model.OqhoParams(theta=BJ, r=np.eye(2), m=np.eye(2), s=np.eye(2))
    return model.build_state_space(params)


@pytest.fixture(scope="session")
def two_mode_ss():
    """A stable two-mode oscillator with genuinely noncommuting (Phi, Psi).

    Regenerated deterministically: draw (R, M, S) from a seeded generator and
    keep the 27th draw, which is comfortably Hurwitz (abscissa about -3.64).
    """
    rng = np.random.default_rng(7)
    theta = np.kron(BJ, np.eye(2))
    for _ in range(27):
        r = rng.normal(size=(4, 4))
        r = 0.5 * (r + r.T)
        m = rng.normal(size=(4, 4))
        s = rng.normal(size=(2, 4))
    ss = model.build_state_space(model.OqhoParams(theta=theta, r=r, m=m, s=s))
    assert ss.hurwitz
    return ss


@pytest.fixture(scope="session")
def ou_model():
    """Scalar classical model: P(tau) = e^{-|tau|}, Lambda = 0."""

    def phi_psi(lam):
        return (np.array([[2.0 / (1.0 + lam * lam)]], dtype=complex),
                np.zeros((1, 1), dtype=complex))

    return model.SpectralModel(phi_psi, dim=1, trace_tail_coeff=2.0,
                               opnorm_tail_coeff=2.0, tail_valid_from=0.1,
                               scale=1.0)


def matrix_json(mat):
    mat = np.asarray(mat, dtype=float)
    return {"rows": mat.shape[0], "cols": mat.shape[1],
            "data": [float(x) for x in mat.reshape(-1)]}


@pytest.fixture()
def one_mode_model_file(tmp_path):
    doc = {
        "theta": matrix_json(BJ),
        "r_matrix": matrix_json(np.eye(2)),
        "m_matrix": matrix_json(np.eye(2)),
        "s_matrix": matrix_json(np.eye(2)),
    }
    path = tmp_path / "one_mode.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def random_skew_hermitian(rng, n):
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return b - b.conj().T


def random_hermitian_psd(rng, n, scale=1.0):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (g @ g.conj().T) / n
