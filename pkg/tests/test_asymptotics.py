import math
import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.special import kv

from relerr.asymptotics import (
    assemble,
    confidence_intervals,
    fisher_constant,
    noise_constants,
    pi_moments,
    sandwich,
    z_scores,
)
from relerr.errors import LogOverflow, SingularJ
from relerr.model import Dataset, make_loss
from relerr.objective import GammaObjective
from relerr.simulation import sample_noise

LPRE = make_loss("LPRE")
LSRE = make_loss("LSRE")

# E[(eps - 1/eps)^2] under the LPRE noise law, via E[eps^k] = K_k(2) / K_0(2)
LPRE_FISHER = 2 * kv(2, 2.0) / kv(0, 2.0) - 2


def _design(seed, n=200):
    rng = np.random.default_rng(seed)
    return np.column_stack([np.ones(n), rng.normal(size=(n, 2))])


class TestNoiseConstants:
    @pytest.mark.parametrize("fam", [LPRE, LSRE], ids=["LPRE", "LSRE"])
    def test_small_gamma_limits(self, fam):
        nc = noise_constants(fam, 1e-6)
        assert nc.c == pytest.approx(1.0, abs=1e-4)
        assert nc.c1 == pytest.approx(-1.0, abs=1e-4)

    def test_lpre_fisher_closed_form(self):
        assert fisher_constant(LPRE) == pytest.approx(LPRE_FISHER, rel=1e-9)

    def test_lsre_fisher_by_quad(self):
        c = LSRE.norm_const

        def integrand(e):
            uh = 2 * (1 - 1 / e) / e + 2 * e * (e - 1)  # eps * rho'(eps)
            return uh * uh * c / e * math.exp(-((1 - 1 / e) ** 2 + (1 - e) ** 2))

        lo, _ = integrate.quad(integrand, 0, 1, epsabs=0, epsrel=1e-12, limit=200)
        hi, _ = integrate.quad(integrand, 1, np.inf, epsabs=0, epsrel=1e-12, limit=200)
        assert fisher_constant(LSRE) == pytest.approx(lo + hi, rel=1e-9)

    def test_negative_gamma(self):
        with pytest.raises(ValueError):
            noise_constants(LPRE, -1.0)

    def test_cached(self):
        assert noise_constants(LPRE, 0.25) is noise_constants(LPRE, 0.25)


class TestFisherLimit:
    @pytest.mark.parametrize("fam", [LPRE, LSRE], ids=["LPRE", "LSRE"])
    def test_delta_and_j_approach_fisher(self, fam):
        X = _design(0)
        beta = np.array([0.5, 1.0, -1.0])
        y = np.exp(X @ beta)
        info = fisher_constant(fam) * (X.T @ X) / X.shape[0]
        sc = sandwich(fam, 1e-6, Dataset(X, y), beta)
        for m in (sc.delta, sc.j):
            assert np.max(np.abs(m - info)) <= 1e-3 * np.max(np.abs(info))

    def test_mle_covariance_is_inverse_fisher(self):
        X = _design(1)
        beta = np.ones(3)
        sc = sandwich(LPRE, 0.0, Dataset(X, np.exp(X @ beta)), beta)
        info = LPRE_FISHER * (X.T @ X) / X.shape[0]
        np.testing.assert_allclose(sc.cov, np.linalg.inv(info) / X.shape[0], rtol=1e-8)

    def test_centered_equals_uncentered_at_zero(self):
        X = _design(2)
        beta = np.ones(3)
        d = Dataset(X, np.exp(X @ beta))
        np.testing.assert_allclose(sandwich(LPRE, 0.0, d, beta).cov, sandwich(LPRE, 0.0, d, beta, centered=True).cov,
                                   rtol=1e-12)


class TestSandwich:
    def test_matches_empirical_estimating_function(self):
        # J^-1 Delta J^-1 against a Monte Carlo second moment of psi and a numerical Jacobian
        rng = np.random.default_rng(3)
        n, g = 100_000, 0.5
        X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
        beta = np.ones(3)
        data = Dataset(X, np.exp(X @ beta) * sample_noise(LPRE, rng, n))
        obj = GammaObjective(LPRE, g, data)
        P = obj.psi_all(beta)
        h = 1e-5
        J = np.column_stack([
            -(obj.psi_all(beta + h * e).mean(0) - obj.psi_all(beta - h * e).mean(0)) / (2 * h) for e in np.eye(3)
        ])
        Ji = np.linalg.inv(J)
        emp = Ji @ (P.T @ P / n) @ Ji.T
        sc = sandwich(LPRE, g, data, beta)
        np.testing.assert_allclose(sc.cov * n, emp, rtol=0.05, atol=0.02 * np.max(np.abs(emp)))

    def test_symmetric_psd(self):
        X = _design(4)
        beta = np.array([1.0, 0.5, 0.5])
        sc = sandwich(LSRE, 0.3, Dataset(X, np.exp(X @ beta)), beta)
        np.testing.assert_allclose(sc.cov, sc.cov.T)
        assert np.linalg.eigvalsh(sc.cov).min() > 0

    def test_centered_not_larger(self):
        X = _design(5)
        beta = np.ones(3)
        d = Dataset(X, np.exp(X @ beta))
        a = sandwich(LPRE, 0.5, d, beta).cov
        b = sandwich(LPRE, 0.5, d, beta, centered=True).cov
        assert np.linalg.eigvalsh(a - b).min() >= -1e-12

    def test_intercept_shift_invariance(self):
        # the covariance does not depend on the level of the linear predictor
        X = _design(6)
        beta = np.array([1.0, 0.3, -0.3])
        d = Dataset(X, np.exp(X @ beta))
        a = sandwich(LPRE, 0.5, d, beta).cov
        shifted = beta + np.array([50.0, 0, 0])
        b = sandwich(LPRE, 0.5, Dataset(X, np.exp(X @ shifted)), shifted).cov
        np.testing.assert_allclose(a, b, rtol=1e-8)

    def test_singular_j_warns(self):
        X = np.column_stack([np.ones(50), np.ones(50)])
        with pytest.warns(SingularJ):
            sc = sandwich(LPRE, 0.5, Dataset(X, np.ones(50)), np.zeros(2))
        assert sc.floored or sc.j_condition > 1e12

    def test_pi_moments_overflow(self):
        X = np.ones((3, 1))
        with pytest.raises(LogOverflow):
            pi_moments(Dataset(X, np.ones(3)), np.array([-1e4]), 1.0)

    def test_pi_moments_definition(self):
        X = _design(7, n=10)
        beta = np.array([0.1, 0.2, 0.3])
        pm = pi_moments(Dataset(X, np.ones(10)), beta, 0.7)
        w = np.exp(-0.7 * X @ beta)
        assert pm.pi0 == pytest.approx(w.mean())
        np.testing.assert_allclose(pm.pi2, (X * w[:, None]).T @ X / 10)

    def test_assemble_shapes(self):
        nc = noise_constants(LPRE, 0.5)
        m = (1.0, np.zeros(2), np.eye(2))
        delta, j = assemble(nc, m, m)
        assert delta.shape == j.shape == (2, 2)


class TestIntervals:
    def test_level_and_width(self):
        X = _design(8)
        beta = np.ones(3)
        sc = sandwich(LPRE, 0.5, Dataset(X, np.exp(X @ beta)), beta)
        ci = confidence_intervals(sc, beta, 0.95)
        np.testing.assert_allclose(ci[:, 1] - ci[:, 0], 2 * 1.959963984540054 * sc.std_errors, rtol=1e-12)
        narrow = confidence_intervals(sc, beta, 0.5)
        assert np.all(narrow[:, 1] - narrow[:, 0] < ci[:, 1] - ci[:, 0])

    @pytest.mark.parametrize("level", [1.0, -0.1])
    def test_bad_level(self, level):
        X = _design(9)
        sc = sandwich(LPRE, 0.5, Dataset(X, np.ones(200)), np.zeros(3))
        with pytest.raises(ValueError):
            confidence_intervals(sc, np.zeros(3), level)

    def test_z_scores(self):
        X = _design(10)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sc = sandwich(LPRE, 0.5, Dataset(X, np.ones(200)), np.zeros(3))
        z = z_scores(sc, sc.std_errors, np.zeros(3))
        np.testing.assert_allclose(z, 1.0)
