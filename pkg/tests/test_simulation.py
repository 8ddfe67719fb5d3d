import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from relerr.errors import DimensionMismatch, DomainError, ScenarioError
from relerr.model import make_loss, noise_density
from relerr.numerics import RngStream
from relerr.simulation import (
    McScenario,
    McSummary,
    TooManyFailures,
    generate_predictors,
    generate_responses,
    mse,
    outage_series,
    rpe,
    rpe_terms,
    run_monte_carlo,
    run_replicate,
    sample_noise,
    worker_count,
)

LPRE = make_loss("LPRE")
LSRE = make_loss("LSRE")


class TestScenario:
    def test_defaults(self):
        s = McScenario()
        assert s.beta_true == (1.0, 1.0, 1.0) and s.p == 3

    def test_model2(self):
        s = McScenario(model="model2", n=100)
        assert s.p == 51 and sum(b != 0 for b in s.beta_true) == 6

    def test_custom_needs_beta(self):
        with pytest.raises(ScenarioError):
            McScenario(model="CUSTOM")
        assert McScenario(model="CUSTOM", beta_true=[1, 2]).beta_true == (1.0, 2.0)

    @pytest.mark.parametrize("kw", [
        {"model": "MODEL3"}, {"rho": 1.0}, {"delta": -0.1}, {"outlier_sigma": 0}, {"n": 2},
        {"replicates": 0}, {"gamma_grid": ()}, {"gamma_grid": (-1,)}, {"seed": -1},
        {"beta_true": (2.0, 2.0, 2.0)},
    ])
    def test_validation(self, kw):
        with pytest.raises(ScenarioError):
            McScenario(**kw)

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ScenarioError, match="colour"):
            McScenario.from_dict({"colour": 1})


class TestSampler:
    @pytest.mark.parametrize("fam", [LPRE, LSRE], ids=["LPRE", "LSRE"])
    def test_ks_against_quadrature_cdf(self, fam):
        eps = np.sort(sample_noise(fam, RngStream(1).generator(), 200_000))
        grid = np.quantile(eps, np.linspace(0.01, 0.99, 25))
        cdf = [integrate.quad(lambda e: noise_density(fam, e), 0, g, epsabs=0, epsrel=1e-10, limit=200)[0]
               for g in grid]
        emp = np.searchsorted(eps, grid, side="right") / eps.size
        # DKW: P(sup |F_n - F| > 0.005) < 2 exp(-2 n 0.005^2) ~ 9e-5
        assert np.max(np.abs(emp - np.array(cdf))) < 0.005

    def test_interpolation_accuracy(self):
        # quantile inversion of the exact CDF at fixed probabilities
        from relerr.simulation import noise_quantile

        q = noise_quantile(LSRE)
        for p in (0.001, 0.1, 0.5, 0.9, 0.999):
            x = float(np.exp(q(p)))
            cdf, _ = integrate.quad(lambda e: noise_density(LSRE, e), 0, x, epsabs=0, epsrel=1e-12, limit=200)
            assert cdf == pytest.approx(p, abs=2e-3 * min(p, 1 - p) + 1e-6)

    def test_lpre_log_noise_symmetric(self):
        u = np.log(sample_noise(LPRE, RngStream(2).generator(), 400_000))
        assert abs(np.median(u)) < 0.01
        assert abs(stats.skew(u)) < 0.02

    def test_lpre_mean_from_bessel(self):
        from scipy.special import kv

        eps = sample_noise(LPRE, RngStream(3).generator(), 400_000)
        assert eps.mean() == pytest.approx(kv(1, 2.0) / kv(0, 2.0), rel=5e-3)

    def test_positive(self):
        assert np.all(sample_noise(LSRE, RngStream(4).generator(), 10_000) > 0)


class TestGenerators:
    def test_predictor_covariance(self):
        s = McScenario(n=200_000, rho=0.6)
        X = generate_predictors(s, RngStream(5).generator())
        np.testing.assert_allclose(np.cov(X.T), 0.4 * np.eye(3) + 0.6, atol=0.01)

    def test_contamination_fraction(self):
        s = McScenario(n=100_000, delta=0.1)
        rng = RngStream(6).generator()
        X = generate_predictors(s, rng)
        y, mask = generate_responses(s, X, LPRE, rng, return_mask=True)
        assert mask.mean() == pytest.approx(0.1, abs=0.005)
        assert np.median(np.log(y[mask])) == pytest.approx(5.0, abs=0.05)
        resid = np.log(y[~mask]) - X[~mask] @ np.ones(3)
        assert abs(np.median(resid)) < 0.01

    def test_delta_zero_all_clean(self):
        s = McScenario(n=1000)
        rng = RngStream(7).generator()
        _, mask = generate_responses(s, generate_predictors(s, rng), LPRE, rng, return_mask=True)
        assert not mask.any()


class TestMetrics:
    def test_rpe_example(self):
        # y = 2, t = 1: (2 - 1)^2 / 2 = 0.5
        assert rpe(np.zeros(1), np.ones((1, 1)), [2.0]) == pytest.approx(0.5)

    @settings(max_examples=50, deadline=None)
    @given(y=st.floats(1e-3, 1e3), t=st.floats(1e-3, 1e3))
    def test_rpe_term_identity(self, y, t):
        term = rpe_terms(np.array([math.log(t)]), np.ones((1, 1)), [y])[0]
        assert term == pytest.approx((y - t) ** 2 / (y * t), rel=1e-9, abs=1e-12)
        assert term >= 0

    def test_rpe_domain(self):
        with pytest.raises(DomainError):
            rpe(np.zeros(1), np.ones((2, 1)), [1.0, 0.0])

    def test_mse(self):
        assert mse([1.0, 2.0], [0.0, 0.0]) == 5.0
        with pytest.raises(DimensionMismatch):
            mse([1.0], [1.0, 2.0])


class TestHarness:
    def test_replicate_deterministic(self):
        s = McScenario(delta=0.1, replicates=1)
        a, b = run_replicate(s, 3), run_replicate(s, 3)
        np.testing.assert_array_equal(a.rpe, b.rpe)
        np.testing.assert_array_equal(a.z, b.z)
        c = run_replicate(s, 4)
        assert not np.array_equal(a.rpe, c.rpe)

    def test_single_replicate_summary(self):
        summ = run_monte_carlo(McScenario(replicates=1), workers=1)
        assert summ.replicates == 1
        assert summ.stats[0.5]["z_sd"] is None

    def test_percentiles_ordered(self):
        summ = run_monte_carlo(McScenario(replicates=20, delta=0.05), workers=1)
        for cell in summ.stats.values():
            for metric in ("rpe", "mse"):
                assert cell[metric]["p25"] <= cell[metric]["p50"] <= cell[metric]["p75"]

    def test_contamination_hurts_mle(self):
        summ = run_monte_carlo(McScenario(replicates=20, delta=0.1), workers=1)
        assert summ.median("mse", 0.5) < 0.1 * summ.median("mse", 0.0)

    def test_schedule_independent(self):
        s = McScenario(replicates=6, delta=0.1)
        a = run_monte_carlo(s, workers=1, chunk=6)
        b = run_monte_carlo(s, workers=2, chunk=2)
        assert a.to_json() == b.to_json()

    def test_too_many_failures(self, monkeypatch):
        import relerr.simulation as sim

        def broken(*a, **k):
            raise ArithmeticError("boom")

        monkeypatch.setattr(sim, "fit", broken)
        with pytest.raises(TooManyFailures):
            run_monte_carlo(McScenario(replicates=2), workers=1)

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("RELERR_THREADS", "3")
        assert worker_count() == 3
        assert worker_count(1) == 1

    def test_csv_rows(self):
        summ = run_monte_carlo(McScenario(replicates=2), workers=1)
        rows = list(summ.csv_rows())
        assert len(rows) == 2 * 2 * 3
        assert isinstance(summ, McSummary)


class TestOutageSeries:
    def test_shape_and_spike_fraction(self):
        y = outage_series(0)
        assert y.shape == (80 * 24,) and np.all(y > 0)
        assert np.mean(y < 0.05) == pytest.approx(0.05)

    def test_deterministic(self):
        np.testing.assert_array_equal(outage_series(4), outage_series(4))

    def test_bad_outage(self):
        with pytest.raises(ScenarioError):
            outage_series(0, days=10, outage=(8, 4))
