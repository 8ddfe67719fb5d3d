import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from relerr.errors import DomainError, NonConvergent, NonFinite
from relerr.model import make_loss, noise_density
from relerr.numerics import (
    QuadratureSpec,
    RngStream,
    bessel_k,
    eig_extremes,
    finite_diff_derivative,
    finite_diff_gradient,
    integrate_positive_halfline,
    sym_inverse,
)

# scipy.special.kv(0, 2.0), frozen
K0_AT_2 = 0.11389387274953344


class TestHalfline:
    def test_exponential(self):
        assert integrate_positive_halfline(lambda v: np.exp(-v)) == pytest.approx(1.0, abs=1e-10)

    def test_gaussian_moment(self):
        assert integrate_positive_halfline(lambda v: v * np.exp(-v * v)) == pytest.approx(0.5, abs=1e-10)

    def test_lpre_density(self):
        fam = make_loss("LPRE")
        assert integrate_positive_halfline(lambda v: noise_density(fam, v)) == pytest.approx(1.0, abs=1e-8)

    def test_split_point_irrelevant(self):
        f = lambda v: v**2 * np.exp(-v)
        for s in (0.1, 1.0, 7.0):
            assert integrate_positive_halfline(f, QuadratureSpec(split_point=s)) == pytest.approx(2.0, rel=1e-10)

    def test_budget_exhausted(self):
        f = lambda v: np.exp(-v) / np.sqrt(v)
        with pytest.raises(NonConvergent):
            integrate_positive_halfline(f, QuadratureSpec(max_refinements=1))

    def test_nan_integrand(self):
        with pytest.raises(NonFinite):
            integrate_positive_halfline(lambda v: np.where(v > 2, np.nan, np.exp(-v)))

    def test_scalar_only_integrand(self):
        assert integrate_positive_halfline(lambda v: math.exp(-v)) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("kw", [{"abs_tol": 0}, {"rel_tol": -1}, {"split_point": 0}, {"max_refinements": 0}])
    def test_spec_validation(self, kw):
        with pytest.raises(ValueError):
            QuadratureSpec(**kw)

    @settings(max_examples=30, deadline=None)
    @given(
        a=st.floats(-3, 3), b=st.floats(-3, 3),
        k1=st.integers(0, 4), k2=st.integers(0, 4),
        r1=st.floats(0.3, 4), r2=st.floats(0.3, 4),
    )
    def test_linearity(self, a, b, k1, k2, r1, r2):
        f = lambda v: v**k1 * np.exp(-r1 * v)
        g = lambda v: v**k2 * np.exp(-r2 * v)
        lhs = integrate_positive_halfline(lambda v: a * f(v) + b * g(v))
        If, Ig = integrate_positive_halfline(f), integrate_positive_halfline(g)
        # exact: k! / r^(k+1)
        assert If == pytest.approx(math.factorial(k1) / r1 ** (k1 + 1), rel=1e-9)
        scale = abs(a) * If + abs(b) * Ig + 1.0
        assert abs(lhs - (a * If + b * Ig)) <= 2 * 1e-10 * scale


class TestBessel:
    def test_k0_at_2_published(self):
        assert bessel_k(0, 2.0) == pytest.approx(0.1139, abs=5e-5)

    def test_k0_at_2_frozen(self):
        assert bessel_k(0, 2.0) == pytest.approx(K0_AT_2, rel=1e-10)

    def test_against_direct_integral(self):
        # the displayed representation integrated by an independent routine
        nu, z = 0.0, 2.0
        val, _ = integrate.quad(lambda t: t ** (-nu - 1) * math.exp(-t - z * z / (4 * t)), 0, np.inf,
                                epsabs=0, epsrel=1e-13, limit=200)
        assert bessel_k(nu, z) == pytest.approx(z**nu / 2 ** (nu + 1) * val, rel=1e-8)

    def test_half_order_closed_form(self):
        assert bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), abs=1e-10)

    def test_symmetric_in_order(self):
        assert bessel_k(-1.5, 0.7) == bessel_k(1.5, 0.7)

    @pytest.mark.parametrize("nu", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("z", [0.5, 1.0, 2.0, 5.0])
    def test_recurrence(self, nu, z):
        lhs = bessel_k(nu + 1, z)
        rhs = bessel_k(nu - 1, z) + 2 * nu / z * bessel_k(nu, z)
        assert lhs == pytest.approx(rhs, rel=1e-8)

    @pytest.mark.parametrize("z", [0.0, -1.0])
    def test_domain(self, z):
        with pytest.raises(DomainError):
            bessel_k(0, z)

    @pytest.mark.parametrize("nu,z", [(0, 0.01), (0, 30.0), (2.5, 0.3), (1, 200.0)])
    def test_extreme_arguments(self, nu, z):
        from scipy.special import kv

        assert bessel_k(nu, z) == pytest.approx(kv(nu, z), rel=1e-10)


class TestFiniteDiff:
    def test_quadratic(self):
        g = finite_diff_gradient(lambda x: x @ x, np.array([1.0, 2.0]))
        np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-8)

    def test_constant(self):
        np.testing.assert_array_equal(finite_diff_gradient(lambda x: 3.0, np.ones(4)), np.zeros(4))

    def test_nonfinite_probe(self):
        with pytest.raises(NonFinite):
            finite_diff_gradient(lambda x: 1.0 / x[0] if x[0] > 0 else np.nan, np.array([0.0]))

    def test_scalar(self):
        assert finite_diff_derivative(np.sin, 0.3) == pytest.approx(math.cos(0.3), abs=1e-9)


class TestRng:
    def test_reproducible(self):
        a = RngStream(2**63 + 11, 4).generator().random(10**6)
        b = RngStream(2**63 + 11, 4).generator().random(10**6)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(7, 0).generator().random(8)
        b = RngStream(7, 1).generator().random(8)
        assert not np.array_equal(a, b)


class TestLinalg:
    def test_eig_extremes(self):
        assert eig_extremes(np.diag([3.0, -1.0, 2.0])) == (-1.0, 3.0)

    def test_sym_inverse(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 4))
        a = a @ a.T + np.eye(4)
        inv, cond, floored = sym_inverse(a)
        np.testing.assert_allclose(inv @ a, np.eye(4), atol=1e-12)
        assert not floored and cond == pytest.approx(np.linalg.cond(a), rel=1e-10)

    def test_sym_inverse_floors_singular(self):
        inv, cond, floored = sym_inverse(np.diag([1.0, 0.0]))
        assert floored and math.isinf(cond) and np.all(np.isfinite(inv))
