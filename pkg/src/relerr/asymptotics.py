"""Sandwich covariance for the maximum gamma-likelihood estimator.

sqrt(n) (beta_hat - beta0) is asymptotically N(0, J^-1 Delta J^-1) with

    Delta = C^2 C2 Pi0(g)^2 Pi2(2g)
            + (C + C1)^2 C(2g) Pi0(2g) Pi1(g) Pi1(g)'
            - [M + M'],   M = C (C + C1) (C(2g) + C1(2g)) Pi0(g) Pi1(2g) Pi1(g)'
    J     = C C2(g/2) Pi0(g) Pi2(g) - (C + C1)^2 Pi1(g) Pi1(g)'

where C = C(g, h), C1 = C1(g, h), C2 = C2(g, h) are noise integrals and
Pi_k(s) = mean_i x_i^{(k)} exp(-s x_i' beta) are plug-in design moments.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import LogOverflow, SingularJ
from .model import Dataset, LossFamily
from .numerics import integrate_positive_halfline, sym_inverse
from .objective import c_gamma

_LOG_MAX = 700.0


@dataclass(frozen=True)
class NoiseConstants:
    gamma: float
    c: float  # C(g)
    c1: float  # C1(g)
    c2: float  # C2(g)
    c2_half: float  # C2(g/2)
    c_double: float  # C(2g)
    c1_double: float  # C1(2g)


def _c1(fam: LossFamily, gamma: float) -> float:
    # eps * h'(eps) = -h (1 + eps rho'(eps)) = h (u_h - 1)
    def integrand(e):
        u = np.log(e)
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            out = np.exp((1.0 + gamma) * fam.log_h_u(u)) * (-fam.drho_u(u) - 1.0)
        return np.where(np.isfinite(out), out, 0.0)

    return integrate_positive_halfline(integrand)


def _c2(fam: LossFamily, gamma: float) -> float:
    def integrand(e):
        u = np.log(e)
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            lh = (2.0 * gamma + 1.0) * fam.log_h_u(u)
            uh = fam.drho_u(u)
            # u_h^2 h^(2g+1), combined in logs to avoid inf * 0 in the tails
            out = np.exp(lh + 2.0 * np.log(np.abs(uh)))
        return np.where(np.isfinite(out), out, 0.0)

    return integrate_positive_halfline(integrand)


_CONST_CACHE: dict = {}
_CONST_LOCK = threading.Lock()


def noise_constants(fam: LossFamily, gamma: float) -> NoiseConstants:
    if not gamma >= 0:
        raise ValueError("gamma must be >= 0")
    key = (fam.kind, id(fam), float(gamma))
    with _CONST_LOCK:
        hit = _CONST_CACHE.get(key)
    if hit is not None:
        return hit
    nc = NoiseConstants(
        gamma=float(gamma),
        c=c_gamma(fam, gamma),
        c1=_c1(fam, gamma),
        c2=_c2(fam, gamma),
        c2_half=_c2(fam, gamma / 2.0),
        c_double=c_gamma(fam, 2.0 * gamma),
        c1_double=_c1(fam, 2.0 * gamma),
    )
    with _CONST_LOCK:
        _CONST_CACHE[key] = nc
    return nc


def fisher_constant(fam: LossFamily) -> float:
    """int u_h^2 h, the noise part of the Fisher information."""
    return _c2(fam, 0.0)


@dataclass(frozen=True)
class PiMoments:
    pi0: float
    pi1: np.ndarray
    pi2: np.ndarray
    gamma_scale: float


def _scaled_moments(X, beta, s, shift):
    """Moments of exp(-s x'beta - shift); returns (pi0, pi1, pi2)."""
    wts = np.exp(-s * (X @ beta) - shift)
    n = X.shape[0]
    pi0 = float(wts.mean())
    pi1 = X.T @ wts / n
    pi2 = (X * wts[:, None]).T @ X / n
    return pi0, pi1, 0.5 * (pi2 + pi2.T)


def pi_moments(data: Dataset, beta, gamma_scale: float) -> PiMoments:
    """mean_i x_i^{(k)} exp(-gamma_scale x_i' beta) for k = 0, 1, 2."""
    beta = np.asarray(beta, dtype=float)
    expo = -gamma_scale * (data.X @ beta)
    shift = float(expo.max())
    if shift > _LOG_MAX:
        raise LogOverflow(f"exponent {shift:.4g} exceeds {_LOG_MAX}")
    p0, p1, p2 = _scaled_moments(data.X, beta, gamma_scale, shift)
    k = np.exp(shift)
    return PiMoments(p0 * k, p1 * k, p2 * k, float(gamma_scale))


@dataclass(frozen=True)
class SandwichCovariance:
    delta: np.ndarray
    j: np.ndarray
    cov: np.ndarray
    h_prime: float
    h_dprime: np.ndarray
    j_condition: float
    n: int
    clipped: bool = False
    floored: bool = False

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


def assemble(nc: NoiseConstants, m_g, m_2g, centered: bool = False):
    """Delta and J from noise constants and (pi0, pi1, pi2) tuples at g and 2g."""
    c, c1, c2, c2h, cd, c1d = nc.c, nc.c1, nc.c2, nc.c2_half, nc.c_double, nc.c1_double
    p0, p1, p2 = m_g
    q0, q1, q2 = m_2g
    a = c + c1
    m = c * a * (cd + c1d) * p0 * np.outer(q1, p1)
    delta = c * c * c2 * p0 * p0 * q2 + a * a * cd * q0 * np.outer(p1, p1) - (m + m.T)
    if centered:
        # remove E_x[m(x) m(x)'] where m(x) is the conditional mean of each
        # estimating-function summand given x
        cross = np.outer(q1, p1)
        delta = delta - c * c * a * a * (p0 * p0 * q2 - p0 * (cross + cross.T) + q0 * np.outer(p1, p1))
    j = c * c2h * p0 * p2 - a * a * np.outer(p1, p1)
    return 0.5 * (delta + delta.T), 0.5 * (j + j.T)


def sandwich(fam: LossFamily, gamma: float, data: Dataset, beta_hat, centered: bool = False) -> SandwichCovariance:
    """Plug-in estimate of J^-1 Delta J^-1 / n at beta_hat.

    ``centered=True`` subtracts the between-x variance of the conditional
    means of the estimating-function summands from Delta; at gamma = 0 the
    two forms coincide.
    """
    beta = np.asarray(beta_hat, dtype=float)
    nc = noise_constants(fam, gamma)
    expo = -gamma * (data.X @ beta)
    shift = float(expo.max())
    m_g = _scaled_moments(data.X, beta, gamma, shift)
    m_2g = _scaled_moments(data.X, beta, 2 * gamma, 2 * shift)
    delta_s, j_s = assemble(nc, m_g, m_2g, centered)
    # Delta scales as exp(4 shift) and J as exp(2 shift); the ratio is scale free
    j_inv, cond, floored = sym_inverse(j_s)
    if cond > 1e12 or floored:
        warnings.warn(f"J is ill-conditioned (condition number {cond:.3g})", SingularJ, stacklevel=2)
    cov = j_inv @ delta_s @ j_inv / data.n
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov).copy()
    clipped = bool(np.any(diag < 0))
    if clipped:
        np.fill_diagonal(cov, np.maximum(diag, 0.0))
    with np.errstate(over="ignore"):
        delta = delta_s * np.exp(4 * shift)
        j = j_s * np.exp(2 * shift)
        h_prime = nc.c * m_g[0] * np.exp(shift)
        h_dprime = -(nc.c + nc.c1) * m_g[1] * np.exp(shift)
    return SandwichCovariance(delta, j, cov, float(h_prime), h_dprime, cond, data.n, clipped, floored)


def confidence_intervals(sc: SandwichCovariance, beta_hat, level: float = 0.95) -> np.ndarray:
    """Wald intervals beta_j -/+ z * se_j as an array of shape (p, 2)."""
    if not 0 <= level < 1:
        raise ValueError("level must lie in [0, 1)")
    z = float(norm.ppf(0.5 * (1.0 + level)))
    beta = np.asarray(beta_hat, dtype=float)
    half = z * sc.std_errors
    return np.column_stack([beta - half, beta + half])


def z_scores(sc: SandwichCovariance, beta_hat, beta_true) -> np.ndarray:
    diff = np.asarray(beta_hat, dtype=float) - np.asarray(beta_true, dtype=float)
    se = sc.std_errors
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(diff == 0, 0.0, diff / se)
