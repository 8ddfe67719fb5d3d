"""Negative gamma-likelihood for multiplicative regression.

For ``gamma > 0``::

    ell1(beta) = -(1/gamma) log sum_i f_i^gamma
    ell2(beta) = (1/(1+gamma)) log sum_i t_i^(-gamma)

and the objective is ``ell1 + ell2`` (the beta-free constant is dropped).
``gamma == 0`` is the exact negative mean log-likelihood.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DomainError, NonFinite
from .model import Dataset, LossFamily
from .numerics import integrate_positive_halfline


@dataclass(frozen=True)
class ObjectiveValue:
    total: float
    ell1: float
    ell2: float


@dataclass(frozen=True)
class _Terms:
    """Per-observation quantities at one beta."""

    eta: np.ndarray
    u: np.ndarray
    logf: np.ndarray


def c_gamma(fam: LossFamily, gamma: float) -> float:
    """int_0^inf h(v)^(1+gamma) dv."""

    def integrand(e):
        with np.errstate(under="ignore", over="ignore"):
            return np.exp((1.0 + gamma) * fam.log_h_u(np.log(e)))

    return integrate_positive_halfline(integrand)


class GammaObjective:
    """The pairing of a loss family, a robustness level gamma and a dataset."""

    def __init__(self, fam: LossFamily, gamma: float, data: Dataset):
        if not gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {gamma}")
        self.fam = fam
        self.gamma = float(gamma)
        self.data = data
        self._dl2_lock = threading.Lock()
        self._dl2_cache = None

    @cached_property
    def c_gamma_h(self) -> float:
        return c_gamma(self.fam, self.gamma)

    def terms(self, beta) -> _Terms:
        beta = np.asarray(beta, dtype=float)
        eta = self.data.X @ beta
        u = self.data.log_y - eta
        with np.errstate(over="ignore", invalid="ignore"):
            logf = self.fam.log_norm_const - self.data.log_y - self.fam.rho_u(u)
        if np.any(np.isnan(logf)):
            raise NonFinite("log density is NaN")
        return _Terms(eta, u, logf)

    def eval(self, beta) -> ObjectiveValue:
        tm = self.terms(beta)
        g = self.gamma
        if g == 0:
            total = -float(np.mean(tm.logf))
            return ObjectiveValue(total, total, 0.0)
        with np.errstate(over="ignore"):
            ell1 = -float(logsumexp(g * tm.logf)) / g
            ell2 = float(logsumexp(-g * tm.eta)) / (1.0 + g)
        return ObjectiveValue(ell1 + ell2, ell1, ell2)

    def __call__(self, beta) -> float:
        return self.eval(beta).total

    def weights(self, beta, tm: _Terms = None) -> np.ndarray:
        tm = self.terms(beta) if tm is None else tm
        if self.gamma == 0:
            return np.full(self.data.n, 1.0 / self.data.n)
        w = softmax(self.gamma * tm.logf)
        return w / w.sum()

    def ell2_gradient(self, beta, tm: _Terms = None) -> np.ndarray:
        """d ell2 / d beta = -(gamma/(1+gamma)) X' pi, pi = softmax(-gamma X beta)."""
        g = self.gamma
        if g == 0:
            return np.zeros(self.data.p)
        tm = self.terms(beta) if tm is None else tm
        pi = softmax(-g * tm.eta)
        return -(g / (1.0 + g)) * (self.data.X.T @ pi)

    def gradient(self, beta) -> np.ndarray:
        tm = self.terms(beta)
        X = self.data.X
        dr = self.fam.drho_u(tm.u)  # score_i = x_i * dr_i
        if self.gamma == 0:
            return -(X.T @ dr) / self.data.n
        w = self.weights(beta, tm)
        return -(X.T @ (w * dr)) + self.ell2_gradient(beta, tm)

    def _cached_ell2_gradient(self, beta):
        key = np.asarray(beta, dtype=float).tobytes()
        with self._dl2_lock:
            if self._dl2_cache is not None and self._dl2_cache[0] == key:
                return self._dl2_cache[1]
        val = self.ell2_gradient(beta)
        with self._dl2_lock:
            self._dl2_cache = (key, val)
        return val

    def psi(self, y: float, x, beta) -> np.ndarray:
        """Per-observation estimating function f^gamma * (score - d ell2/d beta)."""
        if not y > 0:
            raise DomainError(f"response must be positive, got {y}")
        x = np.asarray(x, dtype=float)
        beta = np.asarray(beta, dtype=float)
        u = np.log(y) - float(x @ beta)
        with np.errstate(over="ignore", under="ignore"):
            logf = self.fam.log_norm_const - np.log(y) - float(self.fam.rho_u(u))
            fg = np.exp(self.gamma * logf) if self.gamma else 1.0
            s = x * float(self.fam.drho_u(u))
        if fg == 0.0:
            return np.zeros_like(x)
        return fg * (s - self._cached_ell2_gradient(beta))

    def psi_all(self, beta) -> np.ndarray:
        """psi evaluated at every observation of the dataset (n x p)."""
        tm = self.terms(beta)
        with np.errstate(under="ignore"):
            fg = np.exp(self.gamma * tm.logf)
        s = self.data.X * self.fam.drho_u(tm.u)[:, None]
        return fg[:, None] * (s - self.ell2_gradient(beta, tm))

    def eval_density_power(self, beta) -> float:
        """Density-power divergence counterpart of the objective."""
        g = self.gamma
        if g == 0:
            raise DomainError("density-power objective needs gamma > 0; use eval at gamma = 0")
        tm = self.terms(beta)
        with np.errstate(under="ignore", over="ignore"):
            a = np.mean(np.exp(g * tm.logf))
            b = np.mean(np.exp(-g * tm.eta)) * self.c_gamma_h
        return float(-a / g + b / (1.0 + g))

    def gradient_density_power(self, beta) -> np.ndarray:
        g = self.gamma
        if g == 0:
            raise DomainError("density-power objective needs gamma > 0")
        tm = self.terms(beta)
        X = self.data.X
        with np.errstate(under="ignore", over="ignore"):
            fg = np.exp(g * tm.logf)
            tg = np.exp(-g * tm.eta)
        s_w = fg * self.fam.drho_u(tm.u)
        return (-(X.T @ s_w) - (g / (1.0 + g)) * self.c_gamma_h * (X.T @ tg)) / self.data.n
