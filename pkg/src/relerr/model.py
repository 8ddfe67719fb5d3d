"""GRE loss families, noise densities and conditional densities.

A GRE loss ``g(a, b)`` induces ``rho(eps) = g(|1 - 1/eps|, |1 - eps|)`` and the
noise density ``h(eps) = C/eps * exp(-rho(eps))`` on ``eps > 0``.  Under the
multiplicative model ``y = exp(x'beta) * eps`` the conditional density is
``f(y|x; beta) = h(y/t)/t`` with ``t = exp(x'beta)``, equivalently
``log f = log C - log y - rho(y/t)``.

Internally everything is evaluated on ``u = log eps``; the functions
``rho_u``, ``drho_u`` and ``d2rho_u`` are ``rho(e^u)`` and its first two
derivatives in ``u``.  ``drho_u = eps * rho'(eps)`` so that the score is
``x * drho_u(u)`` and ``u_h(eps) = -drho_u(log eps)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DataError, DomainError, LogOverflow
from .numerics import integrate_positive_halfline

LOG_BOUND = 700.0


@dataclass(frozen=True, eq=False)
class LossFamily:
    """A smooth, symmetric GRE loss together with its induced noise law.

    ``rho_prime``/``rho_second`` act on ``eps``; the ``*_u`` callables act on
    ``u = log eps`` and are what the numerical code uses.
    """

    kind: str
    g: Callable
    rho: Callable
    rho_prime: Callable
    rho_second: Callable
    rho_u: Callable
    drho_u: Callable
    d2rho_u: Callable

    @cached_property
    def norm_const(self) -> float:
        """Normalising constant C(g) with int h = 1."""

        def unnormalised(eps):
            with np.errstate(over="ignore", under="ignore", divide="ignore"):
                return np.exp(-self.rho_u(np.log(eps)) - np.log(eps))

        return 1.0 / integrate_positive_halfline(unnormalised)

    @cached_property
    def log_norm_const(self) -> float:
        return math.log(self.norm_const)

    def log_h_u(self, u):
        """log h(e^u), vectorised."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self.log_norm_const - u - self.rho_u(u)

    def curvature_u(self, u):
        """Second derivative of -log f in the linear predictor (per unit x x')."""
        return self.d2rho_u(u)

    def __repr__(self):
        return f"LossFamily({self.kind!r})"


def _lpre_rho_u(u):
    s = np.sinh(0.5 * np.asarray(u, dtype=float))
    return 4.0 * s * s


def _lsre_rho_u(u):
    u = np.asarray(u, dtype=float)
    return np.expm1(-u) ** 2 + np.expm1(u) ** 2


def _lsre_drho_u(u):
    u = np.asarray(u, dtype=float)
    return -2.0 * np.exp(-u) * np.expm1(-u) + 2.0 * np.exp(u) * np.expm1(u)


def _lsre_d2rho_u(u):
    u = np.asarray(u, dtype=float)
    return -2.0 * np.exp(-u) + 4.0 * np.exp(-2 * u) + 4.0 * np.exp(2 * u) - 2.0 * np.exp(u)


def _build_lpre():
    return LossFamily(
        kind="LPRE",
        g=lambda a, b: a * b,
        rho=lambda e: _lpre_rho_u(np.log(e)),
        rho_prime=lambda e: 1.0 - 1.0 / (e * e),
        rho_second=lambda e: 2.0 / (e * e * e),
        rho_u=_lpre_rho_u,
        drho_u=lambda u: 2.0 * np.sinh(u),
        d2rho_u=lambda u: 2.0 * np.cosh(u),
    )


def _build_lsre():
    return LossFamily(
        kind="LSRE",
        g=lambda a, b: a * a + b * b,
        rho=lambda e: _lsre_rho_u(np.log(e)),
        rho_prime=lambda e: 2.0 * (1.0 - 1.0 / e) / (e * e) + 2.0 * (e - 1.0),
        rho_second=lambda e: -4.0 / e**3 + 6.0 / e**4 + 2.0,
        rho_u=_lsre_rho_u,
        drho_u=_lsre_drho_u,
        d2rho_u=_lsre_d2rho_u,
    )


_REGISTRY: dict[str, LossFamily] = {}
_REGISTRY_LOCK = threading.Lock()
_BUILDERS = {"LPRE": _build_lpre, "LSRE": _build_lsre}


def make_loss(kind: str = "LPRE") -> LossFamily:
    """Return the (shared, immutable) loss family named ``kind``."""
    key = kind.upper()
    with _REGISTRY_LOCK:
        if key not in _REGISTRY:
            if key not in _BUILDERS:
                raise KeyError(f"unknown loss family {kind!r}")
            _REGISTRY[key] = _BUILDERS[key]()
        return _REGISTRY[key]


def register_loss(kind, g, rho, rho_prime, rho_second, check_grid=None) -> LossFamily:
    """Register a user-supplied smooth GRE loss.

    ``g`` must be symmetric; this is checked on a grid before registration.
    Derivatives in ``u = log eps`` are derived from the ``eps`` forms.
    """
    grid = np.linspace(0.0, 5.0, 21) if check_grid is None else np.asarray(check_grid)
    a, b = np.meshgrid(grid, grid)
    if not np.allclose(g(a, b), g(b, a), rtol=1e-12, atol=1e-12):
        raise ValueError(f"loss {kind!r} is not symmetric: g(a, b) != g(b, a)")

    def rho_u(u):
        return rho(np.exp(u))

    def drho_u(u):
        e = np.exp(u)
        return e * rho_prime(e)

    def d2rho_u(u):
        e = np.exp(u)
        return e * e * rho_second(e) + e * rho_prime(e)

    fam = LossFamily(kind.upper(), g, rho, rho_prime, rho_second, rho_u, drho_u, d2rho_u)
    with _REGISTRY_LOCK:
        _REGISTRY[fam.kind] = fam
    return fam


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``X`` (n x p) and strictly positive responses ``y``."""

    X: np.ndarray
    y: np.ndarray
    has_intercept: bool = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"X has shape {X.shape} but y has length {y.shape[0]}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise DataError("need at least one row and one column")
        if not np.all(np.isfinite(X)):
            row = int(np.argwhere(~np.isfinite(X))[0, 0])
            raise DataError(f"non-finite predictor at index {row}")
        if not np.all(np.isfinite(y)):
            raise DataError(f"non-finite response at index {int(np.argmax(~np.isfinite(y)))}")
        if np.any(y <= 0):
            raise DataError(f"response must be positive; y <= 0 at index {int(np.argmax(y <= 0))}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.has_intercept is None:
            object.__setattr__(self, "has_intercept", bool(np.all(X[:, 0] == 1.0)))
        object.__setattr__(self, "log_y", np.log(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def with_intercept(cls, Z, y):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[0] != len(y) and Z.shape[1] == len(y):
            Z = Z.T
        return cls(np.column_stack([np.ones(len(y)), Z]), y, has_intercept=True)


def _check_point(y, x, beta):
    if not y > 0:
        raise DomainError(f"response must be positive, got {y}")
    eta = float(np.dot(np.asarray(x, dtype=float), np.asarray(beta, dtype=float)))
    if abs(eta) > LOG_BOUND:
        raise LogOverflow(f"linear predictor {eta:.4g} outside +-{LOG_BOUND}")
    return eta


def noise_density(fam: LossFamily, eps):
    """h(eps) for eps > 0 (vectorised)."""
    e = np.asarray(eps, dtype=float)
    if np.any(e <= 0):
        raise DomainError("noise density defined for eps > 0 only")
    with np.errstate(under="ignore", over="ignore"):
        out = np.exp(fam.log_h_u(np.log(e)))
    return float(out) if out.ndim == 0 else out


def log_conditional_density(fam: LossFamily, y: float, x, beta) -> float:
    eta = _check_point(y, x, beta)
    ly = math.log(y)
    return float(fam.log_norm_const - ly - fam.rho_u(ly - eta))


def conditional_density(fam: LossFamily, y: float, x, beta) -> float:
    with np.errstate(under="ignore"):
        return float(np.exp(log_conditional_density(fam, y, x, beta)))


def score(fam: LossFamily, y: float, x, beta) -> np.ndarray:
    """d/d beta of log f(y|x; beta), equal to ``x * eps * rho'(eps)``."""
    eta = _check_point(y, x, beta)
    return np.asarray(x, dtype=float) * float(fam.drho_u(math.log(y) - eta))


def u_h(fam: LossFamily, eps):
    """1 + eps * (log h)'(eps), equal to ``-eps * rho'(eps)``."""
    e = np.asarray(eps, dtype=float)
    if np.any(e <= 0):
        raise DomainError("u_h defined for eps > 0 only")
    out = -fam.drho_u(np.log(e))
    return float(out) if np.ndim(out) == 0 else out


def gre_criterion(fam: LossFamily, data: Dataset, beta) -> float:
    """Sum over observations of g(|1 - t/y|, |1 - y/t|)."""
    u = data.log_y - data.X @ np.asarray(beta, dtype=float)
    return float(np.sum(fam.rho_u(u)))


def default_start(data: Dataset) -> np.ndarray:
    """Slopes at zero; intercept (if present) at the log geometric mean of y."""
    beta = np.zeros(data.p)
    if data.has_intercept:
        beta[0] = float(np.mean(data.log_y))
    return beta
