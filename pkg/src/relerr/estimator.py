"""Minimisation of the negative gamma-likelihood.

The MM iteration replaces ``ell1`` by the Jensen majoriser
``-sum_i w_i log f_i(beta) + const`` (weights frozen at the current iterate)
and ``ell2`` by a quadratic built from the Bohning bound on the Hessian of
log-sum-exp.  Both surrogates are convex for LPRE/LSRE, so each step is an
exact damped-Newton solve of a smooth convex problem.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from .errors import DegenerateWeights, InnerSolverFailure, NonFinite
from .model import default_start
from .objective import GammaObjective

log = logging.getLogger(__name__)

MODES = ("MM", "QUASI_NEWTON", "HYBRID")


@dataclass(frozen=True)
class InnerSolverConfig:
    newton_max_iter: int = 50
    newton_tol: float = 1e-10
    line_search_shrink: float = 0.5

    def __post_init__(self):
        if self.newton_max_iter < 1 or not self.newton_tol > 0:
            raise ValueError("invalid inner solver settings")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class MmConfig:
    max_iter: int = 500
    tol_beta: float = 1e-8
    tol_obj: float = 1e-10
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    mode: str = "MM"
    hybrid_mm_iters: int = 10

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.tol_beta > 0 and self.tol_obj > 0):
            raise ValueError("tolerances must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "HYBRID" and self.hybrid_mm_iters < 1:
            raise ValueError("hybrid_mm_iters must be >= 1")


@dataclass
class FitTrace:
    objective_per_iter: list = field(default_factory=list)
    step_norm_per_iter: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    fell_back_to_mm: bool = False


@dataclass
class FitResult:
    beta_hat: np.ndarray
    trace: FitTrace
    gamma: float
    loss_kind: str
    objective: float
    grad_norm: float  # sup-norm of the objective gradient at beta_hat

    @property
    def converged(self) -> bool:
        return self.trace.converged


@dataclass(frozen=True)
class Surrogate:
    """A smooth convex function of beta with exact derivatives."""

    value: Callable
    gradient: Callable
    hessian: Callable

    def __call__(self, beta):
        return self.value(beta)


def mm_weights(obj: GammaObjective, beta_t) -> np.ndarray:
    """w_i proportional to f(y_i|x_i; beta_t)^gamma, normalised to sum to one."""
    w = obj.weights(beta_t)
    if w.size > 1 and w.max() > 1.0 - 1e-12:
        warnings.warn("MM weights collapsed onto a single observation", DegenerateWeights, stacklevel=2)
    return w


def _xlogx_sum(w):
    pos = w > 0
    return float(np.sum(w[pos] * np.log(w[pos])))


def majorizer_ell1(obj: GammaObjective, beta_t) -> Surrogate:
    """Jensen majoriser of ell1, tangent at beta_t (constant included)."""
    w = obj.weights(beta_t)
    g = obj.gamma
    const = _xlogx_sum(w) / g if g else 0.0
    X, fam = obj.data.X, obj.fam

    def value(beta):
        return float(-np.dot(w, obj.terms(beta).logf)) + const

    def gradient(beta):
        u = obj.data.log_y - X @ np.asarray(beta, dtype=float)
        return -(X.T @ (w * fam.drho_u(u)))

    def hessian(beta):
        u = obj.data.log_y - X @ np.asarray(beta, dtype=float)
        return X.T @ ((w * fam.d2rho_u(u))[:, None] * X)

    return Surrogate(value, gradient, hessian)


def bohning_bound(X) -> np.ndarray:
    """X' B X with B = (I - 11'/n)/2."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    col = X.sum(axis=0)
    M = 0.5 * (X.T @ X - np.outer(col, col) / n)
    return 0.5 * (M + M.T)


def majorizer_ell2(obj: GammaObjective, beta_t, xbx=None) -> Surrogate:
    """Quadratic majoriser of ell2 from the Bohning bound, tangent at beta_t."""
    g = obj.gamma
    X = obj.data.X
    p = obj.data.p
    beta_t = np.asarray(beta_t, dtype=float)
    if g == 0:
        zero = np.zeros(p)
        return Surrogate(lambda b: 0.0, lambda b: zero.copy(), lambda b: np.zeros((p, p)))
    M = bohning_bound(X) if xbx is None else xbx
    theta_t = -g * (X @ beta_t)
    s_t = float(logsumexp(theta_t))
    lin = X.T @ softmax(theta_t)
    k = 1.0 / (1.0 + g)

    def value(beta):
        d = np.asarray(beta, dtype=float) - beta_t
        return k * (s_t - g * float(lin @ d) + 0.5 * g * g * float(d @ M @ d))

    def gradient(beta):
        d = np.asarray(beta, dtype=float) - beta_t
        return k * (-g * lin + g * g * (M @ d))

    def hessian(beta):
        return (k * g * g) * M

    return Surrogate(value, gradient, hessian)


class _StepProblem:
    """Surrogate ell1~ + ell2~ specialised for fast repeated Newton steps.

    Only beta-dependent parts are kept: sum_i w_i rho(u_i) + quadratic.
    """

    def __init__(self, obj: GammaObjective, beta_t, w, xbx):
        g = obj.gamma
        self.X = obj.data.X
        self.log_y = obj.data.log_y
        self.fam = obj.fam
        self.w = w
        self.beta_t = beta_t
        p = obj.data.p
        if g == 0:
            self.lin = np.zeros(p)
            self.quad = np.zeros((p, p))
        else:
            k = 1.0 / (1.0 + g)
            pi = softmax(-g * (self.X @ beta_t))
            self.lin = -k * g * (self.X.T @ pi)
            self.quad = k * g * g * xbx

    def value(self, beta):
        d = beta - self.beta_t
        u = self.log_y - self.X @ beta
        with np.errstate(over="ignore"):
            r = float(np.dot(self.w, self.fam.rho_u(u)))
        return r + float(self.lin @ d) + 0.5 * float(d @ self.quad @ d)

    def grad_hess(self, beta):
        d = beta - self.beta_t
        u = self.log_y - self.X @ beta
        X = self.X
        grad = -(X.T @ (self.w * self.fam.drho_u(u))) + self.lin + self.quad @ d
        hess = X.T @ ((self.w * self.fam.d2rho_u(u))[:, None] * X) + self.quad
        return grad, hess


def _newton(prob: _StepProblem, beta0, cfg: InnerSolverConfig):
    beta = beta0.copy()
    q = prob.value(beta)
    for _ in range(cfg.newton_max_iter):
        grad, hess = prob.grad_hess(beta)
        if np.max(np.abs(grad)) <= cfg.newton_tol:
            return beta, True
        try:
            d = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        slope = float(grad @ d)
        if not slope < 0:
            d, slope = -grad, -float(grad @ grad)
        # below this decrement q cannot resolve progress; judge steps by the gradient instead
        flat = -slope <= 64 * np.finfo(float).eps * (1.0 + abs(q))
        gnorm = float(np.max(np.abs(grad)))
        a = 1.0
        while True:
            cand = beta + a * d
            qc = prob.value(cand)
            if qc <= q + 1e-4 * a * slope:
                break
            if flat and float(np.max(np.abs(prob.grad_hess(cand)[0]))) < gnorm:
                break
            a *= cfg.line_search_shrink
            if a < 1e-14:
                return beta, flat
        beta, q = cand, min(q, qc)
    grad, _ = prob.grad_hess(beta)
    return beta, bool(np.max(np.abs(grad)) <= cfg.newton_tol)


def mm_step(obj: GammaObjective, beta_t, cfg: InnerSolverConfig = InnerSolverConfig(), xbx=None):
    """One MM update: argmin of ell1~(.|beta_t) + ell2~(.|beta_t)."""
    beta_t = np.asarray(beta_t, dtype=float)
    w = obj.weights(beta_t)
    if obj.gamma and xbx is None:
        xbx = bohning_bound(obj.data.X)
    prob = _StepProblem(obj, beta_t, w, xbx)
    beta, ok = _newton(prob, beta_t, cfg)
    if not ok:
        raise InnerSolverFailure("surrogate Newton solve did not reach tolerance", beta=beta)
    return beta


def _run_mm(obj, beta, cfg: MmConfig, max_iter, trace: FitTrace):
    xbx = bohning_bound(obj.data.X) if obj.gamma else None
    f_t = obj(beta)
    if not trace.objective_per_iter:
        trace.objective_per_iter.append(f_t)
    for _ in range(max_iter):
        try:
            beta_new = mm_step(obj, beta, cfg.inner, xbx)
        except InnerSolverFailure as exc:
            if exc.beta is None or not obj(exc.beta) <= f_t:
                raise
            log.debug("inner solve short of tolerance; accepting descent iterate")
            beta_new = exc.beta
        f_new = obj(beta_new)
        if f_new > f_t:
            # surrogate guarantees descent; an increase is rounding noise at the optimum
            trace.converged = True
            break
        step = float(np.max(np.abs(beta_new - beta)))
        dec = f_t - f_new
        beta, f_t = beta_new, f_new
        trace.iterations += 1
        trace.objective_per_iter.append(f_t)
        trace.step_norm_per_iter.append(step)
        if step <= cfg.tol_beta or dec <= cfg.tol_obj:
            trace.converged = True
            break
    return beta


class _Abort(Exception):
    pass


def _run_quasi_newton(obj, beta, cfg: MmConfig, trace: FitTrace, strict_nan: bool):
    """L-BFGS on the objective; returns (beta, ok). ok False requests MM fallback."""
    state = {"best": np.asarray(beta, dtype=float).copy(), "f": obj(beta)}
    if not trace.objective_per_iter:
        trace.objective_per_iter.append(state["f"])

    def fun(b):
        val = obj.eval(b).total
        if np.isnan(val):
            raise NonFinite("objective became NaN")
        if not np.isfinite(val):
            return np.inf, np.zeros_like(b)
        return val, obj.gradient(b)

    def callback(xk):
        fk = obj(xk)
        if not fk <= state["f"]:
            raise _Abort
        step = float(np.max(np.abs(xk - state["best"])))
        state["best"], state["f"] = xk.copy(), fk
        trace.iterations += 1
        trace.objective_per_iter.append(fk)
        trace.step_norm_per_iter.append(step)

    try:
        res = minimize(
            fun, state["best"], jac=True, method="L-BFGS-B", callback=callback,
            options={"maxiter": cfg.max_iter, "ftol": cfg.tol_obj, "gtol": cfg.tol_beta, "maxls": 40},
        )
    except NonFinite:
        if strict_nan:
            raise
        return state["best"], False
    except _Abort:
        return state["best"], False
    f_end = obj(res.x)
    if not f_end <= state["f"]:
        return state["best"], False
    gnorm = float(np.max(np.abs(obj.gradient(res.x))))
    trace.converged = bool(res.success) or gnorm <= 10 * np.sqrt(cfg.tol_obj)
    return res.x, True


def fit(obj: GammaObjective, beta0=None, cfg: MmConfig = MmConfig()) -> FitResult:
    """Minimise the negative gamma-likelihood from ``beta0``."""
    beta = default_start(obj.data) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta0 must be finite")
    trace = FitTrace()
    if cfg.mode == "MM":
        beta = _run_mm(obj, beta, cfg, cfg.max_iter, trace)
    else:
        if cfg.mode == "HYBRID":
            beta = _run_mm(obj, beta, cfg, cfg.hybrid_mm_iters, trace)
            trace.converged = False
        beta_qn, ok = _run_quasi_newton(obj, beta, cfg, trace, strict_nan=cfg.mode == "QUASI_NEWTON")
        if ok:
            beta = beta_qn
        else:
            log.info("quasi-Newton increased the objective; falling back to MM")
            trace.fell_back_to_mm = True
            trace.converged = False
            beta = _run_mm(obj, beta_qn, cfg, cfg.max_iter, trace)
    value = obj(beta)
    gnorm = float(np.max(np.abs(obj.gradient(beta))))
    return FitResult(beta, trace, obj.gamma, obj.fam.kind, value, gnorm)
