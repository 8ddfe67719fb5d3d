"""Monte Carlo contamination experiments for robust relative-error regression.

Predictors are equicorrelated Gaussians; responses come from the mixture
``(1 - delta) f(y|x; beta0) + delta LogNormal(mu, sigma)``.  Each replicate
draws from its own ``RngStream(seed, replicate_index)`` so results do not
depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import json
import math
import os
import threading
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .asymptotics import sandwich, z_scores
from .errors import DimensionMismatch, DomainError, RelErrError, ScenarioError, UnsupportedFamily
from .estimator import MmConfig, fit
from .model import Dataset, LossFamily, make_loss
from .numerics import RngStream
from .objective import GammaObjective

MODEL_BETAS = {
    "MODEL1": (1.0, 1.0, 1.0),
    "MODEL2": (0.5,) * 6 + (0.0,) * 45,
}
DEFAULT_DELTAS = (0.0, 0.05, 0.1, 0.2)
Z_95 = 1.959963984540054


class TooManyFailures(RelErrError, RuntimeError):
    pass


@dataclass(frozen=True)
class McScenario:
    model: str = "MODEL1"
    n: int = 200
    rho: float = 0.0
    delta: float = 0.0
    outlier_mu: float = 5.0
    outlier_sigma: float = 1.0
    gamma_grid: tuple = (0.0, 0.5)
    loss_kind: str = "LPRE"
    replicates: int = 500
    seed: int = 0
    beta_true: tuple = None  # required for model == "CUSTOM"
    max_iter: int = 500
    failure_threshold: float = 0.2

    def __post_init__(self):
        model = self.model.upper()
        object.__setattr__(self, "model", model)
        if model in MODEL_BETAS:
            if self.beta_true is not None and tuple(self.beta_true) != MODEL_BETAS[model]:
                raise ScenarioError(f"{model} fixes beta_true; drop the field or use CUSTOM")
            object.__setattr__(self, "beta_true", MODEL_BETAS[model])
        elif model == "CUSTOM":
            if not self.beta_true:
                raise ScenarioError("CUSTOM model needs beta_true")
            object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        else:
            raise ScenarioError(f"unknown model {self.model!r}")
        object.__setattr__(self, "gamma_grid", tuple(float(g) for g in self.gamma_grid))
        if not 0 <= self.rho < 1:
            raise ScenarioError("rho must lie in [0, 1)")
        if not 0 <= self.delta < 1:
            raise ScenarioError("delta must lie in [0, 1)")
        if not self.outlier_sigma > 0:
            raise ScenarioError("outlier_sigma must be positive")
        if self.n < self.p:
            raise ScenarioError(f"n = {self.n} smaller than p = {self.p}")
        if self.replicates < 1 or not self.gamma_grid or min(self.gamma_grid) < 0:
            raise ScenarioError("need replicates >= 1 and a non-empty, non-negative gamma grid")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must be a 64-bit unsigned integer")

    @property
    def p(self) -> int:
        return len(self.beta_true)

    @classmethod
    def from_dict(cls, d: dict) -> "McScenario":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ScenarioError(f"unknown scenario fields: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc


# ----------------------------------------------------------------- sampling

_SAMPLERS: dict = {}
_SAMPLER_LOCK = threading.Lock()


def _quantile_table(fam: LossFamily, cells: int = 16000):
    """Monotone interpolant of log(eps) as a function of the CDF of h."""
    c = fam.norm_const
    # density of u = log eps is C exp(-rho_u(u)); widen until both tails are negligible
    lo, hi = -1.0, 1.0
    with np.errstate(over="ignore", under="ignore"):
        while c * math.exp(-float(fam.rho_u(lo))) > 1e-18:
            lo *= 1.5
            if lo < -700:
                raise UnsupportedFamily(f"{fam.kind}: noise tail too heavy to tabulate")
        while c * math.exp(-float(fam.rho_u(hi))) > 1e-18:
            hi *= 1.5
            if hi > 700:
                raise UnsupportedFamily(f"{fam.kind}: noise tail too heavy to tabulate")
    edges = np.linspace(lo, hi, cells + 1)
    nodes, wts = np.polynomial.legendre.leggauss(6)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    with np.errstate(over="ignore", under="ignore"):
        dens = c * np.exp(-fam.rho_u(pts))
    mass = half * (dens @ wts)
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return PchipInterpolator(cdf[keep], edges[keep], extrapolate=False), (cdf[keep], edges[keep])


def noise_quantile(fam: LossFamily):
    """Cached quantile function of log(eps) for ``fam``."""
    key = (fam.kind, id(fam))
    with _SAMPLER_LOCK:
        if key not in _SAMPLERS:
            _SAMPLERS[key] = _quantile_table(fam)
        return _SAMPLERS[key][0]


def noise_cdf_table(fam: LossFamily):
    noise_quantile(fam)
    return _SAMPLERS[(fam.kind, id(fam))][1]


def sample_noise(fam: LossFamily, rng: np.random.Generator, size=None):
    """Draw eps ~ h by inverse CDF."""
    q = noise_quantile(fam)
    u = rng.random(size)
    return np.exp(q(u))


def generate_predictors(scn: McScenario, rng: np.random.Generator) -> np.ndarray:
    """Rows ~ N(0, (1 - rho) I + rho 11')."""
    z = rng.standard_normal((scn.n, scn.p))
    w = rng.standard_normal((scn.n, 1))
    return math.sqrt(1.0 - scn.rho) * z + math.sqrt(scn.rho) * w


def generate_responses(scn: McScenario, X, fam: LossFamily, rng: np.random.Generator, return_mask=False):
    """Responses from the contaminated multiplicative model."""
    n = X.shape[0]
    mask = rng.random(n) < scn.delta
    eps = sample_noise(fam, rng, n)
    outliers = np.exp(rng.normal(scn.outlier_mu, scn.outlier_sigma, n))
    clean = np.exp(X @ np.asarray(scn.beta_true) + np.log(eps))
    y = np.where(mask, outliers, clean)
    return (y, mask) if return_mask else y


def clean_responses(scn: McScenario, X, fam: LossFamily, rng: np.random.Generator):
    return np.exp(X @ np.asarray(scn.beta_true)) * sample_noise(fam, rng, X.shape[0])


def outage_series(seed, days=80, period=24, outage=(60, 4), depth=1e-3, noise_sd=0.1, level=3.0, amplitude=2.0):
    """Seasonal multiplicative series with one run of whole days scaled by ``depth``.

    ``y_k = m_k exp(z_k)`` with daily profile ``m_k = level + amplitude sin(2 pi k / period)``
    and ``z_k ~ N(0, noise_sd^2)``; days ``outage[0] .. outage[0] + outage[1] - 1``
    are multiplied by ``depth`` (near-zero readings such as a meter outage).
    """
    if not (0 <= outage[0] and outage[1] >= 1 and outage[0] + outage[1] <= days):
        raise ScenarioError("outage must lie inside the series")
    if not (depth > 0 and level > amplitude >= 0):
        raise ScenarioError("need depth > 0 and level > amplitude >= 0 for a positive series")
    rng = RngStream(seed).generator()
    k = np.arange(days * period)
    m = level + amplitude * np.sin(2 * np.pi * k / period)
    y = m * np.exp(rng.normal(0.0, noise_sd, k.size))
    lo, hi = outage[0] * period, (outage[0] + outage[1]) * period
    y[lo:hi] *= depth
    return y


# ------------------------------------------------------------------ metrics

def rpe_terms(beta_hat, X_new, y_new) -> np.ndarray:
    """Per-observation (y - t)^2 / (y t) = y/t + t/y - 2."""
    y_new = np.asarray(y_new, dtype=float)
    if np.any(y_new <= 0):
        raise DomainError("relative prediction error needs positive responses")
    u = np.log(y_new) - np.asarray(X_new, dtype=float) @ np.asarray(beta_hat, dtype=float)
    s = np.sinh(0.5 * u)
    return 4.0 * s * s


def rpe(beta_hat, X_new, y_new) -> float:
    return float(np.sum(rpe_terms(beta_hat, X_new, y_new)))


def mse(beta_hat, beta_true) -> float:
    a = np.asarray(beta_hat, dtype=float)
    b = np.asarray(beta_true, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths differ: {a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2))


# --------------------------------------------------------------- harness

@dataclass
class ReplicateResult:
    rpe: np.ndarray  # (G,)
    mse: np.ndarray  # (G,)
    z: np.ndarray  # (G, p)
    converged: np.ndarray  # (G,) bool
    failed: np.ndarray  # (G,) bool
    n_outliers: int


def run_replicate(scn: McScenario, index: int, cfg: MmConfig = None) -> ReplicateResult:
    cfg = MmConfig(max_iter=scn.max_iter) if cfg is None else cfg
    fam = make_loss(scn.loss_kind)
    rng = RngStream(scn.seed, index).generator()
    X = generate_predictors(scn, rng)
    y, mask = generate_responses(scn, X, fam, rng, return_mask=True)
    y_new = clean_responses(scn, X, fam, rng)
    data = Dataset(X, y, has_intercept=False)
    G, p = len(scn.gamma_grid), scn.p
    out = ReplicateResult(
        np.full(G, np.nan), np.full(G, np.nan), np.full((G, p), np.nan),
        np.zeros(G, bool), np.zeros(G, bool), int(mask.sum()),
    )
    for k, g in enumerate(scn.gamma_grid):
        try:
            res = fit(GammaObjective(fam, g, data), None, cfg)
            if not np.all(np.isfinite(res.beta_hat)):
                raise ArithmeticError("non-finite estimate")
            out.rpe[k] = rpe(res.beta_hat, X, y_new)
            out.mse[k] = mse(res.beta_hat, scn.beta_true)
            out.converged[k] = res.converged
        except (RelErrError, ArithmeticError, np.linalg.LinAlgError):
            out.failed[k] = True
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sc = sandwich(fam, g, data, res.beta_hat)
            out.z[k] = z_scores(sc, res.beta_hat, scn.beta_true)
        except (RelErrError, ArithmeticError, np.linalg.LinAlgError):
            pass
    return out


def _run_chunk(args):
    scn, indices = args
    return [run_replicate(scn, i) for i in indices]


def worker_count(requested=None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("RELERR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class McSummary:
    scenario: McScenario
    rpe: np.ndarray  # (T, G)
    mse: np.ndarray  # (T, G)
    z: np.ndarray  # (T, G, p)
    converged: np.ndarray  # (T, G)
    failed: np.ndarray  # (T, G)
    n_outliers: int = 0
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, g in enumerate(self.scenario.gamma_grid):
            ok = ~self.failed[:, k]
            cell = {}
            for name, arr in (("rpe", self.rpe), ("mse", self.mse)):
                vals = arr[ok, k]
                q = np.percentile(vals, [25, 50, 75]) if vals.size else [np.nan] * 3
                cell[name] = {"p25": float(q[0]), "p50": float(q[1]), "p75": float(q[2])}
            zk = self.z[ok, k]
            zk = zk[np.all(np.isfinite(zk), axis=1)]
            cell["z_mean"] = zk.mean(axis=0).tolist() if len(zk) else None
            cell["z_sd"] = zk.std(axis=0, ddof=1).tolist() if len(zk) > 1 else None
            cell["coverage95"] = (np.abs(zk) <= Z_95).mean(axis=0).tolist() if len(zk) else None
            cell["failures"] = int(self.failed[:, k].sum())
            cell["nonconverged"] = int((~self.converged[:, k] & ok).sum())
            self.stats[g] = cell

    @property
    def replicates(self) -> int:
        return self.rpe.shape[0]

    def median(self, metric: str, gamma: float) -> float:
        return self.stats[float(gamma)][metric]["p50"]

    def to_dict(self) -> dict:
        scn = asdict(self.scenario)
        scn["gamma_grid"] = list(scn["gamma_grid"])
        scn["beta_true"] = list(scn["beta_true"])
        return {
            "scenario": scn,
            "replicates": self.replicates,
            "outlier_draws": self.n_outliers,
            "per_gamma": [{"gamma": g, **cell} for g, cell in self.stats.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self):
        """Tidy rows (gamma, metric, percentile, value)."""
        for g, cell in self.stats.items():
            for metric in ("rpe", "mse"):
                for pct in ("p25", "p50", "p75"):
                    yield g, metric, pct, cell[metric][pct]


def run_monte_carlo(scn: McScenario, workers=None, chunk: int = 25) -> McSummary:
    """Run all replicates of ``scn`` and aggregate in replicate order."""
    nw = worker_count(workers)
    indices = list(range(scn.replicates))
    chunks = [(scn, indices[i:i + chunk]) for i in range(0, len(indices), chunk)]
    if nw == 1 or len(chunks) == 1:
        results = [r for c in chunks for r in _run_chunk(c)]
    else:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            results = [r for part in ex.map(_run_chunk, chunks) for r in part]
    summary = McSummary(
        scenario=scn,
        rpe=np.array([r.rpe for r in results]),
        mse=np.array([r.mse for r in results]),
        z=np.array([r.z for r in results]),
        converged=np.array([r.converged for r in results]),
        failed=np.array([r.failed for r in results]),
        n_outliers=sum(r.n_outliers for r in results),
    )
    rate = summary.failed.mean(axis=0)
    if np.any(rate > scn.failure_threshold):
        bad = [g for g, r_ in zip(scn.gamma_grid, rate) if r_ > scn.failure_threshold]
        raise TooManyFailures(f"fit failure rate above {scn.failure_threshold:.0%} at gamma {bad}")
    return summary
