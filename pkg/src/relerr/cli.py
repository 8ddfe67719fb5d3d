"""Command-line front end: fit, predict, gamma-grid and simulate.

Every option can come from a flag, a ``--config`` JSON file, or the built-in
defaults, in that order of precedence; ``--show-config`` prints the merged
result and exits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import asdict, dataclass
from datetime import datetime

import numpy as np

from .asymptotics import confidence_intervals, sandwich
from .errors import (
    ConvergenceWarning,
    DataError,
    FileError,
    InsufficientData,
    RelErrError,
    ScenarioError,
    SchemaError,
    SingularJ,
)
from .estimator import MmConfig, fit
from .model import Dataset, make_loss
from .objective import GammaObjective
from .simulation import DEFAULT_DELTAS, McScenario, rpe_terms, run_monte_carlo

INTERCEPT_NAME = "(intercept)"
EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
DEFAULT_GAMMAS = tuple(round(0.01 * k, 2) for k in range(11))


# ------------------------------------------------------------------- io

def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and raw string rows of a UTF-8 CSV file."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError as exc:
        raise FileError(f"{path} is not valid UTF-8") from exc
    if not rows:
        raise FileError(f"{path} is empty; a header row is required")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    for k, r in enumerate(body, start=1):
        if len(r) != len(header):
            raise DataError(f"data row {k} has {len(r)} fields, header has {len(header)}")
    return header, body


def numeric_column(header, rows, name) -> np.ndarray:
    """Parse column ``name`` as floats; bad or non-finite cells name their data row (1-based)."""
    if name not in header:
        raise SchemaError(name, f"column {name!r} not found; available: {header}")
    j = header.index(name)
    out = np.empty(len(rows))
    for k, r in enumerate(rows):
        cell = r[j].strip()
        try:
            v = float(cell)
        except ValueError:
            raise DataError(f"data row {k + 1}, column {name!r}: {cell!r} is not a number") from None
        if not math.isfinite(v):
            raise DataError(f"data row {k + 1}, column {name!r}: non-finite value {cell!r}")
        out[k] = v
    return out


def positive_response(header, rows, name) -> np.ndarray:
    y = numeric_column(header, rows, name)
    bad = np.flatnonzero(y <= 0)
    if bad.size:
        k = int(bad[0]) + 1
        raise DataError(f"response {name!r} must be positive; y = {y[bad[0]]!r} at data row {k}")
    return y


# ------------------------------------------------------------- lag design

@dataclass(frozen=True)
class LagSpec:
    """Seasonal lags ``y[t-d], ..., y[t-d*q]`` and a training window of ``window_n`` rows."""

    d: int = 96
    q: int = 5
    window_n: int = 9600

    def __post_init__(self):
        if self.d < 1 or self.q < 1:
            raise ValueError("lag period d and lag count q must be >= 1")
        if not self.d * self.q < self.window_n:
            raise ValueError(f"need d*q < window_n, got {self.d * self.q} >= {self.window_n}")

    @property
    def names(self) -> list[str]:
        return [f"lag{self.d * j}" for j in range(1, self.q + 1)]

    @classmethod
    def parse(cls, text: str) -> "LagSpec":
        try:
            d, q, w = (int(v) for v in str(text).split(","))
        except ValueError:
            raise ValueError(f"lag spec must be 'd,q,window_n', got {text!r}") from None
        return cls(d, q, w)


def lag_design(y_series, spec: LagSpec):
    """Lagged features for every target with a full lag history.

    Returns ``(X, targets)`` where ``targets`` are 0-based series positions.
    """
    y = np.asarray(y_series, dtype=float)
    bad = np.flatnonzero(~(y > 0))
    if bad.size:
        raise DataError(f"series must be positive; value {y[bad[0]]!r} at index {int(bad[0]) + 1} (1-based)")
    start = spec.d * spec.q
    if y.size <= start:
        raise InsufficientData(f"series of length {y.size} has no row with {spec.q} lags of period {spec.d}")
    targets = np.arange(start, y.size)
    X = np.column_stack([y[targets - spec.d * j] for j in range(1, spec.q + 1)])
    return X, targets


def make_lag_matrix(y_series, spec: LagSpec, intercept: bool = False) -> Dataset:
    """Dataset whose row for target ``t`` holds ``(y[t-d], ..., y[t-d*q])``."""
    X, targets = lag_design(y_series, spec)
    y = np.asarray(y_series, dtype=float)[targets]
    if intercept:
        return Dataset.with_intercept(X, y)
    return Dataset(X, y, has_intercept=False)


# ---------------------------------------------------------------- reports

@dataclass
class CoefficientRow:
    name: str
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float


@dataclass
class FitReport:
    loss: str
    gamma: float
    coefficients: list
    objective: float
    iterations: int
    converged: bool
    j_condition_number: float
    ci_level: float
    response: str = None
    intercept: bool = False
    lag_spec: dict = None

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.coefficients]

    @property
    def beta(self) -> np.ndarray:
        return np.array([c.estimate for c in self.coefficients])

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        missing = [k for k in ("loss", "gamma", "coefficients", "objective", "iterations",
                               "converged", "j_condition_number", "ci_level") if k not in d]
        if missing:
            raise SchemaError(missing[0], f"model JSON lacks key {missing[0]!r}")
        d = dict(d)
        d["coefficients"] = [CoefficientRow(**c) for c in d["coefficients"]]
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "FitReport":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "FitReport":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise FileError(f"cannot read {path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise FileError(f"{path} is not valid JSON: {exc}") from exc


def _design_from_csv(header, rows, response, features, lag, intercept):
    if lag is not None:
        series = positive_response(header, rows, response)
        data = make_lag_matrix(series, lag, intercept)
        names = ([INTERCEPT_NAME] if intercept else []) + lag.names
        return data, names
    if not features:
        features = [h for h in header if h != response]
    y = positive_response(header, rows, response)
    X = np.column_stack([numeric_column(header, rows, f) for f in features]) if features else np.empty((len(y), 0))
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
    if X.shape[1] == 0:
        raise SchemaError(response, "no predictor columns (and intercept disabled)")
    return Dataset(X, y, has_intercept=intercept), ([INTERCEPT_NAME] if intercept else []) + list(features)


def report_from_fit(res, data: Dataset, names, level, **extra) -> FitReport:
    fam = make_loss(res.loss_kind)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularJ)
        try:
            sc = sandwich(fam, res.gamma, data, res.beta_hat)
            se = sc.std_errors
            ci = confidence_intervals(sc, res.beta_hat, level)
            cond = sc.j_condition
        except (RelErrError, ArithmeticError, np.linalg.LinAlgError):
            se = np.full(data.p, math.nan)
            ci = np.full((data.p, 2), math.nan)
            cond = math.inf
    rows = [
        CoefficientRow(n, float(b), float(s), float(lo), float(hi))
        for n, b, s, (lo, hi) in zip(names, res.beta_hat, se, ci)
    ]
    return FitReport(
        loss=res.loss_kind, gamma=float(res.gamma), coefficients=rows, objective=float(res.objective),
        iterations=int(res.trace.iterations), converged=bool(res.converged),
        j_condition_number=float(cond), ci_level=float(level), **extra,
    )


# --------------------------------------------------------------- commands

def cmd_fit(csv_path, response="y", features=None, lag_spec: LagSpec = None, gamma=0.5, loss="LPRE",
            algorithm="MM", out_path=None, level=0.95, intercept=True, max_iter=500) -> FitReport:
    """Fit a robust multiplicative regression to a CSV file and write a JSON report."""
    header, rows = read_csv(csv_path)
    data, names = _design_from_csv(header, rows, response, features, lag_spec, intercept)
    fam = make_loss(loss)
    res = fit(GammaObjective(fam, gamma, data), None, MmConfig(max_iter=max_iter, mode=algorithm.upper()))
    report = report_from_fit(
        res, data, names, level, response=response, intercept=bool(intercept),
        lag_spec=asdict(lag_spec) if lag_spec is not None else None,
    )
    if not report.converged:
        warnings.warn(f"fit did not converge in {report.iterations} iterations", ConvergenceWarning, stacklevel=2)
    if out_path is not None:
        atomic_write(out_path, report.to_json())
    return report


def _fmt(v) -> str:
    return repr(float(v))


def cmd_predict(model_json, csv_path, out_path=None, response=None) -> dict:
    """Predictions exp(x'beta) for every row; adds relative-error terms when y is present."""
    report = FitReport.load(model_json) if not isinstance(model_json, FitReport) else model_json
    header, rows = read_csv(csv_path)
    response = response or report.response
    beta = report.beta
    if report.lag_spec is not None:
        lag = LagSpec(**report.lag_spec)
        series = positive_response(header, rows, response)
        X, targets = lag_design(series, lag)
        if report.intercept:
            X = np.column_stack([np.ones(len(targets)), X])
        y = series[targets]
        row_ids = targets + 1
    else:
        feats = [n for n in report.names if n != INTERCEPT_NAME]
        X = np.column_stack([numeric_column(header, rows, f) for f in feats]) if feats else np.empty((len(rows), 0))
        if report.intercept:
            X = np.column_stack([np.ones(len(rows)), X])
        y = positive_response(header, rows, response) if response and response in header else None
        row_ids = np.arange(1, len(rows) + 1)
    if X.shape[1] != beta.size:
        raise SchemaError("coefficients", f"model has {beta.size} coefficients, design has {X.shape[1]} columns")
    eta = X @ beta
    with np.errstate(over="ignore"):
        pred = np.exp(eta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    result = {"prediction": pred, "rpe": None}
    if y is None:
        w.writerow(["row", "prediction"])
        for r, p in zip(row_ids, pred):
            w.writerow([int(r), _fmt(p)])
    else:
        terms = rpe_terms(beta, X, y)
        w.writerow(["row", "prediction", "y", "rpe_term"])
        for r, p, yy, t in zip(row_ids, pred, y, terms):
            w.writerow([int(r), _fmt(p), _fmt(yy), _fmt(t)])
        total = float(np.sum(terms))
        w.writerow(["TOTAL", "", "", _fmt(total)])
        result.update(rpe=total, terms=terms)
    if out_path is not None:
        atomic_write(out_path, buf.getvalue())
    return result


def _weekend_mask(header, rows, col) -> np.ndarray:
    if col is None:
        raise SchemaError("timestamp", "weekday/weekend stratification needs an ISO-8601 timestamp column")
    if col not in header:
        raise SchemaError(col, f"timestamp column {col!r} not found")
    j = header.index(col)
    out = np.empty(len(rows), dtype=bool)
    for k, r in enumerate(rows):
        try:
            out[k] = datetime.fromisoformat(r[j].strip()).weekday() >= 5
        except ValueError:
            raise DataError(f"data row {k + 1}: {r[j]!r} is not an ISO-8601 timestamp") from None
    return out


@dataclass
class GridRow:
    stratum: str
    gamma: float
    rpe_total: float
    rpe_mean: float
    n_predicted: int
    max_prediction: float
    is_argmin: bool = False


def rolling_rpe(X, y, gammas, fam, window_n: int, block: int, max_blocks=None, cfg: MmConfig = None):
    """Train on the last ``window_n`` rows, predict the next ``block`` rows, roll forward.

    Returns, per gamma, the concatenated predictions and relative-error terms.
    Each window's fit is warm-started from the previous window's estimate.
    """
    cfg = MmConfig() if cfg is None else cfg
    n = len(y)
    if n < window_n + 1:
        raise InsufficientData(f"{n} usable rows cannot fill a training window of {window_n} plus one prediction")
    starts = list(range(window_n, n, block))
    if max_blocks is not None:
        starts = starts[-int(max_blocks):]
    out = {}
    for g in gammas:
        beta = None
        preds, terms = [], []
        for s in starts:
            train = Dataset(X[s - window_n:s], y[s - window_n:s], has_intercept=None)
            res = fit(GammaObjective(fam, g, train), beta, cfg)
            beta = res.beta_hat
            Xp, yp = X[s:s + block], y[s:s + block]
            with np.errstate(over="ignore"):
                preds.append(np.exp(Xp @ beta))
            terms.append(rpe_terms(beta, Xp, yp))
        out[g] = (np.concatenate(preds), np.concatenate(terms))
    return out


def cmd_gamma_grid(csv_path, response="y", lag_spec: LagSpec = None, gammas=DEFAULT_GAMMAS, loss="LPRE",
                   stratify=False, timestamp=None, out_path=None, max_blocks=None, intercept=False):
    """Rolling-origin relative prediction error for each gamma in ``gammas``."""
    lag_spec = LagSpec() if lag_spec is None else lag_spec
    gammas = [float(g) for g in gammas]
    if not gammas or min(gammas) < 0:
        raise ValueError("gamma list must be non-empty and non-negative")
    header, rows = read_csv(csv_path)
    series = positive_response(header, rows, response)
    X, targets = lag_design(series, lag_spec)
    if intercept:
        X = np.column_stack([np.ones(len(targets)), X])
    y = series[targets]
    fam = make_loss(loss)
    if stratify:
        weekend = _weekend_mask(header, rows, timestamp)[targets]
        strata = {"weekday": ~weekend, "weekend": weekend}
    else:
        strata = {"all": np.ones(len(y), dtype=bool)}
    table = []
    for name, mask in strata.items():
        per_gamma = rolling_rpe(X[mask], y[mask], gammas, fam, lag_spec.window_n, lag_spec.d, max_blocks)
        rows_s = []
        for g in gammas:
            pred, terms = per_gamma[g]
            rows_s.append(GridRow(name, g, float(terms.sum()), float(terms.mean()), int(terms.size), float(pred.max())))
        best = min(range(len(rows_s)), key=lambda k: rows_s[k].rpe_total)
        rows_s[best].is_argmin = True
        table.extend(rows_s)
    if out_path is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stratum", "gamma", "rpe_total", "rpe_mean", "n_predicted", "max_prediction", "argmin"])
        for r in table:
            w.writerow([r.stratum, _fmt(r.gamma), _fmt(r.rpe_total), _fmt(r.rpe_mean), r.n_predicted,
                        _fmt(r.max_prediction), int(r.is_argmin)])
        atomic_write(out_path, buf.getvalue())
    return table


def load_scenarios(spec) -> list[McScenario]:
    """Scenario JSON -> one McScenario per contamination level.

    ``delta`` may be a number or a list; when absent the grid 0, 0.05, 0.1, 0.2 is used.
    """
    if not isinstance(spec, dict):
        try:
            with open(spec, encoding="utf-8") as fh:
                spec = json.load(fh)
        except OSError as exc:
            raise FileError(f"cannot read {spec}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
        if not isinstance(spec, dict):
            raise ScenarioError("scenario JSON must be an object")
    spec = dict(spec)
    deltas = spec.pop("delta", list(DEFAULT_DELTAS))
    if not isinstance(deltas, list):
        deltas = [deltas]
    for key in ("gamma_grid", "beta_true"):
        if isinstance(spec.get(key), list):
            spec[key] = tuple(spec[key])
    return [McScenario.from_dict({**spec, "delta": d}) for d in deltas]


def cmd_simulate(scenario_json, out_dir, workers=None) -> list:
    """Run the Monte Carlo scenario(s) and write summary and plot-data files to ``out_dir``."""
    scenarios = load_scenarios(scenario_json)
    summaries = [run_monte_carlo(s, workers=workers) for s in scenarios]
    doc = [s.to_dict() for s in summaries]
    atomic_write(os.path.join(out_dir, "summary.json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "gamma", "metric", "percentile", "value"])
    for s in summaries:
        for g, metric, pct, v in s.csv_rows():
            w.writerow([_fmt(s.scenario.delta), _fmt(g), metric, pct, _fmt(v)])
    atomic_write(os.path.join(out_dir, "summary.csv"), buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma", "delta", "metric", "p25", "p50", "p75"])
    for s in summaries:
        for g, cell in s.stats.items():
            for metric in ("rpe", "mse"):
                c = cell[metric]
                w.writerow([_fmt(g), _fmt(s.scenario.delta), metric, _fmt(c["p25"]), _fmt(c["p50"]), _fmt(c["p75"])])
    atomic_write(os.path.join(out_dir, "plot_data.csv"), buf.getvalue())
    return summaries


# ------------------------------------------------------------------ argv

DEFAULTS = {
    "fit": {"response": "y", "features": None, "lag": None, "gamma": 0.5, "loss": "LPRE",
            "algorithm": "MM", "level": 0.95, "intercept": True, "max_iter": 500, "out": None},
    "predict": {"response": None, "out": None},
    "gamma-grid": {"response": "y", "lag": "96,5,9600", "gammas": list(DEFAULT_GAMMAS), "loss": "LPRE",
                   "stratify": False, "timestamp": None, "max_blocks": None, "intercept": False, "out": None},
    "simulate": {"out": "simulation_out", "workers": None},
}


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relerr", description="Robust relative-error regression.")
    ap.add_argument("--config", help="JSON file of option defaults (flags override it)")
    ap.add_argument("--show-config", action="store_true", help="print the effective options and exit")
    sub = ap.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("fit", help="fit a model to a CSV file", argument_default=S)
    p.add_argument("data")
    p.add_argument("--response")
    p.add_argument("--features", help="comma-separated predictor columns (default: all but response)")
    p.add_argument("--lag", help="use seasonal lags 'd,q,window_n' of the response instead of features")
    p.add_argument("--gamma", type=float)
    p.add_argument("--loss", choices=["LPRE", "LSRE", "lpre", "lsre"])
    p.add_argument("--algorithm", choices=["MM", "QUASI_NEWTON", "HYBRID", "mm", "quasi_newton", "hybrid"])
    p.add_argument("--level", type=float, help="confidence level of the intervals")
    p.add_argument("--no-intercept", dest="intercept", action="store_false")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--out")

    p = sub.add_parser("predict", help="predict from a fitted model JSON", argument_default=S)
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--response")
    p.add_argument("--out")

    p = sub.add_parser("gamma-grid", help="rolling relative prediction error over a gamma grid", argument_default=S)
    p.add_argument("data")
    p.add_argument("--response")
    p.add_argument("--lag")
    p.add_argument("--gammas", type=_float_list)
    p.add_argument("--loss", choices=["LPRE", "LSRE", "lpre", "lsre"])
    p.add_argument("--stratify", action="store_true", help="separate weekday and weekend models")
    p.add_argument("--timestamp", help="ISO-8601 timestamp column (required by --stratify)")
    p.add_argument("--max-blocks", dest="max_blocks", type=int)
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="run a Monte Carlo scenario", argument_default=S)
    p.add_argument("scenario")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    return ap


POSITIONAL = {"fit": ("data",), "predict": ("model", "data"), "gamma-grid": ("data",), "simulate": ("scenario",)}


def effective_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise FileError(f"cannot read {args.config}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise FileError(f"{args.config} is not valid JSON: {exc}") from exc
        # either a flat mapping or one section per command
        section = cfg.get(args.command, cfg) if isinstance(cfg, dict) else {}
        unknown = set(section) - set(opts) - set(DEFAULTS)
        if unknown:
            raise SchemaError(sorted(unknown)[0], f"unknown config keys: {sorted(unknown)}")
        opts.update({k: v for k, v in section.items() if k in opts})
    given = vars(args)
    opts.update({k: given[k] for k in opts if k in given})
    for k in POSITIONAL[args.command]:
        opts[k] = given[k]
    return opts


def _run(opts: dict, command: str) -> int:
    if command == "fit":
        lag = LagSpec.parse(opts["lag"]) if opts["lag"] else None
        feats = opts["features"]
        if isinstance(feats, str):
            feats = [f.strip() for f in feats.split(",") if f.strip()]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            report = cmd_fit(opts["data"], opts["response"], feats, lag, opts["gamma"], opts["loss"].upper(),
                             opts["algorithm"].upper(), opts["out"], opts["level"], opts["intercept"], opts["max_iter"])
        if opts["out"] is None:
            sys.stdout.write(report.to_json())
        for w in caught:
            if issubclass(w.category, ConvergenceWarning):
                print(f"warning: {w.message}", file=sys.stderr)
        return EXIT_OK if report.converged else EXIT_NONCONVERGED
    if command == "predict":
        res = cmd_predict(opts["model"], opts["data"], opts["out"], opts["response"])
        if opts["out"] is None:
            for p in res["prediction"]:
                print(_fmt(p))
        if res["rpe"] is not None:
            print(json.dumps({"rpe": res["rpe"]}), file=sys.stderr if opts["out"] is None else sys.stdout)
        return EXIT_OK
    if command == "gamma-grid":
        gammas = opts["gammas"]
        if isinstance(gammas, str):
            gammas = _float_list(gammas)
        table = cmd_gamma_grid(opts["data"], opts["response"], LagSpec.parse(opts["lag"]), gammas,
                               opts["loss"].upper(), opts["stratify"], opts["timestamp"], opts["out"],
                               opts["max_blocks"], opts["intercept"])
        if opts["out"] is None:
            for r in table:
                mark = "\t*" if r.is_argmin else ""
                print(f"{r.stratum}\t{r.gamma:g}\t{r.rpe_total:.6g}\t{r.rpe_mean:.6g}{mark}")
        return EXIT_OK
    if command == "simulate":
        summaries = cmd_simulate(opts["scenario"], opts["out"], opts["workers"])
        print(f"wrote {len(summaries)} scenario(s) to {opts['out']}")
        return EXIT_OK
    raise AssertionError(command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = effective_options(args)
        if args.show_config:
            print(json.dumps({"command": args.command, **opts}, indent=2, sort_keys=True))
            return EXIT_OK
        return _run(opts, args.command)
    except (RelErrError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
