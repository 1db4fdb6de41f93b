"""Forecasting, model comparison and the Monte Carlo study harness."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import PoissonLindley, get_family
from .estimation import (
    METHODS,
    FitResult,
    fit_cmle,
    fit_moment,
    information_criteria,
)
from .exceptions import EstimationError, InputError, PsinarError
from .process import DEFAULT_BURN_IN, InarModel, as_series, model_tag, simulate

__all__ = [
    "ComparisonTable",
    "McConfig",
    "McReport",
    "PredictionTrace",
    "compare_models",
    "information_criteria",
    "predict",
    "run_mc_study",
]

# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


@dataclass
class PredictionTrace:
    observed: np.ndarray
    predicted: np.ndarray
    alpha: float
    innovation_mean: float
    lag: str = "observed"

    @property
    def residuals(self) -> np.ndarray:
        return self.observed - self.predicted

    @property
    def first(self) -> float:
        return self.innovation_mean / (1.0 - self.alpha)

    @property
    def intercept(self) -> float:
        return self.innovation_mean

    def rows(self):
        for t, (x, xh) in enumerate(zip(self.observed, self.predicted), start=1):
            yield {"t": t, "observed": int(x), "predicted": float(xh), "residual": float(x - xh)}


def predict(series, alpha_hat, innovation_mean, lag="observed") -> PredictionTrace:
    """One-step-ahead conditional-mean predictions.

    ``x_hat_1`` is the stationary mean; afterwards
    ``x_hat_i = alpha * lag_i + innovation_mean`` where ``lag_i`` is the
    observed ``x_{i-1}`` (default) or, with ``lag="predicted"``, the previous
    prediction.
    """
    if not (0.0 < alpha_hat < 1.0):
        raise ValueError("alpha_hat must lie in (0, 1)")
    if not innovation_mean > 0:
        raise ValueError("innovation_mean must be positive")
    if lag not in ("observed", "predicted"):
        raise ValueError("lag must be 'observed' or 'predicted'")
    x = as_series(series).values
    xhat = np.empty(x.size)
    xhat[0] = innovation_mean / (1.0 - alpha_hat)
    if lag == "observed":
        xhat[1:] = alpha_hat * x[:-1] + innovation_mean
    else:
        for i in range(1, x.size):
            xhat[i] = alpha_hat * xhat[i - 1] + innovation_mean
    return PredictionTrace(x.astype(float), xhat, float(alpha_hat), float(innovation_mean), lag)


def predict_pl(series, alpha_hat, theta_hat, lag="observed") -> PredictionTrace:
    return predict(series, alpha_hat, PoissonLindley(theta_hat).mean, lag)


# ---------------------------------------------------------------------------
# Model comparison
# ---------------------------------------------------------------------------

COMPARISON_MODELS = (
    ("NBINARPL", "geometric", "pl"),
    ("BINARPL", "bernoulli", "pl"),
    ("PINARPL", "poisson", "pl"),
    ("INARG", "bernoulli", "geometric"),
    ("INARP", "bernoulli", "poisson"),
)


@dataclass
class ComparisonRow:
    tag: str
    family: str
    innovation: str
    fits: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def cmle(self) -> Optional[FitResult]:
        return self.fits.get("cmle")

    @property
    def aic(self) -> float:
        return self.cmle.aic if self.cmle is not None else math.nan

    @property
    def bic(self) -> float:
        return self.cmle.bic if self.cmle is not None else math.nan

    def to_dict(self):
        return {
            "model": self.tag,
            "family": self.family,
            "innovation": self.innovation,
            "estimates": {m: f.to_dict() for m, f in self.fits.items()},
            "aic": _json_float(self.aic),
            "bic": _json_float(self.bic),
            "error": self.error,
        }


@dataclass
class ComparisonTable:
    rows: list
    n_transitions: int
    criterion_sample_size: str = "transitions (T - 1)"

    def row(self, tag) -> ComparisonRow:
        for r in self.rows:
            if r.tag == tag:
                return r
        raise KeyError(tag)

    def _winner(self, key):
        ok = [r for r in self.rows if math.isfinite(getattr(r, key))]
        return min(ok, key=lambda r: getattr(r, key)).tag if ok else None

    @property
    def winner_aic(self):
        return self._winner("aic")

    @property
    def winner_bic(self):
        return self._winner("bic")

    def to_dict(self):
        return {
            "rows": [r.to_dict() for r in self.rows],
            "winner_aic": self.winner_aic,
            "winner_bic": self.winner_bic,
            "n_transitions": self.n_transitions,
            "criterion_sample_size": self.criterion_sample_size,
        }

    def format_table(self) -> str:
        lines = [f"{'Model':<10} {'CLS':>20} {'YW':>20} {'MLE':>20} {'AIC':>11} {'BIC':>11}"]
        for r in self.rows:
            cells = []
            for name in ("alpha", "param"):
                parts = []
                for m in METHODS:
                    f = r.fits.get(m)
                    val = getattr(f, name) if f is not None else math.nan
                    label = "alpha" if name == "alpha" else (f.param_name if f else "param")
                    parts.append(f"{label}={val:.4f}")
                cells.append(parts)
            lines.append(
                f"{r.tag:<10} {cells[0][0]:>20} {cells[0][1]:>20} {cells[0][2]:>20} "
                f"{r.aic:>11.4f} {r.bic:>11.4f}"
            )
            lines.append(f"{'':<10} {cells[1][0]:>20} {cells[1][1]:>20} {cells[1][2]:>20}")
            if r.error:
                lines.append(f"{'':<10} error: {r.error}")
        lines.append(f"best by AIC: {self.winner_aic}; best by BIC: {self.winner_bic}")
        return "\n".join(lines)


def compare_models(series, models=COMPARISON_MODELS) -> ComparisonTable:
    """Fit every model by CLS, YW and CMLE; AIC/BIC come from the CMLE fit."""
    s = as_series(series)
    rows = []
    for tag, family, innovation in models:
        row = ComparisonRow(tag, family, innovation)
        for method in ("cls", "yw"):
            try:
                row.fits[method] = fit_moment(s, family, innovation, method)
            except PsinarError as exc:
                row.error = f"{method}: {exc}"
        try:
            row.fits["cmle"] = fit_cmle(s, family, innovation)
        except PsinarError as exc:
            row.error = f"cmle: {exc}"
        rows.append(row)
    if all(r.cmle is None for r in rows):
        raise EstimationError("every model failed to fit", {r.tag: r.error for r in rows})
    return ComparisonTable(rows, len(s) - 1)


# ---------------------------------------------------------------------------
# Monte Carlo study
# ---------------------------------------------------------------------------


@dataclass
class McConfig:
    family: str
    alpha: float
    theta: float
    lengths: Sequence[int] = (100, 200, 300)
    replicates: int = 1000
    seed: int = 20240601
    burn_in: int = DEFAULT_BURN_IN
    methods: Sequence[str] = METHODS
    n_jobs: int = 1

    def __post_init__(self):
        self.family = get_family(self.family).kind
        self.lengths = tuple(int(t) for t in self.lengths)
        self.methods = tuple(m.lower() for m in self.methods)
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        InarModel.psinarpl(self.family, self.alpha, self.theta)

    @property
    def model(self) -> InarModel:
        return InarModel.psinarpl(self.family, self.alpha, self.theta)

    def to_dict(self):
        d = asdict(self)
        d["lengths"] = list(self.lengths)
        d["methods"] = list(self.methods)
        return d


@dataclass
class McCell:
    T: int
    method: str
    parameter: str
    true: float
    ae: float
    abias: float
    rmse: float
    sd: float
    mean_se: Optional[float]
    n_ok: int
    n_failed: int


@dataclass
class McReport:
    config: McConfig
    cells: list
    estimates: dict = field(repr=False, default_factory=dict)

    def cell(self, T, method, parameter) -> McCell:
        for c in self.cells:
            if c.T == T and c.method == method and c.parameter == parameter:
                return c
        raise KeyError((T, method, parameter))

    def to_dict(self):
        return {"config": self.config.to_dict(), "cells": [_clean(asdict(c)) for c in self.cells]}

    def format_table(self) -> str:
        cfg = self.config
        tag = model_tag(cfg.family, "pl")
        head = [f"{m.upper()} {p}" for m in cfg.methods for p in ("alpha", "theta")]
        lines = [
            f"{tag}(1): true alpha = {cfg.alpha}, theta = {cfg.theta}; "
            f"{cfg.replicates} replicates, seed {cfg.seed}",
            f"{'':<8}" + "".join(f"{h:>13}" for h in head),
        ]
        for T in cfg.lengths:
            lines.append(f"T={T}")
            for stat, attr in (("AEs", "ae"), ("ABias", "abias"), ("RMSE", "rmse")):
                vals = [getattr(self.cell(T, m, p), attr) for m in cfg.methods for p in ("alpha", "theta")]
                lines.append(f"{stat:<8}" + "".join(f"{v:>13.4f}" for v in vals))
            fails = [self.cell(T, m, "alpha").n_failed for m in cfg.methods]
            if any(fails):
                lines.append("failed  " + "  ".join(f"{m}={f}" for m, f in zip(cfg.methods, fails)))
        return "\n".join(lines)


def _replicate(config: McConfig, T: int, index: int):
    """Simulate and fit one replicate; returns ``{method: (alpha, theta, se_a, se_t) | None}``."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(T, index)))
    series = simulate(config.model, T, config.burn_in, rng)
    out = {}
    for method in config.methods:
        try:
            if method == "cmle":
                f = fit_cmle(series, config.family, "pl", std_errors=False)
            else:
                f = fit_moment(series, config.family, "pl", method, std_errors=method == "cls")
        except PsinarError:
            out[method] = None
            continue
        if not f.ok:
            out[method] = None
            continue
        se = f.std_errors or (math.nan, math.nan)
        out[method] = (f.alpha, f.param, se[0], se[1])
    return out


def _run_replicates(config, T):
    if config.n_jobs == 1:
        return [_replicate(config, T, i) for i in range(config.replicates)]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=config.n_jobs)(
        delayed(_replicate)(config, T, i) for i in range(config.replicates)
    )


def run_mc_study(config: McConfig) -> McReport:
    """Average estimate, bias and RMSE of each estimator over simulated replicates.

    Replicates whose estimator fails (CLS/YW ``alpha`` outside (0, 1), or a
    failed optimisation) are counted and excluded from that estimator's cell.
    Seeds are derived from ``(seed, T, replicate index)``, so results do not
    depend on ``n_jobs``.
    """
    cells = []
    estimates = {}
    truth = {"alpha": config.alpha, "theta": config.theta}
    for T in config.lengths:
        reps = _run_replicates(config, T)
        for method in config.methods:
            good = np.array([r[method] for r in reps if r[method] is not None], dtype=float).reshape(-1, 4)
            estimates[(T, method)] = good
            n_ok = good.shape[0]
            for j, name in enumerate(("alpha", "theta")):
                est = good[:, j]
                se = good[:, j + 2]
                if n_ok:
                    ae = float(est.mean())
                    rmse = float(math.sqrt(np.mean((est - truth[name]) ** 2)))
                    sd = float(est.std(ddof=1)) if n_ok > 1 else 0.0
                    finite = se[np.isfinite(se)]
                    mean_se = float(finite.mean()) if finite.size else None
                else:
                    ae = rmse = sd = math.nan
                    mean_se = None
                cells.append(
                    McCell(T, method, name, truth[name], ae, ae - truth[name], rmse, sd,
                           mean_se, n_ok, config.replicates - n_ok)
                )
    return McReport(config, cells, estimates)


def _json_float(v):
    return None if v is None or not math.isfinite(v) else float(v)


def _clean(d):
    return {k: (_json_float(v) if isinstance(v, float) else v) for k, v in d.items()}
