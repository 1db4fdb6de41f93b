"""Conditional least squares, Yule-Walker and conditional maximum likelihood.

CLS and YW estimate ``(alpha, mu)`` with ``mu = E(X_t)`` and recover the
innovation parameter by matching the innovation mean ``(1 - alpha) mu``.
CMLE maximises the exact conditional likelihood on an unconstrained
reparameterisation (logit for ``alpha``, log or logit for the innovation
parameter) with a Nelder-Mead multi-start.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize
from scipy.special import expit, logit

from .distributions import (
    FAMILIES,
    PoissonLindley,
    get_family,
    innovation_class,
)
from .exceptions import DegenerateSeriesError, EstimationError, InputError
from .process import InarModel, TransitionKernel, as_series, log_likelihood, model_tag

METHODS = ("cls", "yw", "cmle")
BOUNDARY_ALPHA = 0.999
# innovation mean below this is an edge solution (W degenerate at 0)
BOUNDARY_MEAN = 1e-8
N_PARAMS = 2

_GRID_ALPHA = (0.1, 0.3, 0.5, 0.7, 0.9)
_GRID_SCALE = (0.5, 0.75, 1.0, 1.5, 2.0)
_NM_OPTIONS = {"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000, "maxfev": 4000}
_START_STEP = 0.5


class MomentFit(NamedTuple):
    """``(alpha, mu)`` from CLS or YW."""

    alpha: float
    mu: float

    @property
    def boundary(self) -> bool:
        """True when ``alpha`` falls outside (0, 1) and no model can be built."""
        return not (0.0 < self.alpha < 1.0)

    @property
    def innovation_mean(self) -> float:
        return (1.0 - self.alpha) * self.mu


def _check_length(x, minimum=3):
    if x.size < minimum:
        raise InputError(f"estimation needs at least {minimum} observations, got {x.size}")


def fit_cls(series) -> MomentFit:
    """Closed-form minimiser of ``sum (x_t - alpha x_{t-1} - (1-alpha) mu)^2``."""
    x = as_series(series).values.astype(float)
    _check_length(x)
    prev, curr = x[:-1], x[1:]
    n = prev.size
    denom = n * np.dot(prev, prev) - prev.sum() ** 2
    if denom <= 0:
        raise DegenerateSeriesError("CLS is undefined: lagged values are constant")
    alpha = (n * np.dot(curr, prev) - curr.sum() * prev.sum()) / denom
    if alpha == 1.0:
        return MomentFit(1.0, math.nan)
    mu = (curr.sum() - alpha * prev.sum()) / ((1.0 - alpha) * n)
    return MomentFit(float(alpha), float(mu))


def fit_yw(series) -> MomentFit:
    """Sample mean and lag-one sample autocorrelation."""
    x = as_series(series).values.astype(float)
    _check_length(x)
    mu = x.mean()
    d = x - mu
    denom = np.dot(d, d)
    if denom <= 0:
        raise DegenerateSeriesError("YW is undefined: the series is constant")
    alpha = np.dot(d[1:], d[:-1]) / denom
    return MomentFit(float(alpha), float(mu))


def invert_theta(mu_hat, alpha_hat) -> float:
    """Poisson-Lindley ``theta`` whose process mean is ``mu_hat`` at ``alpha_hat``."""
    if not (0.0 < alpha_hat < 1.0):
        raise EstimationError(f"cannot invert theta at alpha = {alpha_hat:.4g} outside (0, 1)")
    c = (1.0 - alpha_hat) * mu_hat
    if not c > 0:
        raise EstimationError(f"implied innovation mean {c:.4g} is not positive")
    return PoissonLindley.from_mean(c).theta


def information_criteria(loglik, n_params, n_transitions):
    """``(AIC, BIC)``; the BIC sample size is the number of transitions."""
    if n_transitions < 1:
        raise ValueError("n_transitions must be at least 1")
    aic = -2.0 * loglik + 2.0 * n_params
    bic = -2.0 * loglik + n_params * math.log(n_transitions)
    return aic, bic


@dataclass
class FitResult:
    method: str
    family: str
    innovation: str
    alpha: float
    param: float
    param_name: str
    loglik: float
    aic: float
    bic: float
    n_transitions: int
    mu: Optional[float] = None
    std_errors: Optional[tuple] = None
    converged: bool = True
    boundary: bool = False
    n_iter: int = 0
    grad_norm: Optional[float] = None
    message: str = ""
    n_params: int = N_PARAMS

    @property
    def model_tag(self) -> str:
        return model_tag(self.family, self.innovation)

    @property
    def ok(self) -> bool:
        return self.converged and 0.0 < self.alpha < 1.0 and math.isfinite(self.param)

    def model(self) -> InarModel:
        if not self.ok:
            raise EstimationError(f"{self.method} fit did not produce an admissible model")
        return InarModel(self.family, self.alpha, innovation_class(self.innovation)(self.param))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model"] = self.model_tag
        if self.std_errors is not None:
            out["std_errors"] = list(self.std_errors)
        return out


def _failed(method, family, inn_cls, n_trans, alpha=math.nan, mu=None, message="", boundary=False):
    return FitResult(
        method=method,
        family=family.kind,
        innovation=inn_cls.kind,
        alpha=float(alpha),
        param=math.nan,
        param_name=inn_cls.param_name,
        loglik=math.nan,
        aic=math.nan,
        bic=math.nan,
        n_transitions=n_trans,
        mu=mu,
        converged=False,
        boundary=boundary,
        message=message,
    )


def fit_moment(series, family="bernoulli", innovation="pl", method="cls", std_errors=True) -> FitResult:
    """CLS or YW fit with the innovation parameter recovered by mean matching.

    An ``alpha`` outside (0, 1) yields a non-converged result with
    ``boundary=True``; it is never clamped.
    """
    s = as_series(series)
    fam = get_family(family)
    inn_cls = innovation_class(innovation)
    method = method.lower()
    est = {"cls": fit_cls, "yw": fit_yw}[method](s)
    n_trans = len(s) - 1
    if est.boundary:
        return _failed(method, fam, inn_cls, n_trans, est.alpha, est.mu, "alpha outside (0, 1)", True)
    c = est.innovation_mean
    if not c > 0:
        return _failed(method, fam, inn_cls, n_trans, est.alpha, est.mu, "non-positive innovation mean")
    inn = inn_cls.from_mean(c)
    model = InarModel(fam, est.alpha, inn)
    ll = log_likelihood(model, s)
    aic, bic = information_criteria(ll, N_PARAMS, n_trans)
    se = None
    if std_errors and method == "cls" and inn_cls is PoissonLindley and fam.kind in FAMILIES:
        try:
            se = cls_asymptotics(s, est.alpha, inn.theta, fam).std_errors
        except (EstimationError, DegenerateSeriesError):
            se = None
    return FitResult(
        method=method,
        family=fam.kind,
        innovation=inn_cls.kind,
        alpha=est.alpha,
        param=inn.param,
        param_name=inn_cls.param_name,
        loglik=ll,
        aic=aic,
        bic=bic,
        n_transitions=n_trans,
        mu=est.mu,
        std_errors=se,
    )


class _Objective:
    """Negative conditional log-likelihood on ``(logit alpha, z_param)``."""

    def __init__(self, kernel, inn_cls):
        self.kernel = kernel
        self.inn_cls = inn_cls
        self.n_eval = 0

    def params(self, z):
        alpha = float(expit(z[0]))
        return alpha, self.inn_cls.from_unconstrained(float(z[1]))

    def __call__(self, z):
        self.n_eval += 1
        if not np.all(np.isfinite(z)):
            return np.inf
        try:
            alpha, inn = self.params(z)
        except (ValueError, OverflowError):
            return np.inf
        if not (0.0 < alpha < 1.0):
            return np.inf
        val = -self.kernel.loglik(alpha, inn)
        return val if math.isfinite(val) else np.inf


def _to_z(alpha, inn):
    return np.array([float(logit(alpha)), inn.to_unconstrained()])


def _grid_start(obj, inn_cls, xbar):
    best = None
    base = max(xbar, 0.1)
    for a in _GRID_ALPHA:
        for s in _GRID_SCALE:
            try:
                z = _to_z(a, inn_cls.from_mean(s * base * (1.0 - a)))
            except ValueError:
                continue
            v = obj(z)
            if best is None or v < best[0]:
                best = (v, z)
    return None if best is None else best[1]


def _numeric_gradient(f, z, h=1e-5):
    g = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def _observed_information(kernel, inn_cls, alpha, param):
    """Negative Hessian of the log-likelihood in ``(alpha, param)`` by central differences."""

    def ll(v):
        return kernel.loglik(v[0], inn_cls(v[1]))

    x0 = np.array([alpha, param])
    h = np.array([min(1e-4, alpha / 4, (1 - alpha) / 4), 1e-4 * max(param, 1e-3)])
    if inn_cls.param_name == "p":
        h[1] = min(h[1], param / 4, (1 - param) / 4)
    H = np.empty((2, 2))
    f0 = ll(x0)
    for i in range(2):
        ei = np.zeros(2)
        ei[i] = h[i]
        H[i, i] = (ll(x0 + ei) - 2 * f0 + ll(x0 - ei)) / h[i] ** 2
    e0 = np.array([h[0], 0.0])
    e1 = np.array([0.0, h[1]])
    H[0, 1] = H[1, 0] = (
        ll(x0 + e0 + e1) - ll(x0 + e0 - e1) - ll(x0 - e0 + e1) + ll(x0 - e0 - e1)
    ) / (4 * h[0] * h[1])
    return -H


def fit_cmle(series, family="bernoulli", innovation="pl", init=None, std_errors=True) -> FitResult:
    """Conditional maximum likelihood estimate of ``(alpha, innovation parameter)``.

    Starts: ``init`` when given, the CLS and YW plug-in points when admissible,
    and the best point of a coarse 5x5 grid.  The best local optimum wins, ties
    going to the smaller ``alpha``.
    """
    s = as_series(series)
    x = s.values
    _check_length(x)
    fam = get_family(family)
    inn_cls = innovation_class(innovation)
    kernel = TransitionKernel(fam, x[:-1], x[1:])
    obj = _Objective(kernel, inn_cls)
    n_trans = x.size - 1

    starts = []
    if init is not None:
        starts.append(_to_z(init[0], inn_cls(init[1])))
    for fit in (fit_cls, fit_yw):
        try:
            est = fit(s)
        except DegenerateSeriesError:
            continue
        if not est.boundary and est.innovation_mean > 0:
            starts.append(_to_z(est.alpha, inn_cls.from_mean(est.innovation_mean)))
    grid = _grid_start(obj, inn_cls, float(x.mean()))
    if grid is not None:
        starts.append(grid)
    unique = []
    for z in starts:
        if np.all(np.isfinite(z)) and not any(np.max(np.abs(z - u)) < 1e-3 for u in unique):
            unique.append(z)

    results = []
    n_iter = 0
    for z0 in unique:
        simplex = np.array([z0, z0 + [_START_STEP, 0.0], z0 + [0.0, _START_STEP]])
        res = optimize.minimize(
            obj, z0, method="Nelder-Mead", options={**_NM_OPTIONS, "initial_simplex": simplex}
        )
        n_iter += res.nit
        if math.isfinite(res.fun):
            results.append(res)
    if not results:
        raise EstimationError(
            "conditional ML failed from every start",
            {"starts": [z.tolist() for z in unique], "n_eval": obj.n_eval},
        )
    best = min(results, key=lambda r: (round(r.fun, 9), float(expit(r.x[0]))))
    alpha, inn = obj.params(best.x)
    ll = -float(best.fun)
    aic, bic = information_criteria(ll, N_PARAMS, n_trans)
    grad = _numeric_gradient(obj, best.x)
    se = None
    if std_errors:
        try:
            info = _observed_information(kernel, inn_cls, alpha, inn.param)
            cov = np.linalg.inv(info)
            if np.all(np.isfinite(cov)) and np.all(np.diag(cov) > 0):
                se = tuple(float(v) for v in np.sqrt(np.diag(cov)))
        except (np.linalg.LinAlgError, ValueError):
            se = None
    return FitResult(
        method="cmle",
        family=fam.kind,
        innovation=inn_cls.kind,
        alpha=alpha,
        param=inn.param,
        param_name=inn_cls.param_name,
        loglik=ll,
        aic=aic,
        bic=bic,
        n_transitions=n_trans,
        std_errors=se,
        converged=bool(best.success),
        boundary=alpha > BOUNDARY_ALPHA or inn.mean < BOUNDARY_MEAN,
        n_iter=n_iter,
        grad_norm=float(np.linalg.norm(grad)) if np.all(np.isfinite(grad)) else None,
        message=str(best.message),
    )


def fit(series, family="bernoulli", innovation="pl", method="cmle", **kwargs) -> FitResult:
    method = method.lower()
    if method == "cmle":
        return fit_cmle(series, family, innovation, **kwargs)
    if method in ("cls", "yw"):
        return fit_moment(series, family, innovation, method, **kwargs)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass
class ClsAsymptotics:
    """Large-sample covariance ``c^2 A / n`` of ``(alpha_cls, theta_cls)``."""

    c: float
    r11: float
    r12: float
    r22: float
    n: int
    covariance: np.ndarray = field(repr=False)

    @property
    def r21(self) -> float:
        return self.r12

    @property
    def A(self) -> np.ndarray:
        return np.array([[self.r11, self.r12], [self.r21, self.r22]])

    @property
    def std_errors(self) -> tuple:
        d = np.clip(np.diag(self.covariance), 0.0, None)
        return float(math.sqrt(d[0])), float(math.sqrt(d[1]))


def cls_asymptotics(series, alpha_hat, theta_hat, family="bernoulli") -> ClsAsymptotics:
    """Asymptotic covariance of the CLS estimators with sample moments plugged in.

    ``mu_r`` are the raw sample moments ``mean(x^r)``; ``n`` is the number of
    transitions.
    """
    x = as_series(series).values.astype(float)
    _check_length(x)
    if not (0.0 < alpha_hat < 1.0) or not theta_hat > 0:
        raise EstimationError("asymptotics need alpha in (0, 1) and theta > 0")
    fam = get_family(family)
    mu1, mu2, mu3 = (float(np.mean(x**r)) for r in (1, 2, 3))
    var = mu2 - mu1**2
    if var <= 0:
        raise DegenerateSeriesError("asymptotics are undefined for a constant series")
    delta = fam.delta(alpha_hat)
    s2 = PoissonLindley(theta_hat).variance
    t = theta_hat
    q = t**2 + 4 * t + 2
    g = t**2 * (t + 1.0) ** 2
    c = g / (var * q)
    e1 = delta * mu1 + s2
    e2 = delta * mu2 + mu1 * s2
    e3 = delta * mu3 + mu2 * s2
    r11 = q**2 / g**2 * (e3 - mu1 * e2 + mu1 * (mu1 * e1 - e2))
    r12 = q / g * (mu1 * e3 - mu2 * e2 + mu1 * mu2 * e1 - mu1**2 * e2)
    r22 = mu1**2 * e3 - 2 * mu1 * mu2 * e2 + mu2**2 * e1
    n = x.size - 1
    A = np.array([[r11, r12], [r12, r22]])
    return ClsAsymptotics(c=c, r11=r11, r12=r12, r22=r22, n=n, covariance=c**2 * A / n)
