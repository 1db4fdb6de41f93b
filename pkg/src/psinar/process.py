"""The INAR(1) model ``X_t = alpha o X_{t-1} + W_t`` and its exact kernel.

Transition probabilities are convolutions of the thinned law with the
innovation pmf and are always accumulated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .distributions import (
    Bernoulli,
    Geometric,
    Innovation,
    Poisson,
    PoissonLindley,
    ThinningFamily,
    _check_alpha,
    get_family,
)
from .exceptions import ConvergenceError, InputError
from .thinning import kernel_coefficients, kernel_terms, thin, thinned_logpmf

DEFAULT_BURN_IN = 500
MIN_CAP = 50


@dataclass(frozen=True, eq=False)
class CountSeries:
    """Observed counts ``x_1..x_T`` with ``T >= 2``."""

    values: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.values)
        if raw.ndim != 1:
            raise InputError("a count series must be one-dimensional")
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise InputError("count series values must be integers")
        elif raw.dtype.kind not in "iu":
            raise InputError("count series values must be integers")
        if raw.size < 2:
            raise InputError(f"a count series needs at least 2 values, got {raw.size}")
        if np.any(raw < 0):
            raise InputError("count series values must be non-negative")
        arr = raw.astype(np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values.tolist())

    def __eq__(self, other):
        return isinstance(other, CountSeries) and np.array_equal(self.values, other.values)

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def variance(self) -> float:
        return float(self.values.var(ddof=1))

    @property
    def acf1(self) -> float:
        d = self.values - self.values.mean()
        denom = float(np.dot(d, d))
        return float(np.dot(d[1:], d[:-1]) / denom) if denom > 0 else float("nan")

    def summary(self) -> dict:
        return {"T": len(self), "mean": self.mean, "variance": self.variance, "acf1": self.acf1}


def as_series(values) -> CountSeries:
    return values if isinstance(values, CountSeries) else CountSeries(np.asarray(values))


@dataclass(frozen=True)
class InarModel:
    """A fully specified INAR(1) process.

    ``family`` may be given by name (``"bernoulli"``, ``"geometric"``,
    ``"poisson"``); the innovation is any :class:`Innovation`.
    """

    family: ThinningFamily
    alpha: float
    innovation: Innovation

    def __post_init__(self):
        object.__setattr__(self, "family", get_family(self.family))
        _check_alpha(self.alpha)
        if not isinstance(self.innovation, Innovation):
            raise TypeError("innovation must be an Innovation instance")

    @classmethod
    def psinarpl(cls, family, alpha, theta):
        return cls(family, alpha, PoissonLindley(theta))

    @property
    def delta(self) -> float:
        return self.family.delta(self.alpha)

    @property
    def name(self) -> str:
        return model_tag(self.family, self.innovation.kind)


_MODEL_TAGS = {
    ("bernoulli", "pl"): "BINARPL",
    ("geometric", "pl"): "NBINARPL",
    ("poisson", "pl"): "PINARPL",
    ("bernoulli", "poisson"): "INARP",
    ("bernoulli", "geometric"): "INARG",
}


def model_tag(family, innovation_kind) -> str:
    kind = get_family(family).kind
    return _MODEL_TAGS.get((kind, innovation_kind), f"{kind}/{innovation_kind}")


def model_moments(model: InarModel):
    """Stationary ``(mean, variance)`` of the process."""
    a = model.alpha
    mu_w, var_w = model.innovation.mean, model.innovation.variance
    mean = mu_w / (1.0 - a)
    var = (model.delta / (1.0 - a) * mu_w + var_w) / (1.0 - a * a)
    return mean, var


def autocorrelation(model: InarModel, k: int) -> float:
    if k < 0:
        raise ValueError("lag must be non-negative")
    return model.alpha**k


def conditional_moments(model: InarModel, x):
    """Mean and variance of ``X_{t+1}`` given ``X_t = x``."""
    inn = model.innovation
    return model.alpha * x + inn.mean, model.delta * x + inn.variance


def _thinner(family, alpha):
    if isinstance(family, Bernoulli):
        return lambda x, rng: rng.binomial(x, alpha) if x else 0
    if isinstance(family, Geometric):
        q = 1.0 / (1.0 + alpha)
        return lambda x, rng: rng.negative_binomial(x, q) if x else 0
    if isinstance(family, Poisson):
        return lambda x, rng: rng.poisson(alpha * x) if x else 0
    return lambda x, rng: thin(family, alpha, x, rng)


def simulate(model: InarModel, length: int, burn_in: int = DEFAULT_BURN_IN, rng=None) -> CountSeries:
    """Simulate ``length`` values after ``burn_in`` steps started from ``X_0 = 0``.

    ``rng`` may be a seed or a :class:`numpy.random.Generator`.
    """
    if length < 1:
        raise ValueError("length must be positive")
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    rng = np.random.default_rng(rng)
    n = burn_in + length
    w = model.innovation.sample(rng, n)
    step = _thinner(model.family, model.alpha)
    out = np.empty(n, dtype=np.int64)
    x = 0
    for t in range(n):
        x = int(step(x, rng)) + int(w[t])
        out[t] = x
    values = out[burn_in:]
    if length == 1:
        # CountSeries needs two values; a single draw is returned as an array
        return values
    return CountSeries(values)


# ---------------------------------------------------------------------------
# Transition kernel
# ---------------------------------------------------------------------------


class TransitionKernel:
    """Log transition probabilities for a fixed set of ``(l, k)`` pairs.

    Everything that does not depend on the parameters is computed once, so
    repeated evaluation inside an optimiser costs one vectorised
    log-sum-exp.  Duplicate pairs are collapsed and weighted.
    """

    def __init__(self, family, prev, curr):
        self.family = get_family(family)
        pairs = np.stack([np.asarray(prev, dtype=np.int64), np.asarray(curr, dtype=np.int64)], axis=1)
        uniq, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        self.l = uniq[:, 0]
        self.k = uniq[:, 1]
        self.inverse = inverse.ravel()
        self.weights = counts.astype(float)
        self.k_max = int(self.k.max()) if self.k.size else 0
        m = np.arange(self.k_max + 1)
        const = kernel_terms(self.family, self.l[:, None], m[None, :])
        self._closed_form = const is not None
        if self._closed_form:
            # ragged layout: one flat entry per admissible (pair, m); rows are contiguous
            valid = (m[None, :] <= self.k[:, None]) & np.isfinite(const)
            rows, ms = np.nonzero(valid)
            self._rows = rows
            self._starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
            self._const = const[rows, ms]
            self._m = ms.astype(float)
            self._l = self.l[rows].astype(float)
            self._j = self.k[rows] - ms

    def unique_log_probs(self, alpha, innovation):
        w = innovation.grid_logpmf(self.k_max + 1)
        if not self._closed_form:
            return self._generic_log_probs(alpha, w)
        a, b = kernel_coefficients(self.family, alpha)
        z = self._const + a * self._m + b * self._l + w[self._j]
        mx = np.maximum.reduceat(z, self._starts)
        total = np.add.reduceat(np.exp(z - mx[self._rows]), self._starts)
        return np.log(total) + mx

    def log_probs(self, alpha, innovation):
        """Log probabilities in the order the pairs were given."""
        return self.unique_log_probs(alpha, innovation)[self.inverse]

    def loglik(self, alpha, innovation) -> float:
        return float(np.dot(self.weights, self.unique_log_probs(alpha, innovation)))

    def _generic_log_probs(self, alpha, w):
        out = np.empty(self.l.size)
        for i, (l, k) in enumerate(zip(self.l, self.k)):
            m = np.arange(k + 1)
            out[i] = logsumexp(thinned_logpmf(self.family, alpha, int(l), m) + w[k - m])
        return out


def transition_logprob(model: InarModel, l, k):
    """``log P(X_t = k | X_{t-1} = l)``, vectorised over ``l`` and ``k``."""
    l_b, k_b = np.broadcast_arrays(np.asarray(l), np.asarray(k))
    if np.any(l_b < 0) or np.any(k_b < 0):
        raise ValueError("states must be non-negative")
    kern = TransitionKernel(model.family, l_b.ravel(), k_b.ravel())
    out = kern.log_probs(model.alpha, model.innovation).reshape(l_b.shape)
    return float(out) if out.ndim == 0 else out


def transition_prob(model: InarModel, l, k):
    """``P(X_t = k | X_{t-1} = l)``."""
    return np.exp(transition_logprob(model, l, k))


def transition_row(model: InarModel, l: int, cap: int):
    """Transition probabilities from ``l`` to ``0..cap`` and the remaining tail mass."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    row = np.exp(transition_logprob(model, np.full(cap + 1, l), np.arange(cap + 1)))
    tail = max(0.0, 1.0 - math.fsum(row))
    return row, tail


def default_cap(model: InarModel, x_max: int, tail: float = 1e-12) -> int:
    """Truncation point leaving less than ``tail`` mass above it from state ``x_max``.

    Starts from ``max(x_max, mean) + 10 sd`` (at least 50) and widens it for
    heavy exponential tails, e.g. small ``theta``.
    """
    mean, var = conditional_moments(model, x_max)
    cap = max(MIN_CAP, int(math.ceil(max(x_max, mean) + 10.0 * math.sqrt(var))))
    while True:
        _, rest = transition_row(model, x_max, cap)
        if rest < tail:
            return cap
        cap = int(cap * 1.5)


def log_likelihood(model: InarModel, series) -> float:
    """Log-likelihood of ``x_2..x_T`` conditional on ``x_1``."""
    x = as_series(series).values
    return TransitionKernel(model.family, x[:-1], x[1:]).loglik(model.alpha, model.innovation)


def joint_log_pmf(model: InarModel, series: Sequence[int], initial_dist) -> float:
    """``log P(X_1 = x_1) + sum_t log P(x_t -> x_{t+1})``.

    ``series`` may have a single value here.
    """
    x = np.asarray(series, dtype=np.int64)
    p0 = np.asarray(initial_dist, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InputError("series must be a non-empty sequence")
    if x[0] < 0 or x[0] >= p0.size:
        raise InputError(f"x_1 = {x[0]} lies outside the initial distribution support")
    with np.errstate(divide="ignore"):
        head = float(np.log(p0[x[0]]))
    if x.size == 1:
        return head
    return head + log_likelihood(model, x)


def stationary_distribution(model: InarModel, cap: int | None = None, tol: float = 1e-12, max_iter: int = 100_000):
    """Truncated stationary pmf on ``0..cap`` by power iteration.

    The kernel is truncated at ``cap`` and each row renormalised.
    """
    mean, var = model_moments(model)
    need = mean + 10.0 * math.sqrt(var)
    if cap is None:
        cap = max(MIN_CAP, int(math.ceil(need)))
    if cap < need:
        raise ValueError(f"cap {cap} is below mean + 10 sd = {need:.1f}")
    P = kernel_matrix(model, cap)
    p = P[0].copy()
    residual = math.inf
    for _ in range(max_iter):
        nxt = p @ P
        nxt /= nxt.sum()
        residual = 0.5 * float(np.abs(nxt - p).sum())
        p = nxt
        if residual < tol:
            return p
    raise ConvergenceError("stationary distribution did not converge", residual)


def kernel_matrix(model: InarModel, cap: int) -> np.ndarray:
    """Row-normalised transition matrix on ``0..cap``."""
    P = np.empty((cap + 1, cap + 1))
    ks = np.arange(cap + 1)
    for l in range(cap + 1):
        P[l] = np.exp(transition_logprob(model, np.full(cap + 1, l), ks))
    P /= P.sum(axis=1, keepdims=True)
    return P
