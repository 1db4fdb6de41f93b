"""Innovation laws and power-series counting laws.

The Poisson-Lindley law is the innovation of the PSINARPL(1) process; the
Poisson and geometric innovations exist so the classical INARP(1) and INARG(1)
models can be fitted with the same machinery.  Counting laws (the ``Y_i`` in
``alpha o X = Y_1 + ... + Y_X``) are described by :class:`ThinningFamily`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, ClassVar, Optional

import numpy as np
from scipy import optimize
from scipy.special import expit, gammaln, logit


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def _check_counts(x):
    arr = np.asarray(x)
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr)):
            raise ValueError("counts must be integers")
    elif arr.dtype.kind not in "iub":
        raise ValueError("counts must be integers")
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    return arr


def _scalar_or_array(values, like):
    return float(values) if np.ndim(like) == 0 else values


# ---------------------------------------------------------------------------
# Innovation laws
# ---------------------------------------------------------------------------


class Innovation:
    """Common interface of the innovation laws ``W_t``.

    Subclasses are frozen dataclasses with a single positive parameter.  The
    estimation code only relies on ``logpmf``, ``mean``, ``from_mean`` and the
    unconstrained reparameterisation.
    """

    kind: ClassVar[str]
    param_name: ClassVar[str]

    @property
    def param(self) -> float:
        return getattr(self, self.param_name)

    def pmf(self, x):
        return np.exp(self.logpmf(x))

    def logpmf(self, x):
        raise NotImplementedError

    def grid_logpmf(self, n):
        """Log pmf on ``0..n-1`` without input validation."""
        return self._logpmf(np.arange(n, dtype=float))

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    @classmethod
    def from_mean(cls, mean: float) -> "Innovation":
        """Return the member of the family whose mean equals ``mean``."""
        raise NotImplementedError

    def to_unconstrained(self) -> float:
        return math.log(self.param)

    @classmethod
    def from_unconstrained(cls, z: float) -> "Innovation":
        return cls(math.exp(z))


@dataclass(frozen=True)
class PoissonLindley(Innovation):
    """Poisson-Lindley law, ``P(X=x) = theta^2 (x+theta+2) / (theta+1)^(x+3)``."""

    theta: float
    kind: ClassVar[str] = "pl"
    param_name: ClassVar[str] = "theta"

    def __post_init__(self):
        if not (self.theta > 0) or not math.isfinite(self.theta):
            raise ValueError(f"theta must be positive, got {self.theta!r}")

    def logpmf(self, x):
        x = _check_counts(x)
        return _scalar_or_array(self._logpmf(x), x)

    def _logpmf(self, x):
        t = self.theta
        return 2.0 * math.log(t) + np.log(x + t + 2.0) - (x + 3.0) * math.log1p(t)

    @property
    def mean(self) -> float:
        t = self.theta
        return (t + 2.0) / (t * (t + 1.0))

    @property
    def variance(self) -> float:
        t = self.theta
        return (t**3 + 4 * t**2 + 6 * t + 2) / (t**2 * (t + 1.0) ** 2)

    def pgf(self, t):
        """Probability generating function, defined for ``t < 1 + theta``."""
        t = np.asarray(t, dtype=float)
        th = self.theta
        if np.any(t >= 1.0 + th):
            raise ValueError(f"pgf argument must be below 1 + theta = {1.0 + th}")
        d = 1.0 + th - t
        out = th**2 / (1.0 + th) * (1.0 / d**2 + 1.0 / d)
        return _scalar_or_array(out, t)

    def mgf(self, t):
        return self.pgf(np.exp(t))

    def sample(self, rng, size=None):
        # Lindley rate mixture: Exp(theta) w.p. theta/(theta+1), else Gamma(2, theta).
        th = self.theta
        shape = np.where(rng.random(size) < th / (th + 1.0), 1.0, 2.0)
        rate = rng.gamma(shape, 1.0 / th)
        return rng.poisson(rate)

    @classmethod
    def from_mean(cls, mean):
        c = float(mean)
        if not c > 0:
            raise ValueError(f"innovation mean must be positive, got {c!r}")
        theta = ((1.0 - c) + math.sqrt((c - 1.0) ** 2 + 8.0 * c)) / (2.0 * c)
        return cls(theta)


@dataclass(frozen=True)
class PoissonInnovation(Innovation):
    lam: float
    kind: ClassVar[str] = "poisson"
    param_name: ClassVar[str] = "lam"

    def __post_init__(self):
        if not (self.lam > 0) or not math.isfinite(self.lam):
            raise ValueError(f"lam must be positive, got {self.lam!r}")

    def logpmf(self, x):
        x = _check_counts(x)
        return _scalar_or_array(self._logpmf(x), x)

    def _logpmf(self, x):
        return x * math.log(self.lam) - self.lam - gammaln(x + 1.0)

    @property
    def mean(self):
        return self.lam

    @property
    def variance(self):
        return self.lam

    def sample(self, rng, size=None):
        return rng.poisson(self.lam, size)

    @classmethod
    def from_mean(cls, mean):
        return cls(float(mean))


@dataclass(frozen=True)
class GeometricInnovation(Innovation):
    """Geometric law on ``{0, 1, ...}`` with success probability ``p``."""

    p: float
    kind: ClassVar[str] = "geometric"
    param_name: ClassVar[str] = "p"

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"p must lie in (0, 1), got {self.p!r}")

    def logpmf(self, x):
        x = _check_counts(x)
        return _scalar_or_array(self._logpmf(x), x)

    def _logpmf(self, x):
        return math.log(self.p) + x * math.log1p(-self.p)

    @property
    def mean(self):
        return (1.0 - self.p) / self.p

    @property
    def variance(self):
        return (1.0 - self.p) / self.p**2

    def sample(self, rng, size=None):
        # numpy's geometric counts trials, support {1, 2, ...}
        return rng.geometric(self.p, size) - 1

    @classmethod
    def from_mean(cls, mean):
        return cls(1.0 / (1.0 + float(mean)))

    def to_unconstrained(self):
        return float(logit(self.p))

    @classmethod
    def from_unconstrained(cls, z):
        return cls(float(expit(z)))


INNOVATIONS = {
    cls.kind: cls for cls in (PoissonLindley, PoissonInnovation, GeometricInnovation)
}


def innovation_class(kind) -> type[Innovation]:
    if isinstance(kind, type) and issubclass(kind, Innovation):
        return kind
    try:
        return INNOVATIONS[str(kind).lower()]
    except KeyError:
        raise ValueError(
            f"unknown innovation {kind!r}; expected one of {sorted(INNOVATIONS)}"
        ) from None


# Convenience wrappers for the Poisson-Lindley law.


def pl_pmf(x, theta):
    """Poisson-Lindley probability mass at ``x``."""
    return np.exp(PoissonLindley(theta).logpmf(x))


def pl_logpmf(x, theta):
    return PoissonLindley(theta).logpmf(x)


def pl_moments(theta):
    """Return ``(mean, variance)`` of the Poisson-Lindley law."""
    d = PoissonLindley(theta)
    return d.mean, d.variance


def pl_pgf(t, theta):
    return PoissonLindley(theta).pgf(t)


def pl_mgf(t, theta):
    return PoissonLindley(theta).mgf(t)


def pl_sample(theta, rng, size=None):
    return PoissonLindley(theta).sample(rng, size)


# ---------------------------------------------------------------------------
# Counting laws of the thinning operator
# ---------------------------------------------------------------------------


class ThinningFamily:
    """Power-series law of the summands ``Y_i``, parameterised by its mean.

    Each family carries its power-series components: ``log_a(y)`` (log
    coefficients), ``log_C(beta)`` (log series function), the admissible
    ``beta`` range ``(0, beta_max)`` and ``support_max`` (``None`` when the
    range is unbounded).  ``beta(alpha)`` maps the mean onto the series
    parameter.
    """

    kind: str = "generic"
    beta_max: float = math.inf
    support_max: Optional[int] = None

    def log_a(self, y):
        raise NotImplementedError

    def log_C(self, beta):
        raise NotImplementedError

    def beta(self, alpha):
        raise NotImplementedError

    def delta(self, alpha):
        """Variance of a single counting variable with mean ``alpha``."""
        raise NotImplementedError

    def logpmf(self, y, alpha):
        _check_alpha(alpha)
        y = np.asarray(y)
        b = self.beta(alpha)
        inside = (y >= 0) if self.support_max is None else (y >= 0) & (y <= self.support_max)
        ys = np.where(inside, y, 0)
        out = np.where(inside, self.log_a(ys) + ys * math.log(b) - self.log_C(b), -np.inf)
        return _scalar_or_array(out, y)

    def pmf(self, y, alpha):
        return np.exp(self.logpmf(y, alpha))

    def __repr__(self):
        return f"{type(self).__name__}()"


class Bernoulli(ThinningFamily):
    """``P(Y=1) = alpha``; the classical binomial thinning."""

    kind = "bernoulli"
    support_max = 1

    def log_a(self, y):
        return np.zeros(np.shape(y))

    def log_C(self, beta):
        return math.log1p(beta)

    def beta(self, alpha):
        return alpha / (1.0 - alpha)

    def delta(self, alpha):
        return alpha * (1.0 - alpha)


class Geometric(ThinningFamily):
    """``P(Y=y) = alpha^y / (1+alpha)^(y+1)``; negative binomial thinning."""

    kind = "geometric"
    beta_max = 1.0

    def log_a(self, y):
        return np.zeros(np.shape(y))

    def log_C(self, beta):
        return -math.log1p(-beta)

    def beta(self, alpha):
        return alpha / (1.0 + alpha)

    def delta(self, alpha):
        return alpha * (1.0 + alpha)


class Poisson(ThinningFamily):
    """``P(Y=y) = exp(-alpha) alpha^y / y!``."""

    kind = "poisson"

    def log_a(self, y):
        return -gammaln(np.asarray(y) + 1.0)

    def log_C(self, beta):
        return beta

    def beta(self, alpha):
        return alpha

    def delta(self, alpha):
        return alpha


@dataclass(frozen=True, eq=False)
class PowerSeriesFamily(ThinningFamily):
    """User-supplied power-series counting law.

    ``log_a`` must be vectorised over integer arrays.  The series parameter is
    found numerically so that the counting mean equals ``alpha``.

    Example: the Poisson law written generically::

        PowerSeriesFamily("poisson-ps", lambda y: -gammaln(y + 1.0), lambda b: b)
    """

    name: str
    log_a_fn: Callable = field(repr=False)
    log_C_fn: Callable = field(repr=False)
    beta_max: float = math.inf
    support_max: Optional[int] = None
    kind: ClassVar[str] = "generic"

    def log_a(self, y):
        return self.log_a_fn(np.asarray(y))

    def log_C(self, beta):
        return float(self.log_C_fn(beta))

    def table(self, alpha, tail=1e-15):
        """Counting pmf on ``0..N`` with ``N`` large enough to leave < ``tail`` mass."""
        return _series_table(self, self.beta(alpha), tail)

    @lru_cache(maxsize=256)
    def beta(self, alpha):
        _check_alpha(alpha)

        def excess(b):
            p = _series_table(self, b, 1e-15)
            return float(np.dot(np.arange(p.size), p)) - alpha

        lo = 1e-300
        hi = self.beta_max * (1.0 - 1e-12) if math.isfinite(self.beta_max) else 1.0
        if not math.isfinite(self.beta_max):
            while excess(hi) < 0:
                hi *= 2.0
                if hi > 1e8:
                    raise ValueError(f"no series parameter reaches mean {alpha}")
        elif excess(hi) < 0:
            raise ValueError(f"mean {alpha} is not reachable for family {self.name}")
        return optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=1e-12)

    def delta(self, alpha):
        p = self.table(alpha)
        y = np.arange(p.size)
        m = np.dot(y, p)
        return float(np.dot((y - m) ** 2, p))


def _series_table(fam, beta, tail):
    log_c = fam.log_C(beta)
    n = 64 if fam.support_max is None else fam.support_max + 1
    while True:
        y = np.arange(n)
        p = np.exp(fam.log_a(y) + y * math.log(beta) - log_c)
        if fam.support_max is not None or 1.0 - p.sum() < tail or n > 1 << 20:
            return p
        n *= 2


BERNOULLI = Bernoulli()
GEOMETRIC = Geometric()
POISSON = Poisson()

FAMILIES = {f.kind: f for f in (BERNOULLI, GEOMETRIC, POISSON)}
FAMILY_ALIASES = {
    "binomial": BERNOULLI,
    "b": BERNOULLI,
    "negative-binomial": GEOMETRIC,
    "nb": GEOMETRIC,
    "p": POISSON,
}


def get_family(name) -> ThinningFamily:
    if isinstance(name, ThinningFamily):
        return name
    key = str(name).lower()
    fam = FAMILIES.get(key) or FAMILY_ALIASES.get(key)
    if fam is None:
        raise ValueError(f"unknown thinning family {name!r}; expected one of {sorted(FAMILIES)}")
    return fam


def counting_pmf(family, alpha, y):
    """P(Y = y) for the counting law of ``family`` with mean ``alpha``."""
    return get_family(family).pmf(y, alpha)


def counting_logpmf(family, alpha, y):
    return get_family(family).logpmf(y, alpha)
