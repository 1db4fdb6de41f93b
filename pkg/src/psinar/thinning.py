"""The power-series thinning operator ``alpha o X = Y_1 + ... + Y_X``.

For the three built-in families the sum of ``x`` iid counting variables has a
closed form (binomial, negative binomial, Poisson), which is used for both
sampling and the exact pmf.  User-supplied power-series families fall back to
a truncated convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .distributions import (
    Bernoulli,
    Geometric,
    Poisson,
    ThinningFamily,
    _check_alpha,
    get_family,
)

_CONV_TAIL = 1e-14


def thin(family, alpha, x, rng):
    """Draw ``alpha o x`` once."""
    fam = get_family(family)
    _check_alpha(alpha)
    x = int(x)
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0
    if isinstance(fam, Bernoulli):
        return int(rng.binomial(x, alpha))
    if isinstance(fam, Geometric):
        # failures before the x-th success with success probability 1/(1+alpha)
        return int(rng.negative_binomial(x, 1.0 / (1.0 + alpha)))
    if isinstance(fam, Poisson):
        return int(rng.poisson(alpha * x))
    cdf = np.cumsum(fam.table(alpha))
    draws = np.searchsorted(cdf, rng.random(x) * cdf[-1], side="right")
    return int(draws.sum())


def kernel_terms(family, l, m):
    """Parameter-free part of ``log P(alpha o l = m)``.

    For the built-in families the log pmf splits as
    ``const(l, m) + m * a(alpha) + l * b(alpha)``; this returns ``const``
    broadcast over ``l`` and ``m`` with ``-inf`` outside the support.  Returns
    ``None`` for families without such a decomposition.
    """
    fam = get_family(family)
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    l, m = np.broadcast_arrays(l, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        if isinstance(fam, Bernoulli):
            ok = m <= l
            const = gammaln(l + 1.0) - gammaln(m + 1.0) - gammaln(np.where(ok, l - m, 0.0) + 1.0)
        elif isinstance(fam, Geometric):
            ok = l > 0
            const = gammaln(l + m) - gammaln(m + 1.0) - gammaln(np.where(ok, l, 1.0))
        elif isinstance(fam, Poisson):
            ok = l > 0
            const = m * np.log(np.where(ok, l, 1.0)) - gammaln(m + 1.0)
        else:
            return None
    out = np.where(ok & (m >= 0), const, -np.inf)
    # x = 0 is a point mass at zero
    out = np.where((l == 0) & (m == 0), 0.0, out)
    return out


def kernel_coefficients(family, alpha):
    """Return ``(a, b)`` so that ``log P(alpha o l = m) = const + m a + l b``."""
    fam = get_family(family)
    if isinstance(fam, Bernoulli):
        return math.log(alpha) - math.log1p(-alpha), math.log1p(-alpha)
    if isinstance(fam, Geometric):
        return math.log(alpha) - math.log1p(alpha), -math.log1p(alpha)
    if isinstance(fam, Poisson):
        return math.log(alpha), -alpha
    raise TypeError(f"{fam!r} has no closed-form thinned law")


def thinned_logpmf(family, alpha, x, m):
    """``log P(alpha o X = m | X = x)``; vectorised over ``x`` and ``m``."""
    fam = get_family(family)
    _check_alpha(alpha)
    x_arr = np.asarray(x)
    m_arr = np.asarray(m)
    if np.any(x_arr < 0) or np.any(m_arr < 0):
        raise ValueError("x and m must be non-negative")
    const = kernel_terms(fam, x_arr, m_arr)
    if const is None:
        out = _convolution_logpmf(fam, alpha, x_arr, m_arr)
    else:
        a, b = kernel_coefficients(fam, alpha)
        with np.errstate(invalid="ignore"):
            out = const + m_arr * a + x_arr * b
        out = np.where(np.isneginf(const), -np.inf, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def thinned_pmf(family, alpha, x, m):
    """``P(alpha o X = m | X = x)``."""
    return np.exp(thinned_logpmf(family, alpha, x, m))


def _convolution_logpmf(fam, alpha, x_arr, m_arr):
    x_b, m_b = np.broadcast_arrays(x_arr, m_arr)
    out = np.full(x_b.shape, -np.inf)
    for xv in np.unique(x_b):
        law = convolution_power(fam.table(alpha), int(xv))
        sel = x_b == xv
        mm = m_b[sel]
        vals = np.full(mm.shape, -np.inf)
        inside = mm < law.size
        with np.errstate(divide="ignore"):
            vals[inside] = np.log(law[mm[inside]])
        out[sel] = vals
    return out


def convolution_power(p, x, tail=_CONV_TAIL):
    """pmf of the sum of ``x`` iid draws from ``p`` (pmf on ``0..len(p)-1``).

    Each partial convolution is truncated once its cumulative mass exceeds
    ``1 - tail``.
    """
    out = np.array([1.0])
    p = np.asarray(p, dtype=float)
    for _ in range(x):
        out = np.convolve(out, p)
        cut = np.searchsorted(np.cumsum(out), 1.0 - tail) + 1
        out = out[: max(cut, 1)]
    return out


@dataclass(frozen=True)
class ThinnedLaw:
    """Conditional law of ``alpha o X`` given ``X = x``."""

    family: ThinningFamily
    alpha: float
    x: int

    def __post_init__(self):
        object.__setattr__(self, "family", get_family(self.family))
        _check_alpha(self.alpha)
        if self.x < 0:
            raise ValueError("x must be non-negative")

    @property
    def mean(self):
        return self.alpha * self.x

    @property
    def variance(self):
        return self.family.delta(self.alpha) * self.x

    def pmf(self, m):
        return thinned_pmf(self.family, self.alpha, self.x, m)

    def logpmf(self, m):
        return thinned_logpmf(self.family, self.alpha, self.x, m)

    def support_max(self):
        """Largest reachable value, or ``None`` when unbounded."""
        if self.x == 0:
            return 0
        sm = self.family.support_max
        return None if sm is None else sm * self.x

    def sample(self, rng):
        return thin(self.family, self.alpha, self.x, rng)


__all__ = [
    "ThinnedLaw",
    "convolution_power",
    "kernel_coefficients",
    "kernel_terms",
    "thin",
    "thinned_logpmf",
    "thinned_pmf",
]
