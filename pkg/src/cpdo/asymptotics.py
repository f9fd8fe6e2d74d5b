"""Normal approximations for long free-play games.

Writing ``1 - x_k = exp(W_1 + ... + W_k)`` with ``W_j = ln(1 - delta*C_j)``
turns every capital event into a statement about a sum of i.i.d. two-point
variables, which the central limit theorem approximates.  No continuity
correction is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr


@dataclass(frozen=True)
class DriftParams:
    mu: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class ApproxResult:
    probability: float
    z_argument: float
    k: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "probability": self.probability,
            "z_argument": self.z_argument,
            "percent": f"{100 * self.probability:.4g}%",
        }


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def drift_params(delta: float) -> DriftParams:
    """Mean and variance of ``ln(1 - delta*C)`` for a fair coin."""
    _check_delta(delta)
    mu = 0.5 * math.log1p(-delta * delta)
    half_gap = 0.5 * (math.log1p(delta) - math.log1p(-delta))
    return DriftParams(mu, half_gap * half_gap)


def normal_cdf(z):
    """Standard normal CDF.

    Evaluated as ``erfc(-z/sqrt(2))/2`` so the lower tail keeps full
    relative precision.  Accepts scalars or arrays.
    """
    out = ndtr(z)
    return float(out) if np.ndim(out) == 0 else out


def _z(k, log_level, mu, sigma):
    return (log_level - k * mu) / (np.sqrt(k) * sigma)


def prob_reach_approx(k: int, t: float, delta: float = 0.01) -> ApproxResult:
    """``P(x_k >= t)`` in free play, i.e. ``P(sum W <= ln(1 - t))``."""
    if not 0 < t < 1:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    if k < 1:
        raise ValueError("k must be at least 1")
    d = drift_params(delta)
    z = float(_z(k, math.log1p(-t), d.mu, d.sigma))
    return ApproxResult(normal_cdf(z), z, k)


def prob_below_approx(k: int, level: float, delta: float = 0.01) -> ApproxResult:
    """``P(x_k <= level)`` in free play, for ``level < 1``."""
    if not level < 1:
        raise ValueError("level must be < 1")
    d = drift_params(delta)
    z = float((k * d.mu - math.log1p(-level)) / (math.sqrt(k) * d.sigma))
    return ApproxResult(normal_cdf(z), z, k)


def prob_cashout_approx(k: int, gamma: float = 0.1, delta: float = 0.01) -> ApproxResult:
    """``P(x_k <= -gamma)`` in free play."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return prob_below_approx(k, -gamma, delta)


def cashout_curve(gamma: float, delta: float, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """``(k, P(x_k <= -gamma))`` for ``k = 1..k_max``."""
    d = drift_params(delta)
    ks = np.arange(1, k_max + 1)
    z = (ks * d.mu - math.log1p(gamma)) / (np.sqrt(ks) * d.sigma)
    return ks, ndtr(z)


def cashout_peak(gamma: float = 0.1, delta: float = 0.01, k_max: int = 10_000) -> tuple[int, float]:
    """Toss in ``1..k_max`` where the approximate Cash-Out probability is largest.

    Plain scan, no unimodality assumed.  Ties go to the smallest ``k``.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    ks, p = cashout_curve(gamma, delta, k_max)
    i = int(np.argmax(p))
    return int(ks[i]), float(p[i])


def horizon_for_confidence(t: float, confidence: float, delta: float = 0.01) -> int:
    """Smallest ``k`` with ``prob_reach_approx(k, t, delta) >= confidence``.

    With ``ln(1 - t) < 0`` and negative drift the normal argument is strictly
    increasing in ``k``, so exponential bracketing plus bisection is exact.
    """
    if not 0 < t < 1:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    if drift_params(delta).mu >= 0:
        raise ValueError("no finite horizon without negative drift")

    def ok(k):
        return prob_reach_approx(k, t, delta).probability >= confidence

    if ok(1):
        return 1
    lo, hi = 1, 2
    while not ok(hi):
        lo, hi = hi, hi * 2
        if hi > 2**62:
            raise ValueError("confidence level not attainable")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _log_below(k: int, level: float, delta: float) -> float:
    d = drift_params(delta)
    z = (k * d.mu - math.log1p(-level)) / (math.sqrt(k) * d.sigma)
    return float(log_ndtr(z))


def successive_cashout_approx(k: int, gamma: float = 0.1, delta: float = 0.01) -> float:
    """Normal approximation of ``P(x_{k+1} <= -gamma | x_k < 0)``.

    A tail on toss ``k+1`` cashes out from ``x_k <= (delta - gamma)/(1 + delta)``
    and a head from ``x_k <= -(gamma + delta)/(1 - delta)``; both are averaged
    and divided by ``P(x_k < 0)``.  Ratios are formed in log space so very
    large ``k`` does not underflow.

    As ``k`` grows the value rises towards ``successive_cashout_limit``, which
    is below 1 (about 0.9535 at the defaults).
    """
    base = _log_below(k, 0.0, delta)
    via_tail = math.exp(_log_below(k, (delta - gamma) / (1 + delta), delta) - base)
    via_head = math.exp(_log_below(k, -(gamma + delta) / (1 - delta), delta) - base)
    return 0.5 * (via_tail + via_head)


def successive_cashout_limit(gamma: float = 0.1, delta: float = 0.01) -> float:
    """Large-``k`` limit of :func:`successive_cashout_approx`.

    Shifting the level from 0 to ``c`` scales a deep lower normal tail by
    ``(1 - c) ** (mu / sigma2)``.
    """
    d = drift_params(delta)
    power = d.mu / d.sigma2
    c_tail = (delta - gamma) / (1 + delta)
    c_head = -(gamma + delta) / (1 - delta)
    return 0.5 * ((1 - c_tail) ** power + (1 - c_head) ** power)


def successive_loss_approx(k: int, delta: float = 0.01) -> float:
    """Normal approximation of ``P(x_{k+1} < 0 | x_k < 0)``."""
    base = _log_below(k, 0.0, delta)
    via_head = math.exp(_log_below(k, -delta / (1 - delta), delta) - base)
    return 0.5 * (1 + via_head)
