"""Analytic bounds for the game with both Cash-Out and (modified) Cash-In.

Raw bound values are returned as computed.  A survival bound above 1 is a
true but vacuous statement; it is flagged, never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: float
    k: Optional[int] = None
    assumptions: str = ""
    log_scale: bool = False
    notes: list = field(default_factory=list)

    @property
    def vacuous(self) -> bool:
        """True for a probability bound that exceeds 1."""
        if self.log_scale:
            return self.value > 0
        return self.value > 1

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "value": self.value,
            "k": self.k,
            "assumptions": self.assumptions,
            "log_scale": self.log_scale,
        }
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _check(gamma, delta):
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _check_even(k):
    if k < 2 or k % 2:
        raise ValueError(
            f"k must be an even integer >= 2 (the central-binomial bound is "
            f"stated for even k), got {k}"
        )


def cash_in_upper_bound(gamma: float = 0.1, delta: float = 0.01) -> float:
    """Upper bound ``gamma + delta + gamma*delta`` on the probability of Cash-In.

    Optional stopping of the martingale gives ``0 = P_w E_w + (1 - P_w) E_l``,
    with ``E_w >= 1 - gamma`` and a Cash-Out overshoot of at most one wager,
    ``(1 + gamma) * delta``.
    """
    _check(gamma, delta)
    return gamma + delta + gamma * delta


def corridor_width_beta(gamma: float = 0.1, delta: float = 0.01) -> float:
    """Width of the band of head counts that keeps ``-gamma < x_k < 1 - gamma``.

    The band is the same for every ``k``:
    ``(ln(1+gamma) - ln(gamma)) / (ln(1+delta) - ln(1-delta))``.
    """
    _check(gamma, delta)
    return (math.log1p(gamma) - math.log(gamma)) / (math.log1p(delta) - math.log1p(-delta))


def corridor_head_interval(k: int, gamma: float = 0.1, delta: float = 0.01) -> tuple[float, float]:
    """Open interval of ``N_k`` (heads) values with ``-gamma < x_k < 1 - gamma``."""
    _check(gamma, delta)
    gap = math.log1p(delta) - math.log1p(-delta)
    lo = (k * math.log1p(delta) - math.log1p(gamma)) / gap
    hi = (k * math.log1p(delta) - math.log(gamma)) / gap
    return lo, hi


def log_binomial_max_bound(k: int) -> float:
    """Natural log of ``2**k * sqrt(2/(pi k)) * exp(1/(12k))``."""
    _check_even(k)
    return k * math.log(2) + 0.5 * math.log(2 / (math.pi * k)) + 1 / (12 * k)


def binomial_max_bound(k: int) -> float:
    """Stirling upper bound on every ``C(k, j)`` for even ``k``.

    Overflows a double beyond ``k ~ 1020``; use :func:`binomial_max_bound_report`
    or :func:`log_binomial_max_bound` there.
    """
    return math.exp(log_binomial_max_bound(k))


def binomial_max_bound_report(k: int) -> BoundReport:
    """Bound on ``max_j C(k, j)``, switching to log scale for ``k > 1000``."""
    log_value = log_binomial_max_bound(k)
    if k > 1000:
        return BoundReport("binomial_max_bound", log_value, k, "k even", log_scale=True)
    return BoundReport("binomial_max_bound", math.exp(log_value), k, "k even")


def survival_upper_bound(k: int, gamma: float = 0.1, delta: float = 0.01) -> float:
    """Bound ``beta * sqrt(2/(pi k)) * exp(1/(12k))`` on ``P(-gamma < x_k < 1 - gamma)``.

    Since surviving ``k`` tosses requires being inside the corridor at toss
    ``k``, it also bounds the survival probability of the absorbed game.
    """
    _check_even(k)
    beta = corridor_width_beta(gamma, delta)
    return beta * math.sqrt(2 / (math.pi * k)) * math.exp(1 / (12 * k))


def survival_bound_report(k: int, gamma: float = 0.1, delta: float = 0.01) -> BoundReport:
    value = survival_upper_bound(k, gamma, delta)
    notes = ["vacuous (exceeds 1)"] if value > 1 else []
    return BoundReport("survival_upper_bound", value, k, "k even", notes=notes)


def bound_reports(
    gamma: float = 0.1, delta: float = 0.01, survival_ks: tuple[int, ...] = ()
) -> list[BoundReport]:
    reports = [
        BoundReport("cash_in_upper_bound", cash_in_upper_bound(gamma, delta)),
        BoundReport("corridor_width_beta", corridor_width_beta(gamma, delta)),
    ]
    reports += [survival_bound_report(k, gamma, delta) for k in survival_ks]
    return reports
