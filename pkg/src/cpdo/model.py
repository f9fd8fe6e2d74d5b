"""Deterministic core of the CPDO coin-toss model.

Net capital ``x`` is measured in units of the initial stake, so the game
starts at ``x = 0``, the lender cashes out at ``x <= -gamma`` and the
original Cash-In target ``x = 1`` is never reached in finitely many tosses.
Each toss moves the capital by ``delta * (1 - x) * c`` with ``c = +1`` for
heads and ``c = -1`` for tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

HEADS = 1
TAILS = -1

Number = Union[int, float, Fraction]


def as_fraction(value: Number | str) -> Fraction:
    """Convert a user-facing number to an exact rational.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``
    rather than the binary value ``3602879701896397/36028797018963968``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot convert {value!r} to a rational")
        return Fraction(repr(value))
    return Fraction(value)


def coin(value: int) -> int:
    """Validate a coin outcome; only +1 (heads) and -1 (tails) are accepted."""
    if isinstance(value, bool) or value not in (HEADS, TAILS):
        raise ValueError(f"coin outcome must be +1 or -1, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class ModelParams:
    """Full configuration of one CPDO game.

    ``cash_in_level`` defaults to ``1 - gamma`` (the modified Cash-In rule).
    """

    gamma: float = 0.1
    delta: float = 0.01
    p_heads: float = 0.5
    cash_in_level: float | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 <= self.p_heads <= 1:
            raise ValueError(f"p_heads must lie in [0, 1], got {self.p_heads}")
        if self.cash_in_level is None:
            object.__setattr__(self, "cash_in_level", 1 - self.gamma)
        if not 0 < self.cash_in_level <= 1:
            raise ValueError(
                f"cash_in_level must lie in (0, 1], got {self.cash_in_level}"
            )


@dataclass(frozen=True)
class NetCapitalState:
    """Capital after ``k`` tosses of which ``n_heads`` were heads."""

    k: int
    x: float
    n_heads: int

    @classmethod
    def from_counts(cls, k: int, n_heads: int, delta: float) -> "NetCapitalState":
        return cls(k, capital_from_heads(k, n_heads, delta), n_heads)

    @property
    def stake(self) -> float:
        return self.x + 1


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def step(x: float, c: int, delta: float) -> float:
    """Advance net capital by one toss."""
    _check_delta(delta)
    c = coin(c)
    if not x < 1:
        raise ValueError(f"net capital must be < 1, got {x}")
    return x + delta * (1 - x) * c


def iterate(outcomes: Iterable[int], delta: float, x0: float = 0.0) -> float:
    x = x0
    for c in outcomes:
        x = step(x, c, delta)
    return x


def closed_form(outcomes: Sequence[int], delta: float) -> float:
    """Net capital ``1 - prod(1 - delta * c_j)`` after the given tosses."""
    _check_delta(delta)
    prod = 1.0
    for c in outcomes:
        prod *= 1 - delta * coin(c)
    return 1 - prod


def log_remaining(k: int, n_heads: int, delta: float) -> float:
    """Natural log of ``1 - x_k`` for ``k`` tosses with ``n_heads`` heads."""
    lp = math.log1p(delta)
    lm = math.log1p(-delta)
    return k * lp + n_heads * (lm - lp)


def capital_from_heads(k: int, n_heads: int, delta: float) -> float:
    """Net capital after ``k`` tosses with ``n_heads`` heads, in log domain.

    Only the head count matters, so this is valid for any toss order and
    stays finite for very long games.
    """
    _check_delta(delta)
    if k < 0 or not 0 <= n_heads <= k:
        raise ValueError(f"need 0 <= n_heads <= k, got k={k}, n_heads={n_heads}")
    return -math.expm1(log_remaining(k, n_heads, delta))


def two_headed_capital(k: int, delta: float) -> float:
    """Capital after ``k`` straight heads: ``1 - (1 - delta)**k``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return -math.expm1(k * math.log1p(-delta))


def two_tailed_cashout_toss(gamma: float, delta: float) -> int:
    """Toss at which an all-tails game first reaches ``x <= -gamma``.

    This is the smallest ``k`` with ``(1 + delta)**k >= 1 + gamma``.  When the
    real root is within 1e-9 of an integer the boundary case is settled in
    exact arithmetic, and equality counts as Cash-Out.
    """
    ModelParams(gamma=gamma, delta=delta)
    root = math.log1p(gamma) / math.log1p(delta)
    nearest = round(root)
    if abs(root - nearest) < 1e-9:
        g, d = as_fraction(gamma), as_fraction(delta)
        if nearest >= 1 and (1 + d) ** nearest >= 1 + g:
            k = nearest
            while k > 1 and (1 + d) ** (k - 1) >= 1 + g:
                k -= 1
            return k
        return nearest + 1
    return max(1, math.ceil(root))


def moments(k: int, delta: float) -> tuple[float, float]:
    """Mean and variance of ``x_k`` for a fair coin: ``(0, (1+delta^2)^k - 1)``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return 0.0, math.expm1(k * math.log1p(delta * delta))
