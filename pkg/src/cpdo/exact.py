"""Exact rational probabilities for loss and Cash-Out events.

Every comparison of a capital product ``(1 - delta)**h * (1 + delta)**t``
against a bound is made on integers, never on floating logs: the edges of
the closed-form ranges (``m = 199`` and ``m = 99`` at ``delta = 1/100``) sit
on inequalities that are too close to call in double precision.

Two independent routes are provided.  The binomial-sum functions count how
many tails push the product over a threshold.  :class:`BruteForce` enumerates
all ``2**k`` toss sequences and evaluates :class:`Event` predicates on them;
it is the oracle the closed forms are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .model import Number, as_fraction

MAX_BRUTE_FORCE_TOSSES = 26
_CHUNK_BITS = 20
_HOLD_BITS = 21


class OutOfRangeError(ValueError):
    """A closed form was asked for outside the range where it holds."""


class BudgetExceededError(ValueError):
    """An enumeration would exceed the brute-force budget."""


def binomial(n: int, r: int) -> int:
    if not 0 <= r <= n:
        raise ValueError(f"binomial({n}, {r}): need 0 <= r <= n")
    return math.comb(n, r)


def rational_str(value: Fraction) -> str:
    """``Fraction(193, 512)`` -> ``"193/512"``; integers keep a ``/1``-free form."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def rational_record(value: Fraction) -> dict:
    return {"rational": rational_str(value), "decimal": round(float(value), 6)}


# ---------------------------------------------------------------------------
# threshold on the number of tails


@dataclass(frozen=True)
class ThresholdQuery:
    """Find the fewest tails among ``k`` tosses making the product exceed ``bound``.

    With ``i`` tails the product is ``a_i = (1-delta)**(k-i) * (1+delta)**i``.
    ``strict=False`` asks for ``a_i >= bound`` instead of ``a_i > bound``.
    """

    k: int
    delta: Fraction
    bound: Fraction
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "delta", as_fraction(self.delta))
        object.__setattr__(self, "bound", as_fraction(self.bound))
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.bound <= 0:
            raise ValueError("bound must be positive")

    def exceeds(self, i: int) -> bool:
        """Does ``a_i`` clear the bound?"""
        p, q = self.delta.numerator, self.delta.denominator
        lhs = (q - p) ** (self.k - i) * (q + p) ** i * self.bound.denominator
        rhs = self.bound.numerator * q**self.k
        return lhs > rhs if self.strict else lhs >= rhs


def threshold_index(q: ThresholdQuery) -> int:
    """Smallest ``i`` in ``[0, k]`` with ``a_i`` past the bound, else ``k + 1``.

    ``a_i`` grows with ``i`` by the factor ``(1+delta)/(1-delta)``, so a
    bisection over ``i`` is exact.
    """
    lo, hi = 0, q.k + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if q.exceeds(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _head_weights(k: int, p_heads: Fraction) -> list[Fraction]:
    """``P(N_k = h)`` for ``h = 0..k`` as exact rationals."""
    q = 1 - p_heads
    return [binomial(k, h) * p_heads**h * q ** (k - h) for h in range(k + 1)]


def prob_capital_below(
    k: int,
    level: Number,
    delta: Number,
    p_heads: Number = Fraction(1, 2),
    strict: bool = True,
) -> Fraction:
    """Exact ``P(x_k < level)`` (or ``<=`` with ``strict=False``).

    ``x_k < level`` is the same event as the product exceeding ``1 - level``,
    so the probability is a binomial tail over the number of tails.
    """
    level = as_fraction(level)
    p_heads = as_fraction(p_heads)
    if not 0 <= p_heads <= 1:
        raise ValueError("p_heads must lie in [0, 1]")
    if level >= 1:
        # x_k < 1 always holds
        return Fraction(1)
    i_star = threshold_index(ThresholdQuery(k, as_fraction(delta), 1 - level, strict))
    p_tails = 1 - p_heads
    if p_heads == Fraction(1, 2):
        return Fraction(sum(math.comb(k, i) for i in range(i_star, k + 1)), 2**k)
    return sum(
        (math.comb(k, i) * p_tails**i * p_heads ** (k - i) for i in range(i_star, k + 1)),
        Fraction(0),
    )


def prob_loss_exact(
    k: int, delta: Number = Fraction(1, 100), p_heads: Number = Fraction(1, 2)
) -> Fraction:
    """Exact ``P(x_k < 0)`` for any coin bias."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return prob_capital_below(k, 0, delta, p_heads)


def prob_cashout_exact(
    k: int, gamma: Number = Fraction(1, 10), delta: Number = Fraction(1, 100),
    p_heads: Number = Fraction(1, 2),
) -> Fraction:
    """Exact ``P(x_k <= -gamma)`` in free play (no absorbing barriers)."""
    return prob_capital_below(k, -as_fraction(gamma), delta, p_heads, strict=False)


def corridor_prob_exact(
    k: int,
    gamma: Number = Fraction(1, 10),
    delta: Number = Fraction(1, 100),
    cash_in_level: Optional[Number] = None,
    p_heads: Number = Fraction(1, 2),
) -> Fraction:
    """Exact ``P(-gamma < x_k < cash_in_level)`` at a single toss ``k``.

    This is the one-time marginal, which dominates the survival probability
    of the absorbed game.  ``cash_in_level`` defaults to ``1 - gamma``.
    """
    gamma = as_fraction(gamma)
    delta = as_fraction(delta)
    upper = 1 - gamma if cash_in_level is None else as_fraction(cash_in_level)
    # x_k > -gamma  <=>  product < 1 + gamma ; x_k < upper <=> product > 1 - upper
    first_out = threshold_index(ThresholdQuery(k, delta, 1 + gamma, strict=False))
    first_in = threshold_index(ThresholdQuery(k, delta, 1 - upper, strict=True))
    tails = range(first_in, first_out)
    p_heads = as_fraction(p_heads)
    if p_heads == Fraction(1, 2):
        return Fraction(sum(math.comb(k, i) for i in tails), 2**k)
    p_tails = 1 - p_heads
    return sum(
        (math.comb(k, i) * p_tails**i * p_heads ** (k - i) for i in tails), Fraction(0)
    )


def prob_loss_given_early_loss(
    k: int, j: int, delta: Number = Fraction(1, 100), p_heads: Number = Fraction(1, 2)
) -> Fraction:
    """Exact ``P(x_k < 0 | x_j < 0)`` for ``j`` in ``{1, 2}`` and ``k >= j``.

    For these ``j`` a loss means the first ``j`` tosses were all tails, so the
    remaining ``k - j`` tosses only need ``x_{k-j} < 1 - (1 + delta)**-j``.
    """
    if j not in (1, 2):
        raise ValueError("only j = 1 or j = 2 reduce to 'first j tosses were tails'")
    if k < j:
        raise ValueError("need k >= j")
    if k == j:
        return Fraction(1)
    delta = as_fraction(delta)
    return prob_capital_below(k - j, 1 - 1 / (1 + delta) ** j, delta, p_heads)


def prob_successive_loss(
    k: int, delta: Number = Fraction(1, 100), p_heads: Number = Fraction(1, 2)
) -> Fraction:
    """Exact ``P(x_{k+1} < 0 | x_k < 0)`` for any ``k >= 1``.

    A tail keeps a loss a loss; a head keeps it only from
    ``x_k < -delta/(1 - delta)``.
    """
    delta = as_fraction(delta)
    p_heads = as_fraction(p_heads)
    losing = prob_capital_below(k, 0, delta, p_heads)
    deep = prob_capital_below(k, -delta / (1 - delta), delta, p_heads)
    return ((1 - p_heads) * losing + p_heads * deep) / losing


# ---------------------------------------------------------------------------
# closed forms for the fair coin at delta = 1/100


def _check_range(name: str, m: int, lo: int, hi: int) -> None:
    if not lo <= m <= hi:
        raise OutOfRangeError(
            f"{name}: closed form only valid for {lo} <= m <= {hi} (got m={m}); "
            "use prob_loss_exact or BruteForce instead"
        )


def prob_loss_closed(m: int, parity: str) -> Fraction:
    """``P(x_{2m} < 0)`` (``parity="even"``) or ``P(x_{2m+1} < 0)`` (``"odd"``)."""
    if parity == "even":
        _check_range("P(x_2m < 0)", m, 1, 199)
        return Fraction(1, 2) - Fraction(binomial(2 * m, m), 2 ** (2 * m + 1))
    if parity == "odd":
        _check_range("P(x_2m+1 < 0)", m, 0, 99)
        return Fraction(1, 2)
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def cond_prob_given_loss_at_1(k: int) -> Fraction:
    """``P(x_k < 0 | x_1 < 0)``; ``k = 1`` is the conditioning event itself."""
    if k == 1:
        return Fraction(1)
    m, odd = divmod(k, 2)
    if odd:
        _check_range("P(x_2m+1 < 0 | x_1 < 0)", m, 1, 99)
        return Fraction(1, 2) + Fraction(binomial(2 * m, m), 2 ** (2 * m + 1))
    _check_range("P(x_2m < 0 | x_1 < 0)", m, 1, 199)
    return Fraction(1, 2)


def cond_prob_given_loss_at_2(k: int) -> Fraction:
    """``P(x_k < 0 | x_2 < 0)``.

    Losing at toss 2 means two tails, so the remaining ``k - 2`` tosses need
    only ``ceil(k/2) - 1`` more tails.  For odd ``k = 2m+1`` that gives
    ``1/2 + C(2m-1, m-1) / 2**(2m-1)``, not the value ``1/2`` that is often
    quoted; e.g. ``P(x_3 < 0 | x_2 < 0) = 1``.  Enumeration confirms the
    formula used here.
    """
    m, odd = divmod(k, 2)
    if odd:
        _check_range("P(x_2m+1 < 0 | x_2 < 0)", m, 1, 99)
        return Fraction(1, 2) + Fraction(binomial(2 * m - 1, m - 1), 2 ** (2 * m - 1))
    _check_range("P(x_2m < 0 | x_2 < 0)", m, 1, 199)
    return Fraction(1, 2) + Fraction(binomial(2 * m - 2, m - 1), 2 ** (2 * m - 1))


def cond_prob_successive(k: int) -> Fraction:
    """``P(x_{k+1} < 0 | x_k < 0)``."""
    m, odd = divmod(k, 2)
    if odd:
        _check_range("P(x_2m+2 < 0 | x_2m+1 < 0)", m, 0, 98)
        return 1 - Fraction(binomial(2 * m + 1, m + 1), 2 ** (2 * m + 1))
    _check_range("P(x_2m+1 < 0 | x_2m < 0)", m, 1, 99)
    return Fraction(1)


def golden_ratio_bound() -> float:
    """Largest ``delta`` for which two straight tails make the next toss a sure loss.

    ``P(x_3 < 0 | x_2 < 0) = 1`` exactly when ``(1+delta)**2 (1-delta) > 1``,
    i.e. ``0 < delta < (sqrt(5) - 1)/2``.
    """
    return (math.sqrt(5) - 1) / 2


# ---------------------------------------------------------------------------
# brute-force enumeration


class _Paths:
    """One chunk of enumerated sequences, stored as running head counts."""

    def __init__(self, heads: np.ndarray, delta: Fraction, cache: dict):
        self.heads = heads  # shape (n, k+1); heads[:, j] = N_j
        self.delta = delta
        self._cache = cache

    @property
    def k(self) -> int:
        return self.heads.shape[1] - 1

    def below(self, j: int, level: Fraction, strict: bool) -> np.ndarray:
        key = ("below", j, level, strict)
        table = self._cache.get(key)
        if table is None:
            # with n heads there are j - n tails; x_j < level <=> a_{j-n} > 1 - level
            q = ThresholdQuery(j, self.delta, 1 - level, strict) if level < 1 else None
            table = np.array(
                [True if q is None else q.exceeds(j - n) for n in range(j + 1)]
            )
            self._cache[key] = table
        return table[self.heads[:, j]]

    def toss(self, j: int) -> np.ndarray:
        return (self.heads[:, j] - self.heads[:, j - 1]) * 2 - 1


class Event:
    """A predicate over toss sequences, evaluated in bulk by :class:`BruteForce`."""

    max_step = 0

    def evaluate(self, paths: _Paths) -> np.ndarray:
        raise NotImplementedError

    def __and__(self, other: "Event") -> "Event":
        return _Combined(np.logical_and, self, other)

    def __or__(self, other: "Event") -> "Event":
        return _Combined(np.logical_or, self, other)

    def __invert__(self) -> "Event":
        return _Not(self)


class _Combined(Event):
    def __init__(self, op, a: Event, b: Event):
        self.op, self.a, self.b = op, a, b
        self.max_step = max(a.max_step, b.max_step)

    def evaluate(self, paths):
        return self.op(self.a.evaluate(paths), self.b.evaluate(paths))


class _Not(Event):
    def __init__(self, a: Event):
        self.a = a
        self.max_step = a.max_step

    def evaluate(self, paths):
        return ~self.a.evaluate(paths)


class CapitalBelow(Event):
    """``x_step < level`` (``strict``) or ``x_step <= level``."""

    def __init__(self, step: int, level: Number, strict: bool = True):
        self.step, self.level, self.strict = step, as_fraction(level), strict
        self.max_step = step

    def evaluate(self, paths):
        return paths.below(self.step, self.level, self.strict)


class CapitalAbove(Event):
    """``x_step > level`` (``strict``) or ``x_step >= level``."""

    def __init__(self, step: int, level: Number, strict: bool = True):
        self.step, self.level, self.strict = step, as_fraction(level), strict
        self.max_step = step

    def evaluate(self, paths):
        return ~paths.below(self.step, self.level, not self.strict)


class Toss(Event):
    def __init__(self, step: int, outcome: int):
        self.step, self.outcome = step, outcome
        self.max_step = step

    def evaluate(self, paths):
        return paths.toss(self.step) == self.outcome


class StaysBetween(Event):
    """``lo < x_j < hi`` for every ``j = 1..last``; the un-absorbed corridor."""

    def __init__(self, last: int, lo: Number, hi: Number):
        self.last, self.lo, self.hi = last, as_fraction(lo), as_fraction(hi)
        self.max_step = last

    def evaluate(self, paths):
        ok = np.ones(paths.heads.shape[0], dtype=bool)
        for j in range(1, self.last + 1):
            ok &= ~paths.below(j, self.lo, strict=False)
            ok &= paths.below(j, self.hi, strict=True)
        return ok


class SequencePredicate(Event):
    """Wrap a plain callable taking the tuple of outcomes (+1/-1).

    The callable sees the full sequence of ``k`` tosses.  Evaluation is one
    Python call per sequence, so keep ``k`` small.
    """

    def __init__(self, fn: Callable[[tuple], bool]):
        self.fn = fn

    def evaluate(self, paths):
        steps = np.diff(paths.heads, axis=1) * 2 - 1
        return np.fromiter(
            (bool(self.fn(tuple(int(c) for c in row))) for row in steps),
            dtype=bool,
            count=steps.shape[0],
        )


def loss(step: int) -> Event:
    return CapitalBelow(step, 0)


def cash_out(step: int, gamma: Number = Fraction(1, 10)) -> Event:
    return CapitalBelow(step, -as_fraction(gamma), strict=False)


class BruteForce:
    """Exhaustive enumeration of all ``2**k`` toss sequences.

    Sequences are generated from the bits of ``0 .. 2**k - 1`` (bit ``j-1``
    set means heads on toss ``j``) and held as running head counts.  With a
    biased coin each sequence is weighted by ``p**N_k (1-p)**(k-N_k)``.
    """

    def __init__(
        self,
        k: int,
        delta: Number = Fraction(1, 100),
        p_heads: Number = Fraction(1, 2),
    ):
        if k < 0:
            raise ValueError("k must be non-negative")
        if k > MAX_BRUTE_FORCE_TOSSES:
            raise BudgetExceededError(
                f"brute force limited to k <= {MAX_BRUTE_FORCE_TOSSES} (got k={k})"
            )
        self.k = k
        self.delta = as_fraction(delta)
        self.p_heads = as_fraction(p_heads)
        self._tables: dict = {}
        self._held: Optional[np.ndarray] = None
        if k <= _HOLD_BITS:
            self._held = self._heads(0, 2**k)

    def _heads(self, start: int, stop: int) -> np.ndarray:
        idx = np.arange(start, stop, dtype=np.int64)
        bits = ((idx[:, None] >> np.arange(self.k, dtype=np.int64)) & 1).astype(np.int8)
        heads = np.zeros((stop - start, self.k + 1), dtype=np.int8)
        np.cumsum(bits, axis=1, dtype=np.int8, out=heads[:, 1:])
        return heads

    def _chunks(self):
        if self._held is not None:
            yield self._held
            return
        size = 2**_CHUNK_BITS
        for start in range(0, 2**self.k, size):
            yield self._heads(start, start + size)

    def counts(self, event: Event) -> np.ndarray:
        """Number of sequences satisfying ``event``, split by final head count."""
        if event.max_step > self.k:
            raise ValueError(f"event looks at toss {event.max_step} > k={self.k}")
        out = np.zeros(self.k + 1, dtype=np.int64)
        for heads in self._chunks():
            mask = event.evaluate(_Paths(heads, self.delta, self._tables))
            out += np.bincount(heads[mask, self.k], minlength=self.k + 1)
        return out

    def _mass(self, counts: np.ndarray) -> Fraction:
        if self.p_heads == Fraction(1, 2):
            return Fraction(int(counts.sum()), 2**self.k)
        q = 1 - self.p_heads
        return sum(
            (int(c) * self.p_heads**h * q ** (self.k - h) for h, c in enumerate(counts)),
            Fraction(0),
        )

    def prob(self, event: Event, condition: Optional[Event] = None) -> Fraction:
        if condition is None:
            return self._mass(self.counts(event))
        denom = self._mass(self.counts(condition))
        if denom == 0:
            raise ValueError("conditioning event has probability zero")
        return self._mass(self.counts(event & condition)) / denom


def brute_force_prob(
    k: int,
    delta: Number,
    event: Event | Callable[[tuple], bool],
    condition: Event | Callable[[tuple], bool] | None = None,
    p_heads: Number = Fraction(1, 2),
) -> Fraction:
    """Exact (conditional) probability by enumerating every length-``k`` sequence."""
    if not isinstance(event, Event):
        event = SequencePredicate(event)
    if condition is not None and not isinstance(condition, Event):
        condition = SequencePredicate(condition)
    return BruteForce(k, delta, p_heads).prob(event, condition)
