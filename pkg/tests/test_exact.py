import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdo.exact import (
    MAX_BRUTE_FORCE_TOSSES,
    BruteForce,
    BudgetExceededError,
    CapitalAbove,
    CapitalBelow,
    OutOfRangeError,
    StaysBetween,
    ThresholdQuery,
    Toss,
    binomial,
    brute_force_prob,
    cash_out,
    cond_prob_given_loss_at_1,
    cond_prob_given_loss_at_2,
    cond_prob_successive,
    corridor_prob_exact,
    golden_ratio_bound,
    loss,
    prob_capital_below,
    prob_cashout_exact,
    prob_loss_closed,
    prob_loss_exact,
    prob_loss_given_early_loss,
    prob_successive_loss,
    rational_record,
    rational_str,
    threshold_index,
)

D = F(1, 100)

# P(x_k < 0) and P(x_k < 0 | x_1 < 0) for k = 1..10, fair coin, delta = 1/100
TABLE = {
    1: (F(1, 2), F(1)),
    2: (F(1, 4), F(1, 2)),
    3: (F(1, 2), F(3, 4)),
    4: (F(5, 16), F(1, 2)),
    5: (F(1, 2), F(11, 16)),
    6: (F(11, 32), F(1, 2)),
    7: (F(1, 2), F(21, 32)),
    8: (F(93, 256), F(1, 2)),
    9: (F(1, 2), F(163, 256)),
    10: (F(193, 512), F(1, 2)),
}


def capitals(seq, delta):
    """Running capitals of one sequence, by direct rational products."""
    prod, out = F(1), []
    for c in seq:
        prod *= 1 - delta * c
        out.append(1 - prod)
    return out


def enumerate_prob(k, delta, event, condition=lambda xs, seq: True, p=F(1, 2)):
    """Independent oracle: itertools over all sequences, exact rationals."""
    num = den = F(0)
    for seq in itertools.product((1, -1), repeat=k):
        xs = capitals(seq, delta)
        h = seq.count(1)
        w = p**h * (1 - p) ** (k - h)
        if condition(xs, seq):
            den += w
            if event(xs, seq):
                num += w
    return num / den


def test_binomial_against_pascal():
    row = [1]
    for n in range(61):
        assert [binomial(n, r) for r in range(n + 1)] == row
        row = [1] + [a + b for a, b in zip(row, row[1:])] + [1]
    with pytest.raises(ValueError):
        binomial(3, 4)


def test_rational_formatting():
    assert rational_str(F(193, 512)) == "193/512"
    assert rational_str(F(1)) == "1"
    assert rational_record(F(1, 3)) == {"rational": "1/3", "decimal": 0.333333}


def linear_threshold(k, delta, bound, strict=True):
    for i in range(k + 1):
        a = (1 - delta) ** (k - i) * (1 + delta) ** i
        if (a > bound) if strict else (a >= bound):
            return i
    return k + 1


@pytest.mark.parametrize(
    "k, expected",
    # 2 -> both tails needed; 3 -> two tails suffice
    [(1, 1), (2, 2), (3, 2), (4, 3), (10, 6), (398, 200), (399, 201), (400, 202)],
)
def test_threshold_index_loss(k, expected):
    q = ThresholdQuery(k, D, 1)
    assert threshold_index(q) == expected == linear_threshold(k, D, F(1))


@settings(max_examples=300, deadline=None)
@given(
    st.integers(0, 60),
    st.fractions(F(1, 1000), F(99, 100)),
    st.fractions(F(1, 100), F(5)),
    st.booleans(),
)
def test_threshold_index_matches_linear_scan(k, delta, bound, strict):
    assert threshold_index(ThresholdQuery(k, delta, bound, strict)) == linear_threshold(
        k, delta, bound, strict
    )


def test_threshold_query_validation():
    for args in [(-1, D, 1), (3, F(0), 1), (3, F(1), 1), (3, D, 0)]:
        with pytest.raises(ValueError):
            ThresholdQuery(*args)


@pytest.mark.parametrize("k", range(1, 11))
def test_loss_table(k):
    loss_p, cond_p = TABLE[k]
    assert prob_loss_exact(k) == loss_p
    assert cond_prob_given_loss_at_1(k) == cond_p
    assert prob_loss_given_early_loss(k, 1) == cond_p
    m, odd = divmod(k, 2)
    assert prob_loss_closed(m, "odd" if odd else "even") == loss_p


@pytest.mark.parametrize("k", range(1, 13))
def test_generic_routes_against_itertools_oracle(k):
    below0 = lambda xs, seq: xs[-1] < 0  # noqa: E731
    assert prob_loss_exact(k) == enumerate_prob(k, D, below0)
    assert prob_loss_given_early_loss(k, 1) == enumerate_prob(
        k, D, below0, lambda xs, seq: xs[0] < 0
    )
    if k >= 2:
        assert prob_loss_given_early_loss(k, 2) == enumerate_prob(
            k, D, below0, lambda xs, seq: xs[1] < 0
        )
        assert prob_successive_loss(k - 1) == enumerate_prob(
            k, D, below0, lambda xs, seq: xs[-2] < 0
        )
    assert prob_cashout_exact(k, F(1, 25), D) == enumerate_prob(
        k, D, lambda xs, seq: xs[-1] <= F(-1, 25)
    )


@pytest.mark.parametrize("k", [3, 6, 9])
def test_biased_coin_against_itertools_oracle(k):
    p = F(18, 38)
    assert prob_loss_exact(k, D, p) == enumerate_prob(k, D, lambda xs, s: xs[-1] < 0, p=p)
    assert prob_successive_loss(k - 1, D, p) == enumerate_prob(
        k, D, lambda xs, s: xs[-1] < 0, lambda xs, s: xs[-2] < 0, p=p
    )


@pytest.mark.parametrize("k", [4, 7, 10])
def test_brute_force_engine_against_itertools_oracle(k):
    bf = BruteForce(k, F(1, 20), F(2, 5))
    ev = CapitalBelow(k, F(-1, 20), strict=False) | (Toss(1, 1) & CapitalAbove(k - 1, 0))
    oracle = enumerate_prob(
        k, F(1, 20),
        lambda xs, s: xs[-1] <= F(-1, 20) or (s[0] == 1 and xs[k - 2] > 0),
        p=F(2, 5),
    )
    assert bf.prob(ev) == oracle
    assert bf.prob(~ev) == 1 - oracle


def test_sequence_predicate_matches_events():
    k = 10

    def last_negative(seq):
        return capitals(seq, D)[-1] < 0

    assert brute_force_prob(k, D, last_negative) == prob_loss_exact(k)
    assert brute_force_prob(k, D, last_negative, lambda s: s[0] == -1) == \
        cond_prob_given_loss_at_1(k)


@pytest.mark.parametrize("m", [1, 2, 50, 199])
def test_even_closed_form_valid_range(m):
    assert prob_loss_closed(m, "even") == prob_loss_exact(2 * m)


@pytest.mark.parametrize("m", [0, 1, 50, 99])
def test_odd_closed_form_valid_range(m):
    assert prob_loss_closed(m, "odd") == prob_loss_exact(2 * m + 1) == F(1, 2)


def test_closed_forms_break_past_their_edges():
    # the threshold shifts by one tail just past the edges
    assert threshold_index(ThresholdQuery(398, D, 1)) == 200
    assert threshold_index(ThresholdQuery(400, D, 1)) == 202
    assert threshold_index(ThresholdQuery(199, D, 1)) == 100
    assert threshold_index(ThresholdQuery(201, D, 1)) == 102
    assert prob_loss_exact(400) != F(1, 2) - F(binomial(400, 200), 2**401)
    assert prob_loss_exact(201) != F(1, 2)


@pytest.mark.parametrize(
    "fn, arg",
    [
        (lambda m: prob_loss_closed(m, "even"), 200),
        (lambda m: prob_loss_closed(m, "even"), 0),
        (lambda m: prob_loss_closed(m, "odd"), 100),
        (cond_prob_given_loss_at_1, 400),
        (cond_prob_given_loss_at_1, 201),
        (cond_prob_given_loss_at_2, 400),
        (cond_prob_given_loss_at_2, 201),
        (cond_prob_successive, 200),
        (cond_prob_successive, 199),
    ],
)
def test_out_of_range_raises(fn, arg):
    with pytest.raises(OutOfRangeError, match="only valid for"):
        fn(arg)


def test_parity_argument_checked():
    with pytest.raises(ValueError):
        prob_loss_closed(3, "both")


def test_given_loss_at_2_small_values():
    assert cond_prob_given_loss_at_2(2) == 1
    assert cond_prob_given_loss_at_2(3) == 1
    assert cond_prob_given_loss_at_2(4) == F(3, 4)
    assert cond_prob_given_loss_at_2(5) == F(7, 8)


@pytest.mark.parametrize("k", range(2, 41))
def test_given_loss_at_2_matches_generic(k):
    assert cond_prob_given_loss_at_2(k) == prob_loss_given_early_loss(k, 2)


@pytest.mark.parametrize("k", [2, 150, 398, 197, 199])
def test_conditional_closed_forms_at_range_edges(k):
    assert cond_prob_given_loss_at_1(k) == prob_loss_given_early_loss(k, 1)
    assert cond_prob_given_loss_at_2(k) == prob_loss_given_early_loss(k, 2)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 101, 196, 197, 198])
def test_successive_closed_form_matches_generic(k):
    assert cond_prob_successive(k) == prob_successive_loss(k)


def test_successive_small_values():
    assert cond_prob_successive(1) == F(1, 2)
    assert cond_prob_successive(3) == F(5, 8)
    assert cond_prob_successive(2) == 1


def test_golden_ratio_bound():
    g = golden_ratio_bound()
    assert g == pytest.approx(0.6180339887498949)
    assert (1 + g) ** 2 * (1 - g) == pytest.approx(1)
    # below the bound two tails make the third toss irrelevant, above it not
    for delta, expected in [(F(7, 10), F(1, 2)), (F(3, 5), F(1)), (F(61, 100), F(1))]:
        assert brute_force_prob(3, delta, loss(3), loss(2)) == expected
        assert prob_loss_given_early_loss(3, 2, delta) == expected


def test_capital_below_edge_levels():
    assert prob_capital_below(5, 1, D) == 1
    assert prob_capital_below(5, 2, D) == 1
    assert prob_capital_below(5, -100, D) == 0


def test_cashout_tie_counts():
    # (1 + 1/10)**2 == 1 + 21/100, so two tails land exactly on -gamma
    g, d = F(21, 100), F(1, 10)
    assert prob_cashout_exact(2, g, d) == F(1, 4)
    assert prob_capital_below(2, -g, d, strict=True) == 0
    assert brute_force_prob(2, d, cash_out(2, g)) == F(1, 4)


@pytest.mark.parametrize("k", [1, 5, 12, 16])
def test_corridor_marginal_dominates_absorbed_corridor(k):
    g, d = F(1, 10), F(1, 20)
    bf = BruteForce(k, d)
    stays = bf.prob(StaysBetween(k, -g, 1 - g))
    marginal = corridor_prob_exact(k, g, d)
    assert marginal == bf.prob(CapitalAbove(k, -g) & CapitalBelow(k, 1 - g))
    assert stays <= marginal


def test_brute_force_limits():
    with pytest.raises(BudgetExceededError):
        BruteForce(MAX_BRUTE_FORCE_TOSSES + 1)
    bf = BruteForce(4)
    with pytest.raises(ValueError, match="probability zero"):
        bf.prob(loss(4), cash_out(4))
    with pytest.raises(ValueError):
        bf.counts(loss(5))


def test_brute_force_chunked_enumeration():
    # k = 22 exceeds the in-memory limit and runs in chunks
    bf = BruteForce(22)
    assert bf._held is None
    assert bf.prob(loss(22)) == prob_loss_exact(22)


def test_pascal_sums_to_one():
    for k in range(60):
        assert sum(binomial(k, i) for i in range(k + 1)) == 2**k
    assert sum(math.comb(10, i) for i in range(6, 11)) == 193 * 2
