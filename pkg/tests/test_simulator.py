import io
import json
import math

import numpy as np
import pytest

from cpdo.model import ModelParams, capital_from_heads, moments
from cpdo.simulator import (
    MartingaleReport,
    Termination,
    TerminationRule,
    empirical_moments,
    empirical_reach,
    empirical_survival,
    free_play_heads,
    martingale_test,
    path_seed,
    run_ensemble,
    run_path,
    simulate_paths,
    summarize,
    survival_curve,
    write_histogram_csv,
    write_paths_csv,
    write_trajectories_csv,
)

DEFAULT = ModelParams()
RULE = TerminationRule.from_params(DEFAULT, max_tosses=50_000)


@pytest.fixture(scope="module")
def ensemble():
    return simulate_paths(DEFAULT, RULE, 300, master_seed=11, trajectory_stride=50)


def test_rule_validation():
    with pytest.raises(ValueError):
        TerminationRule(0.1, 0.9, 10)
    with pytest.raises(ValueError):
        TerminationRule(-0.1, 1.2, 10)
    with pytest.raises(ValueError):
        TerminationRule(-0.1, 0.9, 0)
    assert (RULE.cash_out_level, RULE.max_tosses) == (-0.1, 50_000)
    assert RULE.cash_in_level == pytest.approx(0.9)


def test_corridor_too_narrow_for_one_toss():
    params = ModelParams(gamma=0.5, delta=0.9, cash_in_level=0.1)
    with pytest.raises(ValueError, match="mutually exclusive"):
        run_path(params, TerminationRule.from_params(params, 10), 1)


def smallest_k_with_gap_at_most(factor, gap):
    k, rem = 0, 1.0
    while rem > gap:
        k += 1
        rem *= factor
    return k


def test_all_tails_cashes_out_at_ten():
    r = run_path(ModelParams(p_heads=0.0), RULE, 5)
    assert r.termination is Termination.CASH_OUT
    assert r.tosses_used == 10 and r.n_heads == 0
    assert r.final_x == pytest.approx(1 - 1.01**10)


def test_all_heads_cashes_in():
    r = run_path(ModelParams(p_heads=1.0), RULE, 5)
    assert r.termination is Termination.CASH_IN
    assert r.tosses_used == smallest_k_with_gap_at_most(0.99, 0.1) == 230


def test_all_heads_never_reaches_the_doubling_goal():
    params = ModelParams(p_heads=1.0, cash_in_level=1.0)
    r = run_path(params, TerminationRule(-0.1, 1.0, 10**6), 5)
    assert r.termination is Termination.SURVIVED
    assert r.tosses_used == r.n_heads == 10**6


def test_tie_on_the_barrier_is_cash_out_and_flagged():
    # (1.1)**2 == 1.21: two tails land on -0.21 up to rounding
    params = ModelParams(gamma=0.21, delta=0.1, p_heads=0.0)
    r = run_path(params, TerminationRule.from_params(params, 100), 1)
    assert r.termination is Termination.CASH_OUT
    assert r.tosses_used == 2 and r.near_tie


def test_path_invariants(ensemble):
    overshoot = DEFAULT.gamma + DEFAULT.delta + DEFAULT.gamma * DEFAULT.delta
    for r in ensemble:
        assert 1 <= r.tosses_used <= RULE.max_tosses
        assert 0 <= r.n_heads <= r.tosses_used
        assert r.final_x == pytest.approx(capital_from_heads(r.tosses_used, r.n_heads, 0.01),
                                          abs=1e-12)
        if r.termination is Termination.CASH_OUT:
            assert -overshoot - 1e-12 <= r.final_x <= -DEFAULT.gamma
        elif r.termination is Termination.CASH_IN:
            assert DEFAULT.cash_in_level <= r.final_x < 1
        else:
            assert r.tosses_used == RULE.max_tosses
            assert -DEFAULT.gamma < r.final_x < DEFAULT.cash_in_level


def test_trajectories(ensemble):
    for r in ensemble[:40]:
        ks = [k for k, _ in r.trajectory]
        assert r.trajectory[0] == (0, 0.0)
        assert ks == sorted(ks) and ks[-1] == r.tosses_used
        assert r.trajectory[-1][1] == r.final_x
        assert all(k % 50 == 0 for k in ks[:-1])
        # interior points never sit outside the corridor
        assert all(-0.1 < x < 0.9 for _, x in r.trajectory[1:-1])


def test_direct_products_agree_with_head_counts():
    rule = TerminationRule.from_params(DEFAULT, 10_000)
    for i in range(40):
        a = run_path(DEFAULT, rule, path_seed(3, i))
        b = run_path(DEFAULT, rule, path_seed(3, i), direct_products=True)
        assert (a.termination, a.tosses_used, a.n_heads) == (b.termination, b.tosses_used, b.n_heads)
        assert a.final_x == pytest.approx(b.final_x, abs=1e-10)


def test_same_seed_same_path():
    a = run_path(DEFAULT, RULE, path_seed(9, 4), seed_id=4)
    b = run_path(DEFAULT, RULE, path_seed(9, 4), seed_id=4)
    assert a == b
    assert a.seed_id == 4


def test_parallel_runs_are_identical():
    a = run_ensemble(DEFAULT, RULE, 200, 21, parallelism=1)
    b = run_ensemble(DEFAULT, RULE, 200, 21, parallelism=4)
    assert a.to_json() == b.to_json()
    c = run_ensemble(DEFAULT, RULE, 200, 22, parallelism=1)
    assert a.to_json() != c.to_json()


def test_report_bookkeeping(ensemble):
    rep = summarize(ensemble, DEFAULT, RULE, 11)
    assert rep.count_cash_out + rep.count_cash_in + rep.count_survived == 300
    assert rep.proportion_cash_out == rep.count_cash_out / 300
    assert rep.se_cash_out == pytest.approx(
        math.sqrt(rep.proportion_cash_out * (1 - rep.proportion_cash_out) / 300))
    assert sum(rep.ruin_time_histogram["counts"]) == rep.count_cash_out
    assert sum(rep.cash_in_time_histogram["counts"]) == rep.count_cash_in
    assert sum(rep.final_x_histogram["counts"]) == 300
    d = json.loads(rep.to_json())
    assert d["mean_final_stake_display"] == pytest.approx(1000 * (1 + rep.mean_final_x))
    assert "paths" not in d


def test_survival_curve(ensemble):
    curve = survival_curve(ensemble, [0, 9, 100, 1000, 10_000, 50_000])
    # nothing can terminate before the tenth toss
    assert curve[:2] == [(0, 1.0), (9, 1.0)]
    props = [p for _, p in curve]
    assert all(a >= b for a, b in zip(props, props[1:]))
    survived = sum(r.termination is Termination.SURVIVED for r in ensemble) / len(ensemble)
    assert props[-1] == survived


def test_empirical_survival_checks_range():
    with pytest.raises(ValueError):
        empirical_survival(DEFAULT, TerminationRule.from_params(DEFAULT, 100), [200], 10, 1)
    out = empirical_survival(DEFAULT, TerminationRule.from_params(DEFAULT, 100), [100, 5], 10, 1)
    assert [k for k, _ in out] == [5, 100]


def test_biased_coin_cashes_in_less():
    rule = TerminationRule.from_params(DEFAULT, 20_000)
    fair = run_ensemble(DEFAULT, rule, 400, 5)
    roulette = run_ensemble(ModelParams(p_heads=18 / 38), rule, 400, 5)
    assert roulette.proportion_cash_in < fair.proportion_cash_in
    assert roulette.proportion_cash_out > 0.97


def test_free_play_heads_chunking_is_stream_consistent():
    a = free_play_heads(100, 1000, 0.5, np.random.default_rng(1), max_cells=10**9)
    b = free_play_heads(100, 1000, 0.5, np.random.default_rng(1), max_cells=1000)
    assert np.array_equal(a, b)
    heads, last = free_play_heads(5, 100, 1.0, np.random.default_rng(1), last_toss=True)
    assert np.all(heads == 4) and np.all(last == 1)


def test_moments_small_k():
    zero = empirical_moments(DEFAULT, 0, 100, 1)
    assert (zero.mean, zero.variance, zero.se_mean) == (0.0, 0.0, 0.0)
    est = empirical_moments(DEFAULT, 1, 100_000, 1)
    assert abs(est.mean) <= 4 * est.se_mean
    assert est.variance == pytest.approx(moments(1, 0.01)[1], rel=0.02)


def test_reach_fraction():
    frac, se = empirical_reach(ModelParams(p_heads=1.0), 230, 0.9, 50, 1)
    assert (frac, se) == (1.0, 0.0)
    frac, _ = empirical_reach(DEFAULT, 10, 0.5, 1000, 1)
    assert frac == 0.0


def test_martingale_fair_and_biased():
    fair = martingale_test(DEFAULT, 10, 100_000, 2)
    assert isinstance(fair, MartingaleReport) and fair.passed
    assert len(fair.groups) == 10 and sum(g["count"] for g in fair.groups) == 100_000
    lows = [g["x_low"] for g in fair.groups]
    assert lows == sorted(lows)
    biased = martingale_test(ModelParams(p_heads=0.6), 10, 100_000, 2)
    assert not biased.passed
    assert all(g["mean_increment"] > 0 for g in biased.groups)
    with pytest.raises(ValueError):
        martingale_test(DEFAULT, 0, 10, 1)


def test_csv_writers(ensemble):
    buf = io.StringIO()
    write_paths_csv(ensemble[:3], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "path_id,termination,tosses_used,final_x,n_heads"
    assert len(lines) == 4
    buf = io.StringIO()
    write_trajectories_csv(ensemble[:2], buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "path_id,k,x" and rows[1] == "0,0,0.0"
    buf = io.StringIO()
    write_histogram_csv({"bin_edges": [0.0, 1.0, 2.0], "counts": [3, 4]}, buf)
    assert buf.getvalue() == "bin_low,bin_high,count\n0.0,1.0,3\n1.0,2.0,4\n"
