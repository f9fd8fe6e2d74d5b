"""Monte Carlo engine for CPDO lifetimes.

Each path of an ensemble draws from its own PCG64 substream, derived from
``SeedSequence(master_seed, spawn_key=(i,))``, so a report depends only on
``(params, rule, n_paths, master_seed)`` and not on how paths were spread
over workers.  Path state is ``(k, n_heads)``; capital is recomputed from it
in log domain at every toss, so 50,000 tosses do not accumulate rounding.

The free-play helpers (``empirical_moments``, ``martingale_test``,
``empirical_reach``) play without any termination rule and use one stream
per call.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .model import ModelParams

logger = logging.getLogger(__name__)

NEAR_TIE = 1e-12
STAKE_DISPLAY_SCALE = 1000.0
_FIRST_BLOCK = 1024
_MAX_BLOCK = 65536


class Termination(str, Enum):
    CASH_OUT = "CashOut"
    CASH_IN = "CashIn"
    SURVIVED = "Survived"


@dataclass(frozen=True)
class TerminationRule:
    cash_out_level: float
    cash_in_level: float
    max_tosses: int

    def __post_init__(self):
        if not self.cash_out_level < 0 < self.cash_in_level:
            raise ValueError("need cash_out_level < 0 < cash_in_level")
        if self.cash_in_level > 1:
            raise ValueError("cash_in_level must be <= 1")
        if self.max_tosses < 1:
            raise ValueError("max_tosses must be positive")

    @classmethod
    def from_params(cls, params: ModelParams, max_tosses: int = 50_000) -> "TerminationRule":
        return cls(-params.gamma, params.cash_in_level, max_tosses)


@dataclass
class PathRecord:
    seed_id: int
    termination: Termination
    tosses_used: int
    final_x: float
    n_heads: int
    trajectory: Optional[list] = None
    near_tie: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["termination"] = self.termination.value
        if self.trajectory is None:
            del out["trajectory"]
        else:
            out["trajectory"] = [[int(k), float(x)] for k, x in self.trajectory]
        return out


def _rng(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def path_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def _check_exclusive(params: ModelParams, rule: TerminationRule) -> None:
    # largest single move from inside the corridor is delta * (1 - cash_out_level)
    if params.delta * (1 - rule.cash_out_level) >= rule.cash_in_level - rule.cash_out_level:
        raise ValueError(
            "one toss could jump across the whole corridor; Cash-Out and "
            "Cash-In would not be mutually exclusive"
        )


def run_path(
    params: ModelParams,
    rule: TerminationRule,
    seed,
    *,
    seed_id: Optional[int] = None,
    trajectory_stride: Optional[int] = None,
    direct_products: bool = False,
) -> PathRecord:
    """Play one game until Cash-Out, Cash-In or ``rule.max_tosses``.

    After each toss Cash-Out (``x <= cash_out_level``) is checked before
    Cash-In (``x >= cash_in_level``).  Capital within 1e-12 of either level
    marks the record as a near tie.  ``direct_products=True`` carries the
    running product instead of the head count; it exists to cross-check the
    log-domain path and drifts over long games.
    """
    _check_exclusive(params, rule)
    if trajectory_stride is not None and trajectory_stride < 1:
        raise ValueError("trajectory_stride must be positive")
    rng = _rng(seed)
    delta, p = params.delta, params.p_heads
    lp, lm = math.log1p(delta), math.log1p(-delta)
    co, ci = rule.cash_out_level, rule.cash_in_level
    # thresholds on log(1 - x): same ordering as x, but x itself rounds to
    # 1.0 on long winning runs while its log stays finite
    log_co = math.log1p(-co)
    log_ci = math.log1p(-ci) if ci < 1 else -math.inf

    trajectory = [(0, 0.0)] if trajectory_stride else None
    near_tie = False
    done = heads = 0
    remaining = 1.0
    block = _FIRST_BLOCK
    while done < rule.max_tosses:
        n = min(block, rule.max_tosses - done)
        block = min(2 * block, _MAX_BLOCK)
        toss_heads = rng.random(n) < p
        ks = np.arange(done + 1, done + n + 1)
        cum = heads + np.cumsum(toss_heads)
        if direct_products:
            factors = np.where(toss_heads, 1 - delta, 1 + delta)
            prods = remaining * np.cumprod(factors)
            log_rem = np.log(prods)
            x = 1 - prods
        else:
            log_rem = ks * lp + cum * (lm - lp)
            x = -np.expm1(log_rem)
        out = log_rem >= log_co
        hit = out | (log_rem <= log_ci)
        stop = int(np.argmax(hit)) if hit.any() else n - 1
        seen = x[: stop + 1]
        if np.any(np.minimum(np.abs(seen - co), np.abs(seen - ci)) < NEAR_TIE):
            near_tie = True
            logger.debug("near tie on path %s around toss %d", seed_id, done + stop + 1)
        if trajectory is not None:
            sel = ks[: stop + 1] % trajectory_stride == 0
            trajectory.extend(zip(ks[: stop + 1][sel].tolist(), seen[sel].tolist()))
        if hit.any():
            k, xf, nh = int(ks[stop]), float(x[stop]), int(cum[stop])
            kind = Termination.CASH_OUT if out[stop] else Termination.CASH_IN
            if trajectory is not None and trajectory[-1][0] != k:
                trajectory.append((k, xf))
            return PathRecord(seed_id if seed_id is not None else -1, kind, k, xf, nh,
                              trajectory, near_tie)
        done += n
        heads = int(cum[-1])
        if direct_products:
            remaining = float(prods[-1])
    xf = float(x[-1])
    if trajectory is not None and trajectory[-1][0] != done:
        trajectory.append((done, xf))
    return PathRecord(seed_id if seed_id is not None else -1, Termination.SURVIVED, done,
                      xf, heads, trajectory, near_tie)


def simulate_paths(
    params: ModelParams,
    rule: TerminationRule,
    n_paths: int,
    master_seed: int,
    parallelism: int = 1,
    trajectory_stride: Optional[int] = None,
) -> list[PathRecord]:
    """Run ``n_paths`` independent games; the result is ordered by path index."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if parallelism < 1:
        raise ValueError("parallelism must be positive")
    _check_exclusive(params, rule)

    def one(i):
        return run_path(params, rule, path_seed(master_seed, i), seed_id=i,
                        trajectory_stride=trajectory_stride)

    out: list[PathRecord] = []
    tenth = max(1, n_paths // 10)
    if parallelism == 1:
        for i in range(n_paths):
            out.append(one(i))
            if (i + 1) % tenth == 0:
                logger.info("simulated %d/%d paths", i + 1, n_paths)
        return out
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        for i, rec in enumerate(pool.map(one, range(n_paths), chunksize=1)):
            out.append(rec)
            if (i + 1) % tenth == 0:
                logger.info("simulated %d/%d paths", i + 1, n_paths)
    return out


def _histogram(values: np.ndarray, max_tosses: int, bins: int) -> dict:
    edges = np.linspace(0, max_tosses, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


@dataclass
class EnsembleReport:
    n_paths: int
    master_seed: int
    params: dict
    rule: dict
    count_cash_out: int
    count_cash_in: int
    count_survived: int
    proportion_cash_out: float
    proportion_cash_in: float
    proportion_survived: float
    se_cash_out: float
    se_cash_in: float
    se_survived: float
    mean_final_x: float
    var_final_x: float
    mean_tosses: float
    ruin_time_histogram: dict
    cash_in_time_histogram: dict
    final_x_histogram: dict
    near_ties: int
    stake_display_scale: float = STAKE_DISPLAY_SCALE
    paths: Optional[list] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "paths"}
        out["mean_final_stake_display"] = (1 + self.mean_final_x) * self.stake_display_scale
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def summarize(
    paths: Sequence[PathRecord],
    params: ModelParams,
    rule: TerminationRule,
    master_seed: int,
    bins: int = 50,
) -> EnsembleReport:
    """Aggregate path records in index order into an :class:`EnsembleReport`."""
    n = len(paths)
    kinds = [p.termination for p in paths]
    counts = {t: kinds.count(t) for t in Termination}
    final_x = np.array([p.final_x for p in paths])
    tosses = np.array([p.tosses_used for p in paths])

    def prop(t):
        return counts[t] / n

    def se(t):
        q = prop(t)
        return math.sqrt(q * (1 - q) / n)

    is_out = np.array([t is Termination.CASH_OUT for t in kinds])
    is_in = np.array([t is Termination.CASH_IN for t in kinds])
    lo = min(rule.cash_out_level - params.delta * (1 - rule.cash_out_level), -params.gamma)
    x_edges = np.linspace(lo, 1.0, 51)
    x_counts, _ = np.histogram(final_x, bins=x_edges)
    return EnsembleReport(
        n_paths=n,
        master_seed=master_seed,
        params=asdict(params),
        rule=asdict(rule),
        count_cash_out=counts[Termination.CASH_OUT],
        count_cash_in=counts[Termination.CASH_IN],
        count_survived=counts[Termination.SURVIVED],
        proportion_cash_out=prop(Termination.CASH_OUT),
        proportion_cash_in=prop(Termination.CASH_IN),
        proportion_survived=prop(Termination.SURVIVED),
        se_cash_out=se(Termination.CASH_OUT),
        se_cash_in=se(Termination.CASH_IN),
        se_survived=se(Termination.SURVIVED),
        mean_final_x=float(final_x.mean()),
        var_final_x=float(final_x.var(ddof=1)) if n > 1 else 0.0,
        mean_tosses=float(tosses.mean()),
        ruin_time_histogram=_histogram(tosses[is_out], rule.max_tosses, bins),
        cash_in_time_histogram=_histogram(tosses[is_in], rule.max_tosses, bins),
        final_x_histogram={"bin_edges": [float(e) for e in x_edges],
                           "counts": [int(c) for c in x_counts]},
        near_ties=sum(p.near_tie for p in paths),
        paths=list(paths),
    )


def run_ensemble(
    params: ModelParams,
    rule: TerminationRule,
    n_paths: int,
    master_seed: int,
    parallelism: int = 1,
    trajectory_stride: Optional[int] = None,
) -> EnsembleReport:
    paths = simulate_paths(params, rule, n_paths, master_seed, parallelism, trajectory_stride)
    return summarize(paths, params, rule, master_seed)


def survival_curve(paths: Sequence[PathRecord], checkpoints: Iterable[int]) -> list[tuple[int, float]]:
    """Fraction of paths not yet terminated after each checkpoint toss."""
    end = np.array(
        [math.inf if p.termination is Termination.SURVIVED else p.tosses_used for p in paths]
    )
    return [(int(k), float(np.mean(end > k))) for k in checkpoints]


def empirical_survival(
    params: ModelParams,
    rule: TerminationRule,
    k_checkpoints: Sequence[int],
    n_paths: int,
    master_seed: int,
    parallelism: int = 1,
) -> list[tuple[int, float]]:
    if any(k < 0 or k > rule.max_tosses for k in k_checkpoints):
        raise ValueError("checkpoints must lie in [0, max_tosses]")
    paths = simulate_paths(params, rule, n_paths, master_seed, parallelism)
    return survival_curve(paths, sorted(k_checkpoints))


# ---------------------------------------------------------------------------
# free play


def free_play_heads(
    k: int, n_paths: int, p_heads: float, rng: np.random.Generator, last_toss: bool = False,
    max_cells: int = 2**23,
):
    """Head counts after ``k`` free-play tosses for each of ``n_paths`` paths.

    With ``last_toss=True`` returns ``(N_{k-1}, C_k)`` instead.
    """
    rows = max(1, max_cells // max(k, 1))
    parts, lasts = [], []
    for start in range(0, n_paths, rows):
        m = min(rows, n_paths - start)
        h = rng.random((m, k)) < p_heads
        if last_toss:
            parts.append(np.count_nonzero(h[:, :-1], axis=1))
            lasts.append(np.where(h[:, -1], 1, -1))
        else:
            parts.append(np.count_nonzero(h, axis=1))
    heads = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    if last_toss:
        return heads, np.concatenate(lasts)
    return heads


def capital_array(k, heads, delta: float) -> np.ndarray:
    lp, lm = math.log1p(delta), math.log1p(-delta)
    return -np.expm1(np.asarray(k) * lp + np.asarray(heads) * (lm - lp))


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    variance: float
    se_mean: float


def empirical_moments(params: ModelParams, k: int, n_paths: int, master_seed: int) -> MomentEstimate:
    """Sample mean and variance of ``x_k`` over independent free-play paths."""
    if k == 0:
        return MomentEstimate(0.0, 0.0, 0.0)
    heads = free_play_heads(k, n_paths, params.p_heads, _rng(master_seed))
    x = capital_array(k, heads, params.delta)
    var = float(x.var(ddof=1))
    return MomentEstimate(float(x.mean()), var, math.sqrt(var / n_paths))


def empirical_reach(
    params: ModelParams, k: int, level: float, n_paths: int, master_seed: int
) -> tuple[float, float]:
    """Fraction of free-play paths with ``x_k >= level``, and its standard error."""
    heads = free_play_heads(k, n_paths, params.p_heads, _rng(master_seed))
    frac = float(np.mean(capital_array(k, heads, params.delta) >= level))
    return frac, math.sqrt(frac * (1 - frac) / n_paths)


@dataclass
class MartingaleReport:
    k: int
    n_paths: int
    groups: list
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def martingale_test(
    params: ModelParams,
    k: int,
    n_paths: int,
    master_seed: int,
    n_groups: int = 10,
    n_se: float = 3.0,
) -> MartingaleReport:
    """Check that ``x_k - x_{k-1}`` has mean zero within each decile of ``x_{k-1}``.

    Paths are ranked by ``x_{k-1}`` and split into ``n_groups`` equal-size
    groups; the test passes when every group mean is within ``n_se``
    standard errors of zero.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    heads, last = free_play_heads(k, n_paths, params.p_heads, _rng(master_seed), last_toss=True)
    x_prev = capital_array(k - 1, heads, params.delta)
    incr = params.delta * (1 - x_prev) * last
    order = np.argsort(x_prev, kind="stable")
    groups = []
    passed = True
    for idx in np.array_split(order, n_groups):
        d = incr[idx]
        mean = float(d.mean())
        se = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else 0.0
        ok = abs(mean) <= n_se * se
        passed &= ok
        groups.append({
            "x_low": float(x_prev[idx].min()),
            "x_high": float(x_prev[idx].max()),
            "count": int(len(d)),
            "mean_increment": mean,
            "se": se,
            "passed": bool(ok),
        })
    return MartingaleReport(k, n_paths, groups, bool(passed))


# ---------------------------------------------------------------------------
# data files


def write_trajectories_csv(paths: Iterable[PathRecord], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path_id", "k", "x"])
    for p in paths:
        for k, x in p.trajectory or ():
            w.writerow([p.seed_id, k, repr(float(x))])


def write_paths_csv(paths: Iterable[PathRecord], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path_id", "termination", "tosses_used", "final_x", "n_heads"])
    for p in paths:
        w.writerow([p.seed_id, p.termination.value, p.tosses_used, repr(p.final_x), p.n_heads])


def write_histogram_csv(hist: dict, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bin_low", "bin_high", "count"])
    edges, counts = hist["bin_edges"], hist["counts"]
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        w.writerow([lo, hi, c])
