"""Exact, asymptotic and Monte Carlo analysis of the CPDO coin-toss game."""

from .asymptotics import (
    ApproxResult,
    DriftParams,
    cashout_peak,
    drift_params,
    horizon_for_confidence,
    normal_cdf,
    prob_cashout_approx,
    prob_reach_approx,
)
from .bounds import (
    BoundReport,
    binomial_max_bound,
    cash_in_upper_bound,
    corridor_width_beta,
    survival_upper_bound,
)
from .exact import (
    BruteForce,
    ThresholdQuery,
    binomial,
    brute_force_prob,
    cond_prob_given_loss_at_1,
    cond_prob_given_loss_at_2,
    cond_prob_successive,
    golden_ratio_bound,
    prob_loss_closed,
    prob_loss_exact,
    threshold_index,
)
from .model import (
    HEADS,
    TAILS,
    ModelParams,
    NetCapitalState,
    capital_from_heads,
    closed_form,
    moments,
    step,
    two_headed_capital,
    two_tailed_cashout_toss,
)
from .simulator import (
    EnsembleReport,
    PathRecord,
    Termination,
    TerminationRule,
    empirical_moments,
    empirical_survival,
    martingale_test,
    run_ensemble,
    run_path,
)

__version__ = "0.1.0"
