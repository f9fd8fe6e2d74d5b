# How long does a lender have to wait for net capital to reach 0.9?
import math

from cpdo import ModelParams
from cpdo.asymptotics import cashout_peak, horizon_for_confidence, prob_cashout_approx, \
    prob_reach_approx
from cpdo.simulator import empirical_reach

# free-play chance of sitting at or below -gamma after k tosses
for k in (25, 500, 1906, 10_000, 100_000):
    print(k, f"{100 * prob_cashout_approx(k).probability:.2f}%")

k_star, p_star = cashout_peak()
print("worst toss", k_star, round(p_star, 4))   # about ln(1.1)/|mu|

# tosses needed for P(x_k >= 0.9) to reach a given confidence
for conf in (0.5, 0.9, 0.95):
    k = horizon_for_confidence(0.9, conf)
    print(conf, k, f"{k / 2:,.0f} years at two tosses a year")

# the often-quoted 108,218 falls short of 95%
print(prob_reach_approx(108_218, 0.9).probability)

# Monte Carlo agrees with the normal approximation, not with 95%
frac, se = empirical_reach(ModelParams(), 108_218, 0.9, 2000, master_seed=1)
print(frac, "+/-", round(3 * se, 4))
print(math.log(0.1) / (0.5 * math.log1p(-1e-4)))   # median horizon, z = 0
