# 1000 CPDO lifetimes with both termination rules, and the bounds they obey.
from cpdo import ModelParams, TerminationRule, run_ensemble
from cpdo.bounds import cash_in_upper_bound, survival_upper_bound
from cpdo.simulator import survival_curve

params = ModelParams()                       # gamma=0.1, delta=0.01, fair coin
rule = TerminationRule.from_params(params, max_tosses=50_000)
rep = run_ensemble(params, rule, n_paths=1000, master_seed=2008, parallelism=4)

print("Cash-Out", rep.proportion_cash_out, "+/-", round(rep.se_cash_out, 3))
print("Cash-In ", rep.proportion_cash_in, "bound", cash_in_upper_bound())
print("still running", rep.count_survived)

# survival against the analytic bound; the small-k bounds exceed 1
for k, alpha in survival_curve(rep.paths, [100, 1000, 10_000, 50_000]):
    print(k, alpha, round(survival_upper_bound(k), 3))

# ruin times cluster early: cumulative share of Cash-Outs by histogram bin
counts = rep.ruin_time_histogram["counts"]
edges = rep.ruin_time_histogram["bin_edges"]
total = 0
for hi, c in zip(edges[1:6], counts[:5]):
    total += c
    print(f"by toss {hi:>6.0f}: {total / rep.count_cash_out:.2f}")

# a stake of 1000 at the start, on average
print(rep.to_dict()["mean_final_stake_display"])
