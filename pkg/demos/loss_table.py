# Exact loss probabilities for the coin-toss game, fair coin, delta = 1/100.
from fractions import Fraction

from cpdo.exact import (
    BruteForce,
    cond_prob_given_loss_at_2,
    loss,
    prob_loss_exact,
    prob_loss_given_early_loss,
    rational_str,
)

# P(x_k < 0) and P(x_k < 0 | x_1 < 0): odd k gives exactly 1/2
for k in range(1, 11):
    print(k, rational_str(prob_loss_exact(k)), rational_str(prob_loss_given_early_loss(k, 1)))

# losing the first two tosses makes the third a sure loss, so the odd
# column given x_2 < 0 is not 1/2
bf = BruteForce(9)
for k in (3, 5, 7, 9):
    print(k, rational_str(cond_prob_given_loss_at_2(k)), rational_str(bf.prob(loss(k), loss(2))))

# the even-k loss probability climbs towards 1/2 only slowly
for k in (10, 100, 398):
    print(k, float(prob_loss_exact(k)))

# a roulette wheel instead of a coin
print(float(prob_loss_exact(101, Fraction(1, 100), Fraction(18, 38))))
