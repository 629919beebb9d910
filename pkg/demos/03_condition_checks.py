"""Numerical verdicts on the convergence conditions.

Each checker reduces a condition to an improper integral or an infinite
series and classifies it as finite, diverges or inconclusive by watching
contributions over doubling segments. The verdict is a heuristic, so every
result carries the segment contributions that justify it.

Run: python demos/03_condition_checks.py
"""
from phimax.conditions import (
    RateParams,
    check_corollary2,
    check_theorem1,
    check_theorem4,
    improper_integral,
    normalizer_spec,
    theorem3_partial_sum,
)
from phimax.orlicz import make_gaussian_family, make_weibull_conjugate_family
from phimax.tails import gaussian_lower_tail_model, weibull_lower_tail_model

# The engine first. exp(-x^2) integrates to sqrt(pi)/2, 1/x does not integrate.
print(improper_integral(lambda x: 2.718281828 ** (-x * x), 0.0).verdict.value)
v = improper_integral(lambda x: 1 / x, 1.0)
print(v.verdict.value, "after", len(v.segments), "segments")

# Upper part of the normalized maxima: with g = 1 the integral has a closed form 3 / eps^4.
gauss = make_gaussian_family()
for eps in (0.05, 0.5):
    r = check_theorem1(normalizer_spec(gauss), eps)
    print(f"gaussian eps={eps}: {r.verdict.value}, value {r.partial_value:.6g}, closed form {3 / eps**4:.6g}")

# Lower part for the reflected Weibull model with the simplified constant-g conditions.
weib = make_weibull_conjugate_family(9.0, 1.25)
first, second = check_corollary2(weib, weibull_lower_tail_model(9.0, 1.25), 0.5, 2.0)
print("weibull lower-tail conditions:", first.verdict.value, second.verdict.value)

# When the integral is astronomically large but finite, the log value still reports it.
r = check_theorem1(normalizer_spec(gauss), 0.01)
print(f"eps=0.01: {r.verdict.value}, log value {r.log_partial_value:.3f}")

# Rate series sum (mj)^(-alpha - f) over max(m, j) <= N. It stabilizes for alpha > 1 and grows for alpha = 0.
for alpha in (1.5, 0.0):
    sums, verdict = theorem3_partial_sum(RateParams(alpha=alpha, f=1.0), 1024)
    print(f"alpha={alpha}: {verdict.verdict.value}, last partial sums {[round(s, 4) for _, s in sums[-3:]]}")

# The divergence side checks lower-tail growth conditions on a grid.
rep = check_theorem4(gauss, gaussian_lower_tail_model(), 0.1, 0.0)
print("divergence regime shown:", rep.diverges, "threshold", round(rep.threshold, 4))
