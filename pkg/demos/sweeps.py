"""
Error against rank and lift size
================================

Sweep the rank of the first block, then the size of the last random lift,
and print the error table.
"""

import warnings

from optinject.decorrelate import InjectionFamily, LiftInjection, PowerInjection, decorrelate
from optinject.demo import make_data
from optinject.estimator import empirical_error, fit_rank_constrained

x, y, _ = make_data(seed=8, m=7, n=5, samples=500, nonlinearity="cubic")


def error(family, ranks):
    sys = decorrelate([y] + family.apply(y))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return empirical_error(x, fit_rank_constrained(x, sys, ranks), sys)


# %%
fam = InjectionFamily((PowerInjection(2), LiftInjection(4, 11)))
# total rank stays within min(m, n) = 5
print(" r_0  error")
for r in range(1, 4):
    print(f"{r:4d}  {error(fam, (r, 1, 1)):.8f}")

# %%
print("\n   q  error")
for q in range(1, 9):
    fam = InjectionFamily((PowerInjection(2), LiftInjection(q, 11)))
    print(f"{q:4d}  {error(fam, (2, 1, 1)):.8f}")
