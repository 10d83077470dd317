"""
Fitting a rank-constrained nonlinear filter
===========================================

Build a small synthetic problem, decorrelate the injections, fit the
filter block by block and compare the closed-form error with the error
measured on the samples.
"""

import numpy as np

from optinject.decorrelate import check_pairwise_uncorrelated, decorrelate, parse_family
from optinject.demo import make_data
from optinject.estimator import (
    empirical_error,
    fit_full_rank,
    fit_rank_constrained,
    predicted_error_full,
    predicted_error_rank,
)

np.set_printoptions(precision=4, suppress=True)

# %%
# x depends on y through a tanh of a random mixture, plus a little noise
x, y, params = make_data(seed=3, m=6, n=5, samples=400)
print("x:", x.dim, "x", x.n_samples, " y:", y.dim, "x", y.n_samples)

# %%
# injections: y itself, its squares, then a random 4-dim lift
family = parse_family("poly:2,lift:4:7")
v = [y] + family.apply(y)
sys = decorrelate(v)
ok, rep = check_pairwise_uncorrelated(sys, 1e-9)
print("pairwise uncorrelated:", ok, "worst relative moment", rep.relative)

# %%
ranks = (2, 1, 1)
est = fit_rank_constrained(x, sys, ranks)
for j, (g, h) in enumerate(est.blocks):
    print(f"block {j}: G {g.shape}, H {h.shape}")

# %%
# the closed form and the sample error agree to rounding
print("rank-constrained  predicted %.12f  measured %.12f"
      % (predicted_error_rank(x, sys, ranks), empirical_error(x, est, sys)))
full = fit_full_rank(x, sys)
print("full rank         predicted %.12f  measured %.12f"
      % (predicted_error_full(x, sys), empirical_error(x, full, sys)))

# %%
# more injections never hurt: drop the lift and then the squares
for k in range(sys.degree, -1, -1):
    sub = sys.truncate(k)
    print("degree", k, "error", empirical_error(x, fit_rank_constrained(x, sub, ranks[:k + 1]), sub))
