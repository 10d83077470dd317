"""
Refining the injections
=======================

Alternate between re-solving for the decorrelated signals and refitting
the filter blocks. The error trace never goes up.
"""

import warnings

from optinject.decorrelate import parse_family
from optinject.demo import make_data
from optinject.injection_opt import B_MODES, iterate

x, y, _ = make_data(seed=5, m=6, n=5, samples=300, nonlinearity="sin")
family = parse_family("poly:2,lift:3:1")
ranks = (2, 1, 1)

# %%
for b_mode in B_MODES:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = iterate(x, y, family, ranks, delta=None, max_iter=8, b_mode=b_mode)
    print(f"\n{b_mode}: start {res.trace.eps_initial:.6f}")
    for r in res.trace.records:
        print(f"  loop {r.i}: eps_z {r.eps_z:.6f}  eps_gh {r.eps_gh:.6f}  -> {r.branch}")
    eps = res.trace.eps
    print("  non-increasing:", all(b <= a + 1e-10 for a, b in zip(eps, eps[1:])))

# %%
# the per-block update takes a different path and carries no monotone guarantee
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    res = iterate(x, y, family, ranks, delta=None, max_iter=8, z_update="blockwise")
print("\nblockwise eps:", [round(e, 6) for e in res.trace.eps])
