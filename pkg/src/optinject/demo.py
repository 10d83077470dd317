"""Synthetic data for demos and test batteries.

The generator is our own construction: ``y`` is seeded Gaussian and
``x = f(y)`` applies a componentwise nonlinearity to a seeded linear
mixture of ``y`` and adds seeded noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decorrelate import InjectionFamily, LiftInjection, PowerInjection
from .ensemble import SampleEnsemble

__all__ = ["NONLINEARITIES", "make_data", "Instance", "make_instance"]

NONLINEARITIES = {
    "tanh": np.tanh,
    "sin": np.sin,
    "cubic": lambda t: t + 0.25 * t ** 3,
}


def make_data(seed: int, m: int, n: int, samples: int,
              nonlinearity: str = "tanh", noise: float = 0.05):
    """Return ``(x, y, params)`` with ``x = f(W y) + noise``.

    ``params`` records everything needed to regenerate the data.
    """
    if min(m, n, samples) < 1:
        raise ValueError("m, n and samples must all be >= 1")
    if nonlinearity not in NONLINEARITIES:
        raise ValueError(f"unknown nonlinearity {nonlinearity!r}; "
                         f"choose from {sorted(NONLINEARITIES)}")
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((n, samples))
    w = rng.standard_normal((m, n)) / np.sqrt(n) * 1.5
    x = NONLINEARITIES[nonlinearity](w @ y) + noise * rng.standard_normal((m, samples))
    params = {
        "generator": "synthetic saturating mixture (not from any dataset)",
        "seed": seed, "m": m, "n": n, "samples": samples,
        "nonlinearity": nonlinearity, "noise": noise,
    }
    return SampleEnsemble(x), SampleEnsemble(y), params


@dataclass(frozen=True, eq=False)
class Instance:
    seed: int
    x: SampleEnsemble
    y: SampleEnsemble
    family: InjectionFamily
    ranks: tuple

    @property
    def v(self) -> list:
        return [self.y] + self.family.apply(self.y)

    def describe(self) -> dict:
        return {"seed": self.seed, "m": self.x.dim, "n": self.y.dim,
                "samples": self.x.n_samples, "injections": self.family.spec,
                "ranks": list(self.ranks)}


def make_instance(seed: int, max_dim: int = 8, max_degree: int = 3) -> Instance:
    """A random desk-scale problem: ``m, n <= max_dim``, ``p <= max_degree``,
    ``N >= 4 * sum(q_j)``, ranks summing to at most ``min(m, n)``."""
    rng = np.random.default_rng([seed, 7919])
    m = int(rng.integers(3, max_dim + 1))
    n = int(rng.integers(3, max_dim + 1))
    p = int(rng.integers(1, min(max_degree, min(m, n) - 1) + 1))
    gens = []
    for j in range(p):
        if j == 0 and rng.random() < 0.5:
            gens.append(PowerInjection(int(rng.integers(2, 4))))
        else:
            gens.append(LiftInjection(int(rng.integers(2, max_dim + 1)),
                                      int(rng.integers(0, 10_000))))
    family = InjectionFamily(tuple(gens))
    qs = [n] + family.dims(n)
    samples = 4 * sum(qs) + int(rng.integers(0, 40))
    budget = int(rng.integers(p + 1, min(m, n) + 1))
    ranks = [1] * (p + 1)
    for _ in range(budget - (p + 1)):
        ranks[int(rng.integers(0, p + 1))] += 1
    nl = ["tanh", "sin", "cubic"][int(rng.integers(0, 3))]
    x, y, _ = make_data(int(rng.integers(0, 2**31)), m, n, samples, nl, noise=0.05)
    return Instance(seed, x, y, family, tuple(ranks))
