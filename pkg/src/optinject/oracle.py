"""Independent second routes to the quantities the estimators produce.

Nothing here is used by the fitting code. Each function recomputes a
result along a different path (truncated SVD instead of eigenvectors,
explicit loops instead of matrix products, random search instead of a
closed form, normal equations instead of a pseudo-inverse) so that tests
and the ``verify`` command can compare the two.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .ensemble import as_ensemble, estimate_cov
from .estimator import Estimator, FullRankEstimator, empirical_error
from .linalg_core import default_tol, sqrt_pinv, truncated_svd

__all__ = [
    "OracleReport",
    "compare",
    "oracle_rank_solution",
    "oracle_full_solution",
    "naive_objective",
    "perturbation_sweep",
    "z_perturbation_sweep",
    "fredholm_lstsq",
]


@dataclass(frozen=True)
class OracleReport:
    """One primary-vs-oracle comparison."""

    name: str
    primary: float
    oracle: float
    abs_gap: float
    rel_gap: float
    tol: float
    passed: bool
    instance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def compare(name: str, primary: float, oracle: float, tol: float,
            instance: dict | None = None) -> OracleReport:
    """Agreement check: passes when ``|p - o| <= tol * max(1, |o|)``."""
    gap = abs(primary - oracle)
    rel = gap / max(1.0, abs(oracle))
    return OracleReport(name, float(primary), float(oracle), gap, rel, tol,
                        bool(rel <= tol), instance or {})


def oracle_rank_solution(x, z_j, r_j: int, floor: float = 0.0) -> np.ndarray:
    """``[A]_{r} (E_zz^{1/2})^+`` with ``A = E_xz (E_zz^{1/2})^+``.

    The same product as the eigenvector-form block ``G H`` but reached
    through a truncated SVD of ``A``.
    """
    e_zz = estimate_cov(z_j, z_j)
    root = sqrt_pinv(e_zz, floor=floor)
    a = estimate_cov(x, z_j) @ root
    return truncated_svd(a, r_j) @ root


def oracle_full_solution(x, z_j, floor: float = 0.0) -> np.ndarray:
    """``A (E_zz^{1/2})^+``, equal to ``E_xz E_zz^+``."""
    root = sqrt_pinv(estimate_cov(z_j, z_j), floor=floor)
    return estimate_cov(x, z_j) @ root @ root


def naive_objective(x, blocks, z) -> float:
    """``(1/N) sum_k ||x_k - sum_j G_j (H_j z_{j,k})||^2`` by explicit loops.

    ``blocks`` holds ``(G, H)`` pairs or single full-rank matrices.
    """
    x = as_ensemble(x)
    zs = [as_ensemble(e) for e in z]
    total = []
    for k in range(x.n_samples):
        resid = x.samples[:, k].copy()
        for blk, zj in zip(blocks, zs):
            col = zj.samples[:, k]
            if isinstance(blk, tuple):
                g, h = blk
                resid -= g @ (h @ col)
            else:
                resid -= blk @ col
        total.append(math.fsum(float(r) * float(r) for r in resid))
    return math.fsum(total) / x.n_samples


def _bump(a: np.ndarray, magnitude: float, rng) -> np.ndarray:
    d = rng.standard_normal(a.shape)
    nd = np.linalg.norm(d)
    scale = magnitude * max(np.linalg.norm(a), 1.0)
    return a + (scale / nd) * d if nd > 0 else a


def perturbation_sweep(x, sys, est, count: int = 1000, magnitude: float = 1e-2,
                       seed: int = 0, slack: float = 1e-12) -> OracleReport:
    """Random search around a fitted estimator.

    Each candidate perturbs every factor (``G_j``, ``H_j``, or ``P_j``) by a
    random direction of norm ``magnitude * max(||factor||, 1)``, which keeps
    every block inside its rank class. The verdict passes when the fitted
    error is no larger than the best candidate (up to ``slack`` relative).
    ``oracle`` in the report is that best candidate value.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    primary = empirical_error(x, est, sys)
    best = math.inf
    for c in range(count):
        rng = np.random.default_rng([seed, c])
        if isinstance(est, FullRankEstimator):
            cand = FullRankEstimator([_bump(p, magnitude, rng) for p in est.blocks])
        else:
            cand = Estimator([(_bump(g, magnitude, rng), _bump(h, magnitude, rng))
                              for g, h in est.blocks])
        best = min(best, empirical_error(x, cand, sys))
    gap = best - primary
    passed = primary <= best + slack * max(1.0, abs(primary))
    return OracleReport("perturbation_sweep", primary, best, abs(gap),
                        abs(gap) / max(1.0, abs(best)), slack, bool(passed),
                        {"count": count, "magnitude": magnitude, "seed": seed})


def z_perturbation_sweep(x, est, z, count: int = 100, magnitude: float = 1e-2,
                         seed: int = 0, blocks=None, slack: float = 1e-12) -> OracleReport:
    """Random per-column perturbations of ``z_1 .. z_p`` (``z_0`` fixed).

    The objective is the full ``||x - sum_j S_j z_j||^2``, or, when
    ``blocks`` names a single index ``j``, the one-block objective
    ``||x - S_j z_j||^2``.
    """
    x = as_ensemble(x)
    zs = [as_ensemble(e).samples for e in z]
    prods = est.products()

    def objective(cols):
        if blocks is not None:
            r = x.samples - prods[blocks] @ cols[blocks]
        else:
            r = x.samples - sum(s @ c for s, c in zip(prods, cols))
        return float(np.sum(r * r) / x.n_samples)

    primary = objective(zs)
    best = math.inf
    for c in range(count):
        rng = np.random.default_rng([seed, c])
        cand = [zs[0]]
        for zj in zs[1:]:
            d = rng.standard_normal(zj.shape)
            norms = np.maximum(np.linalg.norm(zj, axis=0), 1.0)
            d *= magnitude * norms / np.maximum(np.linalg.norm(d, axis=0), 1e-300)
            cand.append(zj + d)
        best = min(best, objective(cand))
    gap = best - primary
    passed = primary <= best + slack * max(1.0, abs(primary))
    return OracleReport("z_perturbation_sweep", primary, best, abs(gap),
                        abs(gap) / max(1.0, abs(best)), slack, bool(passed),
                        {"count": count, "magnitude": magnitude, "seed": seed})


def fredholm_lstsq(b: np.ndarray, a: np.ndarray, atol: float | None = None) -> np.ndarray:
    """Minimum-norm least-squares ``C`` for ``C (I - A) = B`` through the
    normal equations ``(M M^T) C^T = M B^T``, ``M = I - A``.

    Singular values of ``M`` at or below ``atol`` are treated as zero
    (default ``max(1, ||A||_2) * 1e-10``, the same cut the primary solver
    uses, applied to the squared values of ``M M^T``), or below the rounding
    level of ``M M^T`` itself.
    """
    m = np.eye(a.shape[0]) - a
    if atol is None:
        atol = max(1.0, float(np.linalg.norm(a, 2)) if a.size else 0.0) * 1e-10
    mm = m @ m.T
    top = float(np.linalg.norm(mm, 2)) if mm.size else 0.0
    if top <= atol * atol:
        return np.zeros_like(b, dtype=np.float64)
    # squaring leaves rounding residue near eps * ||M M^T||, so never cut below that
    cond = max(atol * atol / top, default_tol(mm.shape))
    sol, *_ = scipy.linalg.lstsq(mm, m @ b.T, cond=cond, lapack_driver="gelsd")
    return sol.T
