"""Alternating refinement of the injections.

Starting from the closed-form fit on the decorrelated family, each loop

1. re-decorrelates the current injections (skipped on the first loop),
2. re-solves for the vectors ``z_1 .. z_p`` with the blocks held fixed,
3. recovers injections ``v_j`` that the decorrelation maps back onto the
   new ``z_j`` (a finite Fredholm equation of the second kind),
4. refits blocks ``1 .. p`` on the decorrelated family (block 0 stays at
   its initial value),
5. keeps whichever of the two candidate states has the smaller error.

Each candidate is a coordinate-wise minimizer started from the current
state, so the kept error never increases.
"""

from __future__ import annotations

import csv
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decorrelate import (
    DecorrelatedSystem,
    InjectionFamily,
    check_pairwise_uncorrelated,
    decorrelate,
)
from .ensemble import SampleEnsemble, as_ensemble, estimate_cov
from .estimator import (
    Estimator,
    NumericalError,
    RankProfile,
    empirical_error,
    fit_full_rank,
    fit_rank_constrained,
    predict,
)
from .linalg_core import numerical_rank, pinv, psd_pinv, svd

__all__ = [
    "B_MODES",
    "Z_MODES",
    "FredholmSystem",
    "IterationRecord",
    "IterationState",
    "IterationTrace",
    "IterationResult",
    "optimal_z_update",
    "solve_fredholm",
    "recover_injection",
    "refit_blocks",
    "iterate",
]

logger = logging.getLogger(__name__)

B_MODES = ("direct", "fullrank-init")
Z_MODES = ("joint", "blockwise")
# I - A is inverted directly only below this condition number
COND_LIMIT = 1e10


def _is_zero(s: np.ndarray) -> bool:
    return not np.any(s)


def optimal_z_update(x, est: Estimator, y, mode: str = "joint",
                     previous: Sequence | None = None) -> list[SampleEnsemble]:
    """New ``z_1 .. z_p`` for fixed blocks; ``z_0`` stays ``y``.

    ``mode="joint"`` solves, sample by sample, the minimum-norm least-squares
    problem ``min ||x - S_0 y - sum_{k>=1} S_k z_k||`` over all ``z_k`` at
    once. ``mode="blockwise"`` uses ``z_j = S_j^+ x`` for each block
    separately; the two agree when the column spaces of the blocks are
    mutually orthogonal.

    Blocks that are exactly zero are skipped and keep their entry from
    ``previous`` (or a zero ensemble when none is given).
    """
    x = as_ensemble(x)
    y = as_ensemble(y)
    if mode not in Z_MODES:
        raise ValueError(f"z-update mode must be one of {Z_MODES}, got {mode!r}")
    prods = est.products()
    n_samples = x.n_samples
    out = [y]
    active = [j for j in range(1, len(prods)) if not _is_zero(prods[j])]
    fresh = {}
    if mode == "blockwise":
        for j in active:
            fresh[j] = pinv(prods[j]) @ x.samples
    elif active:
        stacked = np.hstack([prods[j] for j in active])
        sol = pinv(stacked) @ (x.samples - prods[0] @ y.samples)
        offset = 0
        for j in active:
            q = prods[j].shape[1]
            fresh[j] = sol[offset:offset + q]
            offset += q
    for j in range(1, len(prods)):
        if j in fresh:
            out.append(SampleEnsemble(fresh[j]))
        elif previous is not None:
            out.append(as_ensemble(previous[j]))
        else:
            out.append(SampleEnsemble(np.zeros((prods[j].shape[1], n_samples))))
    return out


@dataclass(frozen=True, eq=False)
class FredholmSystem:
    """The linear system ``C (I - A) = B`` behind one injection recovery.

    ``alpha`` and ``gammas`` are the sample-level vectors: the recovered
    injection is ``alpha + sum_l C_l gammas[l]``.
    """

    j: int
    b: np.ndarray
    a: np.ndarray
    c: np.ndarray
    solver: str
    cond: float
    alpha: np.ndarray
    gammas: list
    block_dims: list

    @property
    def c_blocks(self) -> list[np.ndarray]:
        out, o = [], 0
        for q in self.block_dims:
            out.append(self.c[:, o:o + q])
            o += q
        return out


def solve_fredholm(b: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, str, float]:
    """Solve ``C (I - A) = B``.

    Uses a direct solve when ``I - A`` is numerically nonsingular and
    well-conditioned, otherwise the minimum-norm least-squares solution
    ``B (I - A)^+``. Returns ``(C, solver, cond)``.
    """
    m = np.eye(a.shape[0]) - a
    s = svd(m).s
    # I - A can cancel to rounding level (A = I exactly for the first block),
    # so the rank cutoff is absolute, scaled by the terms being subtracted and
    # matched to the conditioning limit of the direct solve
    atol = max(1.0, float(svd(a).s[0]) if a.size else 0.0) / COND_LIMIT
    full = numerical_rank(s, 0.0, atol) == m.shape[0]
    cond = float(s[0] / s[-1]) if full else float("inf")
    if full and cond <= COND_LIMIT:
        return np.linalg.solve(m.T, b.T).T, "inverse", cond
    logger.info("I - A singular or ill-conditioned (cond=%.3e); using pseudo-inverse", cond)
    return b @ pinv(m, atol=atol), "pinv", cond


def recover_injection(x, est: Estimator, z_tilde: Sequence, j: int,
                      b_mode: str = "direct", x_hat=None):
    """Injection ``v_j`` whose decorrelation against ``z_tilde[:j]`` gives
    back ``z_tilde[j]``.

    Writes ``v_j = alpha + sum_{l<j} C_l gamma_l`` with
    ``alpha = z_tilde[j]``, ``gamma_l = E_ll^+ z_l`` and solves for
    ``C = [C_0 .. C_{j-1}]`` from ``C (I - A) = B`` where
    ``A_lk = E_ll^+ E_lk``. With ``b_mode="direct"``, ``B_k = E[alpha z_k^T]``;
    with ``b_mode="fullrank-init"``, ``B_k = S_j^+ E[x_hat z_k^T]`` using the
    full-rank reconstruction ``x_hat`` fitted once at the start. For the
    blockwise z-step ``alpha = S_j^+ x`` and the direct ``B`` is
    ``S_j^+ E[x z_k^T]``.

    For any ``C``, decorrelating the result gives
    ``alpha + (C (I - A) - E[alpha z^T]) gamma``, so the target is hit
    exactly whenever the direct system is consistent.

    Returns
    -------
    v_j : SampleEnsemble
    system : FredholmSystem
    """
    x = as_ensemble(x)
    if b_mode not in B_MODES:
        raise ValueError(f"b_mode must be one of {B_MODES}, got {b_mode!r}")
    if not 1 <= j < len(z_tilde):
        raise ValueError(f"injection index must be in 1..{len(z_tilde) - 1}, got {j}")
    prev = [as_ensemble(z) for z in z_tilde[:j]]
    target = as_ensemble(z_tilde[j])
    alpha = target.samples
    if b_mode == "fullrank-init":
        if x_hat is None:
            raise ValueError("b_mode='fullrank-init' needs x_hat")
        s_pinv = pinv(est.products()[j])
        b = np.hstack([s_pinv @ estimate_cov(x_hat, zk) for zk in prev])
    else:
        b = np.hstack([estimate_cov(target, zk) for zk in prev])
    pinvs = [psd_pinv(estimate_cov(z, z)) for z in prev]
    a = np.block([[pinvs[l] @ estimate_cov(prev[l], prev[k]) for k in range(j)]
                  for l in range(j)])
    c, solver, cond = solve_fredholm(b, a)
    gammas = [pinvs[l] @ prev[l].samples for l in range(j)]
    v = alpha + c @ np.vstack(gammas)
    system = FredholmSystem(j, b, a, c, solver, cond, alpha, gammas, [z.dim for z in prev])
    return SampleEnsemble(v), system


def refit_blocks(x, z_tilde, ranks, frozen0=None) -> Estimator:
    """Refit blocks ``1 .. p`` on a pairwise uncorrelated family.

    Block 0 is replaced by ``frozen0`` when given (it is never refitted).
    """
    sys = z_tilde if isinstance(z_tilde, DecorrelatedSystem) else \
        DecorrelatedSystem.from_uncorrelated(z_tilde)
    ranks = ranks.ranks if isinstance(ranks, RankProfile) else tuple(ranks)
    est = fit_rank_constrained(x, sys, ranks, blocks=range(1, len(ranks)))
    blocks = list(est.blocks)
    if frozen0 is not None:
        blocks[0] = frozen0
    return Estimator(blocks)


@dataclass(frozen=True, eq=False)
class IterationState:
    """The pair ``(blocks, z)`` the current error refers to, plus the
    injections that produce ``z``."""

    i: int
    blocks: list
    z: list
    v: list
    eps: float


@dataclass(frozen=True)
class IterationRecord:
    i: int
    eps_z: float
    eps_gh: float
    eps: float
    branch: str
    ms: float
    uncorrelated: bool
    solvers: tuple = ()


@dataclass
class IterationTrace:
    eps_initial: float
    records: list = field(default_factory=list)
    stop_reason: str = ""
    states: list = field(default_factory=list)

    @property
    def eps(self) -> list[float]:
        """``[eps_initial, eps_1, eps_2, ...]``."""
        return [self.eps_initial] + [r.eps for r in self.records]

    def to_csv(self, path, timings: bool = False) -> None:
        """Columns ``i,eps_z,eps_gh,eps,branch,ms``.

        The ``ms`` column is left empty unless ``timings`` is set, so
        repeated runs produce identical files.
        """
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "eps_z", "eps_gh", "eps", "branch", "ms"])
            for r in self.records:
                w.writerow([r.i, repr(r.eps_z), repr(r.eps_gh), repr(r.eps), r.branch,
                            f"{r.ms:.3f}" if timings else ""])


@dataclass(frozen=True, eq=False)
class IterationResult:
    estimator: Estimator
    injections: list
    z: list
    eps: float
    trace: IterationTrace
    initial_estimator: Estimator
    initial_system: DecorrelatedSystem


def _error(x, blocks, z) -> float:
    value = empirical_error(x, Estimator(blocks), z)
    if not np.isfinite(value):
        raise NumericalError(f"non-finite error value {value}")
    return value


def iterate(x, y, family: InjectionFamily, ranks, delta: float | None = 1e-10,
            max_iter: int = 100, b_mode: str = "direct", z_update: str = "joint",
            keep_states: bool = False) -> IterationResult:
    """Run the alternating injection refinement.

    Parameters
    ----------
    x, y : SampleEnsemble
        Target and observation realizations.
    family : InjectionFamily
        Initial injections ``v_j = phi_j(y)``.
    ranks : RankProfile or sequence of int
    delta : float or None
        Stop once ``(eps_new - eps_old)**2 <= delta``. ``None`` disables the
        tolerance test and always runs ``max_iter`` loops.
    max_iter : int
        Loop cap (>= 1).
    b_mode : {"direct", "fullrank-init"}
        Target used in the right-hand side of the injection recovery.
    z_update : {"joint", "blockwise"}
        See :func:`optimal_z_update`. Only ``"joint"`` guarantees a
        non-increasing error.
    keep_states : bool
        Store every accepted ``IterationState`` in ``trace.states``.
    """
    x, y = as_ensemble(x), as_ensemble(y)
    if delta is not None and delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if b_mode not in B_MODES:
        raise ValueError(f"b_mode must be one of {B_MODES}, got {b_mode!r}")
    ranks = ranks.ranks if isinstance(ranks, RankProfile) else tuple(ranks)

    v = [y] + family.apply(y)
    sys0 = decorrelate(v)
    est0 = fit_rank_constrained(x, sys0, ranks)
    frozen = est0.blocks[0]
    x_hat = predict(fit_full_rank(x, sys0), sys0) if b_mode == "fullrank-init" else None

    state = IterationState(0, list(est0.blocks), list(sys0.z), list(v),
                           _error(x, est0.blocks, sys0.z))
    trace = IterationTrace(state.eps)
    if keep_states:
        trace.states.append(state)
    v_latest = list(v)
    warned = set()
    p = len(ranks) - 1

    for i in range(max_iter):
        t0 = time.perf_counter()
        zsys = sys0 if i == 0 else decorrelate(v_latest)
        uncorrelated, _ = check_pairwise_uncorrelated(zsys)

        est = Estimator(state.blocks)
        z_new = optimal_z_update(x, est, y, z_update, previous=state.z)
        eps_z = _error(x, state.blocks, z_new)

        v_new, solvers = [y], []
        prods = est.products()
        for j in range(1, p + 1):
            if _is_zero(prods[j]):
                if j not in warned:
                    warnings.warn(f"block {j} is zero; injection {j} is no longer updated")
                    warned.add(j)
                v_new.append(v_latest[j])
                solvers.append("skip")
                continue
            vj, fs = recover_injection(x, est, z_new, j, b_mode, x_hat)
            v_new.append(vj)
            solvers.append(fs.solver)

        est_gh = refit_blocks(x, zsys, ranks, frozen)
        eps_gh = _error(x, est_gh.blocks, zsys.z)

        if eps_z <= eps_gh:
            state = IterationState(i + 1, state.blocks, z_new, v_new, eps_z)
            branch = "z"
        else:
            state = IterationState(i + 1, list(est_gh.blocks), list(zsys.z), v_latest, eps_gh)
            branch = "gh"
        eps_old = trace.eps[-1]
        trace.records.append(IterationRecord(i, eps_z, eps_gh, state.eps, branch,
                                             1e3 * (time.perf_counter() - t0),
                                             uncorrelated, tuple(solvers)))
        if keep_states:
            trace.states.append(state)
        v_latest = v_new
        if delta is not None and (state.eps - eps_old) ** 2 <= delta:
            trace.stop_reason = "tolerance"
            break
    else:
        trace.stop_reason = "max_iter"

    return IterationResult(Estimator(state.blocks), state.v[1:], state.z, state.eps,
                           trace, est0, sys0)
