"""Closed-form block estimators and their error formulas.

Given a pairwise uncorrelated system ``z_0, ..., z_p`` the cost
``||x - sum_j S_j z_j||^2`` splits into independent per-block problems, so
each block is solved on its own:

* rank constrained: ``S_j = G_j H_j`` with ``G_j`` the leading ``r_j``
  eigenvectors of ``Gamma_j = E_xz E_zz^+ E_zx`` and
  ``H_j = G_j^T E_xz E_zz^+``;
* full rank: ``P_j = E_xz E_zz^+``.

With ``A_j = E_xz (E_zz^{1/2})^+`` the attained errors are
``tr E_xx - sum_j sum_{k<=r_j} s_k(A_j)^2`` and ``tr E_xx - sum_j ||A_j||^2``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decorrelate import DecorrelatedSystem
from .ensemble import SampleEnsemble, as_ensemble, estimate_cov, omega_norm_sq
from .linalg_core import psd_eig, svd, truncated_svd

__all__ = [
    "EST_VERSION",
    "IllDefinedInjectionWarning",
    "NumericalError",
    "RankProfile",
    "Estimator",
    "FullRankEstimator",
    "ErrorDiagnostics",
    "as_system",
    "a_matrix",
    "fit_rank_constrained",
    "fit_full_rank",
    "predict",
    "empirical_error",
    "predicted_error_rank",
    "predicted_error_full",
    "diagnostics",
    "degree_comparison",
    "estimator_from_json",
]

EST_VERSION = "optinject-est-v1"
NEG_ERROR_SLACK = 1e-9
WELL_DEFINED_TOL = 1e-10


class IllDefinedInjectionWarning(UserWarning):
    """A block's ``Gamma_j`` vanished; the block is set to zero."""


class NumericalError(ArithmeticError):
    """An error value came out inconsistent (negative beyond rounding, NaN)."""


@dataclass(frozen=True)
class RankProfile:
    """Block ranks ``r_0, ..., r_p`` with ``r = sum r_j <= min(m, n)``."""

    ranks: tuple
    m: int
    n: int

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "ranks", ranks)
        if not ranks:
            raise ValueError("need at least one rank (r_0)")
        if any(r < 1 for r in ranks):
            raise ValueError(f"every rank must satisfy 0 < r_j, got {list(ranks)}")
        if self.r > min(self.m, self.n):
            raise ValueError(
                f"ranks {list(ranks)} violate r ≤ min{{m,n}}: "
                f"r = {self.r} > min({self.m}, {self.n})"
            )

    @property
    def r(self) -> int:
        return sum(self.ranks)

    @property
    def c(self) -> float:
        return self.r / min(self.m, self.n)

    @property
    def degree(self) -> int:
        return len(self.ranks) - 1


def _ranks(ranks) -> tuple:
    return ranks.ranks if isinstance(ranks, RankProfile) else tuple(int(r) for r in ranks)


def _mat_to_json(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel(order="C")]}


def _mat_from_json(d: dict) -> np.ndarray:
    shape = tuple(int(s) for s in d["shape"])
    data = np.asarray(d["data"], dtype=np.float64)
    if data.size != int(np.prod(shape)):
        raise ValueError(f"matrix payload has {data.size} entries for shape {shape}")
    return data.reshape(shape)


@dataclass(frozen=True, eq=False)
class Estimator:
    """Blocks ``(G_j, H_j)``; the operator is ``sum_j G_j H_j z_j``."""

    blocks: list
    meta: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return len(self.blocks) - 1

    @property
    def ranks(self) -> tuple:
        return tuple(g.shape[1] for g, _ in self.blocks)

    def products(self) -> list[np.ndarray]:
        return [g @ h for g, h in self.blocks]

    def to_json(self) -> str:
        doc = {
            "version": EST_VERSION,
            "kind": "rank",
            "meta": self.meta,
            "blocks": [{"G": _mat_to_json(g), "H": _mat_to_json(h)} for g, h in self.blocks],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


@dataclass(frozen=True, eq=False)
class FullRankEstimator:
    """Blocks ``P_j``; the operator is ``sum_j P_j z_j``."""

    blocks: list
    meta: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return len(self.blocks) - 1

    def products(self) -> list[np.ndarray]:
        return list(self.blocks)

    def to_json(self) -> str:
        doc = {
            "version": EST_VERSION,
            "kind": "full",
            "meta": self.meta,
            "blocks": [{"P": _mat_to_json(p)} for p in self.blocks],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def estimator_from_json(text: str):
    """Inverse of ``Estimator.to_json`` / ``FullRankEstimator.to_json``."""
    doc = json.loads(text)
    if doc.get("version") != EST_VERSION:
        raise ValueError(f"unsupported estimator version {doc.get('version')!r}")
    meta = doc.get("meta", {})
    if doc["kind"] == "rank":
        blocks = [(_mat_from_json(b["G"]), _mat_from_json(b["H"])) for b in doc["blocks"]]
        return Estimator(blocks, meta)
    if doc["kind"] == "full":
        return FullRankEstimator([_mat_from_json(b["P"]) for b in doc["blocks"]], meta)
    raise ValueError(f"unknown estimator kind {doc['kind']!r}")


def as_system(sys) -> DecorrelatedSystem:
    if isinstance(sys, DecorrelatedSystem):
        return sys
    return DecorrelatedSystem.from_uncorrelated(sys)


def a_matrix(x, sys: DecorrelatedSystem, j: int) -> np.ndarray:
    """``A_j = E_{x z_j} (E_{z_j z_j}^{1/2})^+``."""
    return estimate_cov(x, sys.z[j]) @ sys.cov_sqrt_pinv(j)


def _zero_block(m, r, q):
    return np.zeros((m, r)), np.zeros((r, q))


def fit_rank_constrained(x, sys, ranks, well_defined_tol: float = WELL_DEFINED_TOL,
                         blocks: Sequence[int] | None = None) -> Estimator:
    """Minimal-norm rank-constrained blocks for a decorrelated system.

    Parameters
    ----------
    x : SampleEnsemble
        Target realizations.
    sys : DecorrelatedSystem or list of SampleEnsemble
        Pairwise uncorrelated ``z_0 .. z_p``.
    ranks : RankProfile or sequence of int
        One rank per block.
    blocks : sequence of int, optional
        Only fit these block indices; the others come back as zero blocks.

    Blocks whose injection is ill-defined (``Gamma_j`` numerically zero)
    are returned as zeros with an :class:`IllDefinedInjectionWarning`.
    """
    x = as_ensemble(x)
    sys = as_system(sys)
    ranks = _ranks(ranks)
    if len(ranks) != len(sys.z):
        raise ValueError(f"{len(ranks)} ranks for {len(sys.z)} blocks")
    m = x.dim
    tr = np.trace(estimate_cov(x, x))
    todo = range(len(ranks)) if blocks is None else set(blocks)
    out = []
    for j, (zj, rj) in enumerate(zip(sys.z, ranks)):
        if rj > m:
            raise ValueError(f"r_{j} = {rj} exceeds m = {m}")
        if j not in todo:
            out.append(_zero_block(m, rj, zj.dim))
            continue
        e_xz = estimate_cov(x, zj)
        wiener = e_xz @ sys.cov_pinv(j)
        gam = wiener @ e_xz.T
        gam = 0.5 * (gam + gam.T)
        if not np.linalg.norm(gam) > well_defined_tol * tr:
            warnings.warn(f"injection {j} is ill-defined (Gamma = 0); using a zero block",
                          IllDefinedInjectionWarning, stacklevel=2)
            out.append(_zero_block(m, rj, zj.dim))
            continue
        _, vecs = psd_eig(gam)
        g = vecs[:, :rj]
        out.append((g, g.T @ wiener))
    return Estimator(out)


def fit_full_rank(x, sys) -> FullRankEstimator:
    """Per-block Wiener solutions ``P_j = E_{x z_j} E_{z_j z_j}^+``."""
    x = as_ensemble(x)
    sys = as_system(sys)
    return FullRankEstimator([estimate_cov(x, zj) @ sys.cov_pinv(j)
                              for j, zj in enumerate(sys.z)])


def _zs(sys):
    if isinstance(sys, DecorrelatedSystem):
        return sys.z
    return [as_ensemble(z) for z in sys]


def predict(est, sys) -> SampleEnsemble:
    """Evaluate ``sum_j S_j z_j`` for every realization."""
    zs = _zs(sys)
    prods = est.products()
    if len(prods) != len(zs):
        raise ValueError(f"estimator has {len(prods)} blocks, system has {len(zs)}")
    out = None
    for j, (s, z) in enumerate(zip(prods, zs)):
        if s.shape[1] != z.dim:
            raise ValueError(f"block {j} expects dim {s.shape[1]}, z_{j} has dim {z.dim}")
        term = s @ z.samples
        out = term if out is None else out + term
    return SampleEnsemble(out)


def empirical_error(x, est, sys) -> float:
    """``||x - predict(est, sys)||_Omega^2``."""
    x = as_ensemble(x)
    return omega_norm_sq(x.samples - predict(est, sys).samples)


def _clamp(value: float, scale: float, what: str) -> float:
    if not np.isfinite(value):
        raise NumericalError(f"{what} is not finite")
    if value < 0:
        if value < -NEG_ERROR_SLACK * max(scale, 1.0):
            raise NumericalError(
                f"{what} = {value:.3e} is negative beyond rounding; "
                "second moments are inconsistent"
            )
        return 0.0
    return value


def _singular_values(x, sys) -> list[np.ndarray]:
    return [svd(a_matrix(x, sys, j)).s for j in range(len(sys.z))]


def predicted_error_rank(x, sys, ranks) -> float:
    """``tr E_xx - sum_j sum_{k<=r_j} s_k(A_j)^2``, clamped at 0 near zero."""
    x = as_ensemble(x)
    sys = as_system(sys)
    ranks = _ranks(ranks)
    tr = float(np.trace(estimate_cov(x, x)))
    captured = sum(float(np.sum(s[:r] ** 2)) for s, r in zip(_singular_values(x, sys), ranks))
    return _clamp(tr - captured, tr, "predicted rank-constrained error")


def predicted_error_full(x, sys) -> float:
    """``tr E_xx - sum_j ||A_j||_F^2``."""
    x = as_ensemble(x)
    sys = as_system(sys)
    tr = float(np.trace(estimate_cov(x, x)))
    captured = sum(float(np.sum(a_matrix(x, sys, j) ** 2)) for j in range(len(sys.z)))
    return _clamp(tr - captured, tr, "predicted full-rank error")


@dataclass(frozen=True, eq=False)
class ErrorDiagnostics:
    """Quantities behind the error formulas.

    ``gamma_cols[j][k]`` is the part of column ``k`` of ``A_j`` that
    survives truncation, ``sum_i a_ik^2 - b_ik^2`` with
    ``B = A_j - [A_j]_{r_j}``; per block these sum to the captured energy
    ``sum_{k<=r_j} s_k^2``. ``beta`` is the realized average over the
    ``q`` injection columns, so ``q * beta`` is exactly the energy the
    injections capture.
    """

    trace_xx: float
    a_matrices: list
    truncated: list
    singular_values: list
    ranks: tuple
    gamma_cols: list
    gamma_block: list
    gamma: float
    alpha0: float
    q_total: int
    beta: float
    predicted_error: float
    q_threshold: float

    @property
    def injection_energy(self) -> float:
        return self.q_total * self.beta

    def to_dict(self) -> dict:
        return {
            "trace_xx": self.trace_xx,
            "ranks": list(self.ranks),
            "singular_values": [s.tolist() for s in self.singular_values],
            "gamma_block": list(self.gamma_block),
            "gamma": self.gamma,
            "alpha0": self.alpha0,
            "q_total": self.q_total,
            "beta": self.beta,
            "injection_energy": self.injection_energy,
            "predicted_error": self.predicted_error,
            "q_threshold": self.q_threshold,
        }


def diagnostics(x, sys, ranks) -> ErrorDiagnostics:
    """Error decomposition for a rank profile on a decorrelated system."""
    x = as_ensemble(x)
    sys = as_system(sys)
    ranks = _ranks(ranks)
    tr = float(np.trace(estimate_cov(x, x)))
    a_mats = [a_matrix(x, sys, j) for j in range(len(sys.z))]
    svals = [svd(a).s for a in a_mats]
    truncs = [truncated_svd(a, r) for a, r in zip(a_mats, ranks)]
    cols = [np.sum(a ** 2 - (a - t) ** 2, axis=0) for a, t in zip(a_mats, truncs)]
    gblock = [float(np.max(c)) if c.size else 0.0 for c in cols]
    gam = max(gblock[1:], default=0.0)
    alpha0 = tr - sum(float(np.sum(a ** 2)) for a in a_mats)
    if alpha0 < -NEG_ERROR_SLACK * max(tr, 1.0):
        raise NumericalError(f"alpha0 = {alpha0:.3e} is negative beyond rounding")
    q = sum(z.dim for z in sys.z[1:])
    energy = sum(float(np.sum(c)) for c in cols[1:])
    beta = energy / q if q else 0.0
    head = tr - float(np.sum(svals[0][: ranks[0]] ** 2))
    pred = predicted_error_rank(x, sys, ranks)
    q_thr = head / beta if beta > 0 else float("inf")
    return ErrorDiagnostics(tr, a_mats, truncs, svals, ranks, cols, gblock, gam,
                            alpha0, q, beta, pred, q_thr)


def degree_comparison(x, sys, ranks, g: int) -> dict:
    """Compare degree ``p`` against degree ``g < p`` at equal total rank.

    The degree-``g`` operator keeps ``r_0 .. r_{g-1}`` and gives block ``g``
    the pooled rank ``l_g = r_g + ... + r_p``. Returns both sides of the
    sufficient condition ``sum_{k=r_g+1}^{l_g} s_k(A_g)^2 <
    sum_{j>g} sum_{k<=r_j} s_k(A_j)^2`` and both predicted errors.
    """
    x = as_ensemble(x)
    sys = as_system(sys)
    ranks = _ranks(ranks)
    p = len(ranks) - 1
    if not 0 <= g < p:
        raise ValueError(f"split index must satisfy 0 <= g < p = {p}, got {g}")
    svals = _singular_values(x, sys)
    l_g = sum(ranks[g:])
    lhs = float(np.sum(svals[g][ranks[g]:l_g] ** 2))
    rhs = sum(float(np.sum(svals[j][: ranks[j]] ** 2)) for j in range(g + 1, p + 1))
    ranks_g = tuple(ranks[:g]) + (l_g,)
    return {
        "g": g,
        "p": p,
        "ranks_g": list(ranks_g),
        "lhs": lhs,
        "rhs": rhs,
        "condition": lhs < rhs,
        "error_p": predicted_error_rank(x, sys, ranks),
        "error_g": predicted_error_rank(x, sys.truncate(g), ranks_g),
    }
