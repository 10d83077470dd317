"""Injections and their sequential decorrelation.

An injection is an auxiliary random vector ``v_j = phi_j(y)`` added to the
observation ``y = v_0``. Before estimators are fitted, the family
``v_0, ..., v_p`` is replaced by a pairwise uncorrelated family
``z_0, ..., z_p`` through the block Gram-Schmidt recursion

    z_0 = v_0,
    z_j = v_j - sum_{k<j} E[v_j z_k^T] E[z_k z_k^T]^+ z_k,

which makes every cross second moment ``E[z_i z_j^T]`` vanish.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ensemble import DataError, SampleEnsemble, as_ensemble, estimate_cov
from .linalg_core import default_tol, numerical_rank, psd_eig, psd_pinv, sqrt_pinv, svd

__all__ = [
    "PowerInjection",
    "FourierInjection",
    "LiftInjection",
    "InjectionFamily",
    "parse_family",
    "DecorrelatedSystem",
    "decorrelate",
    "UncorrelationReport",
    "check_pairwise_uncorrelated",
    "gamma",
    "is_well_defined",
    "check_jointly_independent",
]


# Injection generators -------------------------------------------------------
@dataclass(frozen=True)
class PowerInjection:
    """Componentwise power ``y ** degree``; output dim equals ``dim(y)``."""

    degree: int

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"poly degree must be >= 1, got {self.degree}")

    def out_dim(self, n: int) -> int:
        return n

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return y ** self.degree

    @property
    def spec(self) -> str:
        return f"poly:{self.degree}"


def _seeded_rows(seed: int, count: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    # one (count, n+1) draw so the first rows do not depend on count:
    # families with growing count are nested
    m = np.random.default_rng(seed).standard_normal((count, n + 1))
    return m[:, :n], m[:, n]


@dataclass(frozen=True)
class FourierInjection:
    """Random Fourier features ``cos(W y + pi * b)`` with seeded W, b."""

    count: int
    seed: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"fourier count must be >= 1, got {self.count}")

    def out_dim(self, n: int) -> int:
        return self.count

    def __call__(self, y: np.ndarray) -> np.ndarray:
        w, b = _seeded_rows(self.seed, self.count, y.shape[0])
        return np.cos(w @ y + np.pi * b[:, None])

    @property
    def spec(self) -> str:
        return f"fourier:{self.count}:{self.seed}"


@dataclass(frozen=True)
class LiftInjection:
    """Random lift ``tanh(W y / sqrt(n) + b)`` with seeded W, b."""

    q: int
    seed: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"lift dimension must be >= 1, got {self.q}")

    def out_dim(self, n: int) -> int:
        return self.q

    def __call__(self, y: np.ndarray) -> np.ndarray:
        n = y.shape[0]
        w, b = _seeded_rows(self.seed, self.q, n)
        return np.tanh(w @ y / np.sqrt(n) + b[:, None])

    @property
    def spec(self) -> str:
        return f"lift:{self.q}:{self.seed}"


_GRAMMAR = {
    "poly": (PowerInjection, 1),
    "fourier": (FourierInjection, 2),
    "lift": (LiftInjection, 2),
}


@dataclass(frozen=True)
class InjectionFamily:
    """Ordered generators ``phi_1, ..., phi_p``."""

    generators: tuple = ()

    @property
    def degree(self) -> int:
        return len(self.generators)

    @property
    def spec(self) -> str:
        return ",".join(g.spec for g in self.generators)

    def dims(self, n: int) -> list[int]:
        return [g.out_dim(n) for g in self.generators]

    def prefix(self, p: int) -> "InjectionFamily":
        return InjectionFamily(tuple(self.generators[:p]))

    def apply(self, y) -> list[SampleEnsemble]:
        """Evaluate ``[v_1, ..., v_p]`` samplewise on ``y``."""
        y = as_ensemble(y)
        return [SampleEnsemble(g(y.samples)) for g in self.generators]


def parse_family(text: str | None) -> InjectionFamily:
    """Parse ``poly:<degree>``, ``fourier:<count>:<seed>``, ``lift:<q>:<seed>``
    items separated by commas. An empty string means no injections."""
    if text is None or not text.strip():
        return InjectionFamily(())
    gens = []
    for item in text.split(","):
        item = item.strip()
        parts = item.split(":")
        kind = parts[0]
        if kind not in _GRAMMAR:
            raise ValueError(f"unknown injection kind {kind!r} in {item!r}")
        cls, nargs = _GRAMMAR[kind]
        if len(parts) != nargs + 1 or not all(re.fullmatch(r"-?\d+", p) for p in parts[1:]):
            raise ValueError(
                f"injection {item!r} needs {nargs} integer argument(s) after {kind!r}"
            )
        gens.append(cls(*(int(p) for p in parts[1:])))
    return InjectionFamily(tuple(gens))


# Decorrelation --------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class DecorrelatedSystem:
    """Pairwise uncorrelated ``z_0, ..., z_p`` and the transform that made them.

    Attributes
    ----------
    z : list of SampleEnsemble
        The decorrelated vectors; ``z[0]`` is the observation itself.
    coeffs : list of list of ndarray
        ``coeffs[j][k] = E[v_j z_k^T] E[z_k z_k^T]^+`` for ``k < j``
        (``coeffs[0]`` is empty).
    cov_z : list of ndarray
        Self second moments ``E[z_j z_j^T]``.
    floors : list of float
        Absolute eigenvalue cutoffs used whenever ``E[z_j z_j^T]`` is
        pseudo-inverted. They are set from the scale of the original
        ``v_j`` so that cancellation residue left by the recursion is not
        mistaken for signal.
    """

    z: list
    coeffs: list
    cov_z: list
    floors: list
    _pinv: list = field(repr=False)
    _sqrt_pinv: list = field(repr=False)

    @classmethod
    def from_uncorrelated(cls, z: Sequence, floors: Sequence[float] | None = None):
        """Wrap vectors that are already (taken to be) pairwise uncorrelated."""
        z = [as_ensemble(v) for v in z]
        _check_shared(z)
        covs = [estimate_cov(v, v) for v in z]
        if floors is None:
            floors = [0.0] * len(z)
        return cls._build(z, [[] for _ in z], covs, list(floors))

    @classmethod
    def _build(cls, z, coeffs, covs, floors):
        pinvs = [psd_pinv(c, floor=f) for c, f in zip(covs, floors)]
        spinvs = [sqrt_pinv(c, floor=f) for c, f in zip(covs, floors)]
        return cls(z, coeffs, covs, floors, pinvs, spinvs)

    @property
    def degree(self) -> int:
        return len(self.z) - 1

    @property
    def dims(self) -> list[int]:
        return [v.dim for v in self.z]

    @property
    def n_samples(self) -> int:
        return self.z[0].n_samples

    def cov_pinv(self, j: int) -> np.ndarray:
        return self._pinv[j]

    def cov_sqrt_pinv(self, j: int) -> np.ndarray:
        return self._sqrt_pinv[j]

    def truncate(self, p: int) -> "DecorrelatedSystem":
        """The system for the first ``p`` injections (the recursion is causal)."""
        k = p + 1
        return DecorrelatedSystem(self.z[:k], self.coeffs[:k], self.cov_z[:k],
                                  self.floors[:k], self._pinv[:k], self._sqrt_pinv[:k])

    def transform(self, j: int, v_j) -> SampleEnsemble:
        """Re-apply the stored transform to ``v_j`` using ``z_0 .. z_{j-1}``."""
        v_j = as_ensemble(v_j)
        out = v_j.samples.copy()
        for k, c in enumerate(self.coeffs[j]):
            out -= c @ self.z[k].samples
        return SampleEnsemble(out)


def _check_shared(vs):
    if not vs:
        raise DataError("need at least one ensemble")
    n = vs[0].n_samples
    for j, v in enumerate(vs):
        if v.n_samples != n:
            raise DataError(
                f"ensemble {j} has {v.n_samples} samples, expected {n}"
            )


def _floor(v: SampleEnsemble) -> float:
    cov = estimate_cov(v, v)
    w, _ = psd_eig(cov)
    return default_tol((v.dim,)) * (w[0] if w.size else 0.0)


def decorrelate(v: Sequence) -> DecorrelatedSystem:
    """Turn ``[y, v_1, ..., v_p]`` into pairwise uncorrelated ``z_0 .. z_p``."""
    v = [as_ensemble(e) for e in v]
    _check_shared(v)
    z = [v[0]]
    coeffs = [[]]
    covs = [estimate_cov(v[0], v[0])]
    floors = [_floor(v[0])]
    pinvs = [psd_pinv(covs[0], floor=floors[0])]
    for vj in v[1:]:
        cj = []
        out = vj.samples.copy()
        for k, zk in enumerate(z):
            c = estimate_cov(vj, zk) @ pinvs[k]
            cj.append(c)
            out -= c @ zk.samples
        zj = SampleEnsemble(out)
        z.append(zj)
        coeffs.append(cj)
        covs.append(estimate_cov(zj, zj))
        floors.append(_floor(vj))
        pinvs.append(psd_pinv(covs[-1], floor=floors[-1]))
    spinvs = [sqrt_pinv(c, floor=f) for c, f in zip(covs, floors)]
    return DecorrelatedSystem(z, coeffs, covs, floors, pinvs, spinvs)


@dataclass(frozen=True)
class UncorrelationReport:
    worst_pair: tuple | None
    worst_value: float
    scale: float
    tol: float

    @property
    def relative(self) -> float:
        return self.worst_value / self.scale if self.scale > 0 else 0.0


def check_pairwise_uncorrelated(z: Sequence, tol: float = 1e-9):
    """Largest off-pair second-moment entry relative to the largest
    self-moment entry.

    Returns
    -------
    ok : bool
        ``worst <= tol * scale``.
    report : UncorrelationReport
    """
    if isinstance(z, DecorrelatedSystem):
        z = z.z
    z = [as_ensemble(v) for v in z]
    _check_shared(z)
    scale = max(float(np.max(np.abs(estimate_cov(v, v)))) for v in z)
    worst, pair = 0.0, None
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            val = float(np.max(np.abs(estimate_cov(z[i], z[j]))))
            if pair is None or val > worst:
                worst, pair = val, (i, j)
    report = UncorrelationReport(pair, worst, scale, tol)
    return worst <= tol * scale, report


def gamma(x, z_j, floor: float = 0.0) -> np.ndarray:
    """``E_xz E_zz^+ E_zx``: the part of ``E_xx`` that ``z_j`` can explain."""
    e_xz = estimate_cov(x, z_j)
    g = e_xz @ psd_pinv(estimate_cov(z_j, z_j), floor=floor) @ e_xz.T
    return 0.5 * (g + g.T)


def is_well_defined(x, z_j, tol: float = 1e-10, floor: float = 0.0) -> bool:
    """True when ``||gamma(x, z_j)||_F > tol * tr(E_xx)``.

    An injection failing this test contributes a zero block to any fitted
    estimator.
    """
    g = gamma(x, z_j, floor=floor)
    return bool(np.linalg.norm(g) > tol * np.trace(estimate_cov(x, x)))


def check_jointly_independent(v: Sequence, tol: float | None = None) -> bool:
    """Finite-sample proxy for joint independence.

    ``sum_j M_j v_j = 0`` forcing each ``M_j v_j = 0`` is equivalent, on a
    finite ensemble, to the row spaces of the sample blocks being linearly
    independent, i.e. rank of the stacked matrix equals the sum of block
    ranks.
    """
    v = [as_ensemble(e) for e in v]
    _check_shared(v)
    stacked = np.vstack([e.samples for e in v])
    t = default_tol(stacked.shape) if tol is None else tol
    total = numerical_rank(svd(stacked).s, t)
    parts = sum(numerical_rank(svd(e.samples).s, t) for e in v)
    return total == parts
