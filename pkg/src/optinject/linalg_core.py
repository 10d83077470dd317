"""Dense linear-algebra kernels.

Thin wrappers around LAPACK (through numpy) that add the conventions the
estimators rely on: a deterministic sign for every singular/eigen vector,
a single numerical-rank rule shared by every pseudo-inverse, and explicit
rejection of inputs that are not what they claim to be.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinalgError",
    "SvdResult",
    "as_matrix",
    "default_tol",
    "svd",
    "numerical_rank",
    "truncated_svd",
    "pinv",
    "psd_eig",
    "psd_pinv",
    "sqrt_pinv",
]

EPS = np.finfo(np.float64).eps

# eigenvalues of a PSD input may dip this far below zero (relative to the
# largest one) before the input is rejected as indefinite
PSD_FLOOR = 1e-10
SYMMETRY_TOL = 1e-10


class LinalgError(ValueError):
    """Raised for inputs a kernel cannot accept or factorizations that fail."""


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = u @ diag(s) @ v.T`` with orthonormal columns in u, v."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array (copy-free when possible)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise LinalgError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LinalgError(f"{name} contains NaN or Inf")
    return arr


def default_tol(shape) -> float:
    """Relative rank cutoff ``max(rows, cols) * eps``."""
    return max(max(shape), 1) * EPS


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    """Per-column signs making the largest-magnitude entry positive.

    ``argmax`` returns the first maximal index, so ties go to the lowest one.
    """
    if vectors.size == 0:
        return np.ones(vectors.shape[1])
    idx = np.argmax(np.abs(vectors), axis=0)
    picked = vectors[idx, np.arange(vectors.shape[1])]
    return np.where(picked < 0, -1.0, 1.0)


def svd(a) -> SvdResult:
    """Thin SVD with non-increasing singular values and fixed vector signs.

    Parameters
    ----------
    a : (m, n) array_like
        Finite input matrix.

    Returns
    -------
    SvdResult
        ``u`` is (m, k), ``s`` is (k,), ``v`` is (n, k) with k = min(m, n).
        Each column of ``u`` has its largest-magnitude entry positive; the
        matching column of ``v`` is flipped with it so the product is exact.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    k = min(m, n)
    if k == 0:
        return SvdResult(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise LinalgError(f"SVD did not converge: {exc}") from exc
    signs = _sign_fix(u)
    u = u * signs
    v = vt.T * signs
    return SvdResult(u, s, v)


def numerical_rank(s: np.ndarray, tol: float, atol: float = 0.0) -> int:
    """Count singular values strictly above ``max(tol * s[0], atol)``."""
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > max(tol * s[0], atol)))


def truncated_svd(a, r: int, tol: float | None = None) -> np.ndarray:
    """Best rank-``r`` approximation ``sum_{i<=r} s_i u_i v_i^T``.

    When ``r`` reaches the numerical rank of ``a`` the input itself is
    returned (as a copy), so truncation never perturbs an exactly
    representable matrix.
    """
    a = as_matrix(a, "a")
    if r < 0:
        raise LinalgError(f"rank must be non-negative, got {r}")
    res = svd(a)
    tol = default_tol(a.shape) if tol is None else tol
    if r >= numerical_rank(res.s, tol):
        return a.copy()
    return (res.u[:, :r] * res.s[:r]) @ res.v[:, :r].T


def pinv(a, tol: float | None = None, atol: float = 0.0) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values ``<= max(tol * s_max, atol)`` are treated as zero;
    ``tol`` defaults to ``max(rows, cols) * eps``.
    """
    a = as_matrix(a, "a")
    tol = default_tol(a.shape) if tol is None else tol
    res = svd(a)
    k = numerical_rank(res.s, tol, atol)
    if k == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    return (res.v[:, :k] / res.s[:k]) @ res.u[:, :k].T


def _check_symmetric(e: np.ndarray, name: str) -> np.ndarray:
    if e.shape[0] != e.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {e.shape}")
    scale = np.max(np.abs(e)) if e.size else 0.0
    asym = np.max(np.abs(e - e.T)) if e.size else 0.0
    if asym > SYMMETRY_TOL * max(scale, np.finfo(float).tiny):
        raise LinalgError(
            f"{name} is not symmetric: max |E - E^T| = {asym:.3e} "
            f"vs max |E| = {scale:.3e}"
        )
    return 0.5 * (e + e.T)


def psd_eig(e) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric positive semi-definite matrix.

    Returns eigenvalues in non-increasing order (ties keep LAPACK order) and
    eigenvectors as columns with the largest-magnitude entry positive.
    Slightly negative eigenvalues down to ``-1e-10 * lambda_max`` are
    clamped to zero; anything more negative is rejected.
    """
    e = _check_symmetric(as_matrix(e, "e"), "e")
    n = e.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    try:
        w, vecs = np.linalg.eigh(e)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise LinalgError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    w = w[order]
    vecs = vecs[:, order]
    lam_max = max(w[0], 0.0)
    if w[-1] < -PSD_FLOOR * lam_max or (lam_max == 0.0 and w[-1] < 0.0):
        raise LinalgError(
            f"e is not positive semi-definite: smallest eigenvalue {w[-1]:.3e}, "
            f"largest {w[0]:.3e}"
        )
    w = np.clip(w, 0.0, None)
    vecs = vecs * _sign_fix(vecs)
    return w, vecs


def _kept(w: np.ndarray, tol: float | None, floor: float) -> np.ndarray:
    tol = default_tol((w.size,)) if tol is None else tol
    cutoff = max(tol * (w[0] if w.size else 0.0), floor)
    return w > cutoff


def psd_pinv(e, tol: float | None = None, floor: float = 0.0) -> np.ndarray:
    """Pseudo-inverse of a PSD matrix through its eigendecomposition.

    Eigenvalues ``<= max(tol * lambda_max, floor)`` are dropped. The same
    rule is used by :func:`sqrt_pinv`, so the pair stays rank-consistent.
    """
    w, vecs = psd_eig(e)
    keep = _kept(w, tol, floor)
    v = vecs[:, keep]
    return (v / w[keep]) @ v.T


def sqrt_pinv(e, tol: float | None = None, floor: float = 0.0) -> np.ndarray:
    """``(E^{1/2})^+`` for symmetric PSD ``E``: ``V diag(lambda^{-1/2}) V^T``."""
    w, vecs = psd_eig(e)
    keep = _kept(w, tol, floor)
    v = vecs[:, keep]
    return (v / np.sqrt(w[keep])) @ v.T
