"""
Dense complex matrix kernel.

Every routine accepts anything ``numpy.asarray`` understands and returns
``complex128`` arrays (singular values are real).  Matrices are stored in
numpy's native layout; ``vec`` stacks columns (Fortran order), so that

    vec(X @ Y @ Z) == kron(Z.T, X) @ vec(Y).

Rank decisions use the cutoff ``eps * s_max * max(rows, cols)`` where
``eps`` defaults to machine epsilon and can be overridden per call.
"""

from typing import NamedTuple, Optional

import numpy as np

EPS = np.finfo(float).eps


class LinalgError(ValueError):
    """Raised for malformed or non-finite input to a kernel routine."""


class SvdResult(NamedTuple):
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray


def _as_matrix(a, name="a"):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise LinalgError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{name} has non-finite entries")
    return a


def rank_cutoff(s, shape, eps: Optional[float] = None) -> float:
    """Singular values at or below this value count as zero."""
    eps = EPS if eps is None else eps
    smax = s[0] if len(s) else 0.0
    return eps * smax * max(shape)


def svd(a, full_matrices: bool = True) -> SvdResult:
    """
    Singular value decomposition ``a = U @ diag(s) @ V^H``.

    ``right_vectors`` holds V (not V^H), so its columns are the right
    singular vectors.  LAPACK's divide-and-conquer driver is deterministic
    for a fixed input.
    """
    a = _as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=full_matrices)
    except np.linalg.LinAlgError as exc:
        raise LinalgError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, vh.conj().T)


def rank(a, eps: Optional[float] = None) -> int:
    a = _as_matrix(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > rank_cutoff(s, a.shape, eps)))


def nullity(a, eps: Optional[float] = None) -> int:
    """Dimension of the null space of ``a`` (columns minus rank)."""
    a = _as_matrix(a)
    return a.shape[1] - rank(a, eps)


def pinv(a, tol: Optional[float] = None) -> np.ndarray:
    """
    Moore-Penrose pseudo-inverse.

    ``tol`` is an absolute singular-value threshold; when omitted the
    default rank cutoff applies.
    """
    a = _as_matrix(a)
    m, n = a.shape
    if a.size == 0:
        return np.zeros((n, m), dtype=complex)
    u, s, v = svd(a, full_matrices=False)
    cut = rank_cutoff(s, a.shape) if tol is None else tol
    keep = s > cut
    return (v[:, keep] / s[keep]) @ u[:, keep].conj().T


def null_space(a, eps: Optional[float] = None) -> np.ndarray:
    """
    Orthonormal basis of ``{x : a @ x = 0}`` as the columns of an
    ``n x nullity`` matrix.  A zero-column matrix is returned when the
    map is injective.  ``eps`` is the relative rank tolerance.
    """
    a = _as_matrix(a)
    m, n = a.shape
    if m == 0:
        return np.eye(n, dtype=complex)
    u, s, v = svd(a, full_matrices=True)
    r = int(np.sum(s > rank_cutoff(s, a.shape, eps)))
    return v[:, r:].copy()


def hermitian_sqrt(p, psd_tol: float = 1e-9) -> np.ndarray:
    """
    Principal square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in ``[-psd_tol * max(1, lambda_max), 0)`` are clamped to
    zero; anything more negative is rejected.  Eigenvalues at rounding level
    (below ``n * eps * lambda_max``) are also zeroed, so that projectors map
    to themselves instead of picking up ``sqrt(eps)`` noise.
    """
    p = _as_matrix(p, "p")
    if p.shape[0] != p.shape[1]:
        raise LinalgError(f"p must be square, got {p.shape}")
    herm = 0.5 * (p + p.conj().T)
    scale = max(1.0, float(np.max(np.abs(herm))) if herm.size else 1.0)
    if np.max(np.abs(p - herm), initial=0.0) > psd_tol * scale:
        raise LinalgError("p is not Hermitian")
    w, q = np.linalg.eigh(herm)
    if w.size and w[0] < -psd_tol * scale:
        raise LinalgError(f"p is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    if w.size:
        w[w <= p.shape[0] * EPS * w[-1]] = 0.0
    return (q * np.sqrt(w)) @ q.conj().T


def kron(a, b) -> np.ndarray:
    return np.kron(_as_matrix(a), _as_matrix(b, "b"))


def vec(a) -> np.ndarray:
    """Column-by-column vectorization, returned as an ``(m*n) x 1`` matrix."""
    a = _as_matrix(a)
    return a.reshape(-1, 1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=complex)
    if v.size != rows * cols:
        raise LinalgError(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")
