"""Dense matrix primitives shared by the solvers.

Matrices are plain 2-D ``float64`` numpy arrays. Every function here is pure:
inputs are never modified in place.
"""

from typing import NamedTuple, Optional

import numpy as np


def as_mat(M, name="matrix"):
    """Return ``M`` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def mad(v):
    """Median absolute deviation ``median(|v - median(v)|)``.

    Even-length medians are the mean of the two central order statistics
    (numpy's convention). No Gaussian consistency factor is applied.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("empty input")
    return float(np.median(np.abs(v - np.median(v))))


def mad_rows(M):
    """Row-wise :func:`mad` of a 2-D array."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("empty input")
    med = np.median(M, axis=1, keepdims=True)
    return np.median(np.abs(M - med), axis=1)


def soft_threshold(M, T):
    """Entrywise soft-thresholding ``sign(M) * max(|M| - T, 0)``.

    ``T`` must broadcast to the shape of ``M`` and be non-negative.
    """
    M = np.asarray(M, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    try:
        T = np.broadcast_to(T, M.shape)
    except ValueError:
        raise ValueError(f"threshold shape {T.shape} does not match {M.shape}") from None
    if np.any(T < 0):
        raise ValueError("negative threshold")
    return np.sign(M) * np.maximum(np.abs(M) - T, 0.0)


def project_columns_ball(A):
    """Project every column of ``A`` onto the unit l2 ball."""
    A = np.asarray(A, dtype=np.float64)
    norms = np.linalg.norm(A, axis=0)
    return A / np.maximum(norms, 1.0)


def normalize_columns_sphere(A):
    """Scale every nonzero column of ``A`` to unit l2 norm.

    Returns
    -------
    A_unit : ndarray
        Normalized copy of ``A``.
    scales : ndarray
        Norm each column was divided by (1 for zero columns).
    degenerate : ndarray of bool
        Flags the all-zero columns, which are left untouched.
    """
    A = np.asarray(A, dtype=np.float64)
    norms = np.linalg.norm(A, axis=0)
    degenerate = norms == 0.0
    scales = np.where(degenerate, 1.0, norms)
    return A / scales, scales, degenerate


class SpectralNorm(NamedTuple):
    value: float
    converged: bool
    n_iter: int
    vector: np.ndarray


def spectral_norm(M, tol=1e-12, max_iter=1000, v0: Optional[np.ndarray] = None):
    """Largest singular value of ``M`` by power iteration on the Gram matrix.

    The smaller of ``M.T @ M`` and ``M @ M.T`` is iterated (both share the top
    eigenvalue). The default start vector is a normalized ramp from 1 to 2;
    all-ones is avoided because it is an exact eigenvector of every 2x2 Gram
    matrix with equal diagonal, e.g. that of a unit-column mixing matrix.
    ``v0`` lets callers warm-start from the previous top vector. Iteration stops
    when the relative change of the estimate drops below ``tol``; if
    ``max_iter`` is hit, the best estimate is returned with
    ``converged=False``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        raise ValueError("empty input")
    if tol <= 0:
        raise ValueError("tol must be positive")
    G = M @ M.T if M.shape[0] < M.shape[1] else M.T @ M
    dim = G.shape[0]
    if v0 is None or v0.shape != (dim,) or not np.any(v0):
        v = np.linspace(1.0, 2.0, dim) if dim > 1 else np.ones(1)
    else:
        v = np.asarray(v0, dtype=np.float64)
    v = v / np.linalg.norm(v)

    est = 0.0
    for it in range(1, max_iter + 1):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            if not np.any(G):
                return SpectralNorm(0.0, True, it, v)
            # start vector fell in the null space; restart on the heaviest axis
            v = np.zeros(dim)
            v[int(np.argmax(np.diag(G)))] = 1.0
            continue
        new = float(v @ w)
        v = w / nw
        if est > 0 and abs(new - est) <= tol * new:
            return SpectralNorm(float(np.sqrt(new)), True, it, v)
        est = new
    return SpectralNorm(float(np.sqrt(max(est, 0.0))), False, max_iter, v)


def pseudo_inverse(M, ridge=0.0):
    """Moore-Penrose pseudo-inverse through the normal equations.

    The Gram matrix on the smaller side is used: ``(M^T M + ridge I)^{-1} M^T``
    for tall or square ``M`` and ``M^T (M M^T + ridge I)^{-1}`` for wide ones.
    With ``ridge == 0`` a numerically singular Gram matrix raises.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        raise ValueError("empty input")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    tall = M.shape[0] >= M.shape[1]
    G = M.T @ M if tall else M @ M.T
    if ridge > 0:
        G = G + ridge * np.eye(G.shape[0])
    elif np.linalg.cond(G) * np.finfo(np.float64).eps > 1e-2 or not np.any(G):
        raise np.linalg.LinAlgError("rank deficient; supply ridge")
    if tall:
        return np.linalg.solve(G, M.T)
    return np.linalg.solve(G, M).T


def relative_ridge(M, rel):
    """Absolute ridge ``rel * max(diag(Gram))`` used inside the solvers."""
    M = np.asarray(M, dtype=np.float64)
    if rel <= 0:
        return 0.0
    d = np.sum(M * M, axis=0 if M.shape[0] >= M.shape[1] else 1)
    return float(rel * np.max(d)) if d.size else 0.0
