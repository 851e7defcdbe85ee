"""GMCA warm-up: projected alternating least squares with MAD thresholds.

Each iteration solves ``S = A^+ X``, soft-thresholds the starlet detail
coefficients of every source at ``k * MAD`` per scale, re-synthesizes ``S``,
then sets ``A = X S^+`` with unit columns. ``k`` decreases linearly from
``k_start`` to ``k_final`` over the run.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numkernel import (
    normalize_columns_sphere,
    pseudo_inverse,
    relative_ridge,
    soft_threshold,
)
from .objective import data_fidelity
from .result import SeparationResult, SolverError
from .starlet import Geometry, analyze_matrix, synthesize_matrix


@dataclass
class GmcaConfig:
    n_iters: int = 100
    k_final: float = 3.0
    k_start: Optional[float] = None  # defaults to 10 * k_final
    # relative to the largest Gram diagonal; damps A^+ when the columns of the
    # iterate drift together, which otherwise lets them collapse onto one source
    ridge: float = 1e-3
    n_scales: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.k_start is None:
            self.k_start = 10.0 * self.k_final
        if self.n_iters < 1:
            raise ValueError("n_iters must be >= 1")
        if self.k_final < 0 or self.k_start < self.k_final:
            raise ValueError("need k_start >= k_final >= 0")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")

    def k_schedule(self):
        if self.n_iters == 1:
            return np.array([self.k_final])
        return np.linspace(self.k_start, self.k_final, self.n_iters)


def mad_per_scale(details):
    """MAD of every plane of ``details`` shaped ``(n, n_scales, h, w)``."""
    flat = details.reshape(details.shape[0], details.shape[1], -1)
    med = np.median(flat, axis=-1, keepdims=True)
    return np.median(np.abs(flat - med), axis=-1)


def threshold_details(coefs, thresholds):
    """Soft-threshold detail planes of ``coefs`` (coarse plane untouched)."""
    out = coefs.copy()
    out[:, :-1] = soft_threshold(coefs[:, :-1], thresholds)
    return out


def gmca_update_S(X, A, k_current, geom: Geometry, ridge=0.0):
    """Least-squares sources followed by per-scale ``k * MAD`` thresholding.

    ``ridge`` is relative to the largest diagonal entry of ``A^T A``.
    Returns ``(S, thresholds)`` with thresholds shaped ``(n, n_scales)``.
    """
    if not np.any(A):
        raise SolverError("zero mixing iterate")
    S_ls = pseudo_inverse(A, relative_ridge(A, ridge)) @ X
    coefs = analyze_matrix(S_ls, geom)
    tau = k_current * mad_per_scale(coefs[:, :-1])
    coefs = threshold_details(coefs, tau[:, :, None, None])
    return synthesize_matrix(coefs), tau


def gmca_update_A(X, S, ridge=0.0, rng=None):
    """``A = X S^+`` projected onto the unit sphere column-wise.

    Zero columns are redrawn from ``rng`` (standard normal, normalized).
    Returns ``(A, n_redrawn)``.
    """
    if not np.any(S):
        raise SolverError("separation collapsed")
    A = X @ pseudo_inverse(S, relative_ridge(S, ridge))
    A, _, degenerate = normalize_columns_sphere(A)
    n_bad = int(np.count_nonzero(degenerate))
    if n_bad:
        if rng is None:
            rng = np.random.default_rng(0)
        fresh = rng.standard_normal((A.shape[0], n_bad))
        A[:, degenerate] = fresh / np.linalg.norm(fresh, axis=0)
    return A, n_bad


def run_gmca(X, config: GmcaConfig, A0, image_shape):
    """Run GMCA from ``A0`` on ``X`` whose rows are images of ``image_shape``.

    The returned ``thresholds`` are the last iteration's ``k_final * MAD``
    values, shaped ``(n, n_scales)``.
    """
    X = np.asarray(X, dtype=np.float64)
    A = np.array(A0, dtype=np.float64)
    if X.size == 0:
        raise ValueError("empty observations")
    if A.shape[0] != X.shape[0]:
        raise ValueError(f"A0 has {A.shape[0]} rows, X has {X.shape[0]}")
    geom = Geometry(image_shape[1], image_shape[0], config.n_scales)
    rng = np.random.default_rng(config.rng_seed)

    res = SeparationResult(A=A, S=np.zeros((A.shape[1], X.shape[1])), method="gmca")
    fidelity = []
    n_redrawn = 0
    for it, k in enumerate(config.k_schedule()):
        try:
            S, tau = gmca_update_S(X, A, k, geom, config.ridge)
            A, bad = gmca_update_A(X, S, config.ridge, rng)
        except (SolverError, np.linalg.LinAlgError) as err:
            raise SolverError(str(getattr(err, "message", err)), stage="gmca", iteration=it) from err
        n_redrawn += bad
        res.threshold_history.append(tau)
        res.k_history.append(float(k))
        fidelity.append(data_fidelity(X, A, S))

    res.A, res.S = A, S
    res.n_iter = config.n_iters
    res.thresholds = res.threshold_history[-1]
    res.diagnostics = {"fidelity_trace": fidelity, "degenerate_redraws": n_redrawn}
    return res
