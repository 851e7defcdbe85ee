"""Sparse BSS cost: data fidelity, weighted l1 on starlet details, oblique constraint.

    F(A, S) = 1/2 ||X - A S||_F^2 + i{||A^i||_2 <= 1}(A) + sum_i,j lam_i W_ij |(S Phi^T)_ij|

The l1 term is evaluated in the analysis formulation (transform of ``S``) and
covers detail planes only; the coarse plane is never penalized.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .starlet import Geometry, analyze_matrix

FEASIBILITY_TOL = 1e-9


@dataclass
class Penalty:
    """Regularization weights ``R_S = Lambda_S W``.

    ``lambdas`` is either one value per source, shape ``(n,)``, or one value per
    source and detail scale, shape ``(n, n_scales)``. ``weights`` has shape
    ``(n, n_scales * height * width)`` laid out scale-major like the detail
    planes; ``None`` means all ones.
    """

    lambdas: np.ndarray
    weights: Optional[np.ndarray] = None
    k_mad: float = 3.0

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if np.any(self.lambdas < 0):
            raise ValueError("lambdas must be non-negative")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if np.any(self.weights <= 0) or np.any(self.weights > 1):
                raise ValueError("weights must lie in (0, 1]")

    def scale_lambdas(self, n_scales):
        """Lambdas broadcast to ``(n, n_scales)``."""
        lam = self.lambdas
        if lam.ndim == 1:
            lam = np.repeat(lam[:, None], n_scales, axis=1)
        if lam.shape[1] != n_scales:
            raise ValueError(f"lambdas shape {lam.shape} incompatible with {n_scales} scales")
        return lam

    def entry_thresholds(self, geom):
        """Per-coefficient ``lam_i * W_ij`` shaped ``(n, n_scales, height, width)``."""
        lam = self.scale_lambdas(geom.n_scales)
        out = np.broadcast_to(lam[:, :, None, None], lam.shape + geom.shape)
        if self.weights is None:
            return out
        W = self.weights.reshape(lam.shape[0], geom.n_scales, geom.height, geom.width)
        return out * W


def _check_shapes(X, A, S):
    if A.shape[0] != X.shape[0] or S.shape[1] != X.shape[1] or A.shape[1] != S.shape[0]:
        raise ValueError(f"shape mismatch: X{X.shape}, A{A.shape}, S{S.shape}")


def residual(X, A, S):
    X, A, S = (np.asarray(M, dtype=np.float64) for M in (X, A, S))
    _check_shapes(X, A, S)
    return A @ S - X


def data_fidelity(X, A, S):
    R = residual(X, A, S)
    return 0.5 * float(np.sum(R * R))


def sparsity_penalty(S, penalty: Penalty, geom: Geometry):
    details = analyze_matrix(S, geom)[:, :-1]
    return float(np.sum(penalty.entry_thresholds(geom) * np.abs(details)))


def is_feasible(A, tol=FEASIBILITY_TOL):
    return bool(np.all(np.linalg.norm(A, axis=0) <= 1.0 + tol))


def full_objective(X, A, S, penalty: Penalty, geom: Geometry):
    """Return ``(fidelity + penalty, feasible)``.

    The indicator term is reported as the boolean ``feasible`` instead of
    ``inf`` so that traces stay finite.
    """
    value = data_fidelity(X, A, S) + sparsity_penalty(S, penalty, geom)
    return value, is_feasible(A)


def grad_S(X, A, S):
    """Gradient of the fidelity term in ``S``: ``A^T (A S - X)``."""
    return np.asarray(A).T @ residual(X, A, S)


def grad_A(X, A, S):
    """Gradient of the fidelity term in ``A``: ``(A S - X) S^T``."""
    return residual(X, A, S) @ np.asarray(S).T
