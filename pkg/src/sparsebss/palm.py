"""PALM refinement: alternating proximal gradient steps on S and A.

The iterate is kept in the starlet domain. With ``Xc`` and ``C`` the stacked
starlet planes (details and coarse) of the observations and the sources,
linearity gives ``Xc = A C + Nc``, and PALM minimizes

    1/2 ||Xc - A C||^2 + sum lam_i W_ij |C_ij (details)| + i{||A^i||_2 <= 1}(A)

for which soft-thresholding is the exact proximal operator. The S-step is a
gradient step of size ``gamma / ||A||_2^2`` followed by soft-thresholding of
the detail coefficients (coarse plane kept); the A-step is a gradient step of
size ``gamma / ||C||_2^2`` followed by projection of the columns onto the unit
l2 ball. Sources are synthesized from ``C`` on output.

Two threshold modes:

``"mad"``
    thresholds recomputed each iteration as ``k_mad * MAD`` (per source and
    scale) of the gradient-step point, i.e. of a noise projection near the
    solution. With ``freeze_after`` set, the last recomputed lambdas are
    frozen after that fraction of the budget.
``"frozen"``
    fixed lambdas; the objective is then a fixed function and the run stops
    early once its relative change over a 10-iteration window falls below
    ``tol_objective`` (``0`` runs the whole budget).

Lambdas are in objective units: the threshold applied to an entry is
``step * lambda_i * W_ij``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gmca import mad_per_scale
from .numkernel import project_columns_ball, soft_threshold, spectral_norm
from .objective import Penalty
from .result import SeparationResult, SolverError
from .starlet import Geometry, analyze_matrix, synthesize_matrix

STOP_WINDOW = 10


@dataclass
class PalmConfig:
    n_iters: int = 2000
    gamma: float = 0.9
    k_mad: float = 3.0
    threshold_mode: str = "mad"  # "mad" or "frozen"
    lambdas: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    freeze_after: Optional[float] = None
    tol_objective: float = 1e-8
    ridge: float = 1e-12
    n_scales: int = 3

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.k_mad <= 0:
            raise ValueError("k_mad must be positive")
        if self.n_iters < 0:
            raise ValueError("n_iters must be >= 0")
        if self.threshold_mode not in ("mad", "frozen"):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.threshold_mode == "frozen" and self.lambdas is None:
            raise ValueError("frozen mode needs lambdas")
        if self.lambdas is not None:
            self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
            if np.any(self.lambdas < 0):
                raise ValueError("lambdas must be non-negative")
        if self.freeze_after is not None and not 0 <= self.freeze_after <= 1:
            raise ValueError("freeze_after must lie in [0, 1]")


class _Lipschitz:
    """Warm-started spectral norm estimates for one solve."""

    def __init__(self):
        self._vec = {}

    def __call__(self, key, M):
        est = spectral_norm(M, tol=1e-12, max_iter=1000, v0=self._vec.get(key))
        self._vec[key] = est.vector
        return est.value**2


def _lipschitz(lipschitz, key, M):
    return lipschitz(key, M) if lipschitz else spectral_norm(M).value ** 2


def coef_step_S(Xc, A, C, cfg: PalmConfig, geom: Geometry, lambdas=None, lipschitz=None):
    """S-step on starlet planes ``C`` shaped ``(n, n_scales + 1, h, w)``.

    Returns ``(C_new, lambdas_used, step)``.
    """
    L = _lipschitz(lipschitz, "A", A)
    if L <= 0:
        raise SolverError("zero mixing iterate")
    step = cfg.gamma / L
    n = C.shape[0]
    R = A @ C.reshape(n, -1) - Xc.reshape(Xc.shape[0], -1)
    G = C - step * (A.T @ R).reshape(C.shape)
    if lambdas is None:
        lambdas = cfg.k_mad * mad_per_scale(G[:, :-1]) / step
    pen = Penalty(lambdas, cfg.weights, cfg.k_mad)
    G[:, :-1] = soft_threshold(G[:, :-1], step * pen.entry_thresholds(geom))
    return G, pen.scale_lambdas(geom.n_scales), step


def palm_step_S(X, A, S, cfg: PalmConfig, geom: Geometry, lambdas=None, lipschitz=None):
    """One proximal gradient step on ``S``; returns ``(S_new, lambdas_used)``.

    Equivalent to transforming ``G = S - step A^T (A S - X)``, soft-thresholding
    its detail coefficients at ``step * lambda * W`` and synthesizing. When
    ``lambdas`` is ``None`` they are recomputed from the MAD of the detail
    coefficients of ``G``.
    """
    C, lam, _ = coef_step_S(
        analyze_matrix(X, geom), A, analyze_matrix(S, geom), cfg, geom, lambdas, lipschitz
    )
    return synthesize_matrix(C), lam


def palm_step_A(X, A, S, cfg: PalmConfig, lipschitz=None):
    """Projected gradient step on ``A`` onto the product of unit l2 balls.

    ``X`` and ``S`` may be pixel-domain matrices or flattened starlet planes;
    the update has the same form in both.
    """
    L = _lipschitz(lipschitz, "S", S)
    if L <= 0:
        raise SolverError("zero source iterate")
    step = cfg.gamma / L
    return project_columns_ball(A - step * ((A @ S - X) @ S.T))


def coefficient_objective(Xc, A, C, penalty: Penalty, geom: Geometry):
    """Starlet-domain cost ``1/2 ||Xc - A C||^2 + sum lam W |details|``."""
    n = C.shape[0]
    R = A @ C.reshape(n, -1) - Xc.reshape(Xc.shape[0], -1)
    return 0.5 * float(np.sum(R * R)) + float(
        np.sum(penalty.entry_thresholds(geom) * np.abs(C[:, :-1]))
    )


def run_palm(X, cfg: PalmConfig, A0, S0, image_shape):
    """Alternate S- and A-steps from ``(A0, S0)``.

    ``objective_trace[k]`` is :func:`coefficient_objective` after iteration
    ``k`` under the lambdas in force at that iteration;
    ``diagnostics["initial_objective"]`` is the cost of the starting point
    (frozen mode only). ``thresholds`` of the result are the final lambdas
    (objective units, shape ``(n, n_scales)``).
    """
    X = np.asarray(X, dtype=np.float64)
    A = project_columns_ball(np.array(A0, dtype=np.float64))
    S0 = np.asarray(S0, dtype=np.float64)
    if A.shape[0] != X.shape[0] or S0.shape != (A.shape[1], X.shape[1]):
        raise ValueError(f"inconsistent shapes X{X.shape}, A0{A.shape}, S0{S0.shape}")
    geom = Geometry(image_shape[1], image_shape[0], cfg.n_scales)
    Xc = analyze_matrix(X, geom)
    C = analyze_matrix(S0, geom)
    m, n = A.shape
    lip = _Lipschitz()

    frozen = cfg.threshold_mode == "frozen"
    lambdas = cfg.lambdas if frozen else None
    freeze_at = None
    if not frozen and cfg.freeze_after is not None:
        freeze_at = int(np.ceil(cfg.freeze_after * cfg.n_iters))

    res = SeparationResult(A=A, S=S0, method="palm")
    trace = res.objective_trace
    frozen_since = 0 if frozen else None
    if frozen:
        res.diagnostics["initial_objective"] = coefficient_objective(
            Xc, A, C, Penalty(lambdas, cfg.weights), geom
        )
    for it in range(cfg.n_iters):
        if freeze_at is not None and it == freeze_at and lambdas is not None:
            frozen, frozen_since = True, it
        try:
            C, lambdas, _ = coef_step_S(Xc, A, C, cfg, geom, lambdas if frozen else None, lip)
            A = palm_step_A(Xc.reshape(m, -1), A, C.reshape(n, -1), cfg, lip)
        except SolverError as err:
            raise SolverError(err.message, stage="palm", iteration=it) from err
        res.threshold_history.append(lambdas)
        trace.append(coefficient_objective(Xc, A, C, Penalty(lambdas, cfg.weights), geom))

        if frozen and cfg.tol_objective > 0 and it - frozen_since >= STOP_WINDOW:
            old, new = trace[-1 - STOP_WINDOW], trace[-1]
            if abs(old - new) <= cfg.tol_objective * max(abs(new), np.finfo(float).tiny):
                res.converged = True
                break

    res.A = A
    res.S = synthesize_matrix(C)
    res.n_iter = len(trace)
    res.thresholds = lambdas
    res.diagnostics["frozen_from"] = frozen_since
    return res


def compute_reweighting(S_ref, epsilon, geom: Geometry):
    """Reweighted-l1 weights from the starlet details of ``S_ref``.

    ``W_ij = eps / (eps + |c_ij| / max_j |c_ij|)`` where ``c`` are the detail
    coefficients of row ``i``. All-zero rows get weight 1. Returned with shape
    ``(n, n_scales * height * width)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    details = np.abs(analyze_matrix(S_ref, geom)[:, :-1]).reshape(len(S_ref), -1)
    row_max = details.max(axis=1, keepdims=True)
    ratio = np.divide(details, row_max, out=np.zeros_like(details), where=row_max > 0)
    return epsilon / (epsilon + ratio)


def noise_reweighting(S_ref, sigma, factor, geom: Geometry):
    """Reweighted-l1 weights with a noise-scaled offset.

    ``W_ij = f s_il / (f s_il + |c_ij|)`` where ``s_il`` is the noise level of
    source ``i`` at the scale ``l`` of coefficient ``j`` (shape ``(n, n_scales)``)
    and ``f = factor``. Coefficients well above the noise are barely penalized,
    those at noise level keep about ``1 / (1 + 1/f)`` of the penalty.
    """
    if factor <= 0:
        raise ValueError("factor must be positive")
    sigma = np.asarray(sigma, dtype=np.float64)
    details = np.abs(analyze_matrix(S_ref, geom)[:, :-1])
    if sigma.shape != details.shape[:2]:
        raise ValueError(f"sigma shape {sigma.shape} does not match {details.shape[:2]}")
    off = factor * sigma[:, :, None, None]
    W = np.divide(off, off + details, out=np.ones_like(details), where=(off + details) > 0)
    # zero noise estimate would give W = 0 exactly on active entries
    W = np.maximum(W, np.finfo(np.float64).tiny)
    return W.reshape(len(S_ref), -1)
