"""Two-step sparse BSS: GMCA warm-up, then PALM refinement seeded by it.

The warm-up output supplies the PALM starting point, the reweighted-l1
weights ``W`` and the MAD-based thresholds, so the refinement runs on a
fixed, well-tuned objective from a point already close to the solution.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .gmca import GmcaConfig, mad_per_scale, run_gmca
from .numkernel import normalize_columns_sphere, pseudo_inverse, relative_ridge
from .objective import residual
from .palm import PalmConfig, compute_reweighting, noise_reweighting, run_palm
from .result import SeparationResult, SolverError
from .starlet import Geometry, analyze_matrix

MODES = ("two-step", "gmca", "palm")
THRESHOLD_SEEDS = ("residual", "gmca")
EPSILON_MODES = ("noise", "relative")


@dataclass
class TwoStepConfig:
    gmca: GmcaConfig = field(default_factory=GmcaConfig)
    # lambdas are placeholders, replaced by the warm-up seed
    palm: PalmConfig = field(
        default_factory=lambda: PalmConfig(threshold_mode="frozen", lambdas=np.zeros(1))
    )
    # "noise": W = f s / (f s + |c|) with s the projected-noise MAD per scale and
    # f = noise_epsilon; "relative": W = eps / (eps + |c| / max|c|) with eps = epsilon
    epsilon_mode: str = "noise"
    noise_epsilon: float = 0.3
    epsilon: float = 1e-3
    use_reweighting: bool = True
    threshold_seed: str = "residual"
    n_sources: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_sources < 1:
            raise ValueError("n_sources must be >= 1")
        if self.epsilon <= 0 or self.noise_epsilon <= 0:
            raise ValueError("epsilon and noise_epsilon must be positive")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ValueError(f"epsilon_mode must be one of {EPSILON_MODES}")
        if self.threshold_seed not in THRESHOLD_SEEDS:
            raise ValueError(f"threshold_seed must be one of {THRESHOLD_SEEDS}")
        if self.gmca.n_scales != self.palm.n_scales:
            raise ValueError("gmca and palm must use the same number of scales")


def _seed_streams(seed):
    """Independent generators for the random start and GMCA's redraws."""
    init, redraw = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(init)), int(redraw.generate_state(1)[0])


def random_mixing(m, n, rng):
    A, _, _ = normalize_columns_sphere(rng.standard_normal((m, n)))
    return A


def residual_lambdas(X, A, S, k, geom: Geometry, ridge=1e-12):
    """``k * MAD`` per source and scale of the starlet details of ``A^+ (X - A S)``.

    Near the solution the residual is the noise, so these lambdas threshold
    the noise as projected onto the source space.
    """
    proj = -(pseudo_inverse(A, relative_ridge(A, ridge)) @ residual(X, A, S))
    return k * mad_per_scale(analyze_matrix(proj, geom)[:, :-1])


def run_two_step(X, cfg: TwoStepConfig, image_shape):
    """Random start, GMCA warm-up, PALM refinement.

    ``stages`` of the result holds the ``"gmca"`` and ``"palm"`` stage results;
    ``diagnostics`` records the seeded lambdas and whether reweighting was on.
    """
    X = np.asarray(X, dtype=np.float64)
    m, t = X.shape
    n = cfg.n_sources
    rng, redraw_seed = _seed_streams(cfg.rng_seed)
    if n > m:
        raise ValueError(f"{n} sources cannot be separated from {m} observations")
    geom = Geometry(image_shape[1], image_shape[0], cfg.gmca.n_scales)

    A0 = random_mixing(m, n, rng)
    warm = run_gmca(X, dataclasses.replace(cfg.gmca, rng_seed=redraw_seed), A0, image_shape)

    sigma = residual_lambdas(X, warm.A, warm.S, 1.0, geom, cfg.gmca.ridge)
    weights = None
    if cfg.use_reweighting and cfg.epsilon_mode == "noise":
        weights = noise_reweighting(warm.S, sigma, cfg.noise_epsilon, geom)
    elif cfg.use_reweighting:
        weights = compute_reweighting(warm.S, cfg.epsilon, geom)
    if cfg.threshold_seed == "residual":
        lambdas = cfg.palm.k_mad * sigma
    else:
        # GMCA thresholds are applied values; convert with the first PALM step size
        L = np.linalg.norm(warm.A, 2) ** 2
        lambdas = warm.thresholds * L / cfg.palm.gamma
    palm_cfg = dataclasses.replace(cfg.palm, lambdas=lambdas, weights=weights)

    if palm_cfg.n_iters == 0:
        refined = SeparationResult(A=warm.A, S=warm.S, method="palm", thresholds=lambdas)
    else:
        try:
            refined = run_palm(X, palm_cfg, warm.A, warm.S, image_shape)
        except SolverError as err:
            raise SolverError(err.message, stage="palm", iteration=err.iteration) from err

    out = SeparationResult(
        A=refined.A,
        S=refined.S,
        method="two-step",
        n_iter=warm.n_iter + refined.n_iter,
        objective_trace=list(refined.objective_trace),
        thresholds=refined.thresholds,
        threshold_history=list(refined.threshold_history),
        k_history=list(warm.k_history),
        converged=refined.converged,
        stages={"gmca": warm, "palm": refined},
    )
    out.diagnostics = {
        "seeded_lambdas": np.asarray(lambdas).tolist(),
        "threshold_seed": cfg.threshold_seed,
        "reweighting": cfg.use_reweighting,
        "epsilon_mode": cfg.epsilon_mode,
        "epsilon": cfg.noise_epsilon if cfg.epsilon_mode == "noise" else cfg.epsilon,
        "noise_mad": sigma.tolist(),
        "palm_threshold_mode": palm_cfg.threshold_mode,
    }
    return out


def run_palm_random_init(X, cfg: TwoStepConfig, image_shape):
    """PALM alone from a random start: ``A0`` random, ``S0 = A0^+ X``, no reweighting.

    Thresholds follow ``cfg.palm.k_mad`` with per-iteration MAD recomputation
    over the whole budget, since there is no warm-up to seed them from.
    """
    X = np.asarray(X, dtype=np.float64)
    rng, _ = _seed_streams(cfg.rng_seed)
    A0 = random_mixing(X.shape[0], cfg.n_sources, rng)
    S0 = pseudo_inverse(A0, relative_ridge(A0, cfg.gmca.ridge)) @ X
    palm_cfg = dataclasses.replace(
        cfg.palm, threshold_mode="mad", lambdas=None, weights=None, freeze_after=None
    )
    res = run_palm(X, palm_cfg, A0, S0, image_shape)
    res.diagnostics.update({"init": "random A0, least-squares S0", "reweighting": False})
    return res


def run_gmca_only(X, cfg: TwoStepConfig, image_shape):
    """The warm-up alone, from the same random start as :func:`run_two_step`."""
    X = np.asarray(X, dtype=np.float64)
    rng, redraw_seed = _seed_streams(cfg.rng_seed)
    A0 = random_mixing(X.shape[0], cfg.n_sources, rng)
    return run_gmca(X, dataclasses.replace(cfg.gmca, rng_seed=redraw_seed), A0, image_shape)


def run_mode(X, mode, cfg: TwoStepConfig, image_shape):
    """Dispatch on ``mode`` (one of :data:`MODES`)."""
    if mode == "two-step":
        return run_two_step(X, cfg, image_shape)
    if mode == "gmca":
        return run_gmca_only(X, cfg, image_shape)
    if mode == "palm":
        return run_palm_random_init(X, cfg, image_shape)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
