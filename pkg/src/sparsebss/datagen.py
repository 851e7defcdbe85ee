"""Synthetic sparse BSS problems: starlet-sparse sources, conditioned mixing, SNR-calibrated noise.

All randomness flows from ``numpy.random.SeedSequence(rng_seed)`` through
PCG64 generators. Sources, mixing and noise use independent child streams,
so changing ``noise_seed`` never changes ``A_true`` or ``S_true``.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .metrics import snr_db
from .numkernel import normalize_columns_sphere
from .starlet import Geometry, forward_stack, synthesize_matrix

PLANTED_AMPLITUDE = 10.0
COARSE_STD = 0.1


@dataclass
class SyntheticSpec:
    n_sources: int = 2
    width: int = 128
    height: int = 128
    m_obs: Optional[int] = None  # defaults to n_sources
    sparsity_rate: float = 0.02
    condition_number: float = 10.0
    snr_db_target: float = 20.0
    n_scales: int = 3
    rng_seed: int = 0
    noise_seed: Optional[int] = None  # defaults to a child stream of rng_seed

    def __post_init__(self):
        if self.m_obs is None:
            self.m_obs = self.n_sources
        if self.n_sources < 1:
            raise ValueError("n_sources must be >= 1")
        if self.m_obs < self.n_sources:
            raise ValueError("m_obs must be >= n_sources")
        if self.condition_number < 1:
            raise ValueError("condition_number must be >= 1")
        if not 0 < self.sparsity_rate <= 1:
            raise ValueError("sparsity_rate must lie in (0, 1]")
        Geometry(self.width, self.height, self.n_scales)

    @property
    def geometry(self):
        return Geometry(self.width, self.height, self.n_scales)

    def streams(self):
        """Generators for (sources, mixing, noise)."""
        src, mix, noise = np.random.SeedSequence(self.rng_seed).spawn(3)
        if self.noise_seed is not None:
            noise = np.random.SeedSequence(self.noise_seed)
        return tuple(np.random.Generator(np.random.PCG64(s)) for s in (src, mix, noise))


@dataclass
class SeparationProblem:
    """Observations ``X`` and, for synthetic problems, the ground truth."""

    X: np.ndarray
    image_shape: tuple
    A_true: Optional[np.ndarray] = None
    S_true: Optional[np.ndarray] = None
    N: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)


def planted_coefficients(spec: SyntheticSpec, rng=None):
    """Sparse starlet coefficients ``(n, n_scales + 1, h, w)`` the sources are built from.

    Detail scale ``j`` has Bernoulli(sparsity_rate) active entries drawn as
    ``10 * 2**-j * N(0, 1)``; the coarse plane is a smooth random field of
    standard deviation 0.1.
    """
    if rng is None:
        rng = spec.streams()[0]
    geom = spec.geometry
    n, J = spec.n_sources, spec.n_scales
    coefs = np.zeros((n, J + 1) + geom.shape)
    for i in range(n):
        for j in range(J):
            active = rng.random(geom.shape) < spec.sparsity_rate
            values = rng.standard_normal(geom.shape)
            coefs[i, j] = np.where(active, PLANTED_AMPLITUDE * 2.0**-j * values, 0.0)
        field_ = forward_stack(rng.standard_normal(geom.shape), J)[-1]
        coefs[i, J] = COARSE_STD * field_ / field_.std()
    return coefs


def gen_sources(spec: SyntheticSpec, rng=None):
    """Source matrix ``(n_sources, width * height)`` synthesized from :func:`planted_coefficients`."""
    return synthesize_matrix(planted_coefficients(spec, rng))


def gen_mixing(spec: SyntheticSpec, rng=None):
    """Random mixing matrix with a prescribed condition number and unit columns.

    Returns ``(A, info)`` where ``info`` holds the condition number before and
    after the column normalization (normalization perturbs it).
    """
    if rng is None:
        rng = spec.streams()[1]
    m, n = spec.m_obs, spec.n_sources
    U, _, Vt = np.linalg.svd(rng.standard_normal((m, n)), full_matrices=False)
    if n == 1:
        sigma = np.ones(1)
    else:
        sigma = spec.condition_number ** (-np.arange(n) / (n - 1))
    A_raw = (U * sigma) @ Vt
    A, _, _ = normalize_columns_sphere(A_raw)
    info = {
        "condition_number_target": float(spec.condition_number),
        "condition_number_before_normalization": float(np.linalg.cond(A_raw)),
        "condition_number_after_normalization": float(np.linalg.cond(A)),
        "singular_value_ramp": "geometric",
    }
    return A, info


def add_noise(X_clean, snr_db_target, seed=None, rng=None):
    """Add white Gaussian noise scaled to hit ``snr_db_target`` exactly.

    ``snr_db_target = inf`` returns zero noise. Returns ``(X_noisy, N)``.
    """
    X_clean = np.asarray(X_clean, dtype=np.float64)
    signal = np.linalg.norm(X_clean)
    if signal == 0:
        raise ValueError("zero signal")
    if np.isposinf(snr_db_target):
        N = np.zeros_like(X_clean)
        return X_clean.copy(), N
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(seed))
    N = rng.standard_normal(X_clean.shape)
    N *= signal * 10.0 ** (-snr_db_target / 20.0) / np.linalg.norm(N)
    X = X_clean + N
    # exact identity X - X_clean == N in floating point
    return X, X - X_clean


def gen_problem(spec: SyntheticSpec):
    """``X = A S + N`` with the ground truth kept alongside."""
    rng_src, rng_mix, rng_noise = spec.streams()
    S = gen_sources(spec, rng_src)
    A, mix_info = gen_mixing(spec, rng_mix)
    X_clean = A @ S
    X, N = add_noise(X_clean, spec.snr_db_target, rng=rng_noise)
    meta = asdict(spec)
    meta.update(mix_info)
    meta["achieved_snr_db"] = snr_db(X_clean, N) if np.any(N) else float("inf")
    return SeparationProblem(
        X=X, image_shape=(spec.height, spec.width), A_true=A, S_true=S, N=N, metadata=meta
    )
