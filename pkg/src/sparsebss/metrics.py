"""Separation quality: mixing-matrix criterion ``C_A`` and SNR."""

import itertools
from dataclasses import dataclass

import numpy as np

from .numkernel import normalize_columns_sphere

C_A_CAP_DB = 60.0
MAX_EXHAUSTIVE_SOURCES = 8


@dataclass
class AlignmentReport:
    permutation: tuple  # estimated column permutation[i] is matched to true column i
    signs_scales: np.ndarray  # factor applied to each matched estimated column
    aligned: np.ndarray  # aligned, unit-column estimate
    aligned_error: np.ndarray  # |aligned^+ A_true - I|
    c_a_db: float
    capped: bool


def _alignment_score(A_est, A_true, perm):
    return float(np.sum(np.abs(np.sum(A_est[:, perm] * A_true, axis=0))))


def align(A_est, A_true):
    """Match estimated columns to true ones up to permutation, sign and scale.

    Both matrices are column-normalized, then the permutation maximizing
    ``sum_i |<A_est[:, perm[i]], A_true[:, i]>|`` is found by exhaustive search
    and each matched column's sign is set so that inner product is positive.
    """
    A_est = np.asarray(A_est, dtype=np.float64)
    A_true = np.asarray(A_true, dtype=np.float64)
    if A_est.shape != A_true.shape:
        raise ValueError(f"shape mismatch: {A_est.shape} vs {A_true.shape}")
    n = A_true.shape[1]
    if n > MAX_EXHAUSTIVE_SOURCES:
        raise ValueError("use Hungarian variant")
    est, est_norms, _ = normalize_columns_sphere(A_est)
    true, _, _ = normalize_columns_sphere(A_true)

    best = max(itertools.permutations(range(n)), key=lambda p: _alignment_score(est, true, p))
    aligned = est[:, best]
    signs = np.where(np.sum(aligned * true, axis=0) < 0, -1.0, 1.0)
    aligned = aligned * signs
    factors = signs / est_norms[list(best)]

    # SVD pseudo-inverse: collapsed (collinear) estimates must still score
    E = np.abs(np.linalg.pinv(aligned) @ true - np.eye(n))
    c_a, capped = _c_a_from_error(E)
    return AlignmentReport(best, factors, aligned, E, c_a, capped)


def _c_a_from_error(E):
    n = E.shape[0]
    if n == 1:
        return C_A_CAP_DB, True
    off = E[~np.eye(n, dtype=bool)]
    mean = float(np.mean(off))
    if mean < 10.0 ** (-C_A_CAP_DB / 10.0):
        return C_A_CAP_DB, True
    return float(-10.0 * np.log10(mean)), False


def c_a(A_est, A_true):
    """Mixing matrix criterion in dB (higher is better, capped at 60 dB).

    ``C_A = -10 log10(mean off-diagonal |A_aligned^+ A_true - I|)``.
    """
    return align(A_est, A_true).c_a_db


def snr_db(signal, noise):
    """``10 log10(||signal||_F^2 / ||noise||_F^2)``; ``inf`` for zero noise."""
    signal = np.asarray(signal, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if signal.shape != noise.shape:
        raise ValueError("signal and noise shapes differ")
    pn = float(np.sum(noise * noise))
    if pn == 0:
        return float("inf")
    return float(10.0 * np.log10(np.sum(signal * signal) / pn))
