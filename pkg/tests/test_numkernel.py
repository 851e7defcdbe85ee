import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparsebss.numkernel import (
    mad,
    mad_rows,
    normalize_columns_sphere,
    project_columns_ball,
    pseudo_inverse,
    relative_ridge,
    soft_threshold,
    spectral_norm,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(st.lists(finite, min_size=1, max_size=40))
def test_mad_matches_stdlib_median(values):
    med = statistics.median(values)
    expected = statistics.median(abs(v - med) for v in values)
    assert mad(values) == pytest.approx(expected, rel=1e-12, abs=1e-9)


def test_mad_even_length_uses_midpoint():
    # median 2.5, deviations 1.5 .5 .5 1.5
    assert mad([1.0, 2.0, 3.0, 4.0]) == 1.0


def test_mad_empty():
    with pytest.raises(ValueError, match="empty"):
        mad([])


def test_mad_rows_agrees_with_mad():
    M = np.random.default_rng(1).standard_normal((3, 101))
    assert np.allclose(mad_rows(M), [mad(r) for r in M], rtol=0, atol=0)


@given(arrays(np.float64, (4, 5), elements=finite), st.floats(0, 1e3))
def test_soft_threshold_against_scalar_loop(M, t):
    out = soft_threshold(M, t)
    for x, y in zip(M.ravel(), out.ravel()):
        ref = x - t if x > t else (x + t if x < -t else 0.0)
        assert y == pytest.approx(ref, abs=1e-9)


def test_soft_threshold_is_prox_of_l1():
    # brute force minimization of 1/2 (z - x)^2 + t |z| on a fine grid
    grid = np.linspace(-5, 5, 200001)
    for x, t in [(2.0, 0.5), (-1.2, 1.5), (0.3, 0.1), (-3.0, 0.0)]:
        z = grid[np.argmin(0.5 * (grid - x) ** 2 + t * np.abs(grid))]
        assert soft_threshold(np.array([[x]]), t)[0, 0] == pytest.approx(z, abs=1e-4)


def test_soft_threshold_broadcast_and_errors():
    M = np.ones((2, 3))
    out = soft_threshold(M, np.array([[0.5], [2.0]]))
    assert np.array_equal(out, [[0.5] * 3, [0.0] * 3])
    with pytest.raises(ValueError, match="negative"):
        soft_threshold(M, -1.0)
    with pytest.raises(ValueError, match="does not match"):
        soft_threshold(M, np.ones(4))


@given(arrays(np.float64, (3, 4), elements=st.floats(-100, 100)))
def test_project_columns_ball(A):
    P = project_columns_ball(A)
    assert np.all(np.linalg.norm(P, axis=0) <= 1 + 1e-12)
    assert np.allclose(project_columns_ball(P), P)
    inside = np.linalg.norm(A, axis=0) <= 1
    assert np.array_equal(P[:, inside], A[:, inside])


def test_normalize_columns_sphere_flags_zero_columns():
    A = np.array([[3.0, 0.0], [4.0, 0.0]])
    U, scales, bad = normalize_columns_sphere(A)
    assert np.allclose(U[:, 0], [0.6, 0.8])
    assert np.array_equal(U[:, 1], [0.0, 0.0])
    assert list(scales) == [5.0, 1.0]
    assert list(bad) == [False, True]


@settings(deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.integers(1, 7))
def test_spectral_norm_matches_svd(seed, m, n):
    M = np.random.default_rng(seed).standard_normal((m, n))
    est = spectral_norm(M)
    assert est.converged
    assert est.value == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-6)


def test_spectral_norm_unit_column_gram():
    # equal-diagonal 2x2 Gram: all-ones would be an eigenvector of the small eigenvalue
    A = np.array([[0.9, 0.2], [np.sqrt(1 - 0.81), np.sqrt(1 - 0.04)]])
    A = A / np.linalg.norm(A, axis=0)
    assert spectral_norm(A).value == pytest.approx(np.linalg.norm(A, 2), rel=1e-9)


def test_spectral_norm_zero_and_null_start():
    assert spectral_norm(np.zeros((3, 2))).value == 0.0
    M = np.diag([0.0, 2.0])
    assert spectral_norm(M, v0=np.array([1.0, 0.0])).value == pytest.approx(2.0)


def test_spectral_norm_reports_non_convergence():
    M = np.diag([1.0, 0.999999])
    est = spectral_norm(M, tol=1e-15, max_iter=3)
    assert not est.converged and est.n_iter == 3


@pytest.mark.parametrize("shape", [(5, 3), (3, 5), (4, 4)])
def test_pseudo_inverse_matches_pinv(shape):
    M = np.random.default_rng(2).standard_normal(shape)
    assert np.allclose(pseudo_inverse(M), np.linalg.pinv(M), atol=1e-10)


def test_pseudo_inverse_rank_deficient():
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(np.linalg.LinAlgError):
        pseudo_inverse(M)
    assert np.all(np.isfinite(pseudo_inverse(M, ridge=1e-6)))


def test_relative_ridge():
    M = np.array([[3.0, 0.0], [4.0, 1.0]])
    assert relative_ridge(M, 0.5) == pytest.approx(12.5)
    assert relative_ridge(M, 0.0) == 0.0
