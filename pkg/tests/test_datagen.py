import numpy as np
import pytest

from sparsebss.datagen import (
    SyntheticSpec,
    add_noise,
    gen_mixing,
    gen_problem,
    gen_sources,
    planted_coefficients,
)
from sparsebss.metrics import snr_db
from sparsebss.starlet import synthesize_matrix


def small(**kw):
    return SyntheticSpec(width=32, height=32, **kw)


def test_shapes_and_determinism():
    a, b = gen_problem(small(rng_seed=4)), gen_problem(small(rng_seed=4))
    assert a.X.shape == (2, 1024) and a.S_true.shape == (2, 1024) and a.A_true.shape == (2, 2)
    for name in ("X", "A_true", "S_true", "N"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = gen_problem(small(rng_seed=5))
    assert not np.array_equal(a.S_true, c.S_true)


def test_noise_seed_leaves_sources_and_mixing_alone():
    a = gen_problem(small(rng_seed=1, noise_seed=10))
    b = gen_problem(small(rng_seed=1, noise_seed=11))
    assert np.array_equal(a.S_true, b.S_true) and np.array_equal(a.A_true, b.A_true)
    assert not np.array_equal(a.N, b.N)


@pytest.mark.parametrize("snr", [5.0, 10.0, 20.0, 40.0])
def test_achieved_snr(snr):
    p = gen_problem(small(snr_db_target=snr, rng_seed=2))
    assert snr_db(p.A_true @ p.S_true, p.N) == pytest.approx(snr, abs=1e-9)
    assert p.metadata["achieved_snr_db"] == pytest.approx(snr, abs=1e-9)
    assert np.array_equal(p.X, p.A_true @ p.S_true + p.N)


def test_infinite_snr_is_noiseless():
    p = gen_problem(small(snr_db_target=float("inf")))
    assert not np.any(p.N) and np.array_equal(p.X, p.A_true @ p.S_true)


def test_mixing_condition_and_unit_columns():
    spec = SyntheticSpec(n_sources=3, m_obs=5, condition_number=10.0, rng_seed=8)
    A, info = gen_mixing(spec)
    assert A.shape == (5, 3)
    assert np.allclose(np.linalg.norm(A, axis=0), 1.0)
    assert info["condition_number_before_normalization"] == pytest.approx(10.0, rel=1e-9)
    assert info["condition_number_after_normalization"] == pytest.approx(np.linalg.cond(A))


def test_planted_coefficients_sparsity():
    spec = SyntheticSpec(width=64, height=64, sparsity_rate=0.05, rng_seed=3)
    coefs = planted_coefficients(spec)
    rate = np.count_nonzero(coefs[:, :-1]) / coefs[:, :-1].size
    # binomial std is about 0.0014 for 24576 draws
    assert abs(rate - 0.05) < 0.01
    assert np.allclose(synthesize_matrix(coefs), gen_sources(spec), atol=0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(condition_number=0.5)
    with pytest.raises(ValueError):
        SyntheticSpec(n_sources=3, m_obs=2)
    with pytest.raises(ValueError):
        SyntheticSpec(sparsity_rate=0.0)
    with pytest.raises(ValueError):
        SyntheticSpec(width=4, height=4)
    with pytest.raises(ValueError, match="zero signal"):
        add_noise(np.zeros((2, 3)), 10.0, seed=0)
