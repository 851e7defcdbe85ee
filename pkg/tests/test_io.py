import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from sparsebss.io import (
    FormatError,
    read_mat,
    record_line,
    solver_config_from_dict,
    synthetic_spec_from_dict,
    write_mat,
)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture], max_examples=50)
@given(arrays(np.float64, array_shapes(min_dims=2, max_dims=2, max_side=9),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_matfile_round_trip_bit_exact(tmp_path, M):
    path = tmp_path / "m.sbss"
    write_mat(path, M)
    back = read_mat(path)
    assert back.shape == M.shape and back.tobytes() == M.astype("<f8").tobytes()


def test_matfile_header_layout(tmp_path):
    path = tmp_path / "m.sbss"
    write_mat(path, np.array([[1.0, 2.0, 3.0]]))
    blob = path.read_bytes()
    assert blob[:4] == b"SBSS"
    assert struct.unpack("<HII", blob[4:14]) == (1, 1, 3)
    assert blob[14:] == struct.pack("<3d", 1.0, 2.0, 3.0)


@pytest.mark.parametrize(
    "mutate, msg",
    [
        (lambda b: b"XXXX" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<H", 2) + b[6:], "version"),
        (lambda b: b[:-1], "payload"),
        (lambda b: b[:6], "truncated"),
    ],
)
def test_matfile_rejects_corruption(tmp_path, mutate, msg):
    path = tmp_path / "m.sbss"
    write_mat(path, np.eye(2))
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError, match=msg):
        read_mat(path)


def test_write_mat_rejects_non_matrix(tmp_path):
    with pytest.raises(ValueError):
        write_mat(tmp_path / "v.sbss", np.ones(3))


def test_solver_config_parsing():
    cfg = solver_config_from_dict(
        {"epsilon": 0.01, "gmca": {"n_iters": 20, "k_final": 2}, "palm": {"n_iters": 5}}
    )
    assert cfg.epsilon == 0.01 and cfg.gmca.n_iters == 20 and cfg.palm.n_iters == 5
    assert cfg.palm.threshold_mode == "frozen"


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"epsilom": 1.0}, "solver.epsilom"),
        ({"gmca": {"iters": 3}}, "solver.gmca.iters"),
        ({"palm": {"weights": [1.0]}}, "solver.palm.weights"),
        ({"gmca": {"n_iters": "ten"}}, "solver.gmca.n_iters"),
        ({"use_reweighting": 1}, "solver.use_reweighting"),
        ({"threshold_seed": "other"}, "solver.threshold_seed"),
    ],
)
def test_solver_config_errors_name_the_field(doc, field):
    with pytest.raises(FormatError, match=field.replace(".", r"\.")):
        solver_config_from_dict(doc)


def test_synthetic_spec_parsing():
    spec = synthetic_spec_from_dict({"width": 32, "height": 16, "snr_db_target": "inf"})
    assert spec.snr_db_target == float("inf") and spec.geometry.shape == (16, 32)
    with pytest.raises(FormatError, match=r"problem\.width"):
        synthetic_spec_from_dict({"width": 3.5})
    with pytest.raises(FormatError, match="condition_number"):
        synthetic_spec_from_dict({"condition_number": 0.1})


def test_record_line_is_canonical():
    assert record_line({"b": 1, "a": np.float64(0.5), "c": float("inf")}) == '{"a":0.5,"b":1,"c":"inf"}'
