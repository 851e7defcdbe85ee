"""File formats: binary matrices, TOML configs, JSON reports, JSONL records.

MatFile layout (little-endian)::

    b"SBSS" | version u16 (=1) | rows u32 | cols u32 | rows*cols float64, row-major
"""

import dataclasses
import json
import math
import struct

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .datagen import SyntheticSpec
from .gmca import GmcaConfig
from .hybrid import THRESHOLD_SEEDS, TwoStepConfig
from .palm import PalmConfig

MAGIC = b"SBSS"
VERSION = 1
_HEADER = struct.Struct("<4sHII")


class FormatError(ValueError):
    """Malformed file content or config (maps to the usage/parse exit code)."""


def write_mat(path, M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"MatFile payload must be 2-D, got shape {M.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, M.shape[0], M.shape[1]))
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())


def read_mat(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = blob[_HEADER.size :]
    if len(payload) != rows * cols * 8:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, header says {rows}x{cols}")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)


# --- configs -----------------------------------------------------------------


def load_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise FormatError(f"{path}: {err}") from None


def _build(cls, table, where, convert=None):
    if not isinstance(table, dict):
        raise FormatError(f"[{where}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise FormatError(f"unknown key {where}.{unknown[0]}")
    kwargs = dict(table)
    if convert:
        kwargs = convert(kwargs)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        raise FormatError(f"[{where}] {err}") from None


def _check_types(table, where, types):
    for key, value in table.items():
        want = types.get(key)
        if want is None:
            continue
        if isinstance(value, bool) and bool not in want:
            raise FormatError(f"field {where}.{key}: expected {want[0].__name__}, got bool")
        if not isinstance(value, want):
            raise FormatError(f"field {where}.{key}: expected {want[0].__name__}, got {value!r}")
    return table


_NUM = (float, int)
_INT = (int,)
_GMCA_TYPES = {
    "n_iters": _INT,
    "k_final": _NUM,
    "k_start": _NUM,
    "ridge": _NUM,
    "n_scales": _INT,
    "rng_seed": _INT,
}
_PALM_TYPES = {
    "n_iters": _INT,
    "gamma": _NUM,
    "k_mad": _NUM,
    "threshold_mode": (str,),
    "lambdas": (list,),
    "freeze_after": _NUM,
    "tol_objective": _NUM,
    "ridge": _NUM,
    "n_scales": _INT,
}
_SOLVER_TYPES = {
    "epsilon_mode": (str,),
    "noise_epsilon": _NUM,
    "epsilon": _NUM,
    "use_reweighting": (bool,),
    "threshold_seed": (str,),
    "n_sources": _INT,
    "rng_seed": _INT,
}
_SPEC_TYPES = {
    "n_sources": _INT,
    "width": _INT,
    "height": _INT,
    "m_obs": _INT,
    "sparsity_rate": _NUM,
    "condition_number": _NUM,
    "snr_db_target": _NUM,
    "n_scales": _INT,
    "rng_seed": _INT,
    "noise_seed": _INT,
}


def _snr_value(v, where):
    if isinstance(v, str) and v.lower() in ("inf", "+inf"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"field {where}: expected a number or \"inf\", got {v!r}")
    return float(v)


def solver_config_from_dict(doc, where="solver"):
    """:class:`TwoStepConfig` from a parsed table with optional ``gmca``/``palm`` sub-tables.

    Recognized top-level keys are the two-step fields; ``[gmca]`` and
    ``[palm]`` hold the stage configs. The PALM ``weights`` and, in the
    two-step pipeline, ``lambdas`` come from the warm-up and are not
    configurable.
    """
    doc = dict(doc)
    gmca_t = doc.pop("gmca", {})
    palm_t = doc.pop("palm", {})
    _check_types(doc, where, _SOLVER_TYPES)
    _check_types(gmca_t, f"{where}.gmca", _GMCA_TYPES)
    _check_types(palm_t, f"{where}.palm", _PALM_TYPES)
    if "weights" in palm_t:
        raise FormatError(f"unknown key {where}.palm.weights")
    gmca = _build(GmcaConfig, gmca_t, f"{where}.gmca")
    palm_t = dict(palm_t)
    palm_t.setdefault("threshold_mode", "frozen")
    if palm_t["threshold_mode"] == "frozen" and "lambdas" not in palm_t:
        palm_t["lambdas"] = [0.0]  # placeholder, replaced by the warm-up seed
    palm_t.setdefault("n_scales", gmca.n_scales)
    palm = _build(PalmConfig, palm_t, f"{where}.palm")
    if doc.get("threshold_seed", "residual") not in THRESHOLD_SEEDS:
        raise FormatError(f"field {where}.threshold_seed: expected one of {THRESHOLD_SEEDS}")
    return _build(TwoStepConfig, {**doc, "gmca": gmca, "palm": palm}, where)


def synthetic_spec_from_dict(doc, where="problem"):
    doc = dict(doc)
    if "snr_db_target" in doc:
        doc["snr_db_target"] = _snr_value(doc["snr_db_target"], f"{where}.snr_db_target")
    _check_types(doc, where, _SPEC_TYPES)
    return _build(SyntheticSpec, doc, where)


def config_to_dict(cfg):
    """JSON-ready echo of a config dataclass (arrays become lists)."""
    return _jsonable(dataclasses.asdict(cfg))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


# --- reports -----------------------------------------------------------------


def dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def record_line(rec):
    """One canonical JSONL line: sorted keys, compact separators."""
    return json.dumps(_jsonable(rec), sort_keys=True, separators=(",", ":"))


def write_records(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_line(rec) + "\n")


def read_records(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
