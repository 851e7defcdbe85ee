"""Command line interface: ``generate``, ``solve``, ``evaluate``, ``benchmark``.

Exit codes: 0 success, 2 usage or parse error, 3 I/O error, 4 solver failure.
The default benchmark worker count comes from ``SBSS_WORKERS`` (else 1).
"""

import argparse
import dataclasses
import hashlib
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .datagen import SyntheticSpec, gen_problem
from .hybrid import MODES, TwoStepConfig, run_mode
from .io import (
    FormatError,
    config_to_dict,
    dump_json,
    load_toml,
    read_mat,
    record_line,
    solver_config_from_dict,
    synthetic_spec_from_dict,
    write_mat,
    write_records,
)
from .metrics import align
from .result import SolverError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4
WORKERS_ENV = "SBSS_WORKERS"
C_A_DEFINITION = (
    "C_A = -10 log10(mean off-diagonal |A_aligned^+ A_true - I|), columns unit-normalized, "
    "aligned by exhaustive permutation/sign search, capped at 60 dB"
)


class UsageError(Exception):
    pass


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _default_workers():
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise UsageError(f"{WORKERS_ENV} must be >= 1")
    return n


def _parse_shape(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--shape expects HxW, got {text!r}") from None
    return h, w


# --- generate ----------------------------------------------------------------


def cmd_generate(args):
    doc = load_toml(args.config) if args.config else {}
    if args.seed is not None:
        doc["rng_seed"] = args.seed
    spec = synthetic_spec_from_dict(doc)
    problem = gen_problem(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, M in (("X", problem.X), ("A_true", problem.A_true), ("S_true", problem.S_true), ("N", problem.N)):
        write_mat(out / f"{name}.sbss", M)
    meta = dict(problem.metadata)
    meta["image_shape"] = list(problem.image_shape)
    meta["config_file"] = str(args.config) if args.config else None
    dump_json(out / "metadata.json", meta)
    print(f"wrote X, A_true, S_true, N to {out}")
    return EXIT_OK


# --- solve -------------------------------------------------------------------


def _image_shape(x_path, n_pixels, shape_arg):
    if shape_arg:
        shape = _parse_shape(shape_arg)
    else:
        meta = Path(x_path).with_name("metadata.json")
        if meta.exists():
            import json

            shape = tuple(json.loads(meta.read_text())["image_shape"])
        else:
            side = math.isqrt(n_pixels)
            if side * side != n_pixels:
                raise UsageError("cannot infer image shape; pass --shape HxW")
            shape = (side, side)
    if shape[0] * shape[1] != n_pixels:
        raise UsageError(f"image shape {shape} does not match {n_pixels} columns")
    return shape


def cmd_solve(args):
    X = read_mat(args.x_file)
    doc = load_toml(args.config) if args.config else {}
    if args.seed is not None:
        doc["rng_seed"] = args.seed
    if args.n_sources is not None:
        doc["n_sources"] = args.n_sources
    cfg = solver_config_from_dict(doc)
    shape = _image_shape(args.x_file, X.shape[1], args.shape)

    t0 = time.perf_counter()
    res = run_mode(X, args.mode, cfg, shape)
    wall = time.perf_counter() - t0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_mat(out / "A_est.sbss", res.A)
    write_mat(out / "S_est.sbss", res.S)
    report = {
        "mode": args.mode,
        "inputs": {"X": {"path": str(args.x_file), "sha256": _sha256(args.x_file)}},
        "config_file": str(args.config) if args.config else None,
        "config": config_to_dict(cfg),
        "seed": cfg.rng_seed,
        "image_shape": list(shape),
        "wall_time_s": wall,
        **res.summary(),
    }
    dump_json(out / "report.json", report)
    print(f"{args.mode}: {res.n_iter} iterations in {wall:.2f} s; wrote {out}")
    return EXIT_OK


# --- evaluate ----------------------------------------------------------------


def cmd_evaluate(args):
    A_est, A_true = read_mat(args.a_est), read_mat(args.a_true)
    if A_est.shape != A_true.shape:
        raise UsageError(f"shape mismatch: {A_est.shape} vs {A_true.shape}")
    rep = align(A_est, A_true)
    report = {
        "inputs": {
            "A_est": {"path": str(args.a_est), "sha256": _sha256(args.a_est)},
            "A_true": {"path": str(args.a_true), "sha256": _sha256(args.a_true)},
        },
        "c_a_db": rep.c_a_db,
        "capped": rep.capped,
        "permutation": list(rep.permutation),
        "signs_scales": rep.signs_scales,
        "definition": C_A_DEFINITION,
    }
    if args.out:
        dump_json(args.out, report)
    print(f"C_A = {rep.c_a_db!r} dB  permutation={list(rep.permutation)}  capped={rep.capped}")
    return EXIT_OK


# --- benchmark ---------------------------------------------------------------

_BENCH_KEYS = {"modes", "snr_list", "n_inits", "base_seed", "problem", "solver"}
_MODE_ALIASES = {
    "two-step": "two-step",
    "twostep": "two-step",
    "gmca": "gmca",
    "gmcaonly": "gmca",
    "palm": "palm",
    "palmmadrandominit": "palm",
}


@dataclasses.dataclass
class BenchmarkSpec:
    modes: list
    snr_list: list
    n_inits: int
    base_seed: int
    problem: dict
    solver: TwoStepConfig

    def __post_init__(self):
        if self.n_inits < 1:
            raise FormatError("n_inits must be >= 1")
        if not self.modes:
            raise FormatError("modes must be non-empty")


def benchmark_spec_from_dict(doc):
    unknown = sorted(set(doc) - _BENCH_KEYS)
    if unknown:
        raise FormatError(f"unknown key {unknown[0]}")
    modes = []
    for m in doc.get("modes", list(MODES)):
        key = str(m).lower().replace("_", "")
        if key not in _MODE_ALIASES:
            raise FormatError(f"field modes: unknown mode {m!r}")
        modes.append(_MODE_ALIASES[key])
    snrs = [_snr(v) for v in doc.get("snr_list", [10.0, 15.0, 20.0])]
    problem = dict(doc.get("problem", {}))
    for banned in ("snr_db_target", "rng_seed", "noise_seed"):
        if banned in problem:
            raise FormatError(f"field problem.{banned} is set by the benchmark")
    synthetic_spec_from_dict(problem)  # validate early
    n_inits = doc.get("n_inits", 10)
    base_seed = doc.get("base_seed", 0)
    for name, v in (("n_inits", n_inits), ("base_seed", base_seed)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise FormatError(f"field {name}: expected an integer, got {v!r}")
    return BenchmarkSpec(
        modes=modes,
        snr_list=snrs,
        n_inits=n_inits,
        base_seed=base_seed,
        problem=problem,
        solver=solver_config_from_dict(doc.get("solver", {})),
    )


def _snr(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"field snr_list: expected numbers, got {v!r}")
    return float(v)


def _derived_seed(*words):
    return int(np.random.SeedSequence(list(words)).generate_state(1)[0])


def benchmark_tasks(spec: BenchmarkSpec):
    """All (snr, mode, init) runs with their derived seeds, in canonical order.

    The sources and mixing matrix depend on ``base_seed`` only, the noise on
    ``(base_seed, snr index)`` and the random start on ``(base_seed, init)``,
    so every mode sees the same data and the same starting points.
    """
    problem_seed = _derived_seed(spec.base_seed, 0)
    tasks = []
    for si, snr in enumerate(spec.snr_list):
        noise_seed = _derived_seed(spec.base_seed, 1, si)
        for mode in spec.modes:
            for init in range(spec.n_inits):
                tasks.append(
                    {
                        "snr_db": snr,
                        "mode": mode,
                        "init": init,
                        "problem_seed": problem_seed,
                        "noise_seed": noise_seed,
                        "init_seed": _derived_seed(spec.base_seed, 2, init),
                    }
                )
    return tasks


def _record_key(rec):
    return (rec["snr_db"], rec["mode"], rec["init"])


def run_benchmark_task(task, problem_fields, solver_cfg):
    """Solve and score one run; failures become error records."""
    rec = dict(task)
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        try:
            spec = SyntheticSpec(
                **problem_fields,
                snr_db_target=task["snr_db"],
                rng_seed=task["problem_seed"],
                noise_seed=task["noise_seed"],
            )
            problem = gen_problem(spec)
            cfg = dataclasses.replace(solver_cfg, rng_seed=task["init_seed"], n_sources=spec.n_sources)
            res = run_mode(problem.X, task["mode"], cfg, problem.image_shape)
            rep = align(res.A, problem.A_true)
            rec.update(
                status="ok",
                c_a_db=rep.c_a_db,
                capped=rep.capped,
                n_iter=res.n_iter,
                converged=res.converged,
            )
        except (SolverError, ValueError, np.linalg.LinAlgError, FloatingPointError) as err:
            rec.update(
                status="error",
                error=str(getattr(err, "message", err)),
                stage=getattr(err, "stage", None),
                c_a_db=None,
            )
    return rec, time.perf_counter() - t0


def run_benchmark(spec: BenchmarkSpec, workers=1):
    """Run the sweep; returns ``(records, runtimes)`` sorted canonically."""
    tasks = benchmark_tasks(spec)
    args = [(t, spec.problem, spec.solver) for t in tasks]
    if workers <= 1:
        results = [run_benchmark_task(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_benchmark_task, *zip(*args)))
    results.sort(key=lambda r: _record_key(r[0]))
    records = [r for r, _ in results]
    runtimes = [{**{k: r[k] for k in ("snr_db", "mode", "init")}, "runtime_s": dt} for r, dt in results]
    return records, runtimes


def summarize(records, spec: BenchmarkSpec):
    """Mean and std (population) of C_A per (mode, snr) over successful runs."""
    table = []
    for mode in spec.modes:
        for snr in spec.snr_list:
            vals = [
                r["c_a_db"]
                for r in records
                if r["mode"] == mode and r["snr_db"] == snr and r["status"] == "ok"
            ]
            n_run = sum(1 for r in records if r["mode"] == mode and r["snr_db"] == snr)
            table.append(
                {
                    "mode": mode,
                    "snr_db": snr,
                    "mean_c_a_db": float(np.mean(vals)) if vals else None,
                    "std_c_a_db": float(np.std(vals)) if vals else None,
                    "n_ok": len(vals),
                    "n_runs": n_run,
                }
            )
    return table


def format_table(table, spec: BenchmarkSpec):
    head = f"{'mode':<10}" + "".join(f"{f'SNR {s:g} dB':>22}" for s in spec.snr_list)
    lines = ["mean C_A (dB) +- std over initializations", head]
    cells = {(row["mode"], row["snr_db"]): row for row in table}
    for mode in spec.modes:
        parts = []
        for snr in spec.snr_list:
            row = cells[(mode, snr)]
            if row["mean_c_a_db"] is None:
                parts.append(f"{'failed':>22}")
                continue
            cell = f"{row['mean_c_a_db']:.2f} +- {row['std_c_a_db']:.2f}"
            if row["n_ok"] < row["n_runs"]:
                cell += f" ({row['n_ok']}/{row['n_runs']})"
            parts.append(f"{cell:>22}")
        lines.append(f"{mode:<10}" + "".join(parts))
    return "\n".join(lines)


def cmd_benchmark(args):
    doc = load_toml(args.config) if args.config else {}
    if args.seed is not None:
        doc["base_seed"] = args.seed
    if args.mode:
        doc["modes"] = [args.mode]
    spec = benchmark_spec_from_dict(doc)
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        raise UsageError("--workers must be >= 1")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records, runtimes = run_benchmark(spec, workers)
    table = summarize(records, spec)
    write_records(out / "records.jsonl", records)
    write_records(out / "timings.jsonl", runtimes)
    dump_json(
        out / "summary.json",
        {
            "config_file": str(args.config) if args.config else None,
            "inputs": {"config_sha256": _sha256(args.config) if args.config else None},
            "base_seed": spec.base_seed,
            "benchmark": {
                "modes": spec.modes,
                "snr_list": spec.snr_list,
                "n_inits": spec.n_inits,
                "problem": spec.problem,
                "solver": config_to_dict(spec.solver),
            },
            "palm_mode_init": "random A0, least-squares S0 = A0^+ X, MAD thresholds every iteration",
            "c_a_definition": C_A_DEFINITION,
            "table": table,
            "version": __version__,
        },
    )
    print(format_table(table, spec))
    return EXIT_OK


# --- entry point -------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="sparsebss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic problem as MatFiles")
    g.add_argument("--config", help="TOML problem config (SyntheticSpec fields)")
    g.add_argument("--seed", type=int, help="overrides rng_seed")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="separate the observations in a MatFile")
    s.add_argument("x_file", help="observations MatFile (rows = channels)")
    s.add_argument("--mode", choices=MODES, default="two-step")
    s.add_argument("--config", help="TOML solver config")
    s.add_argument("--seed", type=int, help="overrides rng_seed (random start)")
    s.add_argument("--n-sources", type=int, dest="n_sources")
    s.add_argument("--shape", help="image shape HxW (default: metadata.json beside X, else square)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="mixing matrix criterion of an estimate")
    e.add_argument("a_est")
    e.add_argument("a_true")
    e.add_argument("--out", help="optional JSON report path")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", help="multi-initialization sweep over SNRs and modes")
    b.add_argument("--config", help="TOML benchmark config")
    b.add_argument("--seed", type=int, help="overrides base_seed")
    b.add_argument("--mode", choices=MODES, help="restrict to one mode")
    b.add_argument("--workers", type=int, help=f"parallel processes (default ${WORKERS_ENV} or 1)")
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        return args.func(args)
    except (UsageError, FormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except SolverError as err:
        where = f" [{err.stage}" + (f", iteration {err.iteration}" if err.iteration is not None else "") + "]"
        print(f"solver failure{where if err.stage else ''}: {err.message}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
