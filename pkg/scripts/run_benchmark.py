#!/usr/bin/env python3
"""Run a benchmark sweep and compare the two-step solver against both baselines.

    python scripts/run_benchmark.py                      # desk-scale sweep
    python scripts/run_benchmark.py scripts/full_benchmark.toml --workers 4

Writes records.jsonl, timings.jsonl and summary.json under --out and prints
the table followed by the per-SNR margins of the two-step solver.
"""

import argparse
import json
import sys
from pathlib import Path

from sparsebss.cli import main

HERE = Path(__file__).resolve().parent


def margins(summary_path):
    table = json.loads(Path(summary_path).read_text())["table"]
    cells = {(r["mode"], r["snr_db"]): r for r in table}
    for (mode, snr), row in sorted(cells.items(), key=lambda kv: kv[0][1]):
        if mode != "two-step" or row["mean_c_a_db"] is None:
            continue
        for other in ("gmca", "palm"):
            o = cells.get((other, snr))
            if o and o["mean_c_a_db"] is not None:
                print(f"SNR {snr:g} dB: two-step - {other} = {row['mean_c_a_db'] - o['mean_c_a_db']:+.2f} dB")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default=str(HERE / "desk_benchmark.toml"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="benchmark_out")
    args = ap.parse_args()
    argv = ["benchmark", "--config", args.config, "--workers", str(args.workers), "--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    code = main(argv)
    if code == 0:
        margins(Path(args.out) / "summary.json")
    sys.exit(code)
