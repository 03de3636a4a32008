#!/usr/bin/env python3
"""Repeated-run selection benchmarks across the built-in designs.

Each row of the table is one (design, n, kernel) cell averaged over --runs
independent draws; per-design selection frequencies land next to the table.
"""

import argparse
import csv
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kgarrote.bench import export_summary, format_summary, make_design, run_experiment
from kgarrote.path import PathConfig

TABLE = [
    # design, n, kernel, overrides
    ("example-1", 64, "gaussian", {}),
    ("example-2", 64, "gaussian", {}),
    ("example-3", 64, "gaussian", {"p": 40}),
    ("zhao-yu", 100, "linear-polynomial", {}),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=20240901)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--designs", default=None, help="comma list; default runs the whole table")
    ap.add_argument("--grid-size", type=int, default=50)
    ap.add_argument("--output-dir", default="benchmark_results")
    args = ap.parse_args(argv)

    wanted = None if args.designs is None else set(args.designs.split(","))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    config = PathConfig(grid_size=args.grid_size)

    rows = []
    for design_name, n, kernel, overrides in TABLE:
        if wanted is not None and design_name not in wanted:
            continue
        design = make_design(design_name, n=n, **overrides)
        t0 = time.time()
        summary = run_experiment(
            design, kernel, args.runs, config, seed=args.seed, jobs=args.jobs
        )
        elapsed = time.time() - t0
        print(f"{format_summary(summary)}  [{elapsed:.1f}s]")
        export_summary(summary, outdir / f"{design_name}_freq.csv")
        rows.append(
            [
                design_name,
                n,
                kernel,
                summary.runs,
                summary.failures,
                repr(summary.fp_mean),
                repr(summary.fp_sd),
                repr(summary.fn_mean),
                repr(summary.fn_sd),
                repr(summary.ms_mean),
                repr(summary.ms_sd),
                repr(summary.rss_mean),
                repr(summary.se_mean),
            ]
        )

    with open(outdir / "benchmark_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "design", "n", "kernel", "runs", "failures",
                "fp_mean", "fp_sd", "fn_mean", "fn_sd",
                "ms_mean", "ms_sd", "rss_mean", "se_mean",
            ]
        )
        w.writerows(rows)
    print(f"wrote {outdir / 'benchmark_table.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
