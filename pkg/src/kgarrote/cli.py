"""Command-line front end.

Subcommands: fit, path, select, bootstrap, permute, screen, simulate,
diagnose.  Every run writes delimiter-separated result files plus a
``manifest.json`` recording the effective parameters into the output
directory (flag ``--output-dir``, or the ``KGARROTE_OUTPUT_DIR`` environment
variable when the flag is absent).  A plain-text ``key = value`` file passed
via ``--config`` supplies defaults; explicit flags win.

Exit codes: 0 success, 2 usage errors, 3 data errors, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bench import export_summary, format_summary, generate, make_design, run_experiment
from .data import build_distance_stack, load_dataset
from .diagnostics import incoherence_sweep
from .errors import DataError, NumericalError
from .kernel import estimate_smoothing, fit_kernel_machine, kernel_matrix
from .path import PathConfig, export_path, solve_path
from .resampling import ResamplePlan, bootstrap_select, export_report, permutation_select
from .screening import marginal_screen
from .selection import export_criterion, select_min_bic

KERNEL_ALIASES = {
    "gaussian": "gaussian",
    "poly": "linear-polynomial",
    "linear": "linear-polynomial",
    "linear-polynomial": "linear-polynomial",
}

STOCHASTIC = ("bootstrap", "permute", "simulate", "diagnose")


def _kernel(value: str) -> str:
    try:
        return KERNEL_ALIASES[value]
    except KeyError:
        raise argparse.ArgumentTypeError(
            f"unknown kernel {value!r}; choose from {sorted(KERNEL_ALIASES)}"
        ) from None


def _float_list(value: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in value.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse float list {value!r}") from None


def _add_common(sp):
    sp.add_argument("--output-dir", default=None, help="directory for result files")
    sp.add_argument("--delimiter", default=",", help="field delimiter for result files")
    sp.add_argument("--config", default=None, help="key=value file with flag defaults")


def _add_input(sp):
    sp.add_argument("--input", required=True, help="delimited data file with header")
    sp.add_argument("--response", required=True, help="response column name or zero-based index")
    sp.add_argument("--kernel", type=_kernel, default="gaussian")
    sp.add_argument("--screen", type=int, default=None, help="keep this many predictors first")


def _add_path_config(sp):
    sp.add_argument("--grid-size", type=int, default=50)
    sp.add_argument("--penalty-min-ratio", type=float, default=1e-3)
    sp.add_argument("--penalties", type=_float_list, default=None, help="explicit penalty grid")
    sp.add_argument("--max-sweeps", type=int, default=500)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--update-alpha", action="store_true")
    sp.add_argument("--lambda0", type=float, default=None, help="fixed smoothing (skip estimation)")
    sp.add_argument("--rho", type=float, default=None, help="uniform scale for smoothing estimation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgarrote", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="variance-component kernel machine fit")
    _add_common(sp)
    _add_input(sp)
    sp.add_argument("--rho", type=float, default=None)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("path", help="solve the penalized scale path")
    _add_common(sp)
    _add_input(sp)
    _add_path_config(sp)
    sp.set_defaults(func=_cmd_path)

    sp = sub.add_parser("select", help="path plus criterion scoring and the chosen model")
    _add_common(sp)
    _add_input(sp)
    _add_path_config(sp)
    sp.set_defaults(func=_cmd_select)

    sp = sub.add_parser("screen", help="rank predictors by marginal association")
    _add_common(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--response", required=True)
    sp.add_argument("--keep", type=int, required=True)
    sp.set_defaults(func=_cmd_screen)

    sp = sub.add_parser("bootstrap", help="subsample bootstrap selection frequencies")
    _add_common(sp)
    _add_input(sp)
    _add_path_config(sp)
    sp.add_argument("--replicates", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--m", type=int, default=None, help="subsample size (default n/2)")
    sp.add_argument("--threshold", type=float, default=0.6)
    sp.add_argument("--selection", choices=("min-bic", "window"), default="min-bic")
    sp.add_argument("--window", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=_cmd_bootstrap)

    sp = sub.add_parser("permute", help="residual permutation selection frequencies")
    _add_common(sp)
    _add_input(sp)
    _add_path_config(sp)
    sp.add_argument("--replicates", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--threshold", type=float, default=0.6)
    sp.add_argument("--selection", choices=("min-bic", "window"), default="min-bic")
    sp.add_argument("--window", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=_cmd_permute)

    sp = sub.add_parser("simulate", help="repeated-run selection experiment on a named design")
    _add_common(sp)
    sp.add_argument("--design", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--a", type=int, default=None)
    sp.add_argument("--runs", type=int, required=True)
    sp.add_argument("--kernel", type=_kernel, default="gaussian")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--jobs", type=int, default=1)
    _add_path_config(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("diagnose", help="incoherence condition sweep on a named design")
    _add_common(sp)
    sp.add_argument("--design", default="zhao-yu")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--kernel", type=_kernel, default="poly")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--sweep-lambda", action="store_true", help="sweep the penalty grid")
    sp.add_argument("--sweep-lambda0", action="store_true", help="sweep the smoothing grid")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--lambda0", type=float, default=0.01)
    sp.add_argument("--lambda-grid", type=_float_list, default=None)
    sp.add_argument("--lambda0-grid", type=_float_list, default=None)
    sp.set_defaults(func=_cmd_diagnose)

    return parser


def _outdir(args) -> Path:
    if args.output_dir is not None:
        out = Path(args.output_dir)
    else:
        out = Path(os.environ.get("KGARROTE_OUTPUT_DIR", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(outdir: Path, args, outputs: list[str]) -> None:
    params = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config"):
            continue
        if isinstance(value, tuple):
            value = list(value)
        params[key] = value
    doc = {
        "command": args.command,
        "version": __version__,
        "parameters": params,
        "outputs": outputs,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load(args):
    dataset = load_dataset(args.input, args.response, args.delimiter)
    if getattr(args, "screen", None) is not None:
        kept = np.sort(marginal_screen(dataset, args.screen).kept)
        dataset = dataset.select_predictors(kept)
    return dataset


def _path_config(args) -> PathConfig:
    return PathConfig(
        grid_size=args.grid_size,
        penalty_min_ratio=args.penalty_min_ratio,
        penalties=args.penalties,
        max_sweeps=args.max_sweeps,
        tol=args.tol,
        update_alpha=args.update_alpha,
    )


def _initial_fit(args, stack, y):
    if getattr(args, "lambda0", None) is not None:
        rho = args.rho if args.rho is not None else 1.0 / stack.p
        kmat = kernel_matrix(stack, np.full(stack.p, rho))
        return fit_kernel_machine(kmat, y, args.lambda0)
    return estimate_smoothing(stack, y, args.rho)


def _cmd_fit(args) -> list[str]:
    outdir = _outdir(args)
    dataset = _load(args)
    stack = build_distance_stack(dataset, args.kernel)
    fit = estimate_smoothing(stack, dataset.y, args.rho)
    with open(outdir / "fit_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter=args.delimiter)
        w.writerow(["smoothing", "noise_var", "signal_var", "warning"])
        w.writerow(
            [repr(fit.smoothing), repr(fit.noise_var), repr(fit.signal_var), fit.warning or ""]
        )
    with open(outdir / "fit_values.csv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter=args.delimiter)
        w.writerow(["y", "fitted", "alpha", "residual"])
        for i in range(dataset.n):
            w.writerow(
                [
                    repr(float(dataset.y[i])),
                    repr(float(fit.fitted[i])),
                    repr(float(fit.alpha[i])),
                    repr(float(dataset.y[i] - fit.fitted[i])),
                ]
            )
    return ["fit_summary.csv", "fit_values.csv"]


def _solve(args):
    dataset = _load(args)
    stack = build_distance_stack(dataset, args.kernel)
    fit = _initial_fit(args, stack, dataset.y)
    path = solve_path(stack, dataset.y, fit.alpha, fit.smoothing, _path_config(args))
    return dataset, stack, fit, path


def _cmd_path(args) -> list[str]:
    outdir = _outdir(args)
    dataset, _, _, path = _solve(args)
    export_path(path, outdir / "path.csv", args.delimiter, dataset.column_names)
    return ["path.csv"]


def _cmd_select(args) -> list[str]:
    outdir = _outdir(args)
    dataset, stack, fit, path = _solve(args)
    point, crit = select_min_bic(path, stack, dataset.y, fit.smoothing)
    export_path(path, outdir / "path.csv", args.delimiter, dataset.column_names)
    export_criterion(crit, outdir / "criterion.csv", args.delimiter)
    names = dataset.column_names or tuple(f"x{j + 1}" for j in range(dataset.p))
    with open(outdir / "chosen.csv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter=args.delimiter)
        w.writerow(["penalty", "bic", "index", "name", "scale"])
        for j in point.active_set:
            w.writerow(
                [
                    repr(point.penalty),
                    repr(float(crit.bic[crit.chosen_index])),
                    j,
                    names[j],
                    repr(float(point.scales[j])),
                ]
            )
    return ["path.csv", "criterion.csv", "chosen.csv"]


def _cmd_screen(args) -> list[str]:
    outdir = _outdir(args)
    dataset = load_dataset(args.input, args.response, args.delimiter)
    result = marginal_screen(dataset, args.keep)
    names = dataset.column_names or tuple(f"x{j + 1}" for j in range(dataset.p))
    kept = set(int(j) for j in result.kept)
    with open(outdir / "screen.csv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter=args.delimiter)
        w.writerow(["rank", "index", "name", "score", "kept"])
        for rank, j in enumerate(result.ranked):
            j = int(j)
            w.writerow([rank, j, names[j], repr(float(result.scores[j])), int(j in kept)])
    return ["screen.csv"]


def _cmd_bootstrap(args) -> list[str]:
    outdir = _outdir(args)
    dataset = load_dataset(args.input, args.response, args.delimiter)
    plan = ResamplePlan(
        mode="bootstrap",
        replicates=args.replicates,
        seed=args.seed,
        subsample=args.m,
        selection=args.selection,
        window=args.window,
        threshold=args.threshold,
        screen_keep=args.screen,
    )
    report = bootstrap_select(dataset, args.kernel, plan, _path_config(args), jobs=args.jobs)
    export_report(report, outdir / "selection_report.csv", args.delimiter, dataset.column_names)
    return ["selection_report.csv"]


def _cmd_permute(args) -> list[str]:
    outdir = _outdir(args)
    dataset = load_dataset(args.input, args.response, args.delimiter)
    plan = ResamplePlan(
        mode="permutation",
        replicates=args.replicates,
        seed=args.seed,
        selection=args.selection,
        window=args.window,
        threshold=args.threshold,
    )
    report = permutation_select(dataset, args.kernel, plan, _path_config(args), jobs=args.jobs)
    export_report(report, outdir / "selection_report.csv", args.delimiter, dataset.column_names)
    return ["selection_report.csv"]


def _cmd_simulate(args) -> list[str]:
    outdir = _outdir(args)
    design = make_design(args.design, args.n, p=args.p, a=args.a)
    summary = run_experiment(
        design, args.kernel, args.runs, _path_config(args), seed=args.seed, jobs=args.jobs
    )
    export_summary(summary, outdir / "summary.csv", args.delimiter)
    with open(outdir / "summary.txt", "w") as fh:
        fh.write(format_summary(summary) + "\n")
    print(format_summary(summary))
    return ["summary.csv", "summary.txt"]


def _cmd_diagnose(args) -> list[str]:
    outdir = _outdir(args)
    design = make_design(args.design, args.n)
    dataset, _, truth = generate(design, np.random.default_rng(args.seed))
    stack = build_distance_stack(dataset, args.kernel)
    penalties = args.lambda_grid
    if penalties is None:
        penalties = (
            tuple(np.geomspace(0.01, 10.0, 13)) if args.sweep_lambda else (args.lam,)
        )
    smoothings = args.lambda0_grid
    if smoothings is None:
        smoothings = (
            tuple(np.geomspace(1e-4, 1.0, 9)) if args.sweep_lambda0 else (args.lambda0,)
        )
    rows = incoherence_sweep(
        stack, dataset.y, truth, np.ones(stack.p), penalties, smoothings
    )
    with open(outdir / "incoherence_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter=args.delimiter)
        w.writerow(["penalty", "smoothing", "max_lhs", "gamma_margin", "satisfied"])
        for row in rows:
            w.writerow(
                [
                    repr(row["penalty"]),
                    repr(row["smoothing"]),
                    repr(row["max_lhs"]),
                    repr(row["gamma_margin"]),
                    int(row["satisfied"]),
                ]
            )
    return ["incoherence_sweep.csv"]


def _inject_config(argv: list[str]) -> list[str]:
    """Expand ``--config FILE`` into flags placed before the explicit ones."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    out = []
    cfg_path = None
    i = 0
    while i < len(argv):
        a = argv[i]
        if a == "--config":
            if i + 1 >= len(argv):
                raise DataError("--config needs a file argument")
            cfg_path = argv[i + 1]
            i += 2
            continue
        if a.startswith("--config="):
            cfg_path = a.split("=", 1)[1]
            i += 1
            continue
        out.append(a)
        i += 1
    flags: list[str] = []
    try:
        lines = Path(cfg_path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {cfg_path}: {exc}") from None
    for ln, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{cfg_path}:{ln}: expected key=value, got {line!r}")
        key, value = (tok.strip() for tok in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                flags.append(flag)
        else:
            flags.extend([flag, value])
    if not out:
        return flags
    # keep the subcommand first so argparse can route the injected flags
    return out[:1] + flags + out[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _inject_config(argv)
        args = parser.parse_args(argv)
        outputs = args.func(args)
        _manifest(_outdir(args), args, outputs)
    except DataError as exc:
        print(f"kgarrote: data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"kgarrote: numerical error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
