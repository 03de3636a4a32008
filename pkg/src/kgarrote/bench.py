"""Simulation designs and repeated-run selection experiments.

Five named designs are built in:

- ``example-1``: design drawn uniform on (-2.5, 2.5), then a Gaussian-process
  signal drawn from the scaled kernel itself (true scales on the first ``a``
  predictors), plus independent noise.
- ``example-2``: uniform (0, 1) design with a fixed nonadditive signal in the
  first five predictors (cosines, a square, a damped exponential, and a
  three-way interaction).
- ``example-3``: same signal as example-2 but many more noise predictors.
- ``zhao-yu``: three correlated Gaussian predictors where the third is a mix
  of the two true ones; the classical lasso irrepresentable condition fails
  here by construction.
- ``sca-synthetic``: wide Gaussian design with ``a`` unit-coefficient linear
  keys, used for screening and resampling exercises.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import (
    Dataset,
    DistanceStack,
    build_distance_stack,
    standardize_columns,
    standardize_dataset,
)
from .errors import DataError, GarroteError, NumericalError
from .kernel import estimate_smoothing
from .path import PathConfig, solve_path
from .selection import select_min_bic, selection_metrics

logger = logging.getLogger(__name__)

DESIGN_NAMES = ("example-1", "example-2", "example-3", "zhao-yu", "sca-synthetic")

# cholesky jitter ladder for the Gaussian-process draw
_GP_JITTERS = (0.0, 1e-10, 1e-8)


@dataclass(frozen=True)
class SimDesign:
    """Parameters of one synthetic data generator."""

    name: str
    n: int
    p: int
    a: int
    noise_var: float = 1.0
    signal_var: float = 10.0
    true_scale: float = 2.0
    mixing: tuple[float, float, float] = (2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0)
    beta: tuple[float, float] = (2.0, 3.0)
    seed: int | None = None

    @property
    def truth_active(self) -> tuple[int, ...]:
        return tuple(range(self.a))


_DESIGN_DEFAULTS = {
    "example-1": {"p": 11, "a": 5, "signal_var": 10.0, "noise_var": 1.0, "true_scale": 2.0},
    "example-2": {"p": 10, "a": 5, "noise_var": 1.0},
    "example-3": {"p": 80, "a": 5, "noise_var": 1.0},
    "zhao-yu": {"p": 3, "a": 2, "noise_var": 1.0},
    "sca-synthetic": {"p": 500, "a": 16, "noise_var": 1.0},
}


def make_design(name: str, n: int, **overrides) -> SimDesign:
    """Build a named design with its defaults, applying any overrides."""
    if name not in DESIGN_NAMES:
        raise DataError(f"unknown design {name!r}; expected one of {DESIGN_NAMES}")
    params = dict(_DESIGN_DEFAULTS[name])
    params.update({k: v for k, v in overrides.items() if v is not None})
    design = SimDesign(name=name, n=int(n), **params)
    if design.n < 2 or design.a < 1 or design.a > design.p:
        raise DataError("design sizes must satisfy n >= 2 and 1 <= a <= p")
    if name == "zhao-yu" and (design.p, design.a) != (3, 2):
        raise DataError("the zhao-yu design is fixed at p=3, a=2")
    return design


def _chol_psd(C: np.ndarray) -> np.ndarray:
    n = C.shape[0]
    for jit in _GP_JITTERS:
        try:
            return np.linalg.cholesky(C if jit == 0.0 else C + jit * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("signal covariance factorization failed despite jitter")


def _nonadditive_signal(X: np.ndarray) -> np.ndarray:
    x1, x2, x3, x4, x5 = (X[:, j] for j in range(5))
    return (
        10.0 * np.cos(x1)
        + 3.0 * x2 * x2
        + 5.0 * np.sin(x3)
        + 6.0 * np.exp(x4 / 3.0) * x4
        + 8.0 * np.cos(x5)
        + x5 * x2 * x1
    )


def generate(design: SimDesign, rng=None) -> tuple[Dataset, np.ndarray, tuple[int, ...]]:
    """Draw one dataset; returns (dataset, centered true signal, truth)."""
    if rng is None:
        rng = np.random.default_rng(design.seed)
    n, p, a = design.n, design.p, design.a
    noise_sd = np.sqrt(design.noise_var)

    if design.name == "example-1":
        X = rng.uniform(-2.5, 2.5, size=(n, p))
        # the signal covariance uses the same standardized design the fit sees
        Xs, _, _ = standardize_columns(X)
        scales = np.zeros(p)
        scales[:a] = design.true_scale
        K = np.exp(DistanceStack("gaussian", Xs).weighted_sum(scales))
        L = _chol_psd(K)
        f = np.sqrt(design.signal_var) * (L @ rng.standard_normal(n))
        y = f + noise_sd * rng.standard_normal(n)
    elif design.name in ("example-2", "example-3"):
        if a != 5:
            raise DataError(f"{design.name} uses a fixed five-predictor signal")
        X = rng.uniform(0.0, 1.0, size=(n, p))
        f = _nonadditive_signal(X)
        y = f + noise_sd * rng.standard_normal(n)
    elif design.name == "zhao-yu":
        x1 = rng.standard_normal(n)
        x2 = rng.standard_normal(n)
        e = rng.standard_normal(n)
        m1, m2, m3 = design.mixing
        X = np.column_stack([x1, x2, m1 * x1 + m2 * x2 + m3 * e])
        f = design.beta[0] * x1 + design.beta[1] * x2
        y = f + noise_sd * rng.standard_normal(n)
    elif design.name == "sca-synthetic":
        X = rng.standard_normal((n, p))
        f = X[:, :a].sum(axis=1)
        y = f + noise_sd * rng.standard_normal(n)
    else:
        raise DataError(f"unknown design {design.name!r}")

    names = tuple(f"x{j + 1}" for j in range(p))
    dataset = standardize_dataset(y, X, names)
    return dataset, f - f.mean(), design.truth_active


@dataclass(frozen=True)
class ExperimentSummary:
    """Mean/sd selection metrics across repeated independent runs."""

    design: str
    kernel: str
    runs: int
    failures: int
    fp_mean: float
    fp_sd: float
    fn_mean: float
    fn_sd: float
    ms_mean: float
    ms_sd: float
    rss_mean: float
    rss_sd: float
    se_mean: float
    se_sd: float
    selection_freq: np.ndarray
    single_run: bool


def _experiment_run(args):
    design, kind, config, child = args
    rng = np.random.default_rng(child)
    dataset, f_true, truth = generate(design, rng)
    stack = build_distance_stack(dataset, kind)
    fit = estimate_smoothing(stack, dataset.y)
    path = solve_path(stack, dataset.y, fit.alpha, fit.smoothing, config)
    point, _ = select_min_bic(path, stack, dataset.y, fit.smoothing)
    metrics = selection_metrics(
        point.scales, truth, stack, dataset.y, fit.smoothing, f_true=f_true
    )
    return metrics, point.active_set


def run_experiment(
    design: SimDesign,
    kind: str,
    runs: int,
    config: PathConfig | None = None,
    seed: int | None = None,
    jobs: int = 1,
) -> ExperimentSummary:
    """Repeat generate/fit/select ``runs`` times and aggregate the metrics.

    Every run draws a fresh design and response from a per-run substream of
    ``seed``, so results do not depend on ``jobs``.  Individual failures are
    logged and skipped; more than 20% of them abort the experiment.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    config = config or PathConfig()
    children = np.random.SeedSequence(seed).spawn(runs)
    tasks = [(design, kind, config, children[i]) for i in range(runs)]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_wrapped_run, tasks))
    else:
        results = [_wrapped_run(t) for t in tasks]

    rows = []
    counts = np.zeros(design.p, dtype=int)
    failures = 0
    for i, res in enumerate(results):
        if isinstance(res, str):
            failures += 1
            logger.warning("experiment run %d failed: %s", i, res)
            continue
        metrics, active = res
        rows.append(metrics)
        counts[list(active)] += 1
    if failures > 0.2 * runs:
        raise NumericalError(f"{failures}/{runs} experiment runs failed")

    def _stat(vals):
        arr = np.asarray(vals, dtype=float)
        if arr.size <= 1:
            return float(arr.mean()) if arr.size else float("nan"), 0.0
        return float(arr.mean()), float(arr.std(ddof=1))

    fp = _stat([m.fp_rate for m in rows])
    fn = _stat([m.fn_rate for m in rows])
    ms = _stat([m.model_size for m in rows])
    rss = _stat([m.rss_n for m in rows])
    se = _stat([m.se for m in rows])
    return ExperimentSummary(
        design=design.name,
        kernel=kind,
        runs=runs,
        failures=failures,
        fp_mean=fp[0],
        fp_sd=fp[1],
        fn_mean=fn[0],
        fn_sd=fn[1],
        ms_mean=ms[0],
        ms_sd=ms[1],
        rss_mean=rss[0],
        rss_sd=rss[1],
        se_mean=se[0],
        se_sd=se[1],
        selection_freq=counts / len(rows) if rows else counts.astype(float),
        single_run=runs == 1,
    )


def _wrapped_run(args):
    try:
        return _experiment_run(args)
    except GarroteError as exc:
        return f"{type(exc).__name__}: {exc}"


def format_summary(summary: ExperimentSummary) -> str:
    """Render the summary as a mean(sd) table row."""
    cells = [
        f"{summary.design}/{summary.kernel} (runs={summary.runs}, failed={summary.failures})",
        f"FP {summary.fp_mean:.3f}({summary.fp_sd:.3f})",
        f"FN {summary.fn_mean:.3f}({summary.fn_sd:.3f})",
        f"MS {summary.ms_mean:.2f}({summary.ms_sd:.2f})",
        f"RSS {summary.rss_mean:.3f}({summary.rss_sd:.3f})",
        f"SE {summary.se_mean:.3f}({summary.se_sd:.3f})",
    ]
    return "  ".join(cells)


def export_summary(summary: ExperimentSummary, out, delimiter: str = ",") -> None:
    """Write metric means/sds and per-predictor selection frequencies."""
    close = False
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out, delimiter=delimiter)
        w.writerow(["metric", "mean", "sd"])
        for key, mean, sd in [
            ("fp_rate", summary.fp_mean, summary.fp_sd),
            ("fn_rate", summary.fn_mean, summary.fn_sd),
            ("model_size", summary.ms_mean, summary.ms_sd),
            ("rss_n", summary.rss_mean, summary.rss_sd),
            ("se", summary.se_mean, summary.se_sd),
        ]:
            w.writerow([key, repr(float(mean)), repr(float(sd))])
        w.writerow([])
        w.writerow(["predictor", "selection_freq"])
        for j, fr in enumerate(summary.selection_freq):
            w.writerow([f"x{j + 1}", repr(float(fr))])
    finally:
        if close:
            out.close()
