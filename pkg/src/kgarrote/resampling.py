"""Stability of the selected set under resampling.

Two schemes are provided.  The subsample bootstrap redraws ``m`` of the ``n``
rows with replacement, restandardizes, and reruns the full pipeline
(optional screening, smoothing estimation, path, per-replicate selection).
The residual permutation scheme fits the machine once on the selected
scales, permutes the centered residuals to build synthetic responses, and
reruns the path with the refit coefficients and smoothing held fixed.  Both
report per-predictor selection frequencies against a threshold.

Replicates draw from independent substreams spawned off the plan seed, so
reports are identical for any worker count.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .data import Dataset, build_distance_stack, standardize_dataset
from .errors import DataError, GarroteError, NumericalError
from .kernel import estimate_smoothing, kernel_matrix, variance_components
from .path import PathConfig, SolutionPath, solve_path
from .screening import marginal_screen
from .selection import select_min_bic, window_select

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResamplePlan:
    """What to resample and how each replicate picks its active set."""

    mode: Literal["bootstrap", "permutation"]
    replicates: int
    seed: int
    subsample: int | None = None
    selection: Literal["min-bic", "window"] = "min-bic"
    window: int | None = None
    threshold: float = 0.6
    screen_keep: int | None = None
    max_failure_fraction: float = 0.2

    def __post_init__(self):
        if self.mode not in ("bootstrap", "permutation"):
            raise ValueError(f"unknown resampling mode {self.mode!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must lie in (0, 1]")
        if self.selection == "window" and (self.window is None or self.window < 1):
            raise ValueError("window selection needs a positive window width")
        if self.selection not in ("min-bic", "window"):
            raise ValueError(f"unknown selection rule {self.selection!r}")


@dataclass(frozen=True)
class ReplicateRecord:
    """Outcome of one replicate (active set in original predictor indices)."""

    index: int
    active: tuple[int, ...]
    converged: bool
    failed: bool
    message: str = ""


@dataclass(frozen=True)
class SelectionReport:
    """Aggregated selection frequencies over all replicates.

    ``freq[j] = counts[j] / replicates``; failed replicates count as having
    selected nothing.  ``chosen`` lists predictors at or above the threshold.
    """

    counts: np.ndarray
    freq: np.ndarray
    chosen: np.ndarray
    threshold: float
    replicates: int
    failures: int
    records: tuple[ReplicateRecord, ...]


def _pick(path: SolutionPath, stack, y, smoothing, plan: ResamplePlan):
    """Apply the plan's selection rule to a solved path.

    Returns (active indices, scales at the defining path point, all sweeps
    converged).  Window selection zeroes the scales outside the window.
    """
    converged = all(pt.converged for pt in path.points)
    if plan.selection == "window":
        active = window_select(path, plan.window)
        for pt in path.points:
            if set(active) <= set(pt.active_set):
                scales = np.where(np.isin(np.arange(stack.p), active), pt.scales, 0.0)
                return tuple(sorted(active)), scales, converged
        # fall back to the densest point if no single point holds the window
        pt = path.points[-1]
        scales = np.where(np.isin(np.arange(stack.p), active), pt.scales, 0.0)
        return tuple(sorted(active)), scales, converged
    point, _ = select_min_bic(path, stack, y, smoothing)
    return point.active_set, point.scales.copy(), converged


def _bootstrap_replicate(args) -> ReplicateRecord:
    i, child, dataset, kind, plan, config = args
    rng = np.random.default_rng(child)
    m = plan.subsample if plan.subsample is not None else round(dataset.n / 2)
    rows = rng.integers(0, dataset.n, size=m)
    try:
        sub = standardize_dataset(dataset.y[rows], dataset.X[rows], dataset.column_names)
        mapping = None
        if plan.screen_keep is not None:
            keep = marginal_screen(sub, plan.screen_keep).kept
            mapping = np.sort(keep)
            sub = sub.select_predictors(mapping)
        stack = build_distance_stack(sub, kind)
        fit = estimate_smoothing(stack, sub.y)
        path = solve_path(stack, sub.y, fit.alpha, fit.smoothing, config)
        active, _, converged = _pick(path, stack, sub.y, fit.smoothing, plan)
        if mapping is not None:
            active = tuple(sorted(int(mapping[j]) for j in active))
        return ReplicateRecord(i, active, converged, False)
    except GarroteError as exc:
        return ReplicateRecord(i, (), False, True, f"{type(exc).__name__}: {exc}")


def _permutation_replicate(args) -> ReplicateRecord:
    i, child, dataset, kind, config, plan, fitted, resid, alpha, smoothing = args
    rng = np.random.default_rng(child)
    y_star = fitted + resid[rng.permutation(dataset.n)]
    try:
        stack = build_distance_stack(dataset, kind)
        path = solve_path(stack, y_star, alpha, smoothing, config)
        active, _, converged = _pick(path, stack, y_star, smoothing, plan)
        return ReplicateRecord(i, active, converged, False)
    except GarroteError as exc:
        return ReplicateRecord(i, (), False, True, f"{type(exc).__name__}: {exc}")


def _aggregate(records, p, plan) -> SelectionReport:
    counts = np.zeros(p, dtype=int)
    failures = 0
    for rec in records:
        if rec.failed:
            failures += 1
            logger.warning("replicate %d failed: %s", rec.index, rec.message)
            continue
        counts[list(rec.active)] += 1
    if failures > plan.max_failure_fraction * plan.replicates:
        msgs = "; ".join(r.message for r in records if r.failed)
        raise NumericalError(
            f"{failures}/{plan.replicates} replicates failed "
            f"(> {plan.max_failure_fraction:.0%}): {msgs}"
        )
    freq = counts / plan.replicates
    return SelectionReport(
        counts=counts,
        freq=freq,
        chosen=np.nonzero(freq >= plan.threshold)[0],
        threshold=plan.threshold,
        replicates=plan.replicates,
        failures=failures,
        records=tuple(records),
    )


def _run_tasks(worker, tasks, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(worker, tasks))
    return [worker(t) for t in tasks]


def bootstrap_select(
    dataset: Dataset,
    kind: str,
    plan: ResamplePlan,
    config: PathConfig | None = None,
    jobs: int = 1,
) -> SelectionReport:
    """Subsample bootstrap of the whole selection pipeline."""
    if plan.mode != "bootstrap":
        raise ValueError("plan.mode must be 'bootstrap'")
    m = plan.subsample if plan.subsample is not None else round(dataset.n / 2)
    if not 2 <= m:
        raise DataError("bootstrap subsample size must be at least 2")
    config = config or PathConfig()
    children = np.random.SeedSequence(plan.seed).spawn(plan.replicates)
    tasks = [
        (i, children[i], dataset, kind, plan, config) for i in range(plan.replicates)
    ]
    records = _run_tasks(_bootstrap_replicate, tasks, jobs)
    return _aggregate(records, dataset.p, plan)


def permutation_select(
    dataset: Dataset,
    kind: str,
    plan: ResamplePlan,
    config: PathConfig | None = None,
    jobs: int = 1,
) -> SelectionReport:
    """Residual permutation test of the selected set.

    The pipeline is first run once on the original data; an empty selection
    aborts.  The machine is then refit on the selected scales (fresh
    smoothing and coefficients), and each replicate permutes the centered
    residuals, rebuilds a synthetic response around the refit, and reruns
    the path with those coefficients and smoothing held fixed.
    """
    if plan.mode != "permutation":
        raise ValueError("plan.mode must be 'permutation'")
    config = config or PathConfig()
    stack = build_distance_stack(dataset, kind)
    base_fit = estimate_smoothing(stack, dataset.y)
    base_path = solve_path(stack, dataset.y, base_fit.alpha, base_fit.smoothing, config)
    base_active, base_scales, _ = _pick(
        base_path, stack, dataset.y, base_fit.smoothing, plan
    )
    if not base_active:
        raise NumericalError("null initial model: nothing selected on the original data")

    refit = variance_components(kernel_matrix(stack, base_scales), dataset.y)
    resid = dataset.y - refit.fitted
    resid = resid - resid.mean()

    children = np.random.SeedSequence(plan.seed).spawn(plan.replicates)
    tasks = [
        (
            i,
            children[i],
            dataset,
            kind,
            config,
            plan,
            refit.fitted,
            resid,
            refit.alpha,
            refit.smoothing,
        )
        for i in range(plan.replicates)
    ]
    records = _run_tasks(_permutation_replicate, tasks, jobs)
    return _aggregate(records, dataset.p, plan)


def export_report(report: SelectionReport, out, delimiter: str = ",", names=None) -> None:
    """Write per-predictor frequencies plus a per-replicate log."""
    p = report.freq.shape[0]
    if names is None:
        names = [f"x{j + 1}" for j in range(p)]
    close = False
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out, delimiter=delimiter)
        w.writerow(["predictor", "name", "count", "freq", "chosen"])
        chosen = set(int(j) for j in report.chosen)
        for j in range(p):
            w.writerow(
                [j, names[j], int(report.counts[j]), repr(float(report.freq[j])), int(j in chosen)]
            )
        w.writerow([])
        w.writerow(["replicate", "failed", "converged", "active", "message"])
        for rec in report.records:
            w.writerow(
                [
                    rec.index,
                    int(rec.failed),
                    int(rec.converged),
                    ";".join(str(j) for j in rec.active),
                    rec.message,
                ]
            )
    finally:
        if close:
            out.close()
