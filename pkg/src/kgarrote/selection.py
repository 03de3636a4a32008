"""Model scoring along a path and selection of a final scale vector.

Each path point is scored by a BIC built from the smoother implied by its
kernel: with eigenvalues mu_i of K(scales), the fitted values shrink the
response eigencoordinates by mu_i / (mu_i + smoothing), the degrees of
freedom are the sum of those shrinkage factors, and

    BIC = log(RSS) + df * log(n) / n

with RSS left unnormalized.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import DistanceStack
from .kernel import kernel_matrix, validate_scales
from .path import SolutionPath


def _smoother_parts(stack, scales, y, smoothing):
    kmat = kernel_matrix(stack, scales)
    mu, U = scipy.linalg.eigh(kmat.values)
    mu = np.clip(mu, 0.0, None)
    w = U.T @ np.asarray(y, dtype=float)
    shrink = mu / (mu + smoothing)
    fitted = U @ (shrink * w)
    return fitted, float(shrink.sum())


def fitted_values(stack: DistanceStack, scales, y, smoothing: float) -> np.ndarray:
    """Kernel machine fit K(scales) (smoothing*I + K(scales))^-1 y."""
    fitted, _ = _smoother_parts(stack, validate_scales(scales, stack.p), y, smoothing)
    return fitted


def score_point(stack: DistanceStack, scales, y, smoothing: float) -> tuple[float, float, float]:
    """Return (rss, df, bic) for one scale vector."""
    s = validate_scales(scales, stack.p)
    if not smoothing > 0:
        raise ValueError("smoothing must be positive")
    y = np.asarray(y, dtype=float)
    fitted, df = _smoother_parts(stack, s, y, smoothing)
    resid = y - fitted
    rss = float(resid @ resid)
    n = y.shape[0]
    if rss <= 0.0:
        warnings.warn("zero residual sum of squares; BIC set to -inf", RuntimeWarning, stacklevel=2)
        return rss, df, float("-inf")
    return rss, df, float(np.log(rss) + df * np.log(n) / n)


@dataclass(frozen=True)
class SelectionCriterion:
    """Per-point scores over a path plus the chosen index."""

    penalties: np.ndarray
    rss: np.ndarray
    df: np.ndarray
    bic: np.ndarray
    active_sizes: np.ndarray
    chosen_index: int
    flat_curve: bool


def select_min_bic(
    path: SolutionPath, stack: DistanceStack, y, smoothing: float
) -> tuple[object, SelectionCriterion]:
    """Score every path point and pick the BIC minimizer.

    Ties break toward the larger penalty (the sparser end) because the grid
    is stored in decreasing-penalty order and argmin takes the first hit.  A
    minimizer sitting on the last (smallest-penalty) grid point flags a flat
    criterion curve.
    """
    pts = path.points
    rss = np.empty(len(pts))
    df = np.empty(len(pts))
    bic = np.empty(len(pts))
    sizes = np.empty(len(pts), dtype=int)
    for i, pt in enumerate(pts):
        rss[i], df[i], bic[i] = score_point(stack, pt.scales, y, smoothing)
        sizes[i] = len(pt.active_set)
    chosen = int(np.argmin(bic))
    crit = SelectionCriterion(
        penalties=path.penalties,
        rss=rss,
        df=df,
        bic=bic,
        active_sizes=sizes,
        chosen_index=chosen,
        flat_curve=chosen == len(pts) - 1,
    )
    return pts[chosen], crit


def window_select(path: SolutionPath, width: int) -> tuple[int, ...]:
    """First ``width`` predictors to enter the path, in entry order.

    Predictors entering at the same grid point are ordered by decreasing
    scale there, then by index.  Returns fewer than ``width`` indices when
    the path never activates that many.
    """
    if width < 1:
        raise ValueError("window width must be at least 1")
    entered: list[int] = []
    seen: set[int] = set()
    for pt in path.points:
        newly = [j for j in pt.active_set if j not in seen]
        newly.sort(key=lambda j: (-pt.scales[j], j))
        for j in newly:
            entered.append(j)
            seen.add(j)
        if len(entered) >= width:
            break
    return tuple(entered[:width])


@dataclass(frozen=True)
class SelectionMetrics:
    """Error rates of a selected scale vector against a known truth."""

    fp_rate: float
    fn_rate: float
    model_size: int
    rss_n: float
    se: float | None = None


def selection_metrics(
    scales,
    truth_active,
    stack: DistanceStack,
    y,
    smoothing: float,
    f_true=None,
) -> SelectionMetrics:
    """False positive/negative rates, model size, and fit errors.

    The false positive rate is FP / (FP + TN) over the truly irrelevant
    predictors; the false negative rate is FN / (FN + TP) over the truly
    relevant ones.  ``rss_n`` is mean squared residual against the response,
    ``se`` mean squared error against the noiseless signal when given.
    """
    s = validate_scales(scales, stack.p)
    truth = frozenset(int(t) for t in truth_active)
    if any(t < 0 or t >= stack.p for t in truth):
        raise ValueError("truth_active index out of range")
    selected = frozenset(int(j) for j in np.nonzero(s > 0)[0])
    n_irrelevant = stack.p - len(truth)
    fp = len(selected - truth)
    fn = len(truth - selected)
    fp_rate = fp / n_irrelevant if n_irrelevant > 0 else 0.0
    fn_rate = fn / len(truth) if truth else 0.0

    y = np.asarray(y, dtype=float)
    fitted = fitted_values(stack, s, y, smoothing)
    rss_n = float(np.mean((y - fitted) ** 2))
    se = None
    if f_true is not None:
        f_true = np.asarray(f_true, dtype=float)
        se = float(np.mean((f_true - fitted) ** 2))
    return SelectionMetrics(
        fp_rate=fp_rate,
        fn_rate=fn_rate,
        model_size=len(selected),
        rss_n=rss_n,
        se=se,
    )


def export_criterion(criterion: SelectionCriterion, out, delimiter: str = ",") -> None:
    """Write the per-point scores as delimited text."""
    close = False
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out, delimiter=delimiter)
        w.writerow(["penalty", "rss", "df", "bic", "active_size", "chosen"])
        for i in range(criterion.penalties.size):
            w.writerow(
                [
                    repr(float(criterion.penalties[i])),
                    repr(float(criterion.rss[i])),
                    repr(float(criterion.df[i])),
                    repr(float(criterion.bic[i])),
                    int(criterion.active_sizes[i]),
                    int(i == criterion.chosen_index),
                ]
            )
    finally:
        if close:
            out.close()
