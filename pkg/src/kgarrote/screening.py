"""Marginal screening to thin very wide designs before path fitting.

With standardized columns and a centered response, ranking predictors by the
leftover squared norm ||y||^2 - (x_j' y)^2 is the same as ranking by
decreasing marginal association |x_j' y|.  Ties break by column index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError


@dataclass(frozen=True)
class ScreenResult:
    """Ranking produced by `marginal_screen`.

    ``scores[j]`` is the leftover squared norm for predictor ``j`` (smaller
    means more associated); ``ranked`` lists all predictors from most to
    least associated; ``kept`` is the leading slice that survived.
    """

    scores: np.ndarray
    ranked: np.ndarray
    kept: np.ndarray


def marginal_screen(dataset: Dataset, keep: int) -> ScreenResult:
    """Rank predictors by marginal association and keep the top ``keep``."""
    if keep < 1:
        raise DataError("screen keep count must be at least 1")
    dataset.validate()
    proj = dataset.X.T @ dataset.y
    scores = float(dataset.y @ dataset.y) - proj * proj
    order = np.lexsort((np.arange(dataset.p), scores))
    return ScreenResult(
        scores=scores,
        ranked=order,
        kept=order[: min(keep, dataset.p)].copy(),
    )
