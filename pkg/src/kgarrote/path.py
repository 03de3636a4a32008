"""Penalized path over the per-predictor kernel scales.

The solver holds the kernel machine coefficients fixed and coordinate-wise
minimizes

    0.5 * ||y - K(s) a||^2  +  0.5 * smoothing * a' K(s) a  +  n * penalty * sum(s)

over scales s >= 0.  Substituting the shifted response
yt = y - 0.5 * smoothing * a, the update for coordinate j has the closed form

    s_j <- max(0, (z_j' r_j - n * penalty) / ||z_j||^2)

where z_j is the kernel derivative in scale j applied to the coefficients and
r_j = yt - K(s) a + s_j z_j is the residual with coordinate j added back.
Sweeps are cyclic in ascending predictor order; the grid is walked from the
penalty ceiling downward with warm starts.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .data import DistanceStack
from .kernel import kernel_derivative, kernel_matrix, solve_regularized, validate_scales

# coordinates whose update direction has squared norm below this are skipped
INERT_NORM2 = 1e-14

# substitute ceiling when the data give a nonpositive one
PENALTY_FLOOR = 1e-12


@dataclass(frozen=True)
class PathConfig:
    """Grid and convergence knobs for the path solver."""

    grid_size: int = 50
    penalty_min_ratio: float = 1e-3
    penalties: tuple[float, ...] | None = None
    max_sweeps: int = 500
    tol: float = 1e-6
    update_alpha: bool = False

    def __post_init__(self):
        if self.penalties is None:
            if self.grid_size < 1:
                raise ValueError("grid_size must be at least 1")
            if not 0 < self.penalty_min_ratio < 1:
                raise ValueError("penalty_min_ratio must lie in (0, 1)")
        else:
            lams = np.asarray(self.penalties, dtype=float)
            if lams.ndim != 1 or lams.size == 0:
                raise ValueError("explicit penalty grid must be nonempty")
            if np.any(lams <= 0) or np.any(np.diff(lams) >= 0):
                raise ValueError("explicit penalty grid must be positive and strictly decreasing")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class PathPoint:
    """Converged state at one penalty value."""

    penalty: float
    scales: np.ndarray
    sweeps: int
    converged: bool
    objective: float

    @property
    def active_set(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.nonzero(self.scales > 0)[0])


@dataclass(frozen=True)
class SolutionPath:
    """Sequence of path points, penalties strictly decreasing."""

    points: tuple[PathPoint, ...]
    y_tilde: np.ndarray
    alpha_init: np.ndarray
    smoothing: float
    kind: str
    alpha_updated: bool = False

    @property
    def penalties(self) -> np.ndarray:
        return np.array([pt.penalty for pt in self.points])

    @property
    def scales_matrix(self) -> np.ndarray:
        return np.vstack([pt.scales for pt in self.points])


def shifted_response(y: np.ndarray, alpha: np.ndarray, smoothing: float) -> np.ndarray:
    """The response the sweeps actually target: y - 0.5 * smoothing * alpha."""
    return np.asarray(y, dtype=float) - 0.5 * smoothing * np.asarray(alpha, dtype=float)


class _SweepState:
    """Mutable kernel/residual bookkeeping shared by the coordinate sweeps.

    Linear-polynomial kernels have constant update directions, so the state
    keeps the n x p direction matrix and updates the residual in O(n) per
    coordinate.  Gaussian kernels are updated multiplicatively entry by entry
    and directions are formed from two kernel matvecs per coordinate.
    """

    def __init__(self, stack, alpha, y_tilde, scales=None):
        self.stack = stack
        self.alpha = np.asarray(alpha, dtype=float)
        self.y_tilde = np.asarray(y_tilde, dtype=float)
        p = stack.p
        self.scales = np.zeros(p) if scales is None else np.array(scales, dtype=float)
        self.linear = stack.kind == "linear-polynomial"
        if self.linear:
            coef = stack.X.T @ self.alpha
            self.Z = stack.X * coef
            self.znorm2 = np.einsum("ij,ij->j", self.Z, self.Z)
        self.refresh()

    def refresh(self):
        """Recompute the residual from scratch at the current scales."""
        if self.linear:
            self.resid = self.y_tilde - self.Z @ self.scales
        else:
            self.K = np.exp(self.stack.weighted_sum(self.scales))
            self.k_alpha = self.K @ self.alpha
            self.resid = self.y_tilde - self.k_alpha

    def direction(self, j):
        """Kernel derivative in scale j applied to the coefficients."""
        if self.linear:
            return self.Z[:, j]
        x = self.stack.X[:, j]
        x2 = x * x
        return 2.0 * x * (self.K @ (x * self.alpha)) - x2 * self.k_alpha - self.K @ (x2 * self.alpha)

    def direction_norm2(self, j, z):
        if self.linear:
            return self.znorm2[j]
        return float(z @ z)

    def shift(self, j, delta, z):
        self.scales[j] += delta
        if self.linear:
            self.resid -= delta * z
        else:
            self.K *= np.exp(delta * self.stack.matrix(j))
            self.k_alpha = self.K @ self.alpha
            self.resid = self.y_tilde - self.k_alpha

    def kernel_apply(self):
        """K(scales) @ alpha for the current state."""
        return self.y_tilde - self.resid

    def kernel_values(self):
        if self.linear:
            return self.stack.weighted_sum(self.scales)
        return self.K


def _run_sweeps(state: _SweepState, penalty: float, config: PathConfig) -> tuple[int, bool]:
    n = state.stack.n
    thresh = n * penalty
    for s in range(config.max_sweeps):
        biggest = 0.0
        for j in range(state.stack.p):
            z = state.direction(j)
            zz = state.direction_norm2(j, z)
            if zz < INERT_NORM2:
                continue
            new = (float(z @ state.resid) + state.scales[j] * zz - thresh) / zz
            if new < 0.0:
                new = 0.0
            delta = new - state.scales[j]
            if delta != 0.0:
                state.shift(j, delta, z)
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest < config.tol:
            return s + 1, True
    return config.max_sweeps, False


def max_penalty(stack: DistanceStack, y, alpha, smoothing: float) -> float:
    """Smallest penalty at which a sweep started from zero stays at zero.

    Computed as the largest per-coordinate score (1/n) z_j' (yt - K(0) a);
    clamped to a tiny positive floor (with a warning) if the data give a
    nonpositive value.
    """
    state = _SweepState(stack, alpha, shifted_response(y, alpha, smoothing))
    best = -np.inf
    for j in range(stack.p):
        z = state.direction(j)
        best = max(best, float(z @ state.resid) / stack.n)
    if not best > 0:
        warnings.warn(
            "nonpositive penalty ceiling; the path starts at a nominal floor",
            RuntimeWarning,
            stacklevel=2,
        )
        return PENALTY_FLOOR
    # one part in 1e12 of headroom so the all-zero state survives the first
    # sweep in floating point (n * (best / n) can round a hair below best)
    return best * (1.0 + 1e-12)


def coordinate_update(
    stack: DistanceStack, scales, j: int, alpha, y, penalty: float, smoothing: float
) -> float:
    """One closed-form update of scale j at the given state (non-mutating)."""
    s = validate_scales(scales, stack.p)
    kmat = kernel_matrix(stack, s)
    z = kernel_derivative(stack, kmat, j) @ np.asarray(alpha, dtype=float)
    zz = float(z @ z)
    if zz < INERT_NORM2:
        return float(s[j])
    yt = shifted_response(y, alpha, smoothing)
    resid = yt - kmat.values @ np.asarray(alpha, dtype=float)
    gap = float(z @ resid) + s[j] * zz - stack.n * penalty
    return max(0.0, gap / zz)


def _objective(state: _SweepState, y, penalty: float, smoothing: float) -> float:
    k_alpha = state.kernel_apply()
    fit = np.asarray(y, dtype=float) - k_alpha
    return float(
        0.5 * (fit @ fit)
        + 0.5 * smoothing * (state.alpha @ k_alpha)
        + state.stack.n * penalty * state.scales.sum()
    )


def solve_at_penalty(
    stack: DistanceStack,
    y,
    alpha,
    smoothing: float,
    penalty: float,
    scales_init=None,
    config: PathConfig | None = None,
) -> tuple[np.ndarray, int, bool]:
    """Run sweeps at a single penalty; returns (scales, sweeps, converged)."""
    config = config or PathConfig()
    if scales_init is not None:
        scales_init = validate_scales(scales_init, stack.p)
    state = _SweepState(stack, alpha, shifted_response(y, alpha, smoothing), scales_init)
    sweeps, converged = _run_sweeps(state, penalty, config)
    return state.scales.copy(), sweeps, converged


def solve_path(
    stack: DistanceStack,
    y,
    alpha,
    smoothing: float,
    config: PathConfig | None = None,
) -> SolutionPath:
    """Walk the penalty grid from the ceiling downward with warm starts.

    The coefficient vector stays fixed along the whole path unless
    ``config.update_alpha`` re-solves it after each grid point.
    """
    config = config or PathConfig()
    y = np.asarray(y, dtype=float)
    cur_alpha = np.asarray(alpha, dtype=float)
    if not smoothing > 0:
        raise ValueError("smoothing must be positive")

    if config.penalties is not None:
        lams = np.asarray(config.penalties, dtype=float)
    else:
        start = max_penalty(stack, y, cur_alpha, smoothing)
        if config.grid_size == 1:
            lams = np.array([start])
        else:
            decay = config.penalty_min_ratio ** (1.0 / (config.grid_size - 1))
            lams = start * decay ** np.arange(config.grid_size)

    y_tilde0 = shifted_response(y, cur_alpha, smoothing)
    state = _SweepState(stack, cur_alpha, y_tilde0)
    points = []
    for lam in lams:
        state.refresh()
        sweeps, converged = _run_sweeps(state, float(lam), config)
        points.append(
            PathPoint(
                penalty=float(lam),
                scales=state.scales.copy(),
                sweeps=sweeps,
                converged=converged,
                objective=_objective(state, y, float(lam), smoothing),
            )
        )
        if config.update_alpha:
            K = state.kernel_values()
            cur_alpha = solve_regularized(K, smoothing, y)
            state = _SweepState(
                stack, cur_alpha, shifted_response(y, cur_alpha, smoothing), state.scales
            )
    return SolutionPath(
        points=tuple(points),
        y_tilde=y_tilde0,
        alpha_init=np.asarray(alpha, dtype=float),
        smoothing=float(smoothing),
        kind=stack.kind,
        alpha_updated=config.update_alpha,
    )


def export_path(path: SolutionPath, out, delimiter: str = ",", names=None) -> None:
    """Write the path as delimited text: penalty, scales, objective, sweeps."""
    p = path.points[0].scales.shape[0]
    if names is None:
        names = [f"x{j + 1}" for j in range(p)]
    header = ["penalty"] + [f"scale_{nm}" for nm in names] + ["objective", "sweeps", "converged"]
    close = False
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out, delimiter=delimiter)
        w.writerow(header)
        for pt in path.points:
            w.writerow(
                [repr(pt.penalty)]
                + [repr(float(v)) for v in pt.scales]
                + [repr(pt.objective), pt.sweeps, int(pt.converged)]
            )
    finally:
        if close:
            out.close()
