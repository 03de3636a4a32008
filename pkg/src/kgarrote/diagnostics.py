"""Numeric checks of when sparse recovery can and cannot work.

These routines evaluate, on actual data, the quantities that govern support
recovery: the gradient/curvature of the concentrated objective in the kernel
scales, an irrepresentable-style incoherence condition adapted to the kernel
garrote, its classical lasso counterpart, stationarity residuals of a
converged path point, and an upper bound on the scale estimation error whose
comparison against the smallest true scale predicts selection consistency.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dataset, DistanceStack
from .errors import NumericalError
from .kernel import (
    kernel_curvature,
    kernel_derivative,
    kernel_matrix,
    solve_regularized,
    validate_scales,
)
from .path import shifted_response


def derivative_projections(stack: DistanceStack, scales, alpha) -> np.ndarray:
    """n x p matrix whose column j is the kernel derivative in scale j
    applied to the coefficient vector."""
    s = validate_scales(scales, stack.p)
    alpha = np.asarray(alpha, dtype=float)
    kmat = kernel_matrix(stack, s)
    Z = np.empty((stack.n, stack.p))
    for j in range(stack.p):
        Z[:, j] = kernel_derivative(stack, kmat, j) @ alpha
    return Z


def objective_gradient(stack: DistanceStack, scales, y, smoothing: float) -> np.ndarray:
    """Analytic gradient of the concentrated objective in the scales.

    Component j equals -0.5 * smoothing * u' K'_j u with
    u = (smoothing*I + K)^-1 y.
    """
    s = validate_scales(scales, stack.p)
    y = np.asarray(y, dtype=float)
    kmat = kernel_matrix(stack, s)
    u = solve_regularized(kmat.values, smoothing, y)
    g = np.empty(stack.p)
    for j in range(stack.p):
        g[j] = -0.5 * smoothing * float(u @ (kernel_derivative(stack, kmat, j) @ u))
    return g


def objective_hessian(stack: DistanceStack, scales, y, smoothing: float) -> np.ndarray:
    """Analytic Hessian of the concentrated objective in the scales."""
    s = validate_scales(scales, stack.p)
    y = np.asarray(y, dtype=float)
    kmat = kernel_matrix(stack, s)
    u = solve_regularized(kmat.values, smoothing, y)
    W = np.empty((stack.n, stack.p))
    for j in range(stack.p):
        W[:, j] = kernel_derivative(stack, kmat, j) @ u
    V = np.empty_like(W)
    for j in range(stack.p):
        V[:, j] = solve_regularized(kmat.values, smoothing, W[:, j])
    H = V.T @ W
    H = H + H.T
    for i in range(stack.p):
        for j in range(i, stack.p):
            c = float(u @ (kernel_curvature(stack, kmat, i, j) @ u))
            H[i, j] -= c
            if i != j:
                H[j, i] -= c
    return 0.5 * smoothing * H


def score_vector(stack: DistanceStack, scales, y, smoothing: float) -> np.ndarray:
    """Scaled gradient (1 / (smoothing * sqrt(n))) * objective_gradient."""
    return objective_gradient(stack, scales, y, smoothing) / (smoothing * np.sqrt(stack.n))


def curvature_matrix(stack: DistanceStack, scales, y, smoothing: float) -> np.ndarray:
    """Scaled Hessian (1 / (smoothing * n)) * objective_hessian."""
    return objective_hessian(stack, scales, y, smoothing) / (smoothing * stack.n)


def projection_score(stack: DistanceStack, scales, alpha) -> np.ndarray:
    """Coefficient-level form of the score: -(1/(2 sqrt(n))) a' K'_j a.

    Agrees with `score_vector` when the coefficients solve the regularized
    system at the same scales and smoothing.
    """
    s = validate_scales(scales, stack.p)
    alpha = np.asarray(alpha, dtype=float)
    kmat = kernel_matrix(stack, s)
    v = np.empty(stack.p)
    root_n = np.sqrt(stack.n)
    for j in range(stack.p):
        v[j] = -0.5 * float(alpha @ (kernel_derivative(stack, kmat, j) @ alpha)) / root_n
    return v


@dataclass(frozen=True)
class IncoherenceReport:
    """Pieces of the garrote incoherence condition at a reference point.

    ``lhs`` holds, for each inactive predictor, the correlation term minus
    the penalty-scaled projection term; the condition asks every entry to
    stay below 1.  ``gamma_margin`` is 1 - max(lhs) (infinite when no
    predictor is inactive), ``c_min`` the smallest eigenvalue of the active
    block, and ``v`` the coefficient-level score vector.
    """

    active: tuple[int, ...]
    inactive: tuple[int, ...]
    Z: np.ndarray
    sigma11: np.ndarray
    sigma01: np.ndarray
    projection: np.ndarray
    lhs: np.ndarray
    max_lhs: float
    gamma_margin: float
    c_min: float
    v: np.ndarray
    satisfied: bool
    rho_bound: float | None = None


def kernel_incoherence(
    stack: DistanceStack,
    scales_ref,
    active,
    alpha_ref,
    penalty: float,
    smoothing: float,
) -> IncoherenceReport:
    """Evaluate the garrote incoherence condition at a reference state.

    The lhs for the inactive block is

        sigma01 sigma11^-1 1  -  (smoothing / (2 n penalty)) Z0' P a

    with P the projector onto the orthocomplement of the active directions.
    """
    if not penalty > 0:
        raise ValueError("penalty must be positive")
    if not smoothing > 0:
        raise ValueError("smoothing must be positive")
    active = tuple(sorted(int(j) for j in set(active)))
    if not active:
        raise ValueError("active set must be nonempty")
    if active[0] < 0 or active[-1] >= stack.p:
        raise ValueError("active index out of range")
    alpha_ref = np.asarray(alpha_ref, dtype=float)

    Z = derivative_projections(stack, scales_ref, alpha_ref)
    inactive = tuple(j for j in range(stack.p) if j not in active)
    Z1 = Z[:, active]
    Z0 = Z[:, inactive]
    n = stack.n

    gram = Z1.T @ Z1
    sigma11 = gram / n
    sigma01 = (Z0.T @ Z1) / n
    eigs = scipy.linalg.eigvalsh(sigma11)
    c_min = float(eigs[0])
    if c_min <= 1e-14 * max(1.0, float(eigs[-1])):
        raise NumericalError("active derivative block is numerically singular")

    ones = np.ones(len(active))
    corr_term = sigma01 @ scipy.linalg.solve(sigma11, ones, assume_a="pos")
    # projector onto the orthocomplement of the active directions
    G = scipy.linalg.solve(gram, Z1.T @ alpha_ref, assume_a="pos")
    proj_alpha = alpha_ref - Z1 @ G
    proj_term = (smoothing / (2.0 * n * penalty)) * (Z0.T @ proj_alpha)
    lhs = corr_term - proj_term

    if lhs.size:
        max_lhs = float(lhs.max())
        margin = 1.0 - max_lhs
    else:
        max_lhs = float("-inf")
        margin = float("inf")
    return IncoherenceReport(
        active=active,
        inactive=inactive,
        Z=Z,
        sigma11=sigma11,
        sigma01=sigma01,
        projection=proj_alpha,
        lhs=lhs,
        max_lhs=max_lhs,
        gamma_margin=margin,
        c_min=c_min,
        v=projection_score(stack, scales_ref, alpha_ref),
        satisfied=bool(margin > 0.0),
    )


def lasso_incoherence(dataset: Dataset, active, signs) -> np.ndarray:
    """Classical irrepresentable-condition values for a linear model.

    Returns |X0' X1 (X1' X1)^-1 sign| per inactive predictor; any entry
    above 1 rules out sign-consistent lasso selection of the active set.
    """
    dataset.validate()
    active = tuple(sorted(int(j) for j in set(active)))
    if not active:
        raise ValueError("active set must be nonempty")
    signs = np.asarray(signs, dtype=float)
    if signs.shape != (len(active),):
        raise ValueError("need one sign per active predictor")
    if np.any(np.abs(signs) != 1.0):
        raise ValueError("signs must be +/-1")
    inactive = [j for j in range(dataset.p) if j not in active]
    X1 = dataset.X[:, active]
    X0 = dataset.X[:, inactive]
    try:
        coef = scipy.linalg.solve(X1.T @ X1, signs, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("active design block is numerically singular") from exc
    return np.abs(X0.T @ (X1 @ coef))


def kkt_residuals(
    stack: DistanceStack, scales_hat, alpha, y, penalty: float, smoothing: float
) -> np.ndarray:
    """Stationarity residuals of a converged path point.

    With g_j = (1/(n*penalty)) z_j' (yt - K a) the returned entry is
    g_j - 1 on the active set (should be ~0) and g_j off it (should stay
    below 1 up to tolerance).  A vanishing penalty makes the ratio blow up,
    so that case returns NaNs with a warning instead.
    """
    s = validate_scales(scales_hat, stack.p)
    if penalty < 1e-12:
        warnings.warn(
            "penalty too small for stationarity residuals; returning NaNs",
            RuntimeWarning,
            stacklevel=2,
        )
        return np.full(stack.p, np.nan)
    alpha = np.asarray(alpha, dtype=float)
    kmat = kernel_matrix(stack, s)
    resid = shifted_response(y, alpha, smoothing) - kmat.values @ alpha
    out = np.empty(stack.p)
    scale = stack.n * penalty
    for j in range(stack.p):
        g = float((kernel_derivative(stack, kmat, j) @ alpha) @ resid) / scale
        out[j] = g - 1.0 if s[j] > 0 else g
    return out


def recovery_bound(
    report: IncoherenceReport,
    penalty: float,
    smoothing: float,
    sigma: float,
    active_count: int,
    n: int,
) -> float:
    """Upper bound on the sup-norm error of the active scale estimates.

    Selection of the true support is predicted when this bound stays below
    the smallest truly nonzero scale.  Deviation terms that vanish in the
    large-sample limit are set to zero.
    """
    if active_count != len(report.active):
        raise ValueError("active_count does not match the report's active set")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    inv11 = scipy.linalg.inv(report.sigma11)
    inv_norm = float(np.abs(inv11).sum(axis=1).max())
    v_inf = float(np.abs(report.v).max())
    return float(
        penalty * 4.0 * sigma / np.sqrt(report.c_min)
        + smoothing * inv_norm * v_inf / np.sqrt(n)
        + penalty * inv_norm
    )


def incoherence_sweep(
    stack: DistanceStack, y, active, ref_scales, penalties, smoothings
) -> list[dict]:
    """Evaluate the garrote condition over a (penalty, smoothing) grid.

    For each smoothing value the reference coefficients are re-solved at the
    reference scales; rows report the worst lhs entry and the margin.
    """
    y = np.asarray(y, dtype=float)
    ref = validate_scales(ref_scales, stack.p)
    kmat = kernel_matrix(stack, ref)
    rows = []
    for s0 in smoothings:
        alpha = solve_regularized(kmat.values, float(s0), y)
        for lam in penalties:
            rep = kernel_incoherence(stack, ref, active, alpha, float(lam), float(s0))
            rows.append(
                {
                    "penalty": float(lam),
                    "smoothing": float(s0),
                    "max_lhs": rep.max_lhs,
                    "gamma_margin": rep.gamma_margin,
                    "satisfied": rep.satisfied,
                }
            )
    return rows
