"""Scaled kernel matrices and least-squares kernel machine fits.

The kernel of the machine is assembled from the distance stack and a
nonnegative per-predictor scale vector.  Fitting solves a ridge-type linear
system in the kernel; the smoothing parameter is either supplied or estimated
as the noise/signal variance ratio of a Gaussian variance-components model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .data import DistanceStack, KernelKind
from .errors import NumericalError

# diagonal jitter ladder tried before a solve is declared failed
JITTERS = (0.0, 1e-10, 1e-8, 1e-6)

# search bounds for the noise/signal variance ratio
RATIO_BOUNDS = (1e-8, 1e8)


def validate_scales(scales, p: int) -> np.ndarray:
    """Coerce and check a per-predictor scale vector (nonnegative, finite)."""
    arr = np.ascontiguousarray(scales, dtype=float)
    if arr.shape != (p,):
        raise ValueError(f"expected {p} scales, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scales must be finite")
    if np.any(arr < 0):
        raise ValueError("scales must be nonnegative")
    return arr


@dataclass(frozen=True)
class KernelMatrix:
    """A kernel evaluated at a fixed scale vector."""

    values: np.ndarray
    kind: KernelKind
    scales: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def validate(self) -> None:
        """Expensive structural checks (symmetry, PSD floor, entry ranges)."""
        K = self.values
        if not np.array_equal(K, K.T):
            raise NumericalError("kernel matrix is not symmetric")
        if self.kind == "gaussian":
            if np.any(K <= 0) or np.any(K > 1.0):
                raise NumericalError("gaussian kernel entries must lie in (0, 1]")
            if np.any(np.diag(K) != 1.0):
                raise NumericalError("gaussian kernel diagonal must be exactly 1")
        eigs = scipy.linalg.eigvalsh(K)
        floor = -1e-8 * max(1.0, float(np.abs(eigs).max()))
        if eigs[0] < floor:
            raise NumericalError("kernel matrix is not positive semidefinite")


def kernel_matrix(stack: DistanceStack, scales) -> KernelMatrix:
    """Evaluate the scaled kernel on the stack's design."""
    s = validate_scales(scales, stack.p)
    base = stack.weighted_sum(s)
    if stack.kind == "gaussian":
        values = np.exp(base)
    else:
        values = base
    return KernelMatrix(values, stack.kind, s)


def kernel_derivative(stack: DistanceStack, kmat: KernelMatrix, j: int) -> np.ndarray:
    """Derivative of the kernel in scale ``j`` at the matrix's scale vector.

    Gaussian kernels differentiate to an entrywise product with block ``j``;
    linear-polynomial kernels are linear in the scales, so the derivative is
    block ``j`` itself.
    """
    D = stack.matrix(j)
    if stack.kind == "gaussian":
        return kmat.values * D
    return D


def kernel_curvature(stack: DistanceStack, kmat: KernelMatrix, i: int, j: int) -> np.ndarray:
    """Second derivative of the kernel in scales ``i`` and ``j``."""
    if stack.kind == "gaussian":
        return kmat.values * stack.matrix(i) * stack.matrix(j)
    return np.zeros((stack.n, stack.n))


def solve_regularized(K: np.ndarray, smoothing: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (smoothing * I + K) x = rhs with a jitter-escalating Cholesky."""
    if not smoothing > 0:
        raise NumericalError("smoothing parameter must be positive")
    n = K.shape[0]
    A = K + smoothing * np.eye(n)
    for jit in JITTERS:
        try:
            cf = scipy.linalg.cho_factor(
                A if jit == 0.0 else A + jit * np.eye(n), lower=True
            )
            return scipy.linalg.cho_solve(cf, rhs)
        except scipy.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"regularized kernel solve failed after jitter escalation up to {JITTERS[-1]}"
    )


@dataclass(frozen=True)
class KernelMachineFit:
    """Coefficients and variance components of a kernel machine fit.

    ``noise_var``/``signal_var`` are populated only when the fit came from
    variance-component estimation; ``warning`` flags a flat or boundary
    likelihood profile.
    """

    alpha: np.ndarray
    smoothing: float
    fitted: np.ndarray
    noise_var: float | None = None
    signal_var: float | None = None
    warning: str | None = None


def fit_kernel_machine(kmat: KernelMatrix, y: np.ndarray, smoothing: float) -> KernelMachineFit:
    """Fit coefficients at a known smoothing: alpha = (smoothing*I + K)^-1 y."""
    y = np.asarray(y, dtype=float)
    alpha = solve_regularized(kmat.values, smoothing, y)
    return KernelMachineFit(alpha=alpha, smoothing=float(smoothing), fitted=kmat.values @ alpha)


def _psd_eigh(K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a kernel, clipping round-off negatives to zero."""
    mu, U = scipy.linalg.eigh(K)
    floor = -1e-8 * max(1.0, float(np.abs(mu).max()))
    if mu[0] < floor:
        raise NumericalError("kernel matrix is not positive semidefinite")
    return np.clip(mu, 0.0, None), U


def marginal_loglik(kmat: KernelMatrix, y: np.ndarray, noise_var: float, signal_var: float) -> float:
    """Log-likelihood of y ~ N(0, signal_var * K + noise_var * I)."""
    if noise_var <= 0 or signal_var <= 0:
        raise ValueError("variance components must be positive")
    mu, U = _psd_eigh(kmat.values)
    w = U.T @ np.asarray(y, dtype=float)
    v = signal_var * mu + noise_var
    n = y.shape[0]
    return float(-0.5 * (np.log(v).sum() + (w * w / v).sum() + n * np.log(2.0 * np.pi)))


def variance_components(kmat: KernelMatrix, y: np.ndarray) -> KernelMachineFit:
    """Estimate (noise, signal) variances by maximum marginal likelihood.

    The likelihood is profiled over the ratio r = noise/signal: for fixed r
    the signal variance has the closed form mean(w^2 / (mu + r)), leaving a
    deterministic 1-D search over log r within RATIO_BOUNDS.  The returned
    fit uses smoothing = r at the optimum.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    mu, U = _psd_eigh(kmat.values)
    w = U.T @ y
    w2 = w * w

    def profile_nll(log_r: float) -> float:
        r = np.exp(log_r)
        sig = np.mean(w2 / (mu + r))
        # degenerate response direction; likelihood unbounded is impossible
        # here because y has nonzero norm, but guard anyway
        sig = max(sig, 1e-300)
        return 0.5 * (n * np.log(sig) + np.log(mu + r).sum() + n)

    lo, hi = np.log(RATIO_BOUNDS[0]), np.log(RATIO_BOUNDS[1])
    grid = np.linspace(lo, hi, 321)
    vals = np.array([profile_nll(g) for g in grid])
    k = int(np.argmin(vals))

    warning = None
    if vals.max() - vals.min() < 1e-9 * max(1.0, float(np.abs(vals).max())):
        warning = "flat likelihood profile; smoothing weakly identified"
    if k == 0 or k == grid.size - 1:
        warning = "likelihood optimum at ratio bound; smoothing weakly identified"
        best = grid[k]
    else:
        res = scipy.optimize.minimize_scalar(
            profile_nll,
            bounds=(grid[k - 1], grid[k + 1]),
            method="bounded",
            options={"xatol": 1e-10},
        )
        best = res.x if res.fun <= vals[k] else grid[k]

    r = float(np.exp(best))
    signal = float(np.mean(w2 / (mu + r)))
    if signal < RATIO_BOUNDS[0] or signal > RATIO_BOUNDS[1]:
        warning = "signal variance at bound; smoothing weakly identified"
        signal = float(np.clip(signal, RATIO_BOUNDS[0], RATIO_BOUNDS[1]))
    noise = r * signal
    alpha = U @ (w / (mu + r))
    fitted = kmat.values @ alpha
    if warning is not None:
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return KernelMachineFit(
        alpha=alpha,
        smoothing=r,
        fitted=fitted,
        noise_var=noise,
        signal_var=signal,
        warning=warning,
    )


def estimate_smoothing(
    stack: DistanceStack, y: np.ndarray, uniform_scale: float | None = None
) -> KernelMachineFit:
    """Variance-component fit at a uniform scale vector (default 1/p)."""
    rho = 1.0 / stack.p if uniform_scale is None else float(uniform_scale)
    if rho <= 0:
        raise ValueError("uniform scale must be positive")
    kmat = kernel_matrix(stack, np.full(stack.p, rho))
    return variance_components(kmat, y)


def concentrated_objective(kmat: KernelMatrix, y: np.ndarray, smoothing: float) -> float:
    """Penalized least-squares value with coefficients solved out.

    Equals 0.5 * smoothing * y' (smoothing*I + K)^-1 y, which is
    non-increasing in the kernel (adding any PSD matrix cannot raise it).
    """
    y = np.asarray(y, dtype=float)
    return float(0.5 * smoothing * (y @ solve_regularized(kmat.values, smoothing, y)))
