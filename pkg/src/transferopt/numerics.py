"""Shared numerical kernels.

Normal CDF/quantile, logistic acceptance curves, the log-normal
sum approximation used by the budget chance constraint, monotone table
inversion, and a Broyden quasi-Newton solver for the equilibrium
boundary-value systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "LogNormalParams",
    "AffinitySpec",
    "MonotoneTable",
    "OutOfDomainError",
    "EmptySumError",
    "BelowRangeError",
    "NoConvergenceError",
    "NonFiniteResidualError",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "lognormal_mean",
    "lognormal_variance",
    "marlow_approx",
    "chance_bound",
    "logistic_cdf",
    "logistic_log_derivative",
    "monotone_invert",
    "broyden_solve",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class OutOfDomainError(ValueError):
    pass


class EmptySumError(ValueError):
    pass


class BelowRangeError(ValueError):
    """Requested value lies below the table range (caller treats as abstention)."""


class NoConvergenceError(RuntimeError):
    def __init__(self, iterations: int, final_norm: float, best_x=None):
        self.iterations = iterations
        self.final_norm = final_norm
        self.best_x = best_x  # last iterate, for continuation strategies
        super().__init__(
            f"no convergence after {iterations} iterations (residual norm {final_norm:.3e})"
        )


class NonFiniteResidualError(RuntimeError):
    pass


@dataclass(frozen=True)
class LogNormalParams:
    """Parameters (mu, sigma) of log X ~ N(mu, sigma^2); money in millions of euros.

    sigma = 0 is admitted as a degenerate point mass at exp(mu).
    """

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma == 0.0:
            return np.where(x >= math.exp(self.mu), 1.0, 0.0)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = normal_cdf((np.log(x[pos]) - self.mu) / self.sigma)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma == 0.0:
            raise ValueError("degenerate log-normal has no density")
        out = np.zeros_like(x)
        pos = x > 0
        z = (np.log(x[pos]) - self.mu) / self.sigma
        out[pos] = np.exp(-0.5 * z * z) * _INV_SQRT_2PI / (x[pos] * self.sigma)
        return out if out.ndim else float(out)

    def quantile(self, p: float) -> float:
        if not 0.0 < p < 1.0:
            raise OutOfDomainError(f"p must be in (0,1), got {p}")
        return math.exp(self.mu + self.sigma * normal_quantile(p))


@dataclass(frozen=True)
class AffinitySpec:
    """Logistic acceptance curve: location ``center`` and ``scale`` in millions."""

    center: float
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class MonotoneTable:
    """Tabulated nondecreasing function on a strictly ascending grid."""

    xs: np.ndarray
    ys: np.ndarray

    MONOTONE_TOL = 1e-5

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise ValueError("xs and ys must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly ascending")
        if np.any(np.diff(ys) < -self.MONOTONE_TOL):
            raise ValueError("ys must be nondecreasing (within tolerance)")


def normal_cdf(z):
    z = np.asarray(z, dtype=float)
    out = ndtr(z)
    return float(out) if out.ndim == 0 else out


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) * _INV_SQRT_2PI
    return float(out) if out.ndim == 0 else out


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF."""
    if not 0.0 < p < 1.0:
        raise OutOfDomainError(f"p must be in (0,1), got {p}")
    return float(ndtri(p))


def lognormal_mean(params: LogNormalParams) -> float:
    return math.exp(params.mu + 0.5 * params.sigma**2)


def lognormal_variance(params: LogNormalParams) -> float:
    s2 = params.sigma**2
    return (math.exp(s2) - 1.0) * math.exp(2.0 * params.mu + s2)


def marlow_approx(components: Sequence[LogNormalParams]) -> LogNormalParams:
    """Moment-matching log-normal approximation of an independent log-normal sum.

    The result has exactly the mean and variance of the sum; a one-term
    "sum" is returned unchanged.
    """
    if len(components) == 0:
        raise EmptySumError("cannot approximate an empty sum")
    if len(components) == 1:
        return components[0]
    mean = sum(lognormal_mean(c) for c in components)
    var = sum(lognormal_variance(c) for c in components)
    sigma2 = math.log(var / mean**2 + 1.0)
    mu = math.log(mean) - 0.5 * sigma2
    return LogNormalParams(mu, math.sqrt(sigma2))


def chance_bound(total: LogNormalParams, alpha: float) -> float:
    """Deterministic-equivalent LHS of the budget chance constraint.

    Returns mu + z_{1-alpha} * sigma on the log scale; the caller compares
    against log of the budget cap.
    """
    if not 0.0 < alpha < 1.0:
        raise OutOfDomainError(f"alpha must be in (0,1), got {alpha}")
    return total.mu + normal_quantile(1.0 - alpha) * total.sigma


def logistic_cdf(b, spec: AffinitySpec):
    b = np.asarray(b, dtype=float)
    out = 1.0 / (1.0 + np.exp(-(b - spec.center) / spec.scale))
    return float(out) if out.ndim == 0 else out


def logistic_log_derivative(b, spec: AffinitySpec):
    """d/db log of the logistic CDF, i.e. (1 - cdf(b)) / scale."""
    b = np.asarray(b, dtype=float)
    out = (1.0 - 1.0 / (1.0 + np.exp(-(b - spec.center) / spec.scale))) / spec.scale
    return float(out) if out.ndim == 0 else out


def monotone_invert(table: MonotoneTable, y: float) -> float:
    """Invert a tabulated nondecreasing function by linear interpolation.

    Below the range raises BelowRangeError (abstention); above the range
    clamps to the last grid point. Flat segments resolve to the segment's
    left endpoint (the lowest consistent preimage).
    """
    ys = table.ys
    xs = table.xs
    if y < ys[0]:
        raise BelowRangeError(f"{y} below table range [{ys[0]}, {ys[-1]}]")
    if y >= ys[-1]:
        return float(xs[-1])
    # first k with ys[k] >= y; flat runs resolve to their first index
    k = int(np.searchsorted(ys, y, side="left"))
    if ys[k] == y:
        return float(xs[k])
    lo, hi = k - 1, k
    dy = ys[hi] - ys[lo]
    t = (y - ys[lo]) / dy
    return float(xs[lo] + t * (xs[hi] - xs[lo]))


def _finite_difference_jacobian(residual, x, fx):
    n = len(x)
    jac = np.empty((n, n))
    for i in range(n):
        step = 1e-6 * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += step
        fp = residual(xp)
        jac[:, i] = (fp - fx) / step
    return jac


def broyden_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    tol: float = 1e-8,
    max_iter: int = 200,
) -> np.ndarray:
    """Broyden's (good) quasi-Newton method with a halving line search.

    The initial Jacobian is a forward finite-difference estimate with step
    1e-6*(1+|x|); on a failed line search the Jacobian is rebuilt once
    before giving up on the iteration.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise NonFiniteResidualError("residual not finite at starting point")
    norm = np.max(np.abs(fx))
    if norm <= tol:
        return x

    jac = _finite_difference_jacobian(residual, x, fx)
    jac_fresh = True
    it = 0
    while it < max_iter:
        it += 1
        try:
            dx = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(jac, -fx, rcond=None)[0]

        # backtracking on residual-norm increase, max 20 halvings
        step = 1.0
        x_new = f_new = None
        for _ in range(21):
            cand = x + step * dx
            f_cand = np.asarray(residual(cand), dtype=float)
            if np.all(np.isfinite(f_cand)) and np.max(np.abs(f_cand)) < norm:
                x_new, f_new = cand, f_cand
                break
            step *= 0.5
        if x_new is None:
            if jac_fresh:
                raise NoConvergenceError(it, norm, best_x=x.copy())
            # stale-Jacobian stall: rebuild and retry the iteration
            jac = _finite_difference_jacobian(residual, x, fx)
            jac_fresh = True
            continue

        s = x_new - x
        yvec = f_new - fx
        denom = s @ s
        if denom > 0:
            jac += np.outer(yvec - jac @ s, s) / denom
        jac_fresh = False
        x, fx = x_new, f_new
        norm = np.max(np.abs(fx))
        if norm <= tol:
            return x
    raise NoConvergenceError(max_iter, norm, best_x=x.copy())
