"""Two-parameter Weibull maximum-likelihood fitting and the Weibull CDF.

The shape parameter is solved by Newton iteration on the profile-likelihood
equation; the scale then follows in closed form. This is the extreme-value
tail fit used to calibrate per-class distance distributions.
"""

from __future__ import annotations

import numpy as np


class FitError(Exception):
    """Base class for tail-fitting failures."""


class DegenerateTailError(FitError):
    pass


class NonConvergenceError(FitError):
    pass


def fit_weibull_mle(
    samples: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Fit Weibull(shape k, scale lambda) to positive samples by MLE.

    Newton's method runs on the profile equation for k,

        g(k) = sum(x^k ln x) / sum(x^k) - 1/k - mean(ln x) = 0,

    starting from k = 1; convergence requires |g(k)| (the per-sample
    log-likelihood gradient) to fall below ``tol`` within ``max_iter``
    iterations. Given k, the scale is lambda = mean(x^k)^(1/k).

    Raises DegenerateTailError when the sample has (numerically) zero
    variance or nonpositive values, and NonConvergenceError when the
    iteration cap is hit.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise DegenerateTailError("need at least two tail samples")
    if not np.all(np.isfinite(x)):
        raise DegenerateTailError("tail contains non-finite values")
    if np.any(x <= 0.0):
        raise DegenerateTailError("tail contains nonpositive distances")
    if float(np.var(x)) < 1e-12:
        raise DegenerateTailError("tail variance below 1e-12; no unique MLE")

    # g(k) is invariant under rescaling of x; normalizing keeps x^k well
    # conditioned for large k.
    scale0 = float(np.max(x))
    z = x / scale0
    ln_z = np.log(z)
    mean_ln = float(np.mean(ln_z))

    k = 1.0
    for _ in range(max_iter):
        z_k = z**k
        s0 = float(np.sum(z_k))
        s1 = float(np.sum(z_k * ln_z))
        s2 = float(np.sum(z_k * ln_z * ln_z))
        g = s1 / s0 - 1.0 / k - mean_ln
        if abs(g) < tol:
            lam = float(np.mean(z_k)) ** (1.0 / k)
            return k, lam * scale0
        dg = (s2 / s0 - (s1 / s0) ** 2) + 1.0 / (k * k)
        step = g / dg
        # Keep the iterate in the positive half-line.
        while k - step <= 0.0:
            step /= 2.0
        k -= step
    raise NonConvergenceError(
        f"Weibull shape iteration did not converge within {max_iter} steps"
    )


def cdf(d: float | np.ndarray, shape: float, scale: float) -> float | np.ndarray:
    """Weibull CDF F(d) = 1 - exp(-(d / scale)^shape) for d >= 0.

    The result is kept strictly below 1 even where the float expression
    saturates, matching the open upper bound of the true CDF.
    """
    if shape <= 0.0 or scale <= 0.0:
        raise ValueError("shape and scale must be positive")
    arr = np.asarray(d, dtype=np.float64)
    if np.any(arr < 0.0):
        raise ValueError("distance must be nonnegative")
    # Overflow of the power term to inf is the saturation case handled below.
    with np.errstate(over="ignore"):
        out = np.minimum(-np.expm1(-((arr / scale) ** shape)), np.nextafter(1.0, 0.0))
    return float(out) if np.isscalar(d) else out
