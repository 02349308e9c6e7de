"""Invertible maps between death densities and unconstrained curves.

Two routes are provided, both operating on panels whose rows are years and
whose columns are ages.

CDF route
    Running sums turn a density row into a cumulative distribution; the
    logit of the interior CDF values (the terminal point is identically 1
    and is dropped) gives an unconstrained curve.  Inversion applies the
    overflow-safe sigmoid, restores monotonicity with an isotonic clamp,
    closes the curve at 1, and takes first differences, so the output is
    always a valid density.

Centred log-ratio route
    Log death counts minus the per-age log geometric mean over years.
    Inversion exponentiates against the stored geometric means and
    renormalizes to the simplex, since out-of-sample forecasts do not hit
    the radix exactly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.special import expit

from .errors import DataError, NumericalError, ZeroCountError

__all__ = [
    "ClrDecomposition",
    "cdf_forward",
    "logit_transform",
    "inverse_logit",
    "cdf_to_density",
    "clr_forward",
    "clr_inverse",
]


def _validate_density(d: np.ndarray) -> None:
    if not np.all(np.isfinite(d)):
        raise DataError("density contains non-finite entries")
    if np.any(d < -1e-12):
        raise DataError("density contains negative entries")
    if np.any(np.abs(d.sum(axis=1) - 1.0) > 1e-9):
        raise DataError("density rows must sum to 1")


def cdf_forward(d: np.ndarray) -> np.ndarray:
    """Cumulative distribution rows from density rows.

    Parameters
    ----------
    d : ndarray
        Density panel, shape (n, p) or (p,); rows sum to 1.

    Returns
    -------
    ndarray
        Running sums with the final column renormalized to exactly 1.
    """
    d = np.atleast_2d(np.asarray(d, dtype=float))
    _validate_density(d)
    D = np.cumsum(d, axis=1)
    D /= D[:, -1:]
    return np.clip(D, 0.0, 1.0)


def logit_transform(D: np.ndarray, clip_eps: float = 1e-10) -> np.ndarray:
    """Log-odds of the interior CDF values.

    The terminal column (identically 1, infinite logit) is dropped; interior
    values are clipped into [clip_eps, 1 - clip_eps] to remove the
    singularities at exactly 0 or 1.

    Parameters
    ----------
    D : ndarray
        CDF panel, shape (n, p); rows non-decreasing with final column 1.
    clip_eps : float
        Clipping constant in (0, 1e-6].

    Returns
    -------
    ndarray
        Shape (n, p - 1) panel of logits over the interior ages.
    """
    if not 0.0 < clip_eps <= 1e-6:
        raise DataError("clip_eps must lie in (0, 1e-6]")
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if np.any(D < -1e-12) or np.any(D > 1.0 + 1e-12):
        raise DataError("CDF entries must lie in [0, 1]")
    interior = np.clip(D[:, :-1], clip_eps, 1.0 - clip_eps)
    return np.log(interior) - np.log1p(-interior)


def inverse_logit(Z: np.ndarray) -> np.ndarray:
    """CDF rows from logit rows.

    Applies the overflow-safe sigmoid, appends the terminal value 1, and
    makes each row non-decreasing with a pool-adjacent-violators pass.
    Forecast logit curves need not be monotone; the clamp guarantees the
    differenced densities are nonnegative.

    Parameters
    ----------
    Z : ndarray
        Finite logit panel, shape (n, p - 1) or (p - 1,).

    Returns
    -------
    ndarray
        CDF panel, shape (n, p), each row non-decreasing and ending at 1.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if not np.all(np.isfinite(Z)):
        raise DataError("logit panel must be finite")
    n = Z.shape[0]
    D = np.empty((n, Z.shape[1] + 1))
    D[:, :-1] = expit(Z)
    D[:, -1] = 1.0
    for i in range(n):
        row = D[i]
        if np.any(np.diff(row) < 0.0):
            D[i] = isotonic_regression(row).x
    np.clip(D, 0.0, 1.0, out=D)
    D[:, -1] = 1.0
    return D


def cdf_to_density(D: np.ndarray) -> np.ndarray:
    """Density rows from CDF rows by first differences.

    d[t, 0] = D[t, 0] and d[t, x] = D[t, x] - D[t, x-1]; monotone input
    makes every entry nonnegative and each row sum to the terminal value 1.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if np.any(np.diff(D, axis=1) < -1e-12):
        raise DataError("CDF rows must be non-decreasing")
    d = np.diff(D, axis=1, prepend=0.0)
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class ClrDecomposition:
    """Centred log-ratio coordinates of a positive count panel.

    Attributes
    ----------
    alpha : ndarray
        Per-age geometric means over years, shape (p,), strictly positive.
    beta : ndarray
        Log counts minus log geometric mean, shape (n, p); each age column
        sums to 0 over years by construction.
    """

    alpha: np.ndarray
    beta: np.ndarray


def clr_forward(
    dx: np.ndarray,
    years: np.ndarray | None = None,
    ages: np.ndarray | None = None,
) -> ClrDecomposition:
    """Centred log-ratio transform of a strictly positive count panel.

    alpha[x] = exp(mean over t of ln dx[t, x]) and
    beta[t, x] = ln dx[t, x] - ln alpha[x].

    Parameters
    ----------
    dx : ndarray
        Count panel, shape (n, p), strictly positive everywhere.
    years, ages : ndarray, optional
        Labels used only in error messages; defaults are row/column indices.

    Raises
    ------
    ZeroCountError
        If any entry is zero or negative; rebuilding counts from death
        probabilities upstream is the supported way to avoid zeros.
    """
    dx = np.atleast_2d(np.asarray(dx, dtype=float))
    if np.any(dx <= 0.0) or not np.all(np.isfinite(dx)):
        t, x = np.argwhere(~(dx > 0.0) | ~np.isfinite(dx))[0]
        year = years[t] if years is not None else t
        age = ages[x] if ages is not None else x
        raise ZeroCountError(
            f"nonpositive death count at year {year}, age {age}; "
            "rebuild counts from death probabilities first"
        )
    logd = np.log(dx)
    log_alpha = logd.mean(axis=0)
    return ClrDecomposition(alpha=np.exp(log_alpha), beta=logd - log_alpha)


def clr_inverse(beta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Density rows from centred log-ratio rows.

    Exponentiates, multiplies back the geometric means, and renormalizes
    each row to sum to 1.

    Parameters
    ----------
    beta : ndarray
        Log-ratio rows, shape (m, p) or (p,); entries above 700 are
        rejected as divergent forecasts before exponentiation.
    alpha : ndarray
        Strictly positive geometric means, shape (p,).

    Returns
    -------
    ndarray
        Density rows with the input's dimensionality.
    """
    beta_arr = np.asarray(beta, dtype=float)
    single = beta_arr.ndim == 1
    beta2 = np.atleast_2d(beta_arr)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0.0):
        raise DataError("geometric means must be strictly positive")
    if not np.all(np.isfinite(beta2)):
        raise DataError("log-ratio rows must be finite")
    if np.any(beta2 > 700.0):
        raise NumericalError("divergent log-ratio forecast (entry above 700)")
    draft = np.exp(beta2 + np.log(alpha)[None, :])
    dens = draft / draft.sum(axis=1, keepdims=True)
    return dens[0] if single else dens
