"""Exponential smoothing forecasts for principal component scores.

Three additive-error, no-seasonality innovations state-space models are
fitted and compared:

* ``ANN`` simple exponential smoothing (level only),
* ``AAN`` linear trend (level and slope),
* ``AAdN`` damped trend (slope multiplied by a damping factor each step).

Annual score series carry no seasonality, and their sign changes rule out
multiplicative errors, so the family stops here.  Parameters are estimated
by minimizing the sum of squared one-step innovations on a 0.01 lattice:
a coarse sweep picks a starting point and two coordinate-descent passes
refine each parameter over its full admissible lattice.  Model choice is
by corrected AIC with parameter counts 3 (ANN), 5 (AAN), 6 (AAdN),
counting the initial states and the innovation variance; ties and
degenerate small-sample criteria resolve toward the simpler model.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, FitFailureError, InsufficientHistoryError

__all__ = ["EtsFit", "fit_ets", "forecast_scores"]

_ALPHA_GRID = np.round(np.arange(0.01, 1.00, 0.01), 2)
_PHI_GRID = np.round(np.arange(0.81, 0.99, 0.01), 2)
_SIGMA2_FLOOR = 1e-30


@dataclass(frozen=True)
class EtsFit:
    """Fitted exponential smoothing model for one score series.

    Attributes
    ----------
    model : str
        "ANN", "AAN", or "AAdN".
    alpha : float
        Level smoothing constant in (0, 1).
    beta : float or None
        Trend smoothing constant in (0, alpha]; None for ANN.
    phi : float or None
        Damping factor in (0.8, 0.98]; None unless AAdN.
    level, trend : float
        Final states; trend is 0.0 for ANN.
    sigma2 : float
        Innovation variance estimate, sum of squared innovations over n - 1.
    aicc : float
        Corrected AIC of the selected fit (may be +inf when the
        small-sample correction is undefined).
    n_obs : int
        Series length used in fitting.
    """

    model: str
    alpha: float
    beta: float | None
    phi: float | None
    level: float
    trend: float
    sigma2: float
    aicc: float
    n_obs: int


def _sweep(
    y: np.ndarray,
    model: str,
    alphas: np.ndarray,
    betas: np.ndarray | None = None,
    phis: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the innovation recursion for many parameter triples at once.

    All parameter arrays share one length m; returns (sse, level, trend)
    arrays of length m with the final states.
    """
    n = y.shape[0]
    m = alphas.shape[0]
    level = np.full(m, y[0])
    sse = np.zeros(m)
    if model == "ANN":
        for t in range(1, n):
            e = y[t] - level
            sse += e * e
            level = level + alphas * e
        return sse, level, np.zeros(m)
    trend = np.full(m, (y[3] - y[0]) / 3.0)
    if model == "AAN":
        for t in range(1, n):
            fitted = level + trend
            e = y[t] - fitted
            sse += e * e
            level = fitted + alphas * e
            trend = trend + betas * e
        return sse, level, trend
    for t in range(1, n):
        damped = phis * trend
        fitted = level + damped
        e = y[t] - fitted
        sse += e * e
        level = fitted + alphas * e
        trend = damped + betas * e
    return sse, level, trend


def _grid_upto(limit: float) -> np.ndarray:
    return _ALPHA_GRID[_ALPHA_GRID <= limit + 1e-12]


def _grid_from(limit: float) -> np.ndarray:
    return _ALPHA_GRID[_ALPHA_GRID >= limit - 1e-12]


def _best_index(sse: np.ndarray) -> int:
    # First index wins ties, so scans resolve toward the smallest value.
    return int(np.argmin(sse))


def _fit_one(y: np.ndarray, model: str) -> tuple[float, float, float, float, float, float]:
    """Estimate one candidate model; returns (sse, alpha, beta, phi, level, trend)."""
    if model == "ANN":
        sse, level, _ = _sweep(y, model, _ALPHA_GRID)
        i = _best_index(sse)
        return float(sse[i]), float(_ALPHA_GRID[i]), np.nan, np.nan, float(level[i]), 0.0

    # Coarse joint sweep (step 0.05 on smoothing constants) for a start point.
    coarse = np.round(np.arange(0.05, 1.00, 0.05), 2)
    phis_coarse = np.round([0.82, 0.86, 0.90, 0.94, 0.98], 2) if model == "AAdN" else [np.nan]
    combos = [
        (a, b, ph)
        for a in coarse
        for b in coarse[coarse <= a + 1e-12]
        for ph in phis_coarse
    ]
    arr = np.array(combos)
    sse, _, _ = _sweep(y, model, arr[:, 0], arr[:, 1], arr[:, 2] if model == "AAdN" else None)
    alpha, beta, phi = arr[_best_index(sse)]

    # Two coordinate-descent passes over the 0.01 lattice.
    for _ in range(2):
        grid = _grid_from(beta)
        m = grid.shape[0]
        sse, _, _ = _sweep(
            y, model, grid, np.full(m, beta), np.full(m, phi) if model == "AAdN" else None
        )
        alpha = float(grid[_best_index(sse)])

        grid = _grid_upto(alpha)
        m = grid.shape[0]
        sse, _, _ = _sweep(
            y, model, np.full(m, alpha), grid, np.full(m, phi) if model == "AAdN" else None
        )
        beta = float(grid[_best_index(sse)])

        if model == "AAdN":
            m = _PHI_GRID.shape[0]
            sse, _, _ = _sweep(y, model, np.full(m, alpha), np.full(m, beta), _PHI_GRID)
            phi = float(_PHI_GRID[_best_index(sse)])

    sse, level, trend = _sweep(
        y,
        model,
        np.array([alpha]),
        np.array([beta]),
        np.array([phi]) if model == "AAdN" else None,
    )
    return float(sse[0]), alpha, beta, phi, float(level[0]), float(trend[0])


def _aicc(sse: float, n_eff: int, n_params: int) -> float:
    sigma2 = max(sse / n_eff, _SIGMA2_FLOOR)
    loglik = -0.5 * n_eff * (np.log(2.0 * np.pi * sigma2) + 1.0)
    denom = n_eff - n_params - 1
    if denom <= 0:
        return np.inf
    return -2.0 * loglik + 2.0 * n_params + 2.0 * n_params * (n_params + 1) / denom


def fit_ets(series: np.ndarray) -> EtsFit:
    """Fit the candidate smoothing models and keep the lowest-AICc one.

    Trend models need at least 8 observations; 4 to 7 observations restrict
    the candidate set to simple exponential smoothing.  Initial states are
    level = first observation and trend = mean of the first differences
    over the first 4 points.

    Parameters
    ----------
    series : ndarray
        Score series of length n >= 4, finite.

    Returns
    -------
    EtsFit

    Raises
    ------
    InsufficientHistoryError
        If fewer than 4 observations are supplied.
    FitFailureError
        If no candidate produces a finite fit.
    """
    y = np.asarray(series, dtype=float).ravel()
    n = y.shape[0]
    if n < 4:
        raise InsufficientHistoryError(f"need at least 4 observations, got {n}")
    if not np.all(np.isfinite(y)):
        raise DataError("series entries must be finite")

    candidates = ["ANN"] if n < 8 else ["ANN", "AAN", "AAdN"]
    n_params = {"ANN": 3, "AAN": 5, "AAdN": 6}
    n_eff = n - 1

    fits: list[EtsFit] = []
    for model in candidates:
        sse, alpha, beta, phi, level, trend = _fit_one(y, model)
        if not np.isfinite(sse):
            continue
        fits.append(
            EtsFit(
                model=model,
                alpha=alpha,
                beta=None if model == "ANN" else beta,
                phi=phi if model == "AAdN" else None,
                level=level,
                trend=trend,
                sigma2=sse / n_eff,
                aicc=_aicc(sse, n_eff, n_params[model]),
                n_obs=n,
            )
        )
    if not fits:
        raise FitFailureError("no smoothing candidate produced a finite fit")
    aiccs = np.array([f.aicc for f in fits])
    if np.all(np.isinf(aiccs)):
        # Degenerate small-sample criterion: fall back to the simplest model.
        return fits[0]
    return fits[int(np.argmin(aiccs))]


def forecast_scores(fit: EtsFit, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Forecast means and variances 1..h steps ahead.

    Means follow the state recursion: flat at the level (ANN), level plus
    j * trend (AAN), or level plus trend times the partial sums of the
    damping powers (AAdN).  Variances accumulate squared impulse
    coefficients, v_j = sigma2 * (1 + sum of c_i^2 for i < j), which is
    non-decreasing in the horizon.

    Parameters
    ----------
    fit : EtsFit
    h : int
        Maximum horizon, >= 1.

    Returns
    -------
    (mean, variance)
        Arrays of shape (h,).
    """
    if h < 1:
        raise DataError("horizon must be at least 1")
    steps = np.arange(1, h + 1, dtype=float)
    if fit.model == "ANN":
        mean = np.full(h, fit.level)
        impulse = np.full(h, fit.alpha)
    elif fit.model == "AAN":
        mean = fit.level + fit.trend * steps
        impulse = fit.alpha + fit.beta * steps
    else:
        damp_partial = np.cumsum(fit.phi ** steps)
        mean = fit.level + fit.trend * damp_partial
        impulse = fit.alpha + fit.beta * damp_partial
    cum = np.concatenate([[0.0], np.cumsum(impulse[:-1] ** 2)])
    variance = fit.sigma2 * (1.0 + cum)
    return mean, variance
