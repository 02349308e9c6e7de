"""End-to-end forecasters for the age distribution of deaths.

Four methods share one skeleton: map training densities to an
unconstrained space, decompose the panel into mean + orthonormal basis +
scores + residual curves, forecast each score series with exponential
smoothing, recombine, and map back to densities.

* ``cdf-ufts``   logit-of-CDF space, one panel per sex.
* ``cdf-mfts``   logit-of-CDF space, sexes standardized and stacked into
                 one joint panel.
* ``cdf-mlfts``  logit-of-CDF space, a common trend fitted to the sex
                 average plus per-sex deviation models.
* ``clr``        centred log-ratio space on death counts, one panel per sex.

Interval bounds come from simulated paths: Gaussian score draws with the
smoothing model's forecast mean and variance, plus in-sample residual
curves resampled with replacement, every path pushed through the full
inverse transform before pointwise quantiles are taken.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InsufficientHistoryError
from .ets import fit_ets, forecast_scores
from .fpca import Fixed, Selector, _fit_stage, fit_mfts, fit_mlfts, fit_ufts
from .lifetable import LifeTableSeries, normalize_to_density
from .transforms import (
    cdf_forward,
    cdf_to_density,
    clr_forward,
    clr_inverse,
    inverse_logit,
    logit_transform,
)

__all__ = [
    "METHODS",
    "ForecastResult",
    "forecast_cdf",
    "forecast_clr",
    "forecast_method",
    "interval_paths",
]

METHODS = ("cdf-ufts", "cdf-mfts", "cdf-mlfts", "clr")


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ForecastResult:
    """Point and interval forecasts of death densities for one sex.

    Attributes
    ----------
    method : str
        One of ``METHODS``.
    sex : str
    selector : str
        Human-readable component-selection record, e.g. "fixed(6)".
    components : tuple of int
        Retained component count per fitted stage (one entry for single
        -stage methods; common then deviation for the multilevel one).
    spectra : tuple of ndarray
        Full covariance spectrum per fitted stage, for diagnostics.
    years : ndarray
        Forecast calendar years, shape (H,).
    horizons : ndarray
        Steps ahead 1..H, shape (H,).
    ages : ndarray
        Age grid, shape (p,).
    point : ndarray
        Point density forecasts, shape (H, p); each row sums to 1.
    lower, upper : ndarray
        Pointwise interval bounds at level alpha, shape (H, p);
        lower <= upper elementwise.  The bounds are quantiles of
        back-transformed paths and may cross the point forecast at
        isolated ages.
    alpha : float
        Significance level (nominal coverage 1 - alpha).
    """

    method: str
    sex: str
    selector: str
    components: tuple[int, ...]
    spectra: tuple[np.ndarray, ...]
    years: np.ndarray
    horizons: np.ndarray
    ages: np.ndarray
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float


def _selector_label(selector: Selector) -> str:
    if isinstance(selector, Fixed):
        return f"fixed({selector.k})"
    return f"evr(kmax={selector.kmax})"


def interval_paths(
    mean_curve: np.ndarray,
    basis: np.ndarray,
    score_means: np.ndarray,
    score_vars: np.ndarray,
    residuals: np.ndarray,
    inverse_transform,
    n_paths: int = 5000,
    alpha: float = 0.2,
    seed=0,
) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise interval bounds from simulated transformed-space paths.

    For each horizon, draws ``n_paths`` score vectors from independent
    Gaussians with the forecast means and variances, adds a residual curve
    resampled with replacement from the in-sample residual rows, maps the
    resulting curves through ``inverse_transform``, and takes the empirical
    alpha/2 and 1 - alpha/2 quantiles age by age.

    In-sample residuals understate the functional error because the
    estimated mean and the K basis columns absorb part of it; resampled
    curves are therefore rescaled by sqrt(n / (n - 1 - K)), the usual
    degrees-of-freedom correction.

    Parameters
    ----------
    mean_curve : ndarray
        Deterministic part of the transformed forecast, shape (p,).
    basis : ndarray
        Orthonormal columns, shape (p, K).
    score_means, score_vars : ndarray
        Per-horizon forecast moments, shape (H, K).
    residuals : ndarray
        In-sample residual curves, shape (n, p).
    inverse_transform : callable
        Maps an (m, p) matrix of transformed curves to (m, q) densities.
    n_paths : int
        Number of simulated paths, at least 1000.
    alpha : float
        Significance level in (0, 1).
    seed : int or numpy SeedSequence
        Source of all randomness; results are deterministic given it.

    Returns
    -------
    (lower, upper)
        Arrays of shape (H, q) with lower <= upper elementwise.
    """
    if n_paths < 1000:
        raise DataError("need at least 1000 simulated paths")
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie in (0, 1)")
    score_means = np.atleast_2d(np.asarray(score_means, dtype=float))
    score_vars = np.atleast_2d(np.asarray(score_vars, dtype=float))
    horizons, k = score_means.shape
    n = residuals.shape[0]
    inflate = np.sqrt(n / max(n - 1 - basis.shape[1], 1))
    rng = np.random.default_rng(seed)

    lower = None
    upper = None
    for h in range(horizons):
        draws = rng.normal(size=(n_paths, k)) * np.sqrt(score_vars[h]) + score_means[h]
        idx = rng.integers(0, n, size=n_paths)
        curves = mean_curve + draws @ basis.T + inflate * residuals[idx]
        dens = inverse_transform(curves)
        if lower is None:
            lower = np.empty((horizons, dens.shape[1]))
            upper = np.empty((horizons, dens.shape[1]))
        lower[h] = np.quantile(dens, alpha / 2.0, axis=0)
        upper[h] = np.quantile(dens, 1.0 - alpha / 2.0, axis=0)
    return lower, upper


@dataclass(frozen=True)
class _Assembly:
    """One sex's forecasting pieces in transformed space."""

    sex: str
    mean_curve: np.ndarray
    basis: np.ndarray
    scores: np.ndarray
    residuals: np.ndarray
    inverse_transform: object
    components: tuple[int, ...]
    spectra: tuple[np.ndarray, ...]


def _cdf_inverse(rows: np.ndarray) -> np.ndarray:
    return cdf_to_density(inverse_logit(rows))


def _logit_panel(lt: LifeTableSeries, clip_eps: float) -> np.ndarray:
    dens = normalize_to_density(lt)
    return logit_transform(cdf_forward(dens.d), clip_eps)


def _assemble_ufts(lt: LifeTableSeries, selector: Selector, clip_eps: float) -> _Assembly:
    model = fit_ufts(_logit_panel(lt, clip_eps), selector)
    return _Assembly(
        sex=lt.sex,
        mean_curve=model.mean,
        basis=model.basis,
        scores=model.scores,
        residuals=model.residuals,
        inverse_transform=_cdf_inverse,
        components=(model.n_components,),
        spectra=(model.eigenvalues_all,),
    )


def _assemble_mfts(
    lt_f: LifeTableSeries,
    lt_m: LifeTableSeries,
    selector: Selector,
    clip_eps: float,
    scalar_scale: bool,
) -> list[_Assembly]:
    zf = _logit_panel(lt_f, clip_eps)
    zm = _logit_panel(lt_m, clip_eps)
    model, record = fit_mfts(zf, zm, selector, scalar_scale=scalar_scale)
    p = zf.shape[1]

    def make_inverse(lo: int, hi: int, center: np.ndarray, scale: np.ndarray):
        def inverse(rows: np.ndarray) -> np.ndarray:
            return _cdf_inverse(rows[:, lo:hi] * scale + center)

        return inverse

    out = []
    blocks = [
        (lt_f.sex, 0, p, record.center_female, record.scale_female),
        (lt_m.sex, p, 2 * p, record.center_male, record.scale_male),
    ]
    for sex, lo, hi, center, scale in blocks:
        out.append(
            _Assembly(
                sex=sex,
                mean_curve=model.mean,
                basis=model.basis,
                scores=model.scores,
                residuals=model.residuals,
                inverse_transform=make_inverse(lo, hi, center, scale),
                components=(model.n_components,),
                spectra=(model.eigenvalues_all,),
            )
        )
    return out


def _assemble_mlfts(
    lt_f: LifeTableSeries,
    lt_m: LifeTableSeries,
    selector: Selector,
    clip_eps: float,
) -> list[_Assembly]:
    zf = _logit_panel(lt_f, clip_eps)
    zm = _logit_panel(lt_m, clip_eps)
    model = fit_mlfts(zf, zm, selector)
    out = []
    pairs = [
        (lt_f.sex, model.mean_female, model.resid_female),
        (lt_m.sex, model.mean_male, model.resid_male),
    ]
    for sex, sex_mean, dev in pairs:
        # Common-trend and deviation components concatenate into one basis;
        # the deviation stage's residual curves carry the remaining noise.
        out.append(
            _Assembly(
                sex=sex,
                mean_curve=sex_mean + model.common.mean + dev.mean,
                basis=np.hstack([model.common.basis, dev.basis]),
                scores=np.hstack([model.common.scores, dev.scores]),
                residuals=dev.residuals,
                inverse_transform=_cdf_inverse,
                components=(model.common.n_components, dev.n_components),
                spectra=(model.common.eigenvalues_all, dev.eigenvalues_all),
            )
        )
    return out


def _forecast_assembly(
    assembly: _Assembly,
    last_year: int,
    ages: np.ndarray,
    method: str,
    selector: Selector,
    horizon: int,
    alpha: float,
    n_paths: int,
    seed,
) -> ForecastResult:
    k = assembly.scores.shape[1]
    means = np.empty((horizon, k))
    variances = np.empty((horizon, k))
    for j in range(k):
        fit = fit_ets(assembly.scores[:, j])
        means[:, j], variances[:, j] = forecast_scores(fit, horizon)

    z_hat = assembly.mean_curve + means @ assembly.basis.T
    point = assembly.inverse_transform(z_hat)
    lower, upper = interval_paths(
        assembly.mean_curve,
        assembly.basis,
        means,
        variances,
        assembly.residuals,
        assembly.inverse_transform,
        n_paths=n_paths,
        alpha=alpha,
        seed=seed,
    )
    horizons = np.arange(1, horizon + 1)
    return ForecastResult(
        method=method,
        sex=assembly.sex,
        selector=_selector_label(selector),
        components=assembly.components,
        spectra=tuple(_readonly(s) for s in assembly.spectra),
        years=_readonly(last_year + horizons),
        horizons=_readonly(horizons),
        ages=_readonly(np.asarray(ages)),
        point=_readonly(point),
        lower=_readonly(lower),
        upper=_readonly(upper),
        alpha=float(alpha),
    )


def _child_seeds(seed, count: int):
    if isinstance(seed, np.random.SeedSequence):
        return seed.spawn(count)
    return np.random.SeedSequence(seed).spawn(count)


def forecast_cdf(
    lt_f: LifeTableSeries | None,
    lt_m: LifeTableSeries | None = None,
    method: str = "cdf-ufts",
    selector: Selector = Fixed(6),
    horizon: int = 16,
    alpha: float = 0.2,
    n_paths: int = 5000,
    seed=0,
    clip_eps: float = 1e-10,
    scalar_scale: bool = False,
) -> dict[str, ForecastResult]:
    """Forecast death densities through the logit-of-CDF space.

    Runs normalize -> cumulative sum -> logit -> panel decomposition
    (univariate, stacked, or multilevel per ``method``) -> per-component
    smoothing forecasts -> recombination -> inverse logit with isotonic
    clamp -> first differences, with interval bounds from simulated paths.

    Parameters
    ----------
    lt_f, lt_m : LifeTableSeries or None
        Training series.  The stacked and multilevel methods need both;
        the univariate method forecasts whichever are given.
    method : str
        "cdf-ufts", "cdf-mfts", or "cdf-mlfts".
    selector : Fixed or EVR
        Component-count rule for every fitted stage.
    horizon : int
        Maximum steps ahead H >= 1.
    alpha : float
        Significance level of the interval bounds.
    n_paths : int
        Simulated paths per horizon (>= 1000).
    seed : int or numpy SeedSequence
        Randomness source; per-sex path simulations use spawned children.
    clip_eps : float
        CDF clipping constant for the logit.
    scalar_scale : bool
        Stacked method only: standardize each sex by one scalar instead of
        per-age standard deviations.

    Returns
    -------
    dict
        Sex label -> ForecastResult.

    Raises
    ------
    InsufficientHistoryError
        If a training series has fewer than 16 years.
    """
    if method not in ("cdf-ufts", "cdf-mfts", "cdf-mlfts"):
        raise DataError(f"unknown CDF method {method!r}")
    if horizon < 1:
        raise DataError("horizon must be at least 1")
    series = [lt for lt in (lt_f, lt_m) if lt is not None]
    if not series:
        raise DataError("at least one training series is required")
    for lt in series:
        if lt.n_years < 16:
            raise InsufficientHistoryError(
                f"{lt.sex}: need at least 16 training years, got {lt.n_years}"
            )
    if method in ("cdf-mfts", "cdf-mlfts") and (lt_f is None or lt_m is None):
        raise DataError(f"{method} requires both female and male series")

    if method == "cdf-ufts":
        assemblies = [_assemble_ufts(lt, selector, clip_eps) for lt in series]
    elif method == "cdf-mfts":
        assemblies = _assemble_mfts(lt_f, lt_m, selector, clip_eps, scalar_scale)
    else:
        assemblies = _assemble_mlfts(lt_f, lt_m, selector, clip_eps)

    seeds = _child_seeds(seed, len(assemblies))
    out: dict[str, ForecastResult] = {}
    for assembly, child, lt in zip(assemblies, seeds, series):
        out[assembly.sex] = _forecast_assembly(
            assembly,
            int(lt.years[-1]),
            lt.ages,
            method,
            selector,
            horizon,
            alpha,
            n_paths,
            child,
        )
    return out


def forecast_clr(
    lt: LifeTableSeries,
    selector: Selector = Fixed(6),
    horizon: int = 16,
    alpha: float = 0.2,
    n_paths: int = 5000,
    seed=0,
) -> ForecastResult:
    """Forecast death densities through centred log-ratio space.

    Death counts are mapped to log-ratios against their per-age geometric
    means, the ratio panel is decomposed and score-forecast exactly like
    the univariate CDF route, and forecasts are exponentiated back and
    renormalized.  A panel constant over years degenerates gracefully: the
    forecast equals the common density at every horizon.

    Parameters
    ----------
    lt : LifeTableSeries
        Training series with strictly positive death counts.
    selector, horizon, alpha, n_paths, seed
        As in :func:`forecast_cdf`.

    Returns
    -------
    ForecastResult
    """
    if horizon < 1:
        raise DataError("horizon must be at least 1")
    decomp = clr_forward(lt.dx, years=lt.years, ages=lt.ages)
    model = _fit_stage(decomp.beta, selector)

    def inverse(rows: np.ndarray) -> np.ndarray:
        return np.atleast_2d(clr_inverse(rows, decomp.alpha))

    assembly = _Assembly(
        sex=lt.sex,
        mean_curve=model.mean,
        basis=model.basis,
        scores=model.scores,
        residuals=model.residuals,
        inverse_transform=inverse,
        components=(model.n_components,),
        spectra=(model.eigenvalues_all,),
    )
    child = _child_seeds(seed, 1)[0]
    return _forecast_assembly(
        assembly, int(lt.years[-1]), lt.ages, "clr", selector, horizon, alpha, n_paths, child
    )


def forecast_method(
    method: str,
    lt_f: LifeTableSeries | None,
    lt_m: LifeTableSeries | None,
    selector: Selector = Fixed(6),
    horizon: int = 16,
    alpha: float = 0.2,
    n_paths: int = 5000,
    seed=0,
    clip_eps: float = 1e-10,
    scalar_scale: bool = False,
) -> dict[str, ForecastResult]:
    """Dispatch one method name to its forecaster, returning per-sex results."""
    if method == "clr":
        series = [lt for lt in (lt_f, lt_m) if lt is not None]
        if not series:
            raise DataError("at least one training series is required")
        seeds = _child_seeds(seed, len(series))
        return {
            lt.sex: forecast_clr(lt, selector, horizon, alpha, n_paths, child)
            for lt, child in zip(series, seeds)
        }
    return forecast_cdf(
        lt_f,
        lt_m,
        method=method,
        selector=selector,
        horizon=horizon,
        alpha=alpha,
        n_paths=n_paths,
        seed=seed,
        clip_eps=clip_eps,
        scalar_scale=scalar_scale,
    )
