"""Expanding-window forecast evaluation and accuracy metrics.

The harness refits every method from scratch on successively longer
training spans, forecasting to the end of the data each time, and pools
errors per horizon: with a 16-year test span there are 16 one-step
forecasts, 15 two-step forecasts, and so on down to a single 16-step
forecast.  Divergence and interval metrics are averaged over all forecast
curves and ages at a horizon, i.e. with denominator (number of ages) x
(number of forecasts at that horizon); life-expectancy errors aggregate
per curve.  Stored values are unscaled; renderers multiply divergences and
interval scores by 100 for display only.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, MortcastError
from .fpca import Fixed, Selector
from .lifetable import LifeTableSeries, life_expectancy, normalize_to_density, rebuild_dx_from_qx
from .pipeline import METHODS, forecast_method

__all__ = [
    "WindowPlan",
    "MetricRow",
    "MetricReport",
    "kld",
    "kld_symmetric",
    "jsd_geometric",
    "interval_score",
    "ecp_cpd",
    "e0_errors",
    "run_expanding_window",
    "report_to_csv",
    "comparison_table",
]

_LOG_CLIP = 1e-15


@dataclass(frozen=True)
class WindowPlan:
    """Expanding-window layout over calendar years.

    Attributes
    ----------
    train_start : int
        First training year (every window starts here).
    first_test_year : int
        First year ever forecast; the first window trains through the year
        before it.
    last_year : int
        Final year of data; the last window trains through last_year - 1.
    max_horizon : int
        Cap on forecast steps per window.
    """

    train_start: int
    first_test_year: int
    last_year: int
    max_horizon: int = 16

    def __post_init__(self) -> None:
        if not self.train_start < self.first_test_year <= self.last_year:
            raise DataError("window plan years must satisfy start < first test <= last")
        if self.max_horizon < 1:
            raise DataError("max_horizon must be at least 1")

    @property
    def test_span(self) -> int:
        return self.last_year - self.first_test_year + 1

    @property
    def horizons(self) -> np.ndarray:
        return np.arange(1, min(self.max_horizon, self.test_span) + 1)

    def n_forecasts(self, h: int) -> int:
        """Number of h-step forecasts the plan produces."""
        if not 1 <= h <= min(self.max_horizon, self.test_span):
            return 0
        return self.test_span - h + 1

    def windows(self) -> list[tuple[int, int]]:
        """(training end year, horizon) for each window, in calendar order."""
        out = []
        for train_end in range(self.first_test_year - 1, self.last_year):
            horizon = min(self.max_horizon, self.last_year - train_end)
            out.append((train_end, horizon))
        return out


@dataclass(frozen=True)
class MetricRow:
    """Pooled accuracy of one (method, sex, horizon) cell."""

    method: str
    sex: str
    selector: str
    horizon: int
    kld: float
    jsd: float
    interval_score: float
    ecp: float
    cpd: float
    rmsfe_e0: float
    mafe_e0: float


@dataclass(frozen=True)
class MetricReport:
    """All metric rows of one evaluation run."""

    rows: tuple[MetricRow, ...]
    alpha: float

    def cell(self, method: str, sex: str, horizon: int) -> MetricRow:
        for row in self.rows:
            if row.method == method and row.sex == sex and row.horizon == horizon:
                return row
        raise KeyError((method, sex, horizon))


def _clipped(d: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(d, dtype=float), _LOG_CLIP)


def kld(p: np.ndarray, q: np.ndarray) -> float:
    """One-directional Kullback-Leibler divergence sum(p * (ln p - ln q)).

    Entries are clipped below at 1e-15 before the logs, so zero cells from
    clamped forecasts cannot produce infinities.
    """
    pc, qc = _clipped(p), _clipped(q)
    return float(np.sum(pc * (np.log(pc) - np.log(qc))))


def kld_symmetric(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetrized divergence: both directions summed.

    Equals kld(p, q) + kld(q, p); symmetric in its arguments exactly.
    This is the quantity the evaluation harness pools per horizon.
    """
    return kld(p, q) + kld(q, p)


def jsd_geometric(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon-style divergence against the geometric mean.

    Uses delta = sqrt(p * q) without renormalizing it, so the usual ln 2
    upper bound does not apply; nonnegativity holds empirically for
    density inputs.  Same clipping as :func:`kld`.
    """
    pc, qc = _clipped(p), _clipped(q)
    log_delta = 0.5 * (np.log(pc) + np.log(qc))
    half_p = 0.5 * float(np.sum(pc * (np.log(pc) - log_delta)))
    half_q = 0.5 * float(np.sum(qc * (np.log(qc) - log_delta)))
    return half_p + half_q


def interval_score(lower, upper, actual, alpha: float):
    """Proper score of a central (1 - alpha) interval for one outcome.

    Width plus 2/alpha times the distance by which the outcome escapes
    the interval; equals the width exactly when the outcome is covered.
    Broadcasts over arrays; scalars in, float out.
    """
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie strictly between 0 and 1")
    lower_arr = np.asarray(lower, dtype=float)
    upper_arr = np.asarray(upper, dtype=float)
    actual_arr = np.asarray(actual, dtype=float)
    if np.any(lower_arr > upper_arr):
        raise DataError("interval bounds must satisfy lower <= upper")
    width = upper_arr - lower_arr
    below = np.maximum(lower_arr - actual_arr, 0.0)
    above = np.maximum(actual_arr - upper_arr, 0.0)
    score = width + (2.0 / alpha) * (below + above)
    if score.ndim == 0:
        return float(score)
    return score


def ecp_cpd(lower, upper, actual, alpha: float) -> tuple[float, float]:
    """Empirical coverage proportion and its absolute deviation from nominal.

    Pools every element of the aligned arrays: coverage is the fraction
    with lower <= actual <= upper, and the deviation compares it to the
    nominal 1 - alpha.
    """
    lower_arr = np.asarray(lower, dtype=float)
    upper_arr = np.asarray(upper, dtype=float)
    actual_arr = np.asarray(actual, dtype=float)
    if lower_arr.shape != upper_arr.shape or lower_arr.shape != actual_arr.shape:
        raise DataError("coverage inputs must share one shape")
    inside = (actual_arr >= lower_arr) & (actual_arr <= upper_arr)
    ecp = float(np.mean(inside))
    return ecp, abs(ecp - (1.0 - alpha))


def e0_errors(
    forecast_densities: np.ndarray,
    actual_densities: np.ndarray,
    ages: np.ndarray | None = None,
) -> tuple[float, float]:
    """Root-mean-square and mean-absolute life-expectancy forecast errors.

    Life expectancy is computed per curve on both panels; errors aggregate
    across the rows (the forecast set of one horizon).
    """
    fc = np.atleast_2d(np.asarray(forecast_densities, dtype=float))
    ac = np.atleast_2d(np.asarray(actual_densities, dtype=float))
    if fc.shape != ac.shape:
        raise DataError("forecast and actual panels must share one shape")
    errors = np.array(
        [life_expectancy(f, ages) - life_expectancy(a, ages) for f, a in zip(fc, ac)]
    )
    rmsfe = float(np.sqrt(np.mean(errors**2)))
    mafe = float(np.mean(np.abs(errors)))
    return rmsfe, mafe


def _subset_through(lt: LifeTableSeries, last_year: int) -> LifeTableSeries:
    mask = lt.years <= last_year
    return rebuild_dx_from_qx(
        lt.qx[mask], radix=lt.radix, years=lt.years[mask], sex=lt.sex
    )


def run_expanding_window(
    lt_f: LifeTableSeries | None,
    lt_m: LifeTableSeries | None,
    plan: WindowPlan,
    methods: tuple[str, ...] = METHODS,
    selector: Selector = Fixed(6),
    alpha: float = 0.2,
    seed: int = 0,
    n_paths: int = 1000,
    clip_eps: float = 1e-10,
    scalar_scale: bool = False,
) -> MetricReport:
    """Expanding-window evaluation of the requested methods.

    Every window refits from scratch on the training slice ending at that
    window's year and forecasts to the plan's last year (capped at the
    plan's maximum horizon).  Each (window, method) pair derives its own
    random seed from the window identity, so results do not depend on
    execution order.  A fit failure aborts the run, re-raised with the
    failing window and method named.

    Parameters
    ----------
    lt_f, lt_m : LifeTableSeries or None
        Full data series; methods needing both sexes require both.
    plan : WindowPlan
    methods : tuple of str
        Subset of ``METHODS`` to evaluate.
    selector, alpha, seed, n_paths, clip_eps, scalar_scale
        Forwarded to the forecasters.

    Returns
    -------
    MetricReport
        One row per (method, sex, horizon).
    """
    for m in methods:
        if m not in METHODS:
            raise DataError(f"unknown method {m!r}")
    available = [lt for lt in (lt_f, lt_m) if lt is not None]
    if not available:
        raise DataError("at least one data series is required")
    for lt in available:
        if int(lt.years[0]) > plan.train_start or int(lt.years[-1]) < plan.last_year:
            raise DataError(f"{lt.sex}: data span does not cover the window plan")

    actual: dict[str, dict[int, np.ndarray]] = {}
    for lt in available:
        dens = normalize_to_density(lt)
        actual[lt.sex] = {int(y): dens.d[i] for i, y in enumerate(lt.years)}
    n_ages = available[0].n_ages

    # cells[(method, sex, h)] = list of (point, lower, upper, actual) rows
    cells: dict[tuple[str, str, int], list[tuple[np.ndarray, ...]]] = {}
    selector_labels: dict[str, str] = {}

    for train_end, horizon in plan.windows():
        f_slice = _subset_through(lt_f, train_end) if lt_f is not None else None
        m_slice = _subset_through(lt_m, train_end) if lt_m is not None else None
        for method in methods:
            window_seed = np.random.SeedSequence(
                [int(seed), int(train_end), METHODS.index(method)]
            )
            try:
                results = forecast_method(
                    method,
                    f_slice,
                    m_slice,
                    selector=selector,
                    horizon=horizon,
                    alpha=alpha,
                    n_paths=n_paths,
                    seed=window_seed,
                    clip_eps=clip_eps,
                    scalar_scale=scalar_scale,
                )
            except MortcastError as exc:
                raise type(exc)(
                    f"window training through {train_end}, method {method}: {exc}"
                ) from exc
            for sex, result in results.items():
                selector_labels[method] = result.selector
                for i, h in enumerate(result.horizons):
                    year = train_end + int(h)
                    cells.setdefault((method, sex, int(h)), []).append(
                        (
                            result.point[i],
                            result.lower[i],
                            result.upper[i],
                            actual[sex][year],
                        )
                    )

    rows = []
    sexes = [lt.sex for lt in available]
    for method in methods:
        for sex in sexes:
            for h in plan.horizons:
                quad = cells.get((method, sex, int(h)))
                if quad is None:
                    continue
                expected = plan.n_forecasts(int(h))
                if len(quad) != expected:
                    raise DataError(
                        f"{method}/{sex}/h={h}: got {len(quad)} forecasts, expected {expected}"
                    )
                points = np.array([c[0] for c in quad])
                lowers = np.array([c[1] for c in quad])
                uppers = np.array([c[2] for c in quad])
                actuals = np.array([c[3] for c in quad])
                denom = n_ages * len(quad)
                kld_h = sum(kld_symmetric(a, p) for p, a in zip(points, actuals)) / denom
                jsd_h = sum(jsd_geometric(a, p) for p, a in zip(points, actuals)) / denom
                score_h = float(np.sum(interval_score(lowers, uppers, actuals, alpha))) / denom
                ecp, cpd = ecp_cpd(lowers, uppers, actuals, alpha)
                rmsfe, mafe = e0_errors(points, actuals)
                rows.append(
                    MetricRow(
                        method=method,
                        sex=sex,
                        selector=selector_labels[method],
                        horizon=int(h),
                        kld=kld_h,
                        jsd=jsd_h,
                        interval_score=score_h,
                        ecp=ecp,
                        cpd=cpd,
                        rmsfe_e0=rmsfe,
                        mafe_e0=mafe,
                    )
                )
    return MetricReport(rows=tuple(rows), alpha=alpha)


def report_to_csv(report: MetricReport) -> str:
    """Render a report as CSV with full-precision values."""
    lines = ["method,sex,selector,h,kld,jsd,score,ecp,cpd,rmsfe_e0,mafe_e0"]
    for r in report.rows:
        lines.append(
            f"{r.method},{r.sex},{r.selector},{r.horizon},"
            f"{float(r.kld)!r},{float(r.jsd)!r},{float(r.interval_score)!r},"
            f"{float(r.ecp)!r},{float(r.cpd)!r},"
            f"{float(r.rmsfe_e0)!r},{float(r.mafe_e0)!r}"
        )
    return "\n".join(lines) + "\n"


def _format_block(
    title: str,
    methods: list[str],
    horizons: list[int],
    value: dict[tuple[str, int], float],
    scale: float,
    decimals: int,
) -> list[str]:
    # The best (smallest) method in each row is wrapped in ** marks.
    lines = [title]
    header = "  h  " + "".join(f"{m:>14}" for m in methods)
    lines.append(header)
    for h in horizons:
        vals = [value[(m, h)] * scale for m in methods]
        best = min(vals)
        cells = []
        for v in vals:
            text = f"{v:.{decimals}f}"
            if v == best:
                text = f"**{text}**"
            cells.append(f"{text:>14}")
        lines.append(f"{h:>3}  " + "".join(cells))
    means = [float(np.mean([value[(m, h)] for h in horizons])) * scale for m in methods]
    best = min(means)
    cells = []
    for v in means:
        text = f"{v:.{decimals}f}"
        if v == best:
            text = f"**{text}**"
        cells.append(f"{text:>14}")
    lines.append("Mean " + "".join(cells))
    return lines


def comparison_table(report: MetricReport) -> str:
    """Plain-text side-by-side method comparison.

    One block per (sex, metric family); divergences and interval scores
    are shown x100, coverage and life-expectancy errors as is.  Row
    minima across methods are marked in ** **.
    """
    methods = sorted({r.method for r in report.rows}, key=METHODS.index)
    sexes = sorted({r.sex for r in report.rows})
    by_key = {(r.method, r.sex, r.horizon): r for r in report.rows}
    horizons = sorted({r.horizon for r in report.rows})

    out: list[str] = []
    for sex in sexes:
        specs = [
            (f"{sex}: divergence of point forecasts vs holdouts (x100): KLD", "kld", 100.0, 4),
            (f"{sex}: divergence of point forecasts vs holdouts (x100): JSD", "jsd", 100.0, 4),
            (f"{sex}: mean interval score (x100), alpha={report.alpha}", "interval_score", 100.0, 4),
            (f"{sex}: coverage deviation |ECP - (1-alpha)|", "cpd", 1.0, 4),
            (f"{sex}: life expectancy RMSFE (years)", "rmsfe_e0", 1.0, 4),
            (f"{sex}: life expectancy MAFE (years)", "mafe_e0", 1.0, 4),
        ]
        for title, attr, scale, decimals in specs:
            value = {
                (m, h): getattr(by_key[(m, sex, h)], attr)
                for m in methods
                for h in horizons
            }
            out.extend(_format_block(title, methods, horizons, value, scale, decimals))
            out.append("")
    return "\n".join(out) + "\n"
