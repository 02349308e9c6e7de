"""Synthetic mortality data for tests and demonstrations.

Real national life tables cannot be redistributed, so two generators
stand in for them:

* :func:`gompertz_lifetable` builds period life tables from a
  Gompertz-Makeham hazard a * exp(b * age) + c with a log-linear
  improvement trend in the level and optional lognormal hazard noise.
  Shapes are realistic (accident hump aside): death densities peak near
  ln(b / a) / b and the peak drifts upward as mortality improves.
* :class:`LogitFactorModel` generates density panels from the forecasting
  pipeline's own representation (mean curve plus random-walk factor
  scores plus white residual curves in logit-of-CDF space), giving a
  ground truth against which calibration can be measured.

Both are deterministic given a seed.  A writer for the standard
whitespace-delimited life-table text layout rounds out file-based tests.
"""

from dataclasses import dataclass

import numpy as np

from .lifetable import LifeTableSeries, rebuild_dx_from_qx
from .transforms import cdf_forward, cdf_to_density, inverse_logit, logit_transform

__all__ = [
    "gompertz_lifetable",
    "synthetic_pair",
    "write_hmd_file",
    "LogitFactorModel",
    "default_logit_model",
    "simulate_density_panel",
]


def gompertz_lifetable(
    years,
    sex: str = "Female",
    level: float = 5e-5,
    slope: float = 0.1,
    background: float = 5e-4,
    improvement: float = 0.012,
    noise_sd: float = 0.03,
    plateau: float = 0.8,
    seed: int = 0,
    radix: float = 1e5,
    n_ages: int = 111,
) -> LifeTableSeries:
    """Period life tables from a drifting Gompertz-Makeham hazard.

    The hazard at age x in year t is level * exp(-improvement * (t - t0))
    * exp(slope * x) + background, integrated exactly over each one-year
    age interval; death probabilities get multiplicative lognormal noise
    exp(noise_sd * z) on the hazard scale.  The terminal age is open
    (death probability 1).

    A pure exponential hazard wipes out the cohort so fast that death
    counts beyond age ~105 underflow, which no national life table does
    (old-age mortality decelerates).  The integrated one-year hazard H is
    therefore saturated smoothly as plateau * (1 - exp(-H / plateau)),
    leaving young ages essentially untouched while capping the yearly
    death probability at 1 - exp(-plateau).

    Parameters
    ----------
    years : sequence of int
        Calendar years to generate.
    sex : str
        Label for the resulting series.
    level, slope, background : float
        Hazard parameters; the density mode sits near ln(slope/level)/slope.
    improvement : float
        Annual log-linear decline of the hazard level.
    noise_sd : float
        Standard deviation of the lognormal hazard noise; 0 disables it.
    plateau : float
        Upper bound of the integrated one-year hazard at extreme ages.
    seed : int
        Randomness source for the noise.
    radix : float
        Cohort size.
    n_ages : int
        Grid length (ages 0..n_ages-1, last one open).

    Returns
    -------
    LifeTableSeries
    """
    years = np.asarray(years, dtype=int)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0 if sex == "Female" else 1]))
    x = np.arange(n_ages - 1)
    cumhaz_interval = (np.exp(slope * (x + 1)) - np.exp(slope * x)) / slope
    qx = np.empty((len(years), n_ages))
    for i, year in enumerate(years):
        a_t = level * np.exp(-improvement * (year - years[0]))
        hazard = a_t * cumhaz_interval + background
        hazard = plateau * (1.0 - np.exp(-hazard / plateau))
        if noise_sd > 0.0:
            hazard = hazard * np.exp(noise_sd * rng.standard_normal(n_ages - 1))
        qx[i, :-1] = 1.0 - np.exp(-hazard)
        qx[i, -1] = 1.0
    return rebuild_dx_from_qx(qx, radix=radix, years=years, sex=sex)


def synthetic_pair(
    years, seed: int = 0, noise_sd: float = 0.03
) -> tuple[LifeTableSeries, LifeTableSeries]:
    """A female/male pair of synthetic series with sex-typical levels.

    Male mortality sits higher and improves slightly slower, so the two
    panels share a broad trend while keeping sex-specific structure, which
    is the situation the joint and multilevel methods target.
    """
    lt_f = gompertz_lifetable(
        years, sex="Female", level=5e-5, background=4e-4,
        improvement=0.013, noise_sd=noise_sd, seed=seed,
    )
    lt_m = gompertz_lifetable(
        years, sex="Male", level=9e-5, background=7e-4,
        improvement=0.010, noise_sd=noise_sd, seed=seed,
    )
    return lt_f, lt_m


def write_hmd_file(lt: LifeTableSeries, path: str) -> None:
    """Write a series in the whitespace-delimited life-table text layout.

    Emits the standard ten columns (Year, Age, mx, qx, ax, lx, dx, Lx,
    Tx, ex) behind a one-line preamble; death probabilities keep full
    float precision so a read-back reproduces the series exactly, and the
    unused trailing columns hold the missing-value marker.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"Synthetic life tables (period 1x1), {lt.sex}\n\n")
        fh.write(
            f"{'Year':>6} {'Age':>6} {'mx':>12} {'qx':>24} {'ax':>6}"
            f" {'lx':>12} {'dx':>12} {'Lx':>4} {'Tx':>4} {'ex':>4}\n"
        )
        for i, year in enumerate(lt.years):
            for j, age in enumerate(lt.ages):
                is_open = j == lt.n_ages - 1 and int(age) == 110
                age_tok = "110+" if is_open else str(int(age))
                q = float(lt.qx[i, j])
                mx = q / (1.0 - 0.5 * q) if q < 1.0 else 1.0
                fh.write(
                    f"{int(year):>6} {age_tok:>6} {mx:>12.6f} {q!r:>24} {0.5:>6.2f}"
                    f" {lt.lx[i, j]:>12.2f} {lt.dx[i, j]:>12.2f} {'.':>4} {'.':>4} {'.':>4}\n"
                )


@dataclass(frozen=True)
class LogitFactorModel:
    """Ground-truth generator in the pipeline's own transformed space.

    Yearly curves are mean_curve + sum_k score_k(t) * basis[:, k] + white
    residuals in logit-of-CDF space.  Each score follows a local-trend
    innovations recursion (the same model class the score forecaster
    fits): with innovation e_t ~ N(0, sigma_k^2),

        score_t  = level_{t-1} + trend_{t-1} + e_t
        level_t  = level_{t-1} + trend_{t-1} + alpha_k * e_t
        trend_t  = trend_{t-1} + beta_k * e_t

    so the generated data sit exactly inside the family the pipeline
    assumes, and calibration against it is meaningful.  Densities come
    out through the standard inverse transform.

    Attributes
    ----------
    mean_curve : ndarray
        Logit-space mean, shape (p - 1,) for p-age densities.
    basis : ndarray
        Orthonormal columns, shape (p - 1, K).
    trend : ndarray
        Initial per-year trend of each score, shape (K,).
    alpha, beta : ndarray
        Level and trend smoothing rates of the generator, shape (K,).
    sigma : ndarray
        Innovation standard deviation per score, shape (K,).
    resid_sd : float
        Standard deviation of the white residual curves.
    """

    mean_curve: np.ndarray
    basis: np.ndarray
    trend: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    resid_sd: float


def default_logit_model(n_ages: int = 111) -> LogitFactorModel:
    """A two-factor model around a realistic baseline curve.

    The mean is the logit CDF of a noise-free Gompertz-Makeham table; the
    two factors are smooth orthonormal bumps, one level-like centred in
    midlife and one slope-like concentrated at old ages.  The first score
    trends upward (mortality improvement), the second drifts gently.
    """
    base = gompertz_lifetable([2000], noise_sd=0.0, n_ages=n_ages)
    dens = base.dx / base.radix
    mean_curve = logit_transform(cdf_forward(dens))[0]

    x = np.arange(n_ages - 1, dtype=float)
    g1 = np.exp(-(((x - 45.0) / 28.0) ** 2))
    g2 = (x - 70.0) / 70.0 * np.exp(-(((x - 75.0) / 22.0) ** 2))
    g1 = g1 / np.linalg.norm(g1)
    g2 = g2 - g1 * (g1 @ g2)
    g2 = g2 / np.linalg.norm(g2)
    basis = np.column_stack([g1, g2])
    return LogitFactorModel(
        mean_curve=mean_curve,
        basis=basis,
        trend=np.array([0.08, 0.015]),
        alpha=np.array([0.4, 0.3]),
        beta=np.array([0.03, 0.02]),
        sigma=np.array([0.18, 0.07]),
        resid_sd=0.02,
    )


def simulate_density_panel(
    model: LogitFactorModel, n_years: int, seed: int = 0
) -> np.ndarray:
    """Simulate yearly death densities from a logit factor model.

    Returns an (n_years, p) density matrix; rows are consecutive years.
    Each score starts from level 0 with the model's initial trend; every
    curve passes through the standard inverse transform (sigmoid,
    isotonic clamp, terminal closure, first differences), so each row is
    a valid density.
    """
    rng = np.random.default_rng(seed)
    k = model.basis.shape[1]
    p_interior = model.basis.shape[0]
    innov = model.sigma * rng.standard_normal((n_years, k))
    scores = np.empty((n_years, k))
    level = np.zeros(k)
    trend = model.trend.astype(float).copy()
    for t in range(n_years):
        scores[t] = level + trend + innov[t]
        level = level + trend + model.alpha * innov[t]
        trend = trend + model.beta * innov[t]
    resid = model.resid_sd * rng.standard_normal((n_years, p_interior))
    z = model.mean_curve + scores @ model.basis.T + resid
    return cdf_to_density(inverse_logit(z))
