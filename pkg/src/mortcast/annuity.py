"""Cohort survival from forecast life tables and temporary annuity pricing.

A person aged x at the end of the observed data survives tau further
years with probability prod_{j=1..tau} (1 - q applied in forecast year j
at age x+j-1): the death probabilities are read along the cohort's
diagonal through successive forecast-year tables.  A temporary immediate
annuity paying 1 per year for up to T years is then worth
sum_{tau=1..T} B(0, tau) * p[tau], with zero-coupon bond prices
B(0, tau) = exp(-eta * tau) at constant continuously compounded rate eta.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractBoundError, DataError, HorizonExceededError
from .lifetable import DensityPanel, lifetable_from_density

__all__ = [
    "PricingConfig",
    "CohortSurvival",
    "cohort_survival",
    "bond_price",
    "annuity_price",
    "price_grid",
    "grid_to_csv",
    "grid_to_text",
]


@dataclass(frozen=True)
class PricingConfig:
    """Interest rate and contract bound for annuity pricing.

    Attributes
    ----------
    eta : float
        Continuously compounded annual interest rate, >= 0.
    max_age : int
        Highest age a contract may reach: entry age + maturity must not
        exceed it.
    """

    eta: float
    max_age: int = 110

    def __post_init__(self) -> None:
        if self.eta < 0.0:
            raise DataError("interest rate must be nonnegative")


@dataclass(frozen=True)
class CohortSurvival:
    """Survival curve of one cohort through forecast years.

    Attributes
    ----------
    x : int
        Entry age at the anchor year (the last observed year).
    anchor_year : int
        Calendar year at which the person is aged x; the first forecast
        year supplies the first survival factor.
    tau_max : int
        Largest span covered by the forecasts.
    p : ndarray
        p[tau] = probability of surviving tau further years; p[0] = 1,
        non-increasing, in [0, 1].
    """

    x: int
    anchor_year: int
    tau_max: int
    p: np.ndarray


def cohort_survival(
    forecasts: DensityPanel, x: int, radix: float = 1e5
) -> CohortSurvival:
    """Diagonal (cohort) survival probabilities from forecast densities.

    Forecast densities are scaled back to life tables with the given radix;
    the j-th survival factor is 1 - q taken from the j-th forecast year's
    table at age x+j-1, and the running product is accumulated in log
    space.  The span ends at the forecast horizon or when the cohort
    reaches the open terminal age, whichever comes first.

    Parameters
    ----------
    forecasts : DensityPanel
        Per-year forecast densities for consecutive calendar years
        directly following the anchor year.
    x : int
        Entry age, within the table's age grid.
    radix : float
        Cohort size used to rebuild the tables.

    Returns
    -------
    CohortSurvival
    """
    ages = np.asarray(forecasts.ages)
    if not ages[0] <= x <= ages[-1]:
        raise DataError(f"entry age {x} outside the table's age grid")
    years = np.asarray(forecasts.years, dtype=int)
    if len(years) > 1 and np.any(np.diff(years) != 1):
        raise DataError("forecast years must be consecutive")
    tables = lifetable_from_density(forecasts, radix=radix)
    terminal_age = int(ages[-1])

    tau_max = min(len(years), terminal_age - x + 1)
    q_diag = np.empty(tau_max)
    for j in range(1, tau_max + 1):
        age = x + j - 1
        q_diag[j - 1] = tables.qx[j - 1, age - int(ages[0])]
    with np.errstate(divide="ignore"):
        log_p = np.cumsum(np.log1p(-np.minimum(q_diag, 1.0)))
    p = np.concatenate([[1.0], np.exp(log_p)])
    p = np.clip(p, 0.0, 1.0)
    p.flags.writeable = False
    return CohortSurvival(
        x=int(x),
        anchor_year=int(years[0]) - 1,
        tau_max=tau_max,
        p=p,
    )


def bond_price(eta: float, tau) -> float | np.ndarray:
    """Zero-coupon bond price exp(-eta * tau) at constant rate eta."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0.0):
        raise DataError("bond maturity must be nonnegative")
    out = np.exp(-float(eta) * tau_arr)
    return float(out) if out.ndim == 0 else out


def annuity_price(survival: CohortSurvival, cfg: PricingConfig, maturity: int) -> float:
    """Single premium of a temporary immediate annuity paying 1 per year.

    Sums discounted survival probabilities over payment times 1..maturity.
    Strictly below the certain annuity sum of bond prices whenever any
    mortality is positive along the diagonal.

    Parameters
    ----------
    survival : CohortSurvival
    cfg : PricingConfig
    maturity : int
        Contract length T >= 1; entry age + T must stay within the
        configured maximum age.

    Raises
    ------
    ContractBoundError
        If entry age + maturity exceeds the maximum age.
    HorizonExceededError
        If the survival curve does not cover the maturity.
    """
    if maturity < 1:
        raise DataError("maturity must be at least 1")
    if survival.x + maturity > cfg.max_age:
        raise ContractBoundError(
            f"age {survival.x} + maturity {maturity} exceeds max age {cfg.max_age}"
        )
    if maturity > survival.tau_max:
        raise HorizonExceededError(
            f"maturity {maturity} exceeds the forecast span {survival.tau_max}"
        )
    taus = np.arange(1, maturity + 1)
    return float(np.sum(bond_price(cfg.eta, taus) * survival.p[1 : maturity + 1]))


def price_grid(
    forecasts: DensityPanel,
    entry_ages,
    maturities,
    eta: float,
    radix: float = 1e5,
    max_age: int = 110,
) -> dict[tuple[int, int], float]:
    """Annuity prices over an age x maturity grid.

    Cells with entry age + maturity beyond the maximum age are omitted
    (the triangular blanking of the standard presentation).

    Returns
    -------
    dict
        (age, maturity) -> price for admissible cells.
    """
    cfg = PricingConfig(eta=eta, max_age=max_age)
    out: dict[tuple[int, int], float] = {}
    for x in entry_ages:
        survival = cohort_survival(forecasts, int(x), radix=radix)
        for t in maturities:
            if int(x) + int(t) > max_age:
                continue
            out[(int(x), int(t))] = annuity_price(survival, cfg, int(t))
    return out


def grid_to_csv(
    grids: dict[tuple[str, float], dict[tuple[int, int], float]]
) -> str:
    """Render pricing grids as CSV rows `sex,age,maturity,eta,price`."""
    lines = ["sex,age,maturity,eta,price"]
    for (sex, eta), grid in grids.items():
        for (age, maturity), price in sorted(grid.items()):
            lines.append(f"{sex},{age},{maturity},{float(eta)!r},{float(price)!r}")
    return "\n".join(lines) + "\n"


def grid_to_text(
    sex: str, eta: float, grid: dict[tuple[int, int], float], maturities
) -> str:
    """Plain-text age x maturity table with blank inadmissible cells."""
    ages = sorted({age for age, _ in grid})
    maturities = sorted(int(t) for t in maturities)
    lines = [f"{sex}, interest rate eta = {eta}"]
    lines.append(" age " + "".join(f"{f'T={t}':>10}" for t in maturities))
    for age in ages:
        cells = []
        for t in maturities:
            price = grid.get((age, t))
            cells.append(f"{price:>10.3f}" if price is not None else " " * 10)
        lines.append(f"{age:>4} " + "".join(cells))
    return "\n".join(lines) + "\n"
