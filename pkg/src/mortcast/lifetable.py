"""Period life tables and derived summaries.

The data model is a panel of single-year-of-age period life tables: rows
are calendar years, columns are ages 0..A, and the final age bracket is
open (everyone alive there dies within it, so its death probability is 1).
Death counts are kept in floating point throughout; rounding them to
integers would reintroduce zero counts at the oldest ages, which the
log-based transforms downstream cannot tolerate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "LifeTableSeries",
    "DensityPanel",
    "rebuild_dx_from_qx",
    "normalize_to_density",
    "lifetable_from_density",
    "life_expectancy",
    "gini_concentration",
    "gini_equality_index",
    "modal_age",
    "read_hmd_lifetable",
    "write_long_csv",
    "read_long_csv",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LifeTableSeries:
    """Panel of period life tables for one sex.

    Attributes
    ----------
    sex : str
        "Female" or "Male".
    years : ndarray
        Calendar years, shape (n,), strictly increasing.
    ages : ndarray
        Integer ages 0..A, shape (p,); the last age is the open bracket.
    qx : ndarray
        Death probabilities, shape (n, p), in [0, 1]; final column is 1.
    lx : ndarray
        Survivors at exact age x, shape (n, p); first column equals radix.
    dx : ndarray
        Deaths between ages x and x+1, shape (n, p), floating point.
    radix : float
        Initial cohort size, conventionally 1e5.

    All arrays are read-only; treat instances as immutable values.
    """

    sex: str
    years: np.ndarray
    ages: np.ndarray
    qx: np.ndarray
    lx: np.ndarray
    dx: np.ndarray
    radix: float

    @property
    def n_years(self) -> int:
        return len(self.years)

    @property
    def n_ages(self) -> int:
        return len(self.ages)


@dataclass(frozen=True)
class DensityPanel:
    """Life-table deaths scaled to unit mass per year.

    Attributes
    ----------
    sex : str
    years : ndarray
        Calendar years, shape (n,).
    ages : ndarray
        Integer ages, shape (p,).
    d : ndarray
        Nonnegative densities, shape (n, p); each row sums to 1.
    """

    sex: str
    years: np.ndarray
    ages: np.ndarray
    d: np.ndarray

    @property
    def n_years(self) -> int:
        return len(self.years)


def rebuild_dx_from_qx(
    qx: np.ndarray,
    radix: float = 1e5,
    years: np.ndarray | None = None,
    sex: str = "Female",
) -> LifeTableSeries:
    """Reconstruct survivor and death-count columns from death probabilities.

    Applies the life-table recurrence dx = lx * qx, lx[x+1] = lx[x] - dx[x]
    at full floating precision.  Because the terminal death probability is 1,
    every rebuilt death count is strictly positive wherever survivors remain,
    which is what makes the log-ratio transform applicable downstream.

    Parameters
    ----------
    qx : ndarray
        Death probabilities, shape (n, p) or (p,); entries in [0, 1] and the
        terminal column identically 1.
    radix : float
        Initial cohort size.
    years, sex : optional
        Calendar-year labels (default 0..n-1) and sex tag for the result.

    Returns
    -------
    LifeTableSeries
    """
    qx = np.atleast_2d(np.asarray(qx, dtype=float))
    if not np.all(np.isfinite(qx)):
        raise DataError("qx contains non-finite entries")
    if np.any(qx < 0.0) or np.any(qx > 1.0):
        bad = np.argwhere((qx < 0.0) | (qx > 1.0))[0]
        raise DataError(
            f"qx out of [0, 1] at row {bad[0]}, age index {bad[1]}"
        )
    if np.any(np.abs(qx[:, -1] - 1.0) > 1e-12):
        raise DataError("terminal-age qx must equal 1 (open age interval)")
    if radix <= 0:
        raise DataError("radix must be positive")
    qx = qx.copy()
    qx[:, -1] = 1.0

    n, p = qx.shape
    surv = np.cumprod(1.0 - qx[:, :-1], axis=1)
    lx = np.concatenate([np.full((n, 1), float(radix)), radix * surv], axis=1)
    dx = lx * qx

    if years is None:
        years = np.arange(n)
    years = np.asarray(years, dtype=int)
    if len(years) != n:
        raise DataError("years length does not match qx rows")
    ages = np.arange(p)
    return LifeTableSeries(
        sex=sex,
        years=_readonly(years).astype(int),
        ages=_readonly(ages).astype(int),
        qx=_readonly(qx),
        lx=_readonly(lx),
        dx=_readonly(dx),
        radix=float(radix),
    )


def normalize_to_density(lt: LifeTableSeries) -> DensityPanel:
    """Scale each year's death counts to sum to one.

    Each row of dx must total the radix to within 1e-6 * radix; rows are
    divided by their own total so the output sums to 1 exactly.
    """
    totals = lt.dx.sum(axis=1)
    bad = np.abs(totals - lt.radix) > 1e-6 * lt.radix
    if np.any(bad):
        year = lt.years[int(np.argmax(bad))]
        raise DataError(f"death counts for year {year} do not sum to radix")
    d = lt.dx / totals[:, None]
    return DensityPanel(
        sex=lt.sex,
        years=_readonly(lt.years).astype(int),
        ages=_readonly(lt.ages).astype(int),
        d=_readonly(d),
    )


def lifetable_from_density(
    dens: DensityPanel, radix: float = 1e5
) -> LifeTableSeries:
    """Convert unit densities back into life tables with the given radix.

    The inverse of :func:`normalize_to_density` up to scale: deaths are
    dx = d * radix, survivors at age x are the deaths still to come
    (lx = sum of dx from x up), and death probabilities are qx = dx / lx
    with q = 1 wherever no survivors remain (including the terminal open
    bracket).  Summing the remaining deaths instead of subtracting the
    spent ones keeps lx accurate at extreme ages, where radix - cumsum
    would cancel to rounding noise.
    """
    d = np.asarray(dens.d, dtype=float)
    _check_density_rows(d)
    dx = d * radix
    lx = np.cumsum(dx[:, ::-1], axis=1)[:, ::-1]
    lx[:, 0] = radix
    with np.errstate(divide="ignore", invalid="ignore"):
        qx = np.where(lx > 0.0, dx / np.where(lx > 0.0, lx, 1.0), 1.0)
    qx = np.clip(qx, 0.0, 1.0)
    qx[:, -1] = 1.0
    return LifeTableSeries(
        sex=dens.sex,
        years=_readonly(dens.years).astype(int),
        ages=_readonly(dens.ages).astype(int),
        qx=_readonly(qx),
        lx=_readonly(lx),
        dx=_readonly(dx),
        radix=float(radix),
    )


def _check_density_rows(d: np.ndarray) -> None:
    if not np.all(np.isfinite(d)):
        raise DataError("density contains non-finite entries")
    if np.any(d < -1e-12):
        raise DataError("density contains negative entries")
    sums = d.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise DataError("density rows must sum to 1")


def life_expectancy(d: np.ndarray, ages: np.ndarray | None = None) -> float:
    """Life expectancy at birth implied by one death density.

    Deaths within each one-year bracket are placed at its midpoint, the
    open terminal bracket included, so the result is sum(d * (age + 0.5)).

    Parameters
    ----------
    d : ndarray
        Density row over the age grid (nonnegative, sums to 1).
    ages : ndarray, optional
        Integer age grid; defaults to 0..len(d)-1.

    Returns
    -------
    float
        Expected age at death in years.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 1:
        raise DataError("life_expectancy expects a single density row")
    _check_density_rows(d)
    if ages is None:
        ages = np.arange(d.shape[0])
    return float(np.dot(d, np.asarray(ages, dtype=float) + 0.5))


def gini_concentration(d: np.ndarray, ages: np.ndarray | None = None) -> float:
    """Discrete Gini concentration of ages at death.

    Uses midpoint ages x + 0.5 as the variable and the density as weights:
    G = sum_i sum_j d_i d_j |a_i - a_j| / (2 * mean age at death).
    0 means all deaths at one age; values near 1 mean extreme dispersion
    toward age 0.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 1:
        raise DataError("gini expects a single density row")
    _check_density_rows(d)
    if ages is None:
        ages = np.arange(d.shape[0])
    mids = np.asarray(ages, dtype=float) + 0.5
    mu = float(np.dot(d, mids))
    spread = float(d @ np.abs(mids[:, None] - mids[None, :]) @ d)
    return spread / (2.0 * mu)


def gini_equality_index(d: np.ndarray, ages: np.ndarray | None = None) -> float:
    """Equality-oriented Gini: 1 - concentration.

    Oriented so that a point mass at a single age scores exactly 1
    (all deaths at the same age) and more dispersed densities score lower.
    """
    return 1.0 - gini_concentration(d, ages)


def modal_age(d: np.ndarray, ages: np.ndarray | None = None) -> int:
    """Age with the highest death density (smallest such age under ties)."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 1:
        raise DataError("modal_age expects a single density row")
    if ages is None:
        ages = np.arange(d.shape[0])
    return int(np.asarray(ages)[int(np.argmax(d))])


# ---------------------------------------------------------------------------
# File formats


def read_hmd_lifetable(
    path: str,
    sex: str,
    first_year: int | None = None,
    last_year: int | None = None,
    radix: float = 1e5,
) -> LifeTableSeries:
    """Read a period life-table text file in the HMD 1x1 layout.

    The format is whitespace-delimited with a header line naming the columns
    Year, Age, mx, qx, ax, lx, dx, Lx, Tx, ex; age tokens run "0".."109"
    plus "110+", and missing values are ".".  Any preamble lines before the
    header are skipped.  Only Year, Age, and qx are consumed; survivors and
    death counts are rebuilt from qx at full precision.

    Parameters
    ----------
    path : str
        File to read.
    sex : str
        "Female" or "Male" tag for the resulting series.
    first_year, last_year : int, optional
        Inclusive calendar-year subset to keep.
    radix : float
        Cohort size for the rebuilt table.

    Returns
    -------
    LifeTableSeries
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()

    header_idx = None
    for i, line in enumerate(lines):
        toks = line.split()
        if "Year" in toks and "Age" in toks and "qx" in toks:
            header_idx = i
            header = toks
            break
    if header_idx is None:
        raise DataError(f"{path}: no header line with Year/Age/qx columns")
    col_year = header.index("Year")
    col_age = header.index("Age")
    col_qx = header.index("qx")

    records: dict[int, dict[int, float]] = {}
    for lineno, line in enumerate(lines[header_idx + 1 :], header_idx + 2):
        toks = line.split()
        if not toks:
            continue
        if len(toks) <= max(col_year, col_age, col_qx):
            raise DataError(f"{path}:{lineno}: short row")
        try:
            year = int(toks[col_year])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad year {toks[col_year]!r}") from exc
        age_tok = toks[col_age]
        age = 110 if age_tok == "110+" else None
        if age is None:
            try:
                age = int(age_tok)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad age {age_tok!r}") from exc
        if first_year is not None and year < first_year:
            continue
        if last_year is not None and year > last_year:
            continue
        q_tok = toks[col_qx]
        if q_tok == ".":
            raise DataError(f"{path}:{lineno}: missing qx for year {year} age {age}")
        try:
            q = float(q_tok)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad qx {q_tok!r}") from exc
        records.setdefault(year, {})[age] = q

    if not records:
        raise DataError(f"{path}: no usable rows in the requested year range")
    years = sorted(records)
    ages = np.arange(111)
    qx = np.empty((len(years), 111))
    for i, year in enumerate(years):
        row = records[year]
        missing = [a for a in range(111) if a not in row]
        if missing:
            raise DataError(f"{path}: year {year} missing age {missing[0]}")
        qx[i] = [row[a] for a in ages]
    return rebuild_dx_from_qx(qx, radix=radix, years=np.array(years), sex=sex)


def write_long_csv(
    path: str, years: np.ndarray, ages: np.ndarray, values: np.ndarray
) -> None:
    """Write a (year, age) matrix as CSV rows `year,age,value`.

    Values are written with full round-trip precision so that re-reading
    reproduces the matrix bit for bit.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (len(years), len(ages)):
        raise DataError("values shape does not match years x ages")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("year,age,value\n")
        for i, year in enumerate(years):
            for j, age in enumerate(ages):
                fh.write(f"{int(year)},{int(age)},{float(values[i, j])!r}\n")


def read_long_csv(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a `year,age,value` CSV back into (years, ages, matrix)."""
    years_seen: list[int] = []
    ages_seen: list[int] = []
    triples: list[tuple[int, int, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "year,age,value":
            raise DataError(f"{path}: expected header 'year,age,value'")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields")
            year, age, value = int(parts[0]), int(parts[1]), float(parts[2])
            if year not in years_seen:
                years_seen.append(year)
            if age not in ages_seen:
                ages_seen.append(age)
            triples.append((year, age, value))
    years = np.array(sorted(years_seen))
    ages = np.array(sorted(ages_seen))
    out = np.full((len(years), len(ages)), np.nan)
    yi = {y: i for i, y in enumerate(years)}
    ai = {a: j for j, a in enumerate(ages)}
    for year, age, value in triples:
        out[yi[year], ai[age]] = value
    if np.any(np.isnan(out)):
        raise DataError(f"{path}: incomplete year x age grid")
    return years, ages, out
