import math

import numpy as np
import pytest

from mortcast import (
    DataError,
    Fixed,
    InsufficientHistoryError,
    WindowPlan,
    e0_errors,
    ecp_cpd,
    forecast_method,
    interval_score,
    jsd_geometric,
    kld,
    kld_symmetric,
    rebuild_dx_from_qx,
    run_expanding_window,
)
from mortcast.evaluation import comparison_table, report_to_csv
from mortcast.pipeline import METHODS
from mortcast.synthetic import gompertz_lifetable


def random_density_pairs(seed, n, p=40):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield rng.dirichlet(np.ones(p)), rng.dirichlet(np.ones(p))


def test_kld_pins():
    p = np.array([0.5, 0.5])
    q = np.array([0.25, 0.75])
    # forward term only: 0.5 ln 2 + 0.5 ln(2/3)
    assert kld(p, q) == pytest.approx(0.1438410362, abs=1e-9)
    reverse = 0.25 * math.log(0.25 / 0.5) + 0.75 * math.log(0.75 / 0.5)
    assert kld(q, p) == pytest.approx(reverse, abs=1e-15)
    assert kld_symmetric(p, q) == pytest.approx(kld(p, q) + kld(q, p), abs=1e-15)
    assert kld(p, p) == 0.0
    assert kld_symmetric(p, p) == 0.0


def test_kld_symmetric_properties():
    for p, q in random_density_pairs(1, 100):
        a = kld_symmetric(p, q)
        b = kld_symmetric(q, p)
        assert abs(a - b) < 1e-15
        assert a >= 0.0
        assert kld(p, q) >= 0.0


def test_jsd_is_quarter_of_symmetric_divergence():
    # with the unnormalized geometric mean reference, each side's
    # divergence halves, so the total is exactly a quarter
    for p, q in random_density_pairs(2, 100):
        assert jsd_geometric(p, q) == pytest.approx(kld_symmetric(p, q) / 4.0, rel=1e-12)
        assert jsd_geometric(p, q) >= 0.0
    p = np.array([0.5, 0.5])
    assert jsd_geometric(p, p) == 0.0


def test_jsd_disjoint_support_finite():
    p = np.array([1.0, 0.0])
    q = np.array([0.0, 1.0])
    v = jsd_geometric(p, q)
    assert np.isfinite(v)
    # clip floor 1e-15 makes each cross term ln(1e15); oracle recomputation
    c = 1e-15
    pc = np.maximum(p, c)
    qc = np.maximum(q, c)
    delta = np.sqrt(pc * qc)
    expected = 0.5 * np.sum(pc * np.log(pc / delta)) + 0.5 * np.sum(qc * np.log(qc / delta))
    assert v == pytest.approx(expected, rel=1e-12)


def test_interval_score_pins():
    assert interval_score(0.0, 1.0, 0.5, 0.2) == 1.0
    assert interval_score(0.0, 1.0, 2.0, 0.2) == pytest.approx(11.0, abs=1e-12)
    assert interval_score(0.0, 1.0, -0.5, 0.2) == pytest.approx(6.0, abs=1e-12)
    assert interval_score(0.3, 0.3, 0.3, 0.2) == 0.0


def test_interval_score_broadcasts_and_bounds_width():
    rng = np.random.default_rng(3)
    lo = rng.normal(size=(5, 7))
    hi = lo + np.abs(rng.normal(size=(5, 7)))
    actual = rng.normal(size=(5, 7))
    s = interval_score(lo, hi, actual, 0.2)
    assert s.shape == (5, 7)
    assert np.all(s >= hi - lo - 1e-15)
    inside = (actual >= lo) & (actual <= hi)
    assert np.allclose(s[inside], (hi - lo)[inside])
    with pytest.raises(DataError):
        interval_score(1.0, 0.0, 0.5, 0.2)
    with pytest.raises(DataError):
        interval_score(0.0, 1.0, 0.5, 0.0)


def test_ecp_cpd_arithmetic():
    lo = np.zeros(10)
    hi = np.ones(10)
    inside = np.full(10, 0.5)
    ecp, cpd = ecp_cpd(lo, hi, inside, 0.2)
    assert (ecp, cpd) == (1.0, pytest.approx(0.2))
    outside = np.full(10, 2.0)
    ecp, cpd = ecp_cpd(lo, hi, outside, 0.2)
    assert (ecp, cpd) == (0.0, pytest.approx(0.8))
    half = np.where(np.arange(10) < 5, 0.5, 2.0)
    ecp, cpd = ecp_cpd(lo, hi, half, 0.2)
    assert (ecp, cpd) == (0.5, pytest.approx(0.3))


def test_e0_errors_pins():
    base = np.zeros(111)
    base[0] = base[1] = 0.5  # e0 = 1.0
    plus_03 = np.zeros(111)
    plus_03[0], plus_03[1] = 0.2, 0.8  # e0 = 1.3
    minus_04 = np.zeros(111)
    minus_04[0], minus_04[1] = 0.9, 0.1  # e0 = 0.6

    rmsfe, mafe = e0_errors(base[None, :], base[None, :])
    assert (rmsfe, mafe) == (0.0, 0.0)
    rmsfe, mafe = e0_errors(plus_03[None, :], base[None, :])
    assert rmsfe == pytest.approx(0.3, abs=1e-12)
    assert mafe == pytest.approx(0.3, abs=1e-12)
    rmsfe, mafe = e0_errors(
        np.vstack([plus_03, minus_04]), np.vstack([base, base])
    )
    assert mafe == pytest.approx(0.35, abs=1e-12)
    assert rmsfe == pytest.approx(0.35355339059327373, abs=1e-12)


def test_window_plan_counts():
    plan = WindowPlan(train_start=1975, first_test_year=2007, last_year=2022)
    assert plan.test_span == 16
    assert list(plan.horizons) == list(range(1, 17))
    for h in range(1, 17):
        assert plan.n_forecasts(h) == 17 - h
    assert plan.n_forecasts(16) == 1
    assert plan.n_forecasts(17) == 0
    windows = plan.windows()
    assert len(windows) == 16
    assert windows[0] == (2006, 16)
    assert windows[-1] == (2021, 1)
    # the display denominator is ages times forecast count
    assert 111 * plan.n_forecasts(4) == 111 * 13


def test_window_plan_toy_span():
    plan = WindowPlan(train_start=2000, first_test_year=2001, last_year=2002, max_horizon=2)
    assert plan.n_forecasts(1) == 2
    assert plan.n_forecasts(2) == 1
    assert plan.windows() == [(2000, 2), (2001, 1)]


def test_window_plan_validation():
    with pytest.raises(DataError):
        WindowPlan(train_start=2000, first_test_year=2000, last_year=2002)
    with pytest.raises(DataError):
        WindowPlan(train_start=2000, first_test_year=2003, last_year=2002)
    with pytest.raises(DataError):
        WindowPlan(train_start=2000, first_test_year=2001, last_year=2002, max_horizon=0)


@pytest.fixture(scope="module")
def toy_run():
    ltf = gompertz_lifetable(range(1970, 2002), sex="Female", seed=11)
    ltm = gompertz_lifetable(range(1970, 2002), sex="Male", level=7e-5, seed=12)
    plan = WindowPlan(train_start=1970, first_test_year=1998, last_year=2001)
    report = run_expanding_window(
        ltf, ltm, plan, methods=("cdf-ufts", "clr"), n_paths=1000, seed=0
    )
    return ltf, ltm, plan, report


def test_harness_row_counts(toy_run):
    _, _, plan, report = toy_run
    assert len(report.rows) == 2 * 2 * 4  # methods x sexes x horizons
    for row in report.rows:
        assert row.kld >= 0.0
        assert row.jsd >= 0.0
        assert 0.0 <= row.ecp <= 1.0
        assert row.cpd <= 0.8
        assert row.interval_score >= 0.0


def test_harness_cell_matches_manual_recomputation(toy_run):
    """Recompute one pooled cell from scratch, mirroring the window seeds."""
    ltf, ltm, plan, report = toy_run
    from mortcast.lifetable import normalize_to_density

    dens_f = normalize_to_density(ltf)
    actual_by_year = {int(y): dens_f.d[i] for i, y in enumerate(ltf.years)}

    h = 2
    quads = []
    for train_end, horizon in plan.windows():
        if horizon < h:
            continue
        mask_f = ltf.years <= train_end
        mask_m = ltm.years <= train_end
        f_slice = rebuild_dx_from_qx(
            ltf.qx[mask_f], radix=ltf.radix, years=ltf.years[mask_f], sex=ltf.sex
        )
        m_slice = rebuild_dx_from_qx(
            ltm.qx[mask_m], radix=ltm.radix, years=ltm.years[mask_m], sex=ltm.sex
        )
        seed = np.random.SeedSequence([0, train_end, METHODS.index("cdf-ufts")])
        res = forecast_method(
            "cdf-ufts", f_slice, m_slice, horizon=horizon, n_paths=1000, seed=seed
        )["Female"]
        i = h - 1
        quads.append(
            (res.point[i], res.lower[i], res.upper[i], actual_by_year[train_end + h])
        )

    assert len(quads) == plan.n_forecasts(h)
    denom = 111 * len(quads)
    kld_h = sum(kld_symmetric(a, p) for p, _, _, a in quads) / denom
    lowers = np.array([q[1] for q in quads])
    uppers = np.array([q[2] for q in quads])
    actuals = np.array([q[3] for q in quads])
    score_h = float(np.sum(interval_score(lowers, uppers, actuals, 0.2))) / denom
    ecp, _ = ecp_cpd(lowers, uppers, actuals, 0.2)
    rmsfe, _ = e0_errors(np.array([q[0] for q in quads]), actuals)

    cell = report.cell("cdf-ufts", "Female", h)
    assert cell.kld == pytest.approx(kld_h, rel=1e-12)
    assert cell.interval_score == pytest.approx(score_h, rel=1e-12)
    assert cell.ecp == pytest.approx(ecp, abs=1e-15)
    assert cell.rmsfe_e0 == pytest.approx(rmsfe, rel=1e-12)


def test_harness_is_deterministic(toy_run):
    ltf, ltm, plan, report = toy_run
    again = run_expanding_window(
        ltf, ltm, plan, methods=("cdf-ufts", "clr"), n_paths=1000, seed=0
    )
    assert again == report


def test_single_window_matches_direct_forecast():
    # a one-test-year plan is exactly one truncated fit plus one forecast
    ltf = gompertz_lifetable(range(1970, 2002), sex="Female", seed=11)
    plan = WindowPlan(train_start=1970, first_test_year=2001, last_year=2001)
    report = run_expanding_window(ltf, None, plan, methods=("cdf-ufts",), n_paths=1000, seed=5)
    assert len(report.rows) == 1

    mask = ltf.years <= 2000
    f_slice = rebuild_dx_from_qx(
        ltf.qx[mask], radix=ltf.radix, years=ltf.years[mask], sex=ltf.sex
    )
    seed = np.random.SeedSequence([5, 2000, METHODS.index("cdf-ufts")])
    res = forecast_method("cdf-ufts", f_slice, None, horizon=1, n_paths=1000, seed=seed)[
        "Female"
    ]
    from mortcast.lifetable import normalize_to_density

    actual = normalize_to_density(ltf).d[-1]
    cell = report.cell("cdf-ufts", "Female", 1)
    assert cell.kld == pytest.approx(kld_symmetric(actual, res.point[0]) / 111.0, rel=1e-12)
    rmsfe, mafe = e0_errors(res.point[:1], actual[None, :])
    assert cell.rmsfe_e0 == pytest.approx(rmsfe, rel=1e-12)
    assert cell.mafe_e0 == pytest.approx(mafe, rel=1e-12)


def test_report_csv_format(toy_run):
    _, _, _, report = toy_run
    text = report_to_csv(report)
    lines = text.strip().split("\n")
    assert lines[0] == "method,sex,selector,h,kld,jsd,score,ecp,cpd,rmsfe_e0,mafe_e0"
    assert len(lines) == 1 + len(report.rows)
    first = lines[1].split(",")
    assert first[0] == "cdf-ufts"
    assert first[2] == "fixed(6)"
    # numeric fields round trip through repr
    row = report.rows[0]
    assert float(first[4]) == row.kld
    assert float(first[10]) == row.mafe_e0


def test_comparison_table_content(toy_run):
    _, _, _, report = toy_run
    text = comparison_table(report)
    assert "cdf-ufts" in text and "clr" in text
    assert "Mean" in text
    assert "**" in text  # row minima are marked
    assert "KLD" in text and "RMSFE" in text


def test_harness_input_validation():
    ltf = gompertz_lifetable(range(1970, 2002), sex="Female", seed=11)
    plan = WindowPlan(train_start=1970, first_test_year=1998, last_year=2001)
    with pytest.raises(DataError):
        run_expanding_window(ltf, None, plan, methods=("arima",))
    with pytest.raises(DataError):
        run_expanding_window(None, None, plan)
    short_plan = WindowPlan(train_start=1970, first_test_year=1998, last_year=2010)
    with pytest.raises(DataError, match="span"):
        run_expanding_window(ltf, None, short_plan, methods=("cdf-ufts",))


def test_harness_attaches_window_provenance():
    # first window trains on 10 years, too few to fit: the error names it
    ltf = gompertz_lifetable(range(1988, 2002), sex="Female", seed=11)
    plan = WindowPlan(train_start=1988, first_test_year=1998, last_year=2001)
    with pytest.raises(InsufficientHistoryError, match="window training through 1997"):
        run_expanding_window(ltf, None, plan, methods=("cdf-ufts",), n_paths=1000)
