import numpy as np

from mortcast import (
    cdf_forward,
    fit_mfts,
    life_expectancy,
    logit_transform,
    modal_age,
    normalize_to_density,
)
from mortcast.synthetic import (
    default_logit_model,
    gompertz_lifetable,
    simulate_density_panel,
    synthetic_pair,
)


def test_generator_is_deterministic():
    a = gompertz_lifetable(range(1990, 2000), seed=4)
    b = gompertz_lifetable(range(1990, 2000), seed=4)
    assert np.array_equal(a.qx, b.qx)
    c = gompertz_lifetable(range(1990, 2000), seed=5)
    assert not np.array_equal(a.qx, c.qx)


def test_generated_tables_are_valid():
    lt = gompertz_lifetable(range(1980, 2000), seed=1)
    assert lt.qx.shape == (20, 111)
    assert np.all((lt.qx >= 0.0) & (lt.qx <= 1.0))
    assert np.all(lt.qx[:, -1] == 1.0)
    assert np.all(np.diff(lt.lx, axis=1) <= 0.0)
    assert np.allclose(lt.dx.sum(axis=1), lt.radix)
    dens = normalize_to_density(lt)
    assert np.allclose(dens.d.sum(axis=1), 1.0, atol=1e-12)


def test_old_age_deceleration_keeps_tail_alive():
    # without the hazard plateau the oldest cells underflow and their
    # transformed coordinates become constant, which breaks joint fits
    lt_f, lt_m = synthetic_pair(range(1970, 2000), seed=2)
    for lt in (lt_f, lt_m):
        dens = normalize_to_density(lt)
        assert dens.d.min() > 1e-12
        z = logit_transform(cdf_forward(dens.d))
        assert np.all(z.std(axis=0) > 0.0)
    # the stacked fit must accept the pair without degenerate columns
    zf = logit_transform(cdf_forward(normalize_to_density(lt_f).d))
    zm = logit_transform(cdf_forward(normalize_to_density(lt_m).d))
    fit_mfts(zf, zm)


def test_improvement_raises_life_expectancy():
    slow = gompertz_lifetable(range(1960, 2000), improvement=0.005, noise_sd=0.0)
    fast = gompertz_lifetable(range(1960, 2000), improvement=0.02, noise_sd=0.0)
    e0 = lambda lt, t: life_expectancy(normalize_to_density(lt).d[t])
    # same starting hazard, diverging later years
    assert abs(e0(slow, 0) - e0(fast, 0)) < 1e-9
    assert e0(fast, 39) > e0(slow, 39) + 1.0
    # and the mode drifts upward over the sample
    dens = normalize_to_density(fast)
    assert modal_age(dens.d[39]) > modal_age(dens.d[0])


def test_sex_pair_ordering():
    lt_f, lt_m = synthetic_pair(range(1980, 2000), seed=7, noise_sd=0.0)
    df = normalize_to_density(lt_f)
    dm = normalize_to_density(lt_m)
    for t in range(20):
        assert life_expectancy(df.d[t]) > life_expectancy(dm.d[t])


def test_default_factor_model_shape():
    model = default_logit_model()
    k = model.basis.shape[1]
    assert k == 2
    gram = model.basis.T @ model.basis
    assert np.allclose(gram, np.eye(k), atol=1e-12)
    assert model.basis.shape[0] == 110  # interior grid, terminal dropped
    assert np.all(model.sigma > 0)


def test_simulated_panel_rows_are_densities():
    model = default_logit_model()
    panel = simulate_density_panel(model, 41, seed=9)
    assert panel.shape == (41, 111)
    assert np.allclose(panel.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(panel >= 0.0)
    again = simulate_density_panel(model, 41, seed=9)
    assert np.array_equal(panel, again)
    other = simulate_density_panel(model, 41, seed=10)
    assert not np.array_equal(panel, other)


def test_simulated_panel_carries_systematic_drift():
    # the first factor's positive trend lifts the mid-age cumulative
    # share, pulling deaths earlier, so life expectancy drifts down
    model = default_logit_model()
    panel = simulate_density_panel(model, 41, seed=3)
    e0 = np.array([life_expectancy(row) for row in panel])
    first, last = e0[:10].mean(), e0[-10:].mean()
    assert last < first - 0.5
