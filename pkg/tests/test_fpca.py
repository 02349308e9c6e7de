import numpy as np
import pytest
from scipy.linalg import subspace_angles

from mortcast import (
    EVR,
    DataError,
    DegenerateCovarianceError,
    Fixed,
    InsufficientHistoryError,
    ZeroVarianceError,
    fit_mfts,
    fit_mlfts,
    fit_ufts,
    select_k_evr,
)
from mortcast.fpca import model_to_json


def brute_force_eig(panel):
    """Dense oracle: explicit covariance, full symmetric eigendecomposition."""
    centred = panel - panel.mean(axis=0)
    cov = centred.T @ centred / (panel.shape[0] - 1)
    lam, vec = np.linalg.eigh(cov)
    order = np.argsort(lam)[::-1]
    return lam[order], vec[:, order]


def check_model_invariants(model, panel):
    # orthonormal basis, descending eigenvalues, centred scores,
    # exact reconstruction of the training panel
    k = model.n_components
    gram = model.basis.T @ model.basis
    assert np.allclose(gram, np.eye(k), atol=1e-10)
    assert np.all(np.diff(model.eigenvalues) <= 1e-12)
    assert np.allclose(model.scores.mean(axis=0), 0.0, atol=1e-9)
    recon = model.mean + model.scores @ model.basis.T + model.residuals
    assert np.allclose(recon, panel, atol=1e-10)


def test_select_k_evr_pins():
    assert select_k_evr(np.array([10.0, 1.0, 0.9, 0.8])) == 1
    assert select_k_evr(np.array([10.0, 9.0, 0.1, 0.09])) == 2
    # the second eigenvalue is numerical noise; the guard must ignore it
    assert select_k_evr(np.array([5.0, 5e-13])) == 1


def test_select_k_evr_validation():
    with pytest.raises(DataError):
        select_k_evr(np.array([1.0, 2.0]))
    with pytest.raises(DataError):
        select_k_evr(np.array([1.0, -0.5]))
    assert select_k_evr(np.array([0.0, 0.0])) == 1


def test_select_k_kmax_window():
    lam = np.array([10.0, 9.5, 9.0, 8.5, 0.5, 0.4])
    assert select_k_evr(lam, kmax=3) == 3  # cliff at 4 is outside the window


def test_ufts_rank_one_recovery():
    rng = np.random.default_rng(7)
    g = rng.normal(size=30)
    phi = rng.normal(size=15)
    phi /= np.linalg.norm(phi)
    Z = np.outer(g, phi)
    model = fit_ufts(Z, selector=EVR())
    assert model.n_components == 1
    check_model_invariants(model, Z)
    assert np.abs(model.residuals).max() < 1e-10
    # fitted direction matches the generator up to sign
    assert min(
        np.abs(model.basis[:, 0] - phi).max(),
        np.abs(model.basis[:, 0] + phi).max(),
    ) < 1e-10


def test_ufts_matches_dense_oracle():
    rng = np.random.default_rng(8)
    for _ in range(10):
        Z = rng.normal(size=(8, 5))
        model = fit_ufts(Z, selector=Fixed(6))
        lam, vec = brute_force_eig(Z)
        k = model.n_components
        assert k == 5  # capped by the grid size
        assert np.allclose(model.eigenvalues, np.maximum(lam[:k], 0.0), atol=1e-8)
        for j in range(k):
            dot = abs(vec[:, j] @ model.basis[:, j])
            assert dot == pytest.approx(1.0, abs=1e-8)
        check_model_invariants(model, Z)


def test_ufts_sign_convention():
    rng = np.random.default_rng(9)
    Z = rng.normal(size=(12, 6))
    model = fit_ufts(Z)
    for j in range(model.n_components):
        col = model.basis[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_ufts_row_permutation_invariance():
    rng = np.random.default_rng(10)
    Z = rng.normal(size=(14, 6))
    perm = rng.permutation(14)
    a = fit_ufts(Z)
    b = fit_ufts(Z[perm])
    assert np.allclose(a.mean, b.mean, atol=1e-12)
    assert np.allclose(a.basis, b.basis, atol=1e-10)
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-10)
    assert np.allclose(a.scores[perm], b.scores, atol=1e-9)


def test_ufts_variance_accounting():
    rng = np.random.default_rng(11)
    Z = rng.normal(size=(20, 7))
    model = fit_ufts(Z)
    centred = Z - Z.mean(axis=0)
    trace = np.trace(centred.T @ centred / 19.0)
    assert np.sum(model.eigenvalues_all) == pytest.approx(trace, abs=1e-8)


def test_ufts_rank_cap():
    rng = np.random.default_rng(12)
    model = fit_ufts(rng.normal(size=(3, 10)), selector=Fixed(6))
    assert model.n_components <= 2  # n - 1 bounds the covariance rank


def test_ufts_errors():
    rng = np.random.default_rng(13)
    with pytest.raises(InsufficientHistoryError):
        fit_ufts(rng.normal(size=(2, 5)))
    with pytest.raises(DegenerateCovarianceError):
        fit_ufts(np.ones((6, 4)))


def test_mfts_identical_panels():
    """Stacking two copies of one panel decouples into the single fit.

    The stacked eigenvector carries the pattern in both blocks, so each
    block equals the single-series eigenvector divided by sqrt(2) and the
    stacked scores come out sqrt(2) times larger; per-block reconstruction
    is unchanged.
    """
    rng = np.random.default_rng(14)
    Z = rng.normal(size=(18, 6)) + 3.0 * rng.normal(size=6)
    model, record = fit_mfts(Z, Z.copy(), selector=Fixed(3))
    p = 6
    female_block = model.basis[:p]
    male_block = model.basis[p:]
    assert np.allclose(female_block, male_block, atol=1e-10)

    std = (Z - record.center_female) / record.scale_female
    single = fit_ufts(std, selector=Fixed(3))
    assert np.allclose(np.abs(female_block) * np.sqrt(2.0), np.abs(single.basis), atol=1e-8)
    assert np.allclose(np.abs(model.scores), np.abs(single.scores) * np.sqrt(2.0), atol=1e-8)
    # block reconstruction equals the single-series reconstruction exactly
    recon_block = (model.scores @ model.basis.T)[:, :p]
    recon_single = single.scores @ single.basis.T
    assert np.allclose(recon_block, recon_single, atol=1e-9)


def test_mfts_matches_dense_oracle():
    rng = np.random.default_rng(15)
    Zf = rng.normal(size=(5, 3))
    Zm = rng.normal(size=(5, 3))
    model, record = fit_mfts(Zf, Zm, selector=Fixed(6))
    sf = (Zf - record.center_female) / record.scale_female
    sm = (Zm - record.center_male) / record.scale_male
    stacked = np.hstack([sf, sm])
    lam, vec = brute_force_eig(stacked)
    k = model.n_components
    assert np.allclose(model.eigenvalues, np.maximum(lam[:k], 0.0), atol=1e-8)
    for j in range(k):
        assert abs(vec[:, j] @ model.basis[:, j]) == pytest.approx(1.0, abs=1e-8)


def test_mfts_white_noise_eigenvalue_bound():
    """Leading stacked eigenvalue at most the sum of per-series leaders."""
    rng = np.random.default_rng(16)
    Zf = rng.normal(size=(200, 5))
    Zm = rng.normal(size=(200, 5))
    model, record = fit_mfts(Zf, Zm)
    a = fit_ufts((Zf - record.center_female) / record.scale_female)
    b = fit_ufts((Zm - record.center_male) / record.scale_male)
    assert model.eigenvalues[0] <= a.eigenvalues[0] + b.eigenvalues[0] + 1e-10


def test_mfts_zero_variance_names_grid_point():
    rng = np.random.default_rng(17)
    Zf = rng.normal(size=(10, 4))
    Zm = rng.normal(size=(10, 4))
    Zm[:, 2] = 5.0
    with pytest.raises(ZeroVarianceError, match="grid point 2"):
        fit_mfts(Zf, Zm)


def test_mfts_scalar_scale_reconstruction():
    rng = np.random.default_rng(18)
    Zf = rng.normal(size=(9, 4))
    Zm = rng.normal(size=(9, 4))
    model, record = fit_mfts(Zf, Zm, selector=Fixed(8), scalar_scale=True)
    assert np.allclose(record.scale_female, record.scale_female[0])
    stacked_fit = model.mean + model.scores @ model.basis.T + model.residuals
    back_f = stacked_fit[:, :4] * record.scale_female + record.center_female
    assert np.allclose(back_f, Zf, atol=1e-9)


def test_mlfts_identical_panels_have_trivial_stage_two():
    rng = np.random.default_rng(19)
    Z = rng.normal(size=(16, 5))
    model = fit_mlfts(Z, Z.copy())
    assert model.resid_female.n_components == 0
    assert model.resid_male.n_components == 0
    assert np.abs(model.resid_female.residuals).max() < 1e-12
    assert all(lam < 1e-20 for lam in model.resid_female.eigenvalues_all)


def test_mlfts_mirrored_panels_have_trivial_common_stage():
    """Anti-symmetric deviations cancel in the aggregate."""
    rng = np.random.default_rng(20)
    base = rng.normal(size=5)
    dev = rng.normal(size=(16, 5))
    dev -= dev.mean(axis=0)
    Zf = base + dev
    Zm = base - dev
    model = fit_mlfts(Zf, Zm)
    assert model.common.n_components == 0
    assert model.resid_female.n_components >= 1


def test_mlfts_recovers_planted_subspaces():
    """Common and sex-specific factors land in the right stage."""
    rng = np.random.default_rng(21)
    n, p = 500, 12
    g = rng.normal(size=p)
    g /= np.linalg.norm(g)
    hf = rng.normal(size=p)
    hf -= g * (g @ hf)
    hf /= np.linalg.norm(hf)
    hm = rng.normal(size=p)
    hm -= g * (g @ hm)
    hm -= hf * (hf @ hm)
    hm /= np.linalg.norm(hm)

    c = rng.normal(scale=3.0, size=n)
    uf = rng.normal(scale=1.0, size=n)
    um = rng.normal(scale=1.0, size=n)
    mu_f = rng.normal(size=p)
    mu_m = rng.normal(size=p)
    Zf = mu_f + np.outer(c, g) + np.outer(uf, hf)
    Zm = mu_m + np.outer(c, g) + np.outer(um, hm)

    model = fit_mlfts(Zf, Zm, selector=EVR())
    ang_c = subspace_angles(model.common.basis, g[:, None])
    ang_f = subspace_angles(model.resid_female.basis, hf[:, None])
    ang_m = subspace_angles(model.resid_male.basis, hm[:, None])
    assert ang_c.max() < 1e-6
    assert ang_f.max() < 1e-6
    assert ang_m.max() < 1e-6


def test_mlfts_exact_reconstruction():
    rng = np.random.default_rng(22)
    Zf = rng.normal(size=(14, 6))
    Zm = rng.normal(size=(14, 6))
    model = fit_mlfts(Zf, Zm, selector=Fixed(6))
    common_fit = model.common.mean + model.common.scores @ model.common.basis.T
    for Z, mean, dev in (
        (Zf, model.mean_female, model.resid_female),
        (Zm, model.mean_male, model.resid_male),
    ):
        rebuilt = mean + common_fit + dev.mean + dev.scores @ dev.basis.T + dev.residuals
        assert np.allclose(rebuilt, Z, atol=1e-9)


def test_model_to_json_round_trips():
    import json

    rng = np.random.default_rng(23)
    model = fit_ufts(rng.normal(size=(10, 4)))
    blob = json.loads(model_to_json(model))
    assert set(blob) == {"mean", "basis_columns", "eigenvalues", "scores"}
    assert np.allclose(blob["mean"], model.mean)
