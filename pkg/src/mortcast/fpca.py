"""Principal component decompositions of functional time-series panels.

A panel is an (n, p) array: n yearly curves observed on a common grid of p
points.  Three fits are provided:

* :func:`fit_ufts` decomposes one panel (univariate functional time series).
* :func:`fit_mfts` standardizes two panels per grid point, stacks them side
  by side, and decomposes the joint (n, 2p) panel (multivariate).
* :func:`fit_mlfts` decomposes the average of two centred panels into a
  common trend, then fits each panel's remaining deviation separately
  (multilevel).

Curves live on an integer grid with unit spacing, so the inner product is a
plain dot product and no quadrature weights appear.  Eigenvectors follow a
fixed sign convention (largest-magnitude entry positive), which makes every
fit deterministic and comparable across runs.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    DegenerateCovarianceError,
    InsufficientHistoryError,
    ZeroVarianceError,
)

__all__ = [
    "Fixed",
    "EVR",
    "FpcaModel",
    "MultilevelModel",
    "StandardizationRecord",
    "select_k_evr",
    "fit_ufts",
    "fit_mfts",
    "fit_mlfts",
    "model_to_json",
]


@dataclass(frozen=True)
class Fixed:
    """Retain a fixed number of components (capped at the panel rank)."""

    k: int = 6


@dataclass(frozen=True)
class EVR:
    """Retain the component count minimizing the eigenvalue ratio.

    Attributes
    ----------
    kmax : int
        Largest candidate count examined.
    tau : float
        Relative floor: eigenvalues below tau * largest are treated as
        numerical noise and stop the search.
    """

    kmax: int = 10
    tau: float = 1e-12


Selector = Fixed | EVR


@dataclass(frozen=True)
class FpcaModel:
    """Truncated eigendecomposition of a panel's covariance.

    The fitted panel decomposes exactly as
    ``panel = mean + scores @ basis.T + residuals``.

    Attributes
    ----------
    mean : ndarray
        Pointwise average curve, shape (p,).
    basis : ndarray
        Orthonormal eigenvector columns, shape (p, K).
    eigenvalues : ndarray
        Covariance eigenvalues for the retained components, non-increasing,
        shape (K,).
    scores : ndarray
        Projections of the centred curves on the basis, shape (n, K); each
        column averages to 0.
    residuals : ndarray
        Centred curves minus their rank-K reconstruction, shape (n, p).
    n_components : int
        Retained component count K.
    eigenvalues_all : ndarray
        Full covariance spectrum, shape (p,), for diagnostics and
        component-count selection.
    """

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    residuals: np.ndarray
    n_components: int
    eigenvalues_all: np.ndarray


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-grid-point centring and scaling used before a stacked fit.

    Scales are strictly positive; de-standardization multiplies by scale
    and adds the center, the exact inverse of the forward map.
    """

    center_female: np.ndarray
    scale_female: np.ndarray
    center_male: np.ndarray
    scale_male: np.ndarray


@dataclass(frozen=True)
class MultilevelModel:
    """Two-stage decomposition: common trend plus per-panel deviations.

    For each input panel ``Z_s = mean_s + common fit + deviation fit +
    final residuals`` exactly, where the common fit is shared and the
    deviation fits are independent per panel.
    """

    mean_female: np.ndarray
    mean_male: np.ndarray
    common: FpcaModel
    resid_female: FpcaModel
    resid_male: FpcaModel


def select_k_evr(eigenvalues: np.ndarray, kmax: int = 10, tau: float = 1e-12) -> int:
    """Component count by the minimum eigenvalue-ratio rule.

    Scans k = 1..kmax and returns the k minimizing eigenvalues[k] /
    eigenvalues[k-1] (0-based), i.e. the sharpest relative drop after the
    k-th component.  Any eigenvalue below tau * eigenvalues[0] terminates
    the scan at the preceding k so that pure numerical noise can never be
    claimed as a component.  Always returns at least 1.

    Parameters
    ----------
    eigenvalues : ndarray
        Non-increasing, nonnegative spectrum of length >= 2.
    kmax : int
        Largest candidate count.
    tau : float
        Relative noise floor.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.shape[0] < 2:
        raise DataError("need at least two eigenvalues")
    if np.any(lam < -1e-12 * max(lam[0], 1.0)) or np.any(np.diff(lam) > 1e-9 * max(lam[0], 1.0)):
        raise DataError("eigenvalues must be nonnegative and non-increasing")
    if lam[0] <= 0.0:
        return 1
    floor = tau * lam[0]
    best_k = 1
    best_ratio = np.inf
    for k in range(1, min(kmax, lam.shape[0] - 1) + 1):
        if lam[k - 1] < floor:
            break
        ratio = lam[k] / lam[k - 1]
        if ratio < best_ratio:
            best_ratio = ratio
            best_k = k
    return best_k


def _resolve_k(selector: Selector, eigenvalues_all: np.ndarray, n: int, p: int) -> int:
    rank_cap = max(1, min(p, n - 1))
    if isinstance(selector, Fixed):
        if selector.k < 1:
            raise DataError("fixed component count must be at least 1")
        return min(selector.k, rank_cap)
    if isinstance(selector, EVR):
        if eigenvalues_all.shape[0] < 2:
            return 1
        return min(select_k_evr(eigenvalues_all, selector.kmax, selector.tau), rank_cap)
    raise DataError(f"unknown selector {selector!r}")


def _flip_signs(basis: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive (first such
    # entry under ties), so eigenvector signs never depend on the solver.
    out = basis.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[int(np.argmax(np.abs(col)))] < 0.0:
            out[:, j] = -col
    return out


def _trivial_model(panel: np.ndarray) -> FpcaModel:
    n, p = panel.shape
    mean = panel.mean(axis=0)
    return FpcaModel(
        mean=mean,
        basis=np.zeros((p, 0)),
        eigenvalues=np.zeros(0),
        scores=np.zeros((n, 0)),
        residuals=panel - mean,
        n_components=0,
        eigenvalues_all=np.zeros(p),
    )


def fit_ufts(Z: np.ndarray, selector: Selector = Fixed(6)) -> FpcaModel:
    """Fit a truncated principal component model to one panel.

    The empirical covariance uses divisor n - 1 and is eigendecomposed
    directly as a (p, p) symmetric matrix.  The retained count is capped at
    the panel rank bound min(p, n - 1), beyond which eigenvalues vanish.

    Parameters
    ----------
    Z : ndarray
        Panel of shape (n, p) with n >= 3, all entries finite.
    selector : Fixed or EVR
        Component-count rule.

    Returns
    -------
    FpcaModel

    Raises
    ------
    InsufficientHistoryError
        If fewer than 3 curves are supplied.
    DegenerateCovarianceError
        If the panel has zero variance everywhere.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    n, p = Z.shape
    if n < 3:
        raise InsufficientHistoryError(f"need at least 3 curves, got {n}")
    if p < 1:
        raise DataError("panel must have at least one grid point")
    if not np.all(np.isfinite(Z)):
        raise DataError("panel entries must be finite")

    mean = Z.mean(axis=0)
    centred = Z - mean
    if float(np.sum(centred**2)) == 0.0:
        raise DegenerateCovarianceError("panel has zero variance everywhere")
    cov = centred.T @ centred / (n - 1)

    w, v = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    eigenvalues_all = np.maximum(w[order], 0.0)
    vectors = v[:, order]

    k = _resolve_k(selector, eigenvalues_all, n, p)
    basis = _flip_signs(vectors[:, :k])
    scores = centred @ basis
    residuals = centred - scores @ basis.T
    return FpcaModel(
        mean=mean,
        basis=basis,
        eigenvalues=eigenvalues_all[:k].copy(),
        scores=scores,
        residuals=residuals,
        n_components=k,
        eigenvalues_all=eigenvalues_all,
    )


def _standardize(Z: np.ndarray, label: str, scalar_scale: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    center = Z.mean(axis=0)
    centred = Z - center
    var = centred.var(axis=0, ddof=1)
    if scalar_scale:
        scale = np.full(Z.shape[1], float(np.sqrt(var.mean())))
    else:
        scale = np.sqrt(var)
    zero = scale <= 0.0
    if np.any(zero):
        age = int(np.argmax(zero))
        raise ZeroVarianceError(
            f"{label} series has zero variance at grid point {age}"
        )
    return (centred / scale, center, scale)


def fit_mfts(
    Zf: np.ndarray,
    Zm: np.ndarray,
    selector: Selector = Fixed(6),
    scalar_scale: bool = False,
) -> tuple[FpcaModel, StandardizationRecord]:
    """Fit one joint model to two standardized, column-stacked panels.

    Each panel is centred and scaled per grid point (or by a single scalar
    per panel when ``scalar_scale`` is set), then the two are stacked into
    an (n, 2p) panel and fitted as one.  Rows 0..p-1 of the basis are the
    female block and rows p..2p-1 the male block.

    Parameters
    ----------
    Zf, Zm : ndarray
        Panels on identical year and grid shapes, (n, p) each.
    selector : Fixed or EVR
    scalar_scale : bool
        Scale each panel by the root mean of its per-point variances
        instead of point-by-point standard deviations.

    Returns
    -------
    (FpcaModel, StandardizationRecord)
        The joint model over the stacked grid and the standardization
        needed to map forecasts back to the original scales.

    Raises
    ------
    ZeroVarianceError
        If any grid point of either panel is constant over years.
    """
    Zf = np.atleast_2d(np.asarray(Zf, dtype=float))
    Zm = np.atleast_2d(np.asarray(Zm, dtype=float))
    if Zf.shape != Zm.shape:
        raise DataError("female and male panels must share year and grid shapes")
    sf, cf, scf = _standardize(Zf, "female", scalar_scale)
    sm, cm, scm = _standardize(Zm, "male", scalar_scale)
    stacked = np.hstack([sf, sm])
    model = fit_ufts(stacked, selector)
    record = StandardizationRecord(
        center_female=cf, scale_female=scf, center_male=cm, scale_male=scm
    )
    return model, record


def _fit_stage(
    panel: np.ndarray, selector: Selector, scale_ref: float | None = None
) -> FpcaModel:
    # with a reference scale, squared rounding error is ~1e-32 relative,
    # so 1e-24 separates arithmetic dust from the smallest believable
    # signal; without one only an exactly constant panel is degenerate
    centred = panel - panel.mean(axis=0)
    total = float(np.sum(centred**2))
    if total <= (0.0 if scale_ref is None else 1e-24 * scale_ref):
        return _trivial_model(panel)
    return fit_ufts(panel, selector)


def fit_mlfts(
    Zf: np.ndarray, Zm: np.ndarray, selector: Selector = Fixed(6)
) -> MultilevelModel:
    """Fit a common trend plus per-panel deviation models.

    Stage 1 removes each panel's mean curve and fits the simple average of
    the two centred panels, giving a trend shared by both.  Stage 2 fits
    each panel's deviation from that shared fit independently.  A stage
    whose input carries no variance beyond floating-point rounding of the
    other stage (e.g. mirrored panels averaging to zero, or identical
    panels leaving no deviation) degenerates to a zero-component model
    rather than failing; negligibility is judged relative to the total
    variance of the two centred input panels.

    Parameters
    ----------
    Zf, Zm : ndarray
        Panels on identical year and grid shapes, (n, p) each.
    selector : Fixed or EVR
        Applied to the common stage and to both deviation stages.

    Returns
    -------
    MultilevelModel
    """
    Zf = np.atleast_2d(np.asarray(Zf, dtype=float))
    Zm = np.atleast_2d(np.asarray(Zm, dtype=float))
    if Zf.shape != Zm.shape:
        raise DataError("female and male panels must share year and grid shapes")
    mean_f = Zf.mean(axis=0)
    mean_m = Zm.mean(axis=0)
    centred_f = Zf - mean_f
    centred_m = Zm - mean_m

    scale_ref = float(np.sum(centred_f**2) + np.sum(centred_m**2))

    aggregate = 0.5 * (centred_f + centred_m)
    common = _fit_stage(aggregate, selector, scale_ref)
    common_fit = common.mean + common.scores @ common.basis.T

    resid_f = _fit_stage(centred_f - common_fit, selector, scale_ref)
    resid_m = _fit_stage(centred_m - common_fit, selector, scale_ref)
    return MultilevelModel(
        mean_female=mean_f,
        mean_male=mean_m,
        common=common,
        resid_female=resid_f,
        resid_male=resid_m,
    )


def model_to_json(model: FpcaModel) -> str:
    """Serialize a fitted model to a stable JSON snapshot.

    Layout: ``mean`` (length p), ``basis_columns`` (K lists of length p,
    column-major), ``eigenvalues`` (length K), ``scores`` (n lists of
    length K, row-major).  Keys are sorted and floats use full repr
    precision, so equal models serialize to identical bytes.
    """
    payload = {
        "mean": model.mean.tolist(),
        "basis_columns": [model.basis[:, j].tolist() for j in range(model.n_components)],
        "eigenvalues": model.eigenvalues.tolist(),
        "scores": model.scores.tolist(),
    }
    return json.dumps(payload, sort_keys=True)
