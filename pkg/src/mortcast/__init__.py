"""Forecasting the age distribution of life-table deaths.

Life-table death counts, viewed year by year as probability densities
over age, are forecast by mapping each density to an unconstrained curve
(logit of the cumulative distribution, or centred log-ratios of the
counts), decomposing the resulting panel into principal components,
forecasting the component scores with exponential smoothing, and mapping
back.  An expanding-window harness scores point and interval accuracy,
and forecast tables feed cohort survival probabilities and temporary
annuity prices.
"""

from .annuity import (
    CohortSurvival,
    PricingConfig,
    annuity_price,
    bond_price,
    cohort_survival,
    price_grid,
)
from .errors import (
    ContractBoundError,
    DataError,
    DegenerateCovarianceError,
    FitFailureError,
    HorizonExceededError,
    InsufficientHistoryError,
    MortcastError,
    NumericalError,
    ZeroCountError,
    ZeroVarianceError,
)
from .ets import EtsFit, fit_ets, forecast_scores
from .evaluation import (
    MetricReport,
    MetricRow,
    WindowPlan,
    e0_errors,
    ecp_cpd,
    interval_score,
    jsd_geometric,
    kld,
    kld_symmetric,
    run_expanding_window,
)
from .fpca import (
    EVR,
    Fixed,
    FpcaModel,
    MultilevelModel,
    StandardizationRecord,
    fit_mfts,
    fit_mlfts,
    fit_ufts,
    select_k_evr,
)
from .lifetable import (
    DensityPanel,
    LifeTableSeries,
    gini_concentration,
    gini_equality_index,
    life_expectancy,
    lifetable_from_density,
    modal_age,
    normalize_to_density,
    read_hmd_lifetable,
    rebuild_dx_from_qx,
)
from .pipeline import (
    METHODS,
    ForecastResult,
    forecast_cdf,
    forecast_clr,
    forecast_method,
    interval_paths,
)
from .transforms import (
    ClrDecomposition,
    cdf_forward,
    cdf_to_density,
    clr_forward,
    clr_inverse,
    inverse_logit,
    logit_transform,
)

__version__ = "0.1.0"
