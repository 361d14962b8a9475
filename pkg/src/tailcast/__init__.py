"""Heavy-tail-aware hourly time-series forecasting.

Pipeline pieces: CSV ingestion with kNN imputation, three-scale seasonal
adjustment, dependence/tail diagnostics, stochastic and autoregressive
baselines, and a hybrid neural forecaster trainable under the bounded
correntropy loss, with blocked cross-validation and the NMBF/NMAEF/RMSE/
CORR report metrics.
"""

__version__ = "0.1.0"

from .base import Forecaster
from .baselines import (
    ArModel,
    AutoregressiveForecaster,
    OrnsteinUhlenbeckForecaster,
    OuParams,
    estimate_ou,
    fit_ar,
    forecast_ar,
    forecast_ou,
    select_ar_order,
    simulate_ou,
)
from .diagnostics import (
    AcfResult,
    DependenceReport,
    DfaResult,
    TailFit,
    acf,
    classify_dependence,
    compare_tails,
    dependence_report,
    dfa,
    empirical_ccdf,
    fit_lognormal,
    fit_powerlaw,
)
from .errors import TailcastError
from .evaluation import (
    ChannelSpec,
    MetricsReport,
    SplitPlan,
    blocked_splits,
    corr,
    evaluate,
    generate_synthetic,
    nmaef,
    nmbf,
    rmse,
    windows_from_plan,
)
from .frame import TimeSeriesFrame, hourly_range
from .ingest import (
    ImputationConfig,
    KnnImputer,
    MeanCenterer,
    center,
    encode_wind_direction,
    impute_knn,
    parse_csv,
    write_csv,
)
from .neural import (
    HybridForecaster,
    HybridModel,
    LossSpec,
    Time2VecLayer,
    WindowDataset,
    WindowSpec,
    build_hybrid_model,
    build_windows,
    forward,
    load_checkpoint,
    mccr_gradient,
    mccr_loss,
    mse_loss,
    save_checkpoint,
    time2vec_forward,
    train,
)
from .seasonal import (
    LoessConfig,
    SeasonalComponents,
    SeasonalDecomposer,
    decompose,
    loess_smooth,
    reseasonalize,
)

__all__ = [
    "__version__",
    "AcfResult", "ArModel", "AutoregressiveForecaster", "ChannelSpec",
    "DependenceReport", "DfaResult", "Forecaster", "HybridForecaster",
    "HybridModel", "ImputationConfig", "KnnImputer", "LoessConfig",
    "LossSpec", "MeanCenterer", "MetricsReport", "OrnsteinUhlenbeckForecaster",
    "OuParams", "SeasonalComponents", "SeasonalDecomposer", "SplitPlan",
    "TailFit", "TailcastError", "Time2VecLayer", "TimeSeriesFrame",
    "WindowDataset", "WindowSpec",
    "acf", "blocked_splits", "build_hybrid_model", "build_windows", "center",
    "classify_dependence", "compare_tails", "corr", "decompose",
    "dependence_report", "dfa", "empirical_ccdf", "encode_wind_direction",
    "estimate_ou", "evaluate", "fit_ar", "fit_lognormal", "fit_powerlaw",
    "forecast_ar", "forecast_ou", "forward", "generate_synthetic",
    "hourly_range", "impute_knn", "load_checkpoint", "loess_smooth",
    "mccr_gradient", "mccr_loss", "mse_loss", "nmaef", "nmbf", "parse_csv",
    "reseasonalize", "rmse", "save_checkpoint", "select_ar_order",
    "simulate_ou", "time2vec_forward", "train", "windows_from_plan",
    "write_csv",
]
