"""Return-series decomposition and robust polynomial surface fitting."""

from .decompose import (
    DecomposedSeries,
    ReturnSeries,
    decompose,
    kz_filter,
    log_returns,
    moving_average_pass,
)
from .errors import (
    ConfigError,
    DegreesOfFreedomError,
    ExclusionError,
    FormatError,
    InsufficientData,
    OrderError,
    ParseError,
    RankError,
    SplitError,
    VolfitError,
    WindowError,
)
from .evaluate import (
    FitReport,
    coefficient_table_csv,
    export_coefficient_table,
    fit_report,
    parse_coefficient_table,
    report_from_document,
    report_to_document,
    residuals,
    rmse,
    split_train_test,
)
from .ingest import (
    PipelineConfig,
    PriceSeries,
    ValidationReport,
    load_config,
    parse_price_csv,
    price_series_to_csv,
    validate_series,
)
from .surface import (
    DEFAULT_TERM_SETS,
    FIT_METHODS,
    SERIES_NAMES,
    FeatureSpec,
    FeatureTable,
    IrlsOptions,
    PolySurfaceModel,
    TermSet,
    bisquare_weights,
    build_feature_table,
    confidence_bounds,
    design_matrix,
    evaluate_surface,
    fit_bisquare,
    fit_lar,
    fit_ols,
    model_from_document,
    model_to_document,
    remove_outliers,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DEFAULT_TERM_SETS",
    "DecomposedSeries",
    "DegreesOfFreedomError",
    "ExclusionError",
    "FIT_METHODS",
    "FeatureSpec",
    "FeatureTable",
    "FitReport",
    "FormatError",
    "InsufficientData",
    "IrlsOptions",
    "OrderError",
    "ParseError",
    "PipelineConfig",
    "PolySurfaceModel",
    "PriceSeries",
    "RankError",
    "ReturnSeries",
    "SERIES_NAMES",
    "SplitError",
    "TermSet",
    "ValidationReport",
    "VolfitError",
    "WindowError",
    "bisquare_weights",
    "build_feature_table",
    "coefficient_table_csv",
    "confidence_bounds",
    "decompose",
    "design_matrix",
    "evaluate_surface",
    "export_coefficient_table",
    "fit_bisquare",
    "fit_lar",
    "fit_ols",
    "fit_report",
    "kz_filter",
    "load_config",
    "log_returns",
    "model_from_document",
    "model_to_document",
    "moving_average_pass",
    "parse_coefficient_table",
    "parse_price_csv",
    "price_series_to_csv",
    "remove_outliers",
    "report_from_document",
    "report_to_document",
    "residuals",
    "rmse",
    "split_train_test",
    "validate_series",
]
