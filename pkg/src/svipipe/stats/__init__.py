"""Observation encoding, OLS regression, Jenks breaks and correlation."""
from .correlation import UndefinedCorrelationError, pearson_corr
from .distributions import betainc_reg, f_sf, student_t_isf, student_t_sf, t_two_sided_p
from .encoding import (
    EncodedObservation,
    EncodingConfig,
    Season,
    TractAttributes,
    encode,
    encode_observations,
    income_bracket,
    read_attributes,
    read_encoded,
    resolve_income_thresholds,
    season_of,
)
from .jenks import class_ssd, jenks_breaks
from .ols import (
    InsufficientRowsError,
    RankDeficientError,
    RegressionResult,
    design_labels,
    design_matrix,
    fit_ols,
    format_coefficients,
    format_summary,
    ols_fit,
    summary_table,
)

__all__ = [
    "EncodedObservation", "EncodingConfig", "InsufficientRowsError", "RankDeficientError",
    "RegressionResult", "Season", "TractAttributes", "UndefinedCorrelationError",
    "betainc_reg", "class_ssd", "design_labels", "design_matrix", "encode", "encode_observations",
    "f_sf", "fit_ols", "format_coefficients", "format_summary", "income_bracket", "jenks_breaks",
    "ols_fit", "pearson_corr", "read_attributes", "read_encoded", "resolve_income_thresholds",
    "season_of", "student_t_isf", "student_t_sf", "summary_table", "t_two_sided_p",
]
