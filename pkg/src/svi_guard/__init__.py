"""Arbitrage diagnostics for SVI volatility smiles.

Fits SVI under a cap on the asymptotic variance slope, then scans call prices
out to extreme strikes for call-spread and butterfly arbitrage.
"""

from svi_guard._version import __version__
from svi_guard.bounds import (
    BoundVerdict,
    D1Limit,
    SlopeBoundConfig,
    bound_verdict,
    check_gatheral,
    check_lee,
    classify_d1_limit,
    practical_slope_exact,
    practical_slope_quadratic,
    quadratic_bound_price,
)
from svi_guard.calibration import (
    CalibrationConfig,
    CalibrationResult,
    MarketSmile,
    calibrate,
    evaluate_fit,
    fit_objective,
)
from svi_guard.errors import (
    AboveForwardError,
    BelowIntrinsicError,
    CalibrationError,
    DomainError,
    InvalidParamsError,
    NoSolutionError,
    SmileFileError,
    SviGuardError,
)
from svi_guard.pricing import (
    ForwardContext,
    OptionQuote,
    black_call,
    black_put,
    black_vega,
    implied_vol,
    norm_cdf,
    norm_cdf_inv,
)
from svi_guard.scan import (
    ArbitrageReport,
    Interval,
    ScanGrid,
    full_report,
    grid_profile,
    price_argmax_moneyness,
    scan_butterfly,
    scan_call_monotonicity,
)
from svi_guard.smile_io import (
    format_smile_csv,
    load_sample_smile,
    parse_smile_csv,
    read_smile_csv,
)
from svi_guard.svi import (
    SviParams,
    TotalVarianceCurve,
    asymptotic_slopes,
    g_denominator,
    svi_variance,
    svi_variance_d2y,
    svi_variance_dy,
)

__all__ = [
    "__version__",
    "AboveForwardError",
    "ArbitrageReport",
    "BelowIntrinsicError",
    "BoundVerdict",
    "CalibrationConfig",
    "CalibrationError",
    "CalibrationResult",
    "D1Limit",
    "DomainError",
    "ForwardContext",
    "Interval",
    "InvalidParamsError",
    "MarketSmile",
    "NoSolutionError",
    "OptionQuote",
    "ScanGrid",
    "SlopeBoundConfig",
    "SmileFileError",
    "SviGuardError",
    "SviParams",
    "TotalVarianceCurve",
    "asymptotic_slopes",
    "black_call",
    "black_put",
    "black_vega",
    "bound_verdict",
    "calibrate",
    "check_gatheral",
    "check_lee",
    "classify_d1_limit",
    "evaluate_fit",
    "fit_objective",
    "format_smile_csv",
    "full_report",
    "g_denominator",
    "grid_profile",
    "implied_vol",
    "load_sample_smile",
    "norm_cdf",
    "norm_cdf_inv",
    "parse_smile_csv",
    "practical_slope_exact",
    "practical_slope_quadratic",
    "price_argmax_moneyness",
    "quadratic_bound_price",
    "read_smile_csv",
    "scan_butterfly",
    "scan_call_monotonicity",
    "svi_variance",
    "svi_variance_d2y",
    "svi_variance_dy",
]
