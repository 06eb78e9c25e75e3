"""Call-spread and butterfly arbitrage scans over log-uniform strike grids.

Prices and ``g`` are evaluated on the whole grid at once; violation cells are
merged into maximal intervals whose endpoints are then refined by bisection
on the sign of the exact strike derivative of the call price (call spreads)
or of ``g`` (butterflies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import log_ndtr

from svi_guard.bounds import BoundVerdict, D1Limit, SlopeBoundConfig, bound_verdict
from svi_guard.errors import DomainError
from svi_guard.pricing import ForwardContext, black_call
from svi_guard.svi import SviParams, TotalVarianceCurve, g_denominator, svi_variance, svi_variance_dy

MONOTONICITY_TOL = 1e-16
NEGLIGIBLE_PRICE = 1e-18
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_Y_TOL = 1e-12


@dataclass(frozen=True)
class ScanGrid:
    """Log-uniform grid in moneyness ``K/F``."""

    min_moneyness: float = 1e-2
    max_moneyness: float = 1e7
    points_per_decade: int = 64

    def __post_init__(self) -> None:
        if not (0 < self.min_moneyness < self.max_moneyness and math.isfinite(self.max_moneyness)):
            raise DomainError("grid needs 0 < min_moneyness < max_moneyness")
        if self.points_per_decade < 16:
            raise DomainError(f"points_per_decade must be >= 16, got {self.points_per_decade}")

    def moneyness(self) -> np.ndarray:
        decades = math.log10(self.max_moneyness / self.min_moneyness)
        n = max(2, math.ceil(decades * self.points_per_decade - 1e-9) + 1)
        return np.geomspace(self.min_moneyness, self.max_moneyness, n)


@dataclass(frozen=True)
class Interval:
    """Closed moneyness interval ``[lo, hi]``.

    ``extends_below``/``extends_above`` mark endpoints pinned to the grid
    boundary, where the violation may continue past the scanned range.
    ``negligible`` flags call-spread violations whose prices all sit below
    ``1e-18 B F``.
    """

    lo: float
    hi: float
    extends_below: bool = False
    extends_above: bool = False
    negligible: bool = False

    def __contains__(self, moneyness: float) -> bool:
        return self.lo <= moneyness <= self.hi


@dataclass(frozen=True)
class ArbitrageReport:
    monotonicity_violations: list[Interval]
    negative_g_intervals: list[Interval]
    price_argmax_moneyness: float | None
    verdict: BoundVerdict
    grid: ScanGrid = field(default_factory=ScanGrid)

    @property
    def arbitrage_detected(self) -> bool:
        return (
            any(not iv.negligible for iv in self.monotonicity_violations)
            or bool(self.negative_g_intervals)
            or self.verdict.d1_limit_class is D1Limit.PLUS_INFINITY
        )


def _check_consistent(curve: TotalVarianceCurve, ctx: ForwardContext) -> None:
    if not math.isclose(curve.maturity, ctx.maturity, rel_tol=1e-12):
        raise DomainError(f"curve maturity {curve.maturity!r} differs from context maturity {ctx.maturity!r}")


def _positive_variance(curve: TotalVarianceCurve, y: np.ndarray) -> np.ndarray:
    v = np.asarray(svi_variance(curve.params, y))
    if np.any(~(v > 0)):
        bad = float(np.exp(y[np.argmax(~(v > 0))]))
        raise DomainError(f"total variance w <= 0 at moneyness {bad:g}")
    return v


def call_prices(curve: TotalVarianceCurve, ctx: ForwardContext, moneyness: np.ndarray) -> np.ndarray:
    _check_consistent(curve, ctx)
    y = np.log(moneyness)
    v = _positive_variance(curve, y)
    return np.asarray(black_call(ctx, ctx.forward * moneyness, np.sqrt(v)))


def _call_slope_sign(curve: TotalVarianceCurve, ctx: ForwardContext, y: float) -> float:
    """Sign of ``dC/dK`` along the smile, computed without forming the (possibly underflowing) price.

    ``dC/dK = B [phi(d2) sqrt(T) v'(y) / (2 sigma) - Phi(d2)]``.
    """
    v = float(svi_variance(curve.params, y))
    dv = float(svi_variance_dy(curve.params, y))
    sigma = math.sqrt(v)
    sqrt_t = math.sqrt(ctx.maturity)
    smile_term = sqrt_t * dv / (2.0 * sigma)
    if smile_term <= 0:
        return -1.0
    sd = sigma * sqrt_t
    d2 = -y / sd - 0.5 * sd
    log_mills = float(log_ndtr(d2)) + 0.5 * d2 * d2 + _LOG_SQRT_2PI
    return math.copysign(1.0, math.log(smile_term) - log_mills)


def _bisect_sign(sign: Callable[[float], float], a: float, b: float, tol: float = _Y_TOL) -> float:
    sa = sign(a)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if sign(mid) == sa:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs ``[start, stop]`` (inclusive) of True entries."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[breaks + 1]))
    stops = np.concatenate((idx[breaks], [idx[-1]]))
    return list(zip(starts.tolist(), stops.tolist()))


def _refine_turn(sign, y: np.ndarray, candidates, before: float) -> float | None:
    """Root of ``sign`` in the first bracket ``[y[i], y[i+1]]`` going from ``before`` to ``-before``."""
    for i in candidates:
        if 0 <= i < len(y) - 1 and sign(y[i]) == before and sign(y[i + 1]) == -before:
            return _bisect_sign(sign, float(y[i]), float(y[i + 1]))
    return None


def _monotonicity_intervals(curve, ctx, x, prices) -> list[Interval]:
    y = np.log(x)
    scale = ctx.discount_factor * ctx.forward
    rising = np.diff(prices) > MONOTONICITY_TOL * scale

    def sign(yy: float) -> float:
        return _call_slope_sign(curve, ctx, yy)

    out = []
    for i, j in _runs(rising):
        # cells i..j rise: a local minimum near x[i], a local maximum near x[j + 1]
        lo_y = _refine_turn(sign, y, (i - 1, i), before=-1.0)
        lo = float(x[i]) if lo_y is None else math.exp(lo_y)
        at_top = j + 1 == len(x) - 1
        hi_y = None if at_top else _refine_turn(sign, y, (j, j + 1), before=1.0)
        hi = float(x[j + 1]) if hi_y is None else math.exp(hi_y)
        peak = float(np.max(prices[i : j + 2]))
        out.append(
            Interval(
                lo=lo,
                hi=hi,
                extends_below=i == 0,
                extends_above=at_top,
                negligible=peak < NEGLIGIBLE_PRICE * scale,
            )
        )
    return out


def scan_call_monotonicity(curve: TotalVarianceCurve, ctx: ForwardContext, grid: ScanGrid) -> list[Interval]:
    """Moneyness intervals on which the call price increases with the strike.

    A grid cell counts as rising when the price difference exceeds
    ``1e-16 B F``; adjacent rising cells are merged.
    """
    x = grid.moneyness()
    return _monotonicity_intervals(curve, ctx, x, call_prices(curve, ctx, x))


def scan_butterfly(curve: TotalVarianceCurve, grid: ScanGrid) -> list[Interval]:
    """Moneyness intervals on which ``g < 0`` (negative risk-neutral density)."""
    x = grid.moneyness()
    y = np.log(x)
    g = np.asarray(g_denominator(curve, y))

    def sign(yy: float) -> float:
        return math.copysign(1.0, float(g_denominator(curve, yy)))

    out = []
    for i, j in _runs(g < 0):
        lo = float(x[0]) if i == 0 else math.exp(_bisect_sign(sign, float(y[i - 1]), float(y[i])))
        last = j == len(x) - 1
        hi = float(x[-1]) if last else math.exp(_bisect_sign(sign, float(y[j]), float(y[j + 1])))
        out.append(Interval(lo=lo, hi=hi, extends_below=i == 0, extends_above=last))
    return out


def _argmax_beyond_forward(curve, ctx, x, prices) -> float | None:
    """Location of the price maximum on the rebound beyond the forward.

    Beyond the forward the call price first decreases; if it turns up again,
    this is the moneyness of the highest price reached after that turn.
    Without a rebound the maximum over ``K >= F`` is at the forward itself.
    """
    start = int(np.searchsorted(x, 1.0))
    if start >= len(x):
        return None
    scale = ctx.discount_factor * ctx.forward
    rising = np.flatnonzero(np.diff(prices[start:]) > MONOTONICITY_TOL * scale)
    if rising.size == 0:
        return float(x[start])
    first = start + int(rising[0])
    k = first + int(np.argmax(prices[first:]))
    if k == len(x) - 1:
        return float(x[k])
    y = np.log(x)
    peak = _refine_turn(lambda yy: _call_slope_sign(curve, ctx, yy), y, (k - 1, k), before=1.0)
    return float(x[k]) if peak is None else math.exp(peak)


def price_argmax_moneyness(curve: TotalVarianceCurve, ctx: ForwardContext, grid: ScanGrid) -> float | None:
    x = grid.moneyness()
    return _argmax_beyond_forward(curve, ctx, x, call_prices(curve, ctx, x))


def grid_profile(curve: TotalVarianceCurve, ctx: ForwardContext, grid: ScanGrid) -> dict[str, np.ndarray]:
    """Per-grid-point moneyness, implied vol, call price and ``g`` for plotting."""
    x = grid.moneyness()
    y = np.log(x)
    return {
        "moneyness": x,
        "implied_vol": np.sqrt(_positive_variance(curve, y)),
        "call_price": call_prices(curve, ctx, x),
        "g": np.asarray(g_denominator(curve, y)),
    }


def full_report(p: SviParams, ctx: ForwardContext, grid: ScanGrid, cfg: SlopeBoundConfig) -> ArbitrageReport:
    curve = TotalVarianceCurve(p, ctx.maturity)
    x = grid.moneyness()
    prices = call_prices(curve, ctx, x)
    return ArbitrageReport(
        monotonicity_violations=_monotonicity_intervals(curve, ctx, x, prices),
        negative_g_intervals=scan_butterfly(curve, grid),
        price_argmax_moneyness=_argmax_beyond_forward(curve, ctx, x, prices),
        verdict=bound_verdict(p, ctx.maturity, cfg),
        grid=grid,
    )
