"""Black-76 option pricing on a forward, with its inverse in volatility.

Prices are evaluated through the out-of-the-money leg, written in normalised
form

    N(x, s) = Phi(d1) - exp(x) Phi(d2),   d1 = -x/s + s/2,   d2 = d1 - s,

with ``x = |ln(K/F)|`` and ``s = vol * sqrt(T)``. When ``d1 < 0`` the
difference is rewritten with the scaled complementary error function so that
far out-of-the-money prices (strikes up to ``1e8 * F``) keep full relative
precision instead of cancelling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtr, ndtri

from svi_guard.errors import AboveForwardError, BelowIntrinsicError, DomainError

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ForwardContext:
    """Market context of a single expiry: forward ``F(0,T)``, discount factor ``B(0,T)`` and ``T``."""

    forward: float
    maturity: float
    discount_factor: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.forward) and self.forward > 0):
            raise DomainError(f"forward must be > 0, got {self.forward!r}")
        if not (math.isfinite(self.maturity) and self.maturity > 0):
            raise DomainError(f"maturity must be > 0, got {self.maturity!r}")
        if not (0 < self.discount_factor <= 1):
            raise DomainError(f"discount_factor must lie in (0, 1], got {self.discount_factor!r}")


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    vol: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise DomainError(f"strike must be > 0, got {self.strike!r}")
        if not (math.isfinite(self.vol) and self.vol >= 0):
            raise DomainError(f"vol must be >= 0, got {self.vol!r}")


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def norm_cdf(x):
    """Standard normal CDF, accurate to a few ulps including the far tails."""
    return _scalar_or_array(ndtr(np.asarray(x, dtype=float)))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(np.exp(-0.5 * x * x - _LOG_SQRT_2PI))


def norm_cdf_inv(p):
    """Inverse of :func:`norm_cdf` on the open interval ``(0, 1)``.

    Raises:
        DomainError: if any ``p`` is outside ``(0, 1)``.
    """
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0) & (p < 1)):
        raise DomainError("norm_cdf_inv requires 0 < p < 1")
    return _scalar_or_array(ndtri(p))


def _normalised_otm(x, s):
    """``N(x, s)`` for ``x >= 0``, ``s > 0`` (see module docstring)."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore", under="ignore"):
        d1 = -x / s + 0.5 * s
        d2 = d1 - s
        # exp(x) Phi(d2) in log space: exp(x) alone overflows for extreme strikes
        direct = ndtr(d1) - np.exp(x + log_ndtr(d2))
        tail = 0.5 * np.exp(-0.5 * d1 * d1) * (erfcx(-d1 / _SQRT2) - erfcx(-d2 / _SQRT2))
        out = np.where(d1 < 0, tail, direct)
    return np.maximum(out, 0.0)


def _log_normalised_otm(x: float, s: float) -> float:
    n = float(_normalised_otm(x, s))
    return math.log(n) if n > 0 else -math.inf


def _validate_strike_vol(strike, vol):
    k = np.asarray(strike, dtype=float)
    sig = np.asarray(vol, dtype=float)
    if not np.all(np.isfinite(k) & (k > 0)):
        raise DomainError("strike must be finite and > 0")
    if not np.all(np.isfinite(sig) & (sig >= 0)):
        raise DomainError("vol must be finite and >= 0")
    return k, sig


def _otm_value(ctx: ForwardContext, k, sig):
    """Undiscounted out-of-the-money value: call for ``K >= F``, put for ``K < F``."""
    f = ctx.forward
    s = sig * math.sqrt(ctx.maturity)
    x = np.abs(np.log(k / f))
    lo = np.minimum(k, f)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = lo * _normalised_otm(x, np.where(s > 0, s, 1.0))
    return np.where(s > 0, val, 0.0)


def black_call(ctx: ForwardContext, strike, vol):
    """Discounted Black-76 call ``B [F Phi(d1) - K Phi(d2)]``.

    Vectorised over ``strike`` and ``vol``. A zero vol returns the discounted
    intrinsic value ``B max(F - K, 0)``.
    """
    k, sig = _validate_strike_vol(strike, vol)
    otm = _otm_value(ctx, k, sig)
    undiscounted = np.where(k >= ctx.forward, otm, (ctx.forward - k) + otm)
    return _scalar_or_array(ctx.discount_factor * undiscounted)


def black_put(ctx: ForwardContext, strike, vol):
    """Discounted Black-76 put; satisfies ``C - P = B (F - K)``."""
    k, sig = _validate_strike_vol(strike, vol)
    otm = _otm_value(ctx, k, sig)
    undiscounted = np.where(k < ctx.forward, otm, (k - ctx.forward) + otm)
    return _scalar_or_array(ctx.discount_factor * undiscounted)


def black_vega(ctx: ForwardContext, strike, vol):
    """Derivative of :func:`black_call` with respect to ``vol``."""
    k, sig = _validate_strike_vol(strike, vol)
    sqrt_t = math.sqrt(ctx.maturity)
    s = sig * sqrt_t
    x = np.abs(np.log(k / ctx.forward))
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.where(s > 0, -x / np.where(s > 0, s, 1.0) + 0.5 * s, -np.inf)
    vega = ctx.discount_factor * np.minimum(k, ctx.forward) * norm_pdf(d1) * sqrt_t
    return _scalar_or_array(vega)


def implied_vol(
    ctx: ForwardContext,
    strike: float,
    call_price: float,
    *,
    lower: float = 1e-8,
    upper: float = 10.0,
    max_iter: int = 200,
) -> float:
    """Black volatility reproducing ``call_price`` at ``strike``.

    Root-finding works on the log of the out-of-the-money value, obtained from
    the call by parity, with Newton steps kept inside a bisection bracket.
    The bracket starts at ``[lower, upper]`` and is widened when needed.

    Raises:
        BelowIntrinsicError: ``call_price <= B max(F - K, 0)``.
        AboveForwardError: ``call_price >= B F``.
    """
    if not (math.isfinite(strike) and strike > 0):
        raise DomainError(f"strike must be > 0, got {strike!r}")
    f, b = ctx.forward, ctx.discount_factor
    intrinsic = b * max(f - strike, 0.0)
    if not call_price > intrinsic:
        raise BelowIntrinsicError(
            f"call price {call_price!r} is not above the discounted intrinsic value {intrinsic!r}"
        )
    if not call_price < b * f:
        raise AboveForwardError(f"call price {call_price!r} is not below the discounted forward {b * f!r}")

    sqrt_t = math.sqrt(ctx.maturity)
    x = abs(math.log(strike / f))
    target = (call_price - intrinsic) / (b * min(strike, f))
    if target <= 0:
        # time value lost to rounding in the parity subtraction
        raise BelowIntrinsicError(f"call price {call_price!r} carries no resolvable time value")
    log_target = math.log(target)

    def residual(sigma: float) -> float:
        return _log_normalised_otm(x, sigma * sqrt_t) - log_target

    lo, hi = lower, upper
    while residual(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise AboveForwardError(f"no volatility below {hi:g} reproduces {call_price!r}")
    while residual(lo) > 0:
        lo /= 10.0
        if lo < 1e-300:
            return lo

    sigma = min(max(math.sqrt(2.0 * x) / sqrt_t, 0.1), hi)
    if not lo < sigma < hi:
        sigma = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = residual(sigma)
        if r == 0:
            break
        if r > 0:
            hi = sigma
        else:
            lo = sigma
        s = sigma * sqrt_t
        log_n = _log_normalised_otm(x, s)
        d1 = -x / s + 0.5 * s
        # d log N / d sigma = phi(d1) sqrt(T) / N
        slope = math.exp(-0.5 * d1 * d1 - _LOG_SQRT_2PI - log_n) * sqrt_t if math.isfinite(log_n) else 0.0
        candidate = sigma - r / slope if slope > 0 else math.nan
        if not lo < candidate < hi:
            candidate = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if abs(candidate - sigma) <= 4e-16 * sigma:
            sigma = candidate
            break
        sigma = candidate
    return sigma
