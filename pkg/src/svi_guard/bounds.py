"""Limits on the asymptotic slope of the implied variance.

Two theoretical limits on ``b (1 + |rho|)``: ``4/T`` (Gatheral's
recommendation against call-spread and butterfly arbitrage) and ``2/T``
(Lee's moment formula). The practical limit models the right wing as a
straight line ``v(y) = S y`` and asks the call price at an extreme strike
``K_max`` to stay below ``C_max``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from svi_guard.errors import DomainError, NoSolutionError
from svi_guard.pricing import ForwardContext, implied_vol, norm_cdf, norm_cdf_inv
from svi_guard.svi import SviParams


class D1Limit(str, enum.Enum):
    """Behaviour of ``d1`` as the strike goes to infinity."""

    MINUS_INFINITY = "minus_infinity"
    INDETERMINATE_SLOPE_TWO = "indeterminate_slope_two"
    PLUS_INFINITY = "plus_infinity"


@dataclass(frozen=True)
class SlopeBoundConfig:
    """Extreme strike ``k_max`` and the largest call price ``c_max`` tolerated there."""

    k_max: float
    c_max: float
    ctx: ForwardContext

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k_max) and self.k_max > self.ctx.forward):
            raise DomainError(f"k_max must exceed the forward {self.ctx.forward!r}, got {self.k_max!r}")
        upper = self.ctx.discount_factor * self.ctx.forward
        if not (0 < self.c_max < upper):
            raise DomainError(f"c_max must lie in (0, B*F) = (0, {upper!r}), got {self.c_max!r}")

    @classmethod
    def relative(cls, ctx: ForwardContext, k_max_moneyness: float = 1e6, c_max_fraction: float = 1e-4):
        """Config with ``K_max`` and ``C_max`` expressed as multiples of the forward."""
        return cls(k_max=k_max_moneyness * ctx.forward, c_max=c_max_fraction * ctx.forward, ctx=ctx)

    @property
    def y_max(self) -> float:
        return math.log(self.k_max / self.ctx.forward)


@dataclass(frozen=True)
class BoundVerdict:
    max_wing_slope: float
    gatheral_limit: float
    lee_limit: float
    practical_limit: float
    practical_limit_exact: float | None
    passes_gatheral: bool
    passes_lee: bool
    passes_practical: bool
    d1_limit_class: D1Limit


def check_gatheral(p: SviParams, maturity: float) -> bool:
    """True iff ``b (1 + |rho|) < 4 / T``."""
    return p.max_wing_slope < 4.0 / maturity


def check_lee(p: SviParams, maturity: float) -> bool:
    """True iff ``b (1 + |rho|) < 2 / T``."""
    return p.max_wing_slope < 2.0 / maturity


def classify_d1_limit(wing_slope: float, maturity: float) -> D1Limit:
    """Classify ``lim d1`` for a wing whose implied variance grows like ``wing_slope * y``.

    The comparison is on the total-variance slope ``wing_slope * T`` against 2.
    """
    total = wing_slope * maturity
    if total < 2.0:
        return D1Limit.MINUS_INFINITY
    if total == 2.0:
        return D1Limit.INDETERMINATE_SLOPE_TWO
    return D1Limit.PLUS_INFINITY


def practical_slope_quadratic(cfg: SlopeBoundConfig) -> float:
    """Practical wing-slope limit, neglecting the ``K Phi(d2)`` term of the call.

    With ``q = Phi^-1(C_max / (B F))`` and ``x = sqrt(S T)`` the price condition
    reduces to ``x^2/2 - (q / sqrt(y_max)) x - 1 = 0``; the positive root gives
    ``S = x^2 / T``.
    """
    ratio = cfg.c_max / (cfg.ctx.discount_factor * cfg.ctx.forward)
    q = norm_cdf_inv(ratio)
    u = q / math.sqrt(cfg.y_max)
    # u + sqrt(u^2 + 2) loses digits for very negative u; use the conjugate form
    x = u + math.sqrt(u * u + 2.0) if u >= 0 else 2.0 / (math.sqrt(u * u + 2.0) - u)
    return x * x / cfg.ctx.maturity


def quadratic_bound_price(slope: float, cfg: SlopeBoundConfig) -> float:
    """Call price at ``K_max`` implied by a linear wing of slope ``slope`` without the ``d2`` term.

    ``B F Phi((-y_max + S y_max T / 2) / sqrt(S y_max T))``; inverse of
    :func:`practical_slope_quadratic` in ``c_max``.
    """
    y = cfg.y_max
    total = slope * y * cfg.ctx.maturity
    return cfg.ctx.discount_factor * cfg.ctx.forward * norm_cdf((-y + 0.5 * total) / math.sqrt(total))


def practical_slope_exact(cfg: SlopeBoundConfig) -> float:
    """Practical wing-slope limit with the full Black price.

    Solves for the volatility that prices the ``K_max`` call at ``C_max`` and
    returns ``S = sigma^2 / y_max``, the slope of the linear wing
    ``v(y) = S y`` passing through that variance at ``y_max``. The result can
    exceed ``2 / T`` when ``c_max`` approaches ``B F``; it is returned as is.
    """
    sigma = implied_vol(cfg.ctx, cfg.k_max, cfg.c_max)
    return sigma * sigma / cfg.y_max


def bound_verdict(p: SviParams, maturity: float, cfg: SlopeBoundConfig) -> BoundVerdict:
    slope = p.max_wing_slope
    practical = practical_slope_quadratic(cfg)
    try:
        exact = practical_slope_exact(cfg)
    except NoSolutionError:
        exact = None
    return BoundVerdict(
        max_wing_slope=slope,
        gatheral_limit=4.0 / maturity,
        lee_limit=2.0 / maturity,
        practical_limit=practical,
        practical_limit_exact=exact,
        passes_gatheral=check_gatheral(p, maturity),
        passes_lee=check_lee(p, maturity),
        passes_practical=slope < practical,
        d1_limit_class=classify_d1_limit(slope, maturity),
    )
