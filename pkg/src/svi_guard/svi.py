"""SVI implied variance with analytic derivatives, and the local-volatility denominator g.

The smile is parameterised in implied variance ``v(y) = sigma(y)^2`` as a
function of log-moneyness ``y = ln(K/F)``:

    v(y) = a + b * (rho * (y - m) + sqrt((y - m)^2 + s^2))

Total variance is ``w(y) = v(y) * T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from svi_guard.errors import DomainError, InvalidParamsError

# rounding slack on a + b*s*sqrt(1 - rho^2) >= 0 when ``a`` is rebuilt from the minimum
_MIN_VARIANCE_SLACK = 1e-14


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class SviParams:
    """Raw SVI parameters for one maturity.

    Construction fails unless ``b >= 0``, ``s > 0``, ``|rho| <= 1`` and the
    smile minimum ``a + b s sqrt(1 - rho^2)`` is nonnegative.
    """

    a: float
    b: float
    s: float
    rho: float
    m: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "s", "rho", "m"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParamsError(f"{name} must be finite")
        if self.b < 0:
            raise InvalidParamsError(f"b >= 0 violated (b={self.b!r})")
        if self.s <= 0:
            raise InvalidParamsError(f"s > 0 violated (s={self.s!r})")
        if abs(self.rho) > 1:
            raise InvalidParamsError(f"|rho| <= 1 violated (rho={self.rho!r})")
        if self.min_variance < -_MIN_VARIANCE_SLACK:
            raise InvalidParamsError(
                f"a + b*s*sqrt(1-rho^2) >= 0 violated (minimum variance {self.min_variance!r})"
            )

    @property
    def min_variance(self) -> float:
        return self.a + self.b * self.s * math.sqrt(max(1.0 - self.rho * self.rho, 0.0))

    @property
    def max_wing_slope(self) -> float:
        """``b (1 + |rho|)``, the steeper of the two wing slopes of ``v``."""
        return self.b * (1.0 + abs(self.rho))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.a, self.b, self.s, self.rho, self.m)


def svi_variance(p: SviParams, y):
    y = np.asarray(y, dtype=float)
    d = y - p.m
    return _scalar_or_array(p.a + p.b * (p.rho * d + np.hypot(d, p.s)))


def svi_variance_dy(p: SviParams, y):
    y = np.asarray(y, dtype=float)
    d = y - p.m
    return _scalar_or_array(p.b * (p.rho + d / np.hypot(d, p.s)))


def svi_variance_d2y(p: SviParams, y):
    y = np.asarray(y, dtype=float)
    r = np.hypot(y - p.m, p.s)
    return _scalar_or_array(p.b * p.s * p.s / (r * r * r))


def asymptotic_slopes(p: SviParams) -> tuple[float, float]:
    """Left and right wing slopes ``(b(1 - rho), b(1 + rho))`` of ``v`` in ``|y|``."""
    return p.b * (1.0 - p.rho), p.b * (1.0 + p.rho)


@dataclass(frozen=True)
class TotalVarianceCurve:
    params: SviParams
    maturity: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.maturity) and self.maturity > 0):
            raise DomainError(f"maturity must be > 0, got {self.maturity!r}")

    def w(self, y):
        return _scalar_or_array(np.asarray(svi_variance(self.params, y)) * self.maturity)

    def w_dy(self, y):
        return _scalar_or_array(np.asarray(svi_variance_dy(self.params, y)) * self.maturity)

    def w_d2y(self, y):
        return _scalar_or_array(np.asarray(svi_variance_d2y(self.params, y)) * self.maturity)

    def implied_vol(self, y):
        v = np.asarray(svi_variance(self.params, y))
        if np.any(v < 0):
            raise DomainError("negative implied variance")
        return _scalar_or_array(np.sqrt(v))


def g_denominator(curve: TotalVarianceCurve, y):
    """Local-volatility denominator ``g(y)``; its sign is the sign of the risk-neutral density.

    ``g = 1 - y w'/w + (w'^2 / 4) (-1/4 - 1/w + y^2/w^2) + w''/2``

    Raises:
        DomainError: if ``w(y) <= 0`` at any requested point.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(curve.w(y))
    if np.any(~(w > 0)):
        raise DomainError("g is undefined where total variance w(y) <= 0")
    w1 = np.asarray(curve.w_dy(y))
    w2 = np.asarray(curve.w_d2y(y))
    ratio = y / w
    g = 1.0 - ratio * w1 + 0.25 * w1 * w1 * (-0.25 - 1.0 / w + ratio * ratio) + 0.5 * w2
    return _scalar_or_array(g)
