"""Least-squares SVI calibration under a cap on the asymptotic slope ``b (1 + |rho|)``.

The optimiser works on transformed coordinates in which every box-feasible
point is a valid, cap-respecting SVI parameter set:

    alpha = a + b s sqrt(1 - rho^2)     (smile minimum, >= 0)
    beta  = b (1 + |rho|) / cap         (fraction of the cap, in [0, 1])

With an infinite cap, ``beta`` is ``b`` itself. Each restart runs a bounded
Nelder-Mead search and is then polished with a bounded trust-region
least-squares step; the best restart wins, ties going to the lowest index.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from svi_guard.errors import CalibrationError, DomainError
from svi_guard.pricing import ForwardContext, OptionQuote, black_vega
from svi_guard.svi import SviParams, svi_variance

OBJECTIVES = ("variance", "vol")
WEIGHTINGS = ("uniform", "vega")


@dataclass(frozen=True)
class MarketSmile:
    ctx: ForwardContext
    quotes: tuple[OptionQuote, ...]
    day_count_note: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "quotes", tuple(self.quotes))
        if len(self.quotes) < 5:
            raise DomainError(f"a smile needs at least 5 quotes, got {len(self.quotes)}")
        strikes = [q.strike for q in self.quotes]
        if any(k1 >= k2 for k1, k2 in zip(strikes, strikes[1:])):
            raise DomainError("strikes must be strictly increasing")
        if not all(0 < q.vol < 5 for q in self.quotes):
            raise DomainError("quoted vols must lie in (0, 5)")

    @property
    def strikes(self) -> np.ndarray:
        return np.array([q.strike for q in self.quotes])

    @property
    def vols(self) -> np.ndarray:
        return np.array([q.vol for q in self.quotes])

    @property
    def log_moneyness(self) -> np.ndarray:
        return np.log(self.strikes / self.ctx.forward)


@dataclass(frozen=True)
class CalibrationConfig:
    """Calibration settings.

    ``objective`` selects the residual: ``"variance"`` fits ``v(y_i) - sigma_i^2``,
    ``"vol"`` fits ``sqrt(v(y_i)) - sigma_i``.
    """

    slope_cap: float = math.inf
    restarts: int = 16
    weights: str = "uniform"
    seed: int = 42
    max_iterations: int = 20000
    tolerance: float = 1e-14
    objective: str = "variance"
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.slope_cap > 0:
            raise DomainError(f"slope_cap must be > 0, got {self.slope_cap!r}")
        if self.restarts < 1:
            raise DomainError(f"restarts must be >= 1, got {self.restarts!r}")
        if self.weights not in WEIGHTINGS:
            raise DomainError(f"weights must be one of {WEIGHTINGS}, got {self.weights!r}")
        if self.objective not in OBJECTIVES:
            raise DomainError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.max_iterations < 1 or not self.tolerance > 0:
            raise DomainError("max_iterations must be >= 1 and tolerance > 0")


@dataclass(frozen=True)
class RestartSummary:
    best: float
    median: float
    best_index: int
    objectives: tuple[float, ...]


@dataclass(frozen=True)
class CalibrationResult:
    params: SviParams
    rmse: float
    objective: float
    constraint_active: bool
    slope_cap: float
    restarts_summary: RestartSummary


def _weights(smile: MarketSmile, kind: str) -> np.ndarray:
    if kind == "uniform":
        return np.ones(len(smile.quotes))
    vega = np.asarray(black_vega(smile.ctx, smile.strikes, smile.vols))
    return vega / vega.mean()


def _residuals(v_model: np.ndarray, vols: np.ndarray, objective: str) -> np.ndarray:
    if objective == "variance":
        return v_model - vols * vols
    return np.sqrt(np.maximum(v_model, 0.0)) - vols


def fit_objective(p: SviParams, smile: MarketSmile, objective: str = "variance", weights: str = "uniform") -> float:
    """Weighted sum of squared residuals minimised by :func:`calibrate`."""
    r = _residuals(np.asarray(svi_variance(p, smile.log_moneyness)), smile.vols, objective)
    return float(np.sum(_weights(smile, weights) * r * r))


def evaluate_fit(p: SviParams, smile: MarketSmile) -> tuple[float, np.ndarray]:
    """Root-mean-square vol error of ``p`` on the smile, and the residuals ``sigma_svi - sigma_mkt``."""
    v = np.asarray(svi_variance(p, smile.log_moneyness))
    if np.any(v < 0):
        raise DomainError("SVI variance is negative at a quoted strike")
    residuals = np.sqrt(v) - smile.vols
    return float(np.sqrt(np.mean(residuals**2))), residuals


class _Problem:
    def __init__(self, smile: MarketSmile, cfg: CalibrationConfig):
        self.cfg = cfg
        self.y = smile.log_moneyness
        self.vols = smile.vols
        self.sqrt_w = np.sqrt(_weights(smile, cfg.weights))
        var = self.vols**2
        y_lo, y_hi = float(self.y.min()), float(self.y.max())
        span = max(y_hi - y_lo, 0.5)
        beta_hi = 1.0 if math.isfinite(cfg.slope_cap) else np.inf
        self.lower = np.array([0.0, 0.0, 1e-6, -1.0, y_lo - span])
        self.upper = np.array([2.0 * var.max(), beta_hi, 10.0, 1.0, y_hi + span])
        self.min_var = float(var.min())
        self.m_center = float(self.y[np.argmin(self.vols)])
        self.span = span

    def unpack(self, z: Sequence[float]) -> tuple[float, float, float, float, float]:
        alpha, beta, s, rho, m = (float(t) for t in z)
        b = beta * self.cfg.slope_cap / (1.0 + abs(rho)) if math.isfinite(self.cfg.slope_cap) else beta
        a = alpha - b * s * math.sqrt(max(1.0 - rho * rho, 0.0))
        return a, b, s, rho, m

    def residuals(self, z) -> np.ndarray:
        a, b, s, rho, m = self.unpack(z)
        d = self.y - m
        v = a + b * (rho * d + np.hypot(d, s))
        return self.sqrt_w * _residuals(v, self.vols, self.cfg.objective)

    def objective(self, z) -> float:
        r = self.residuals(z)
        return float(r @ r)

    def start(self, rng: np.random.Generator, index: int) -> np.ndarray:
        if index == 0:
            z = [0.8 * self.min_var, 0.5, 0.1, 0.0, self.m_center]
        else:
            z = [
                self.min_var * rng.uniform(0.2, 1.0),
                rng.uniform(0.1, 1.0) if math.isfinite(self.cfg.slope_cap) else rng.uniform(0.05, 1.0),
                rng.uniform(0.05, 0.5),
                rng.uniform(-0.9, 0.9),
                self.m_center + rng.normal(0.0, 0.2 * self.span),
            ]
        return np.clip(np.asarray(z, dtype=float), self.lower, self.upper)

    def solve(self, z0: np.ndarray) -> tuple[float, np.ndarray]:
        cfg = self.cfg
        simplex = minimize(
            self.objective,
            z0,
            method="Nelder-Mead",
            bounds=list(zip(self.lower, self.upper)),
            options={
                "maxiter": cfg.max_iterations,
                "maxfev": 2 * cfg.max_iterations,
                "xatol": 1e-10,
                "fatol": cfg.tolerance * max(self.objective(z0), 1e-300),
            },
        )
        z1 = np.clip(simplex.x, self.lower, self.upper)
        best = (self.objective(z1), z1)
        polish = least_squares(
            self.residuals, z1, bounds=(self.lower, self.upper), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15
        )
        z2 = np.clip(polish.x, self.lower, self.upper)
        f2 = self.objective(z2)
        if f2 < best[0]:
            best = (f2, z2)
        return best


def calibrate(smile: MarketSmile, cfg: CalibrationConfig | None = None) -> CalibrationResult:
    """Fit SVI to ``smile`` subject to ``b (1 + |rho|) <= cfg.slope_cap`` and a nonnegative smile minimum.

    Deterministic for a fixed ``cfg.seed`` regardless of ``cfg.workers``.

    Raises:
        CalibrationError: if no restart produces a finite objective.
    """
    cfg = cfg or CalibrationConfig()
    problem = _Problem(smile, cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    starts = [problem.start(np.random.default_rng(sq), k) for k, sq in enumerate(seeds)]

    if cfg.workers is not None and cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(problem.solve, starts))
    else:
        outcomes = [problem.solve(z0) for z0 in starts]

    objectives = [f for f, _ in outcomes]
    finite = [k for k, f in enumerate(objectives) if math.isfinite(f)]
    if not finite:
        raise CalibrationError("no restart reached a finite objective; the smile is degenerate")
    best_index = min(finite, key=lambda k: (objectives[k], k))
    params = SviParams(*problem.unpack(outcomes[best_index][1]))
    rmse, _ = evaluate_fit(params, smile)
    slope = params.max_wing_slope
    return CalibrationResult(
        params=params,
        rmse=rmse,
        objective=objectives[best_index],
        constraint_active=math.isfinite(cfg.slope_cap) and abs(slope - cfg.slope_cap) <= 1e-6,
        slope_cap=cfg.slope_cap,
        restarts_summary=RestartSummary(
            best=objectives[best_index],
            median=statistics.median(objectives[k] for k in finite),
            best_index=best_index,
            objectives=tuple(objectives),
        ),
    )
