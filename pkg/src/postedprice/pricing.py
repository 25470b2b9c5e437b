"""Utilization-based posted-price functions and their competitive-ratio constants.

Every price is per unit of normalized resource. A resource's utilization
``rho`` lives in ``[0, 1]``; at ``rho == 1`` the resource is full and
:data:`EXHAUSTED` is quoted instead of a number.

The function family is selected by the scarcity level ``beta`` (total demand is
at most ``1 + beta`` times supply):

===========  ==================  ========================================
regime       beta                shape above the flat floor segment
===========  ==================  ========================================
LARGE        beta >= 1           exponential up to ``p_ceil``
MID          beta0 < beta < 1    exponential up to ``beta``, then power law
LOW          0 < beta <= beta0   power law
SLACK        beta <= 0           flat at ``p_floor``
===========  ==================  ========================================

``beta0`` depends only on ``gamma = p_ceil / p_floor``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "EXHAUSTED",
    "Exhausted",
    "Regime",
    "RatioConstants",
    "PricingParams",
    "BoundInputs",
    "CurvePoint",
    "lambert_w0",
    "beta_zero",
    "competitive_alpha",
    "unit_price",
    "unit_price_array",
    "integrate_price",
    "adaptive_simpson",
    "ratio_curve",
    "multi_resource_bound",
    "multi_slot_bound",
]

_W_MAX_ITER = 50
_W_STEP_TOL = 1e-13
INTEGRATION_RTOL = 1e-9


class Exhausted:
    """Sentinel quoted when a resource has no capacity left.

    Deliberately not a number: ``EXHAUSTED + 1`` raises ``TypeError`` so a
    full resource can never leak into price arithmetic as ``inf``.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EXHAUSTED"

    __str__ = __repr__

    def __reduce__(self):
        return (Exhausted, ())


EXHAUSTED = Exhausted()

Price = Union[float, Exhausted]


class Regime(enum.Enum):
    LARGE_DEMAND = "large"
    MID_DEMAND = "mid"
    LOW_DEMAND = "low"
    SLACK = "slack"


@dataclass(frozen=True)
class RatioConstants:
    """Worst-case competitive ratio for one (gamma, beta) pair."""

    alpha: float
    beta_zero: float
    regime: Regime


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for ``x >= 0``.

    Halley iteration started from ``log(1 + x)``; stops once the update is
    below 1e-13.

    >>> round(lambert_w0(math.e), 12)
    1.0
    """
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise DomainError(f"lambert_w0 needs a finite x >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    w = math.log1p(x)
    for _ in range(_W_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= _W_STEP_TOL:
            break
    return w


def beta_zero(gamma: float) -> float:
    """Scarcity threshold separating the LOW and MID regimes: ``W(ln g) / ln g``."""
    if not gamma > 1.0:
        raise ParameterError(f"beta_zero needs gamma > 1, got {gamma!r}")
    lg = math.log(gamma)
    return lambert_w0(lg) / lg


def _alpha_large(lg: float) -> float:
    return lg + 1.0


def _alpha_mid(lg: float, beta: float) -> float:
    return (lg + 1.0) / (beta - math.log(beta))


def _alpha_low(lg: float, beta: float) -> float:
    # W argument is beta * gamma**(1+beta) * ln(gamma); build it in log space.
    arg = math.exp(math.log(beta) + (1.0 + beta) * lg + math.log(lg))
    return lg / ((1.0 + beta) * lg - lambert_w0(arg))


def competitive_alpha(gamma: float, beta: float) -> RatioConstants:
    """Competitive ratio of the optimal price function for scarcity ``beta``.

    ``gamma == 1`` (a single valuation level) is accepted as a degenerate
    case with ``alpha == 1``.
    """
    gamma = float(gamma)
    beta = float(beta)
    if not gamma >= 1.0 or not math.isfinite(gamma):
        raise ParameterError(f"gamma must be finite and >= 1, got {gamma!r}")
    if not beta > -1.0:
        raise ParameterError(f"beta must exceed -1, got {beta!r}")

    if gamma == 1.0:
        b0 = 1.0
    else:
        b0 = beta_zero(gamma)

    if beta <= 0.0:
        return RatioConstants(1.0, b0, Regime.SLACK)
    if beta >= 1.0:
        regime = Regime.LARGE_DEMAND
    elif beta > b0:
        regime = Regime.MID_DEMAND
    else:
        regime = Regime.LOW_DEMAND
    if gamma == 1.0:
        return RatioConstants(1.0, b0, regime)

    lg = math.log(gamma)
    if regime is Regime.LARGE_DEMAND:
        alpha = _alpha_large(lg)
    elif regime is Regime.MID_DEMAND:
        alpha = _alpha_mid(lg, beta)
    else:
        alpha = _alpha_low(lg, beta)
    return RatioConstants(alpha, b0, regime)


@dataclass(frozen=True)
class PricingParams:
    """Knobs of one resource's price function.

    Attributes:
        p_floor: lowest per-unit valuation (price on the flat segment).
        p_ceil: highest per-unit valuation; the price approaches it as the
            resource fills up.
        beta: scarcity level, ``> -1``.
        op_cost: linear operational cost added to every unit price.
    """

    p_floor: float = 1.0
    p_ceil: float = 10.0
    beta: float = 1.0
    op_cost: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p_floor) and self.p_floor > 0.0):
            raise ParameterError(f"p_floor must be > 0, got {self.p_floor!r}")
        if not (math.isfinite(self.p_ceil) and self.p_ceil >= self.p_floor):
            raise ParameterError(
                f"p_ceil must be >= p_floor ({self.p_floor}), got {self.p_ceil!r}"
            )
        if not (math.isfinite(self.op_cost) and self.op_cost >= 0.0):
            raise ParameterError(f"op_cost must be >= 0, got {self.op_cost!r}")
        if not (math.isfinite(self.beta) and self.beta > -1.0):
            raise ParameterError(f"beta must exceed -1, got {self.beta!r}")

    @classmethod
    def from_gamma(
        cls, gamma: float, beta: float, op_cost: float = 0.0, p_floor: float = 1.0
    ) -> "PricingParams":
        return cls(p_floor=p_floor, p_ceil=p_floor * gamma, beta=beta, op_cost=op_cost)

    @property
    def gamma(self) -> float:
        return self.p_ceil / self.p_floor

    @cached_property
    def constants(self) -> RatioConstants:
        return competitive_alpha(self.gamma, self.beta)

    @property
    def alpha(self) -> float:
        return self.constants.alpha

    @property
    def regime(self) -> Regime:
        return self.constants.regime

    @property
    def flat_end(self) -> float:
        """Utilization up to which the price stays at ``p_floor``."""
        if self.regime is Regime.SLACK or self.alpha == 1.0:
            return 1.0
        return 1.0 / self.alpha

    def breakpoints(self) -> list[float]:
        """Interior utilizations where the formula changes."""
        pts = []
        if self.flat_end < 1.0:
            pts.append(self.flat_end)
        if self.regime is Regime.MID_DEMAND and self.flat_end < self.beta < 1.0:
            pts.append(self.beta)
        return pts

    def without_cost(self) -> "PricingParams":
        if self.op_cost == 0.0:
            return self
        return PricingParams(self.p_floor, self.p_ceil, self.beta, 0.0)

    def price(self, rho: float) -> Price:
        return unit_price(rho, self)


def _raw_price(rho: float, params: PricingParams) -> float:
    """Cost-free price formula, continuous on ``[0, 1]`` (value at 1 is the left limit)."""
    pf = params.p_floor
    if rho <= params.flat_end:
        return pf
    alpha = params.alpha
    regime = params.regime
    beta = params.beta
    if regime is Regime.LARGE_DEMAND:
        return pf * math.exp(alpha * rho - 1.0)
    if regime is Regime.MID_DEMAND:
        if rho <= beta:
            return pf * math.exp(alpha * rho - 1.0)
        return pf * math.exp(alpha * beta - 1.0 - alpha * math.log1p(beta - rho))
    # LOW_DEMAND: pf * gamma * beta**alpha * (1 + beta - rho)**-alpha
    return pf * math.exp(
        math.log(params.gamma) + alpha * (math.log(beta) - math.log1p(beta - rho))
    )


def unit_price(rho: float, params: PricingParams) -> Price:
    """Posted unit price at utilization ``rho``, including operational cost.

    Returns :data:`EXHAUSTED` at ``rho == 1`` in every regime, including
    the flat one: capacity is a hard limit regardless of price.
    """
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"utilization must lie in [0, 1], got {rho!r}")
    if rho == 1.0:
        return EXHAUSTED
    return _raw_price(rho, params) + params.op_cost


def unit_price_array(rho: np.ndarray, params: PricingParams) -> np.ndarray:
    """Vectorized :func:`unit_price`; full resources map to ``inf``.

    For internal use where an infinite cost is filtered out explicitly.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any((rho < 0.0) | (rho > 1.0)):
        raise DomainError("utilization must lie in [0, 1]")
    pf = params.p_floor
    out = np.full(rho.shape, pf, dtype=float)
    rising = rho > params.flat_end
    if np.any(rising):
        r = rho[rising]
        alpha, beta = params.alpha, params.beta
        regime = params.regime
        with np.errstate(divide="ignore"):
            if regime is Regime.LARGE_DEMAND:
                vals = pf * np.exp(alpha * r - 1.0)
            elif regime is Regime.MID_DEMAND:
                vals = np.where(
                    r <= beta,
                    pf * np.exp(alpha * r - 1.0),
                    pf * np.exp(alpha * beta - 1.0 - alpha * np.log1p(beta - r)),
                )
            else:
                vals = pf * np.exp(
                    math.log(params.gamma)
                    + alpha * (math.log(beta) - np.log1p(beta - r))
                )
        out[rising] = vals
    out += params.op_cost
    out[rho >= 1.0] = np.inf
    return out


def adaptive_simpson(
    f: Callable[[float], float], a: float, b: float, rtol: float = INTEGRATION_RTOL
) -> float:
    """Adaptive Simpson quadrature of a smooth ``f`` on ``[a, b]``."""
    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = rtol * max(abs(whole), 1e-300)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2.0, depth - 1
        )

    return recurse(a, b, fa, fm, fb, whole, tol, 50)


def integrate_price(
    a: float, b: float, params: PricingParams, rtol: float = INTEGRATION_RTOL
) -> float:
    """``∫_a^b P(rho) d rho`` (with operational cost), split at every breakpoint."""
    if not 0.0 <= a <= b <= 1.0:
        raise DomainError(f"need 0 <= a <= b <= 1, got [{a}, {b}]")
    edges = [a] + [x for x in params.breakpoints() if a < x < b] + [b]
    f = lambda r: _raw_price(r, params)  # noqa: E731
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo < params.flat_end and hi <= params.flat_end:
            total += params.p_floor * (hi - lo)
        else:
            total += adaptive_simpson(f, lo, hi, rtol)
    return total + params.op_cost * (b - a)


@dataclass(frozen=True)
class CurvePoint:
    rho_star: float
    v_ol: float
    v_opt_sup: float
    ratio: float


def ratio_curve(rho_star: float, params: PricingParams) -> CurvePoint:
    """Worst-case online value, supremum offline value and their ratio.

    Both values assume the adversary that drives the final utilization to
    ``rho_star`` with users paying exactly the posted price, followed by
    unsatisfied users valued just below ``P(rho_star)``.
    """
    rho_star = float(rho_star)
    if not 0.0 <= rho_star <= 1.0:
        raise DomainError(f"rho_star must lie in [0, 1], got {rho_star!r}")
    if params.op_cost != 0.0:
        raise ParameterError("ratio_curve is defined for op_cost == 0")

    regime = params.regime
    alpha = params.alpha
    if regime is Regime.LARGE_DEMAND and alpha > 1.0:
        # closed form of ∫_0^rho* P
        if rho_star <= params.flat_end:
            v_ol = params.p_floor * rho_star
        else:
            v_ol = params.p_floor / alpha * math.exp(alpha * rho_star - 1.0)
    else:
        v_ol = integrate_price(0.0, rho_star, params)

    if rho_star == 0.0:
        return CurvePoint(0.0, 0.0, 0.0, 1.0)
    if regime is Regime.SLACK or rho_star <= params.flat_end:
        return CurvePoint(rho_star, v_ol, v_ol, 1.0)

    p_star = _raw_price(rho_star, params)
    beta = params.beta
    if regime is Regime.LARGE_DEMAND or rho_star <= beta:
        v_opt = p_star
    else:
        v_opt = (1.0 + beta - rho_star) * p_star + integrate_price(beta, rho_star, params)
    return CurvePoint(rho_star, v_ol, v_opt, v_opt / v_ol)


def _require_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must lie in (0, 1], got {eta!r}")
    return eta


def multi_resource_bound(gamma: float, beta_r: float, eta: float) -> float:
    """Ratio bound for several resources sharing scarcity ``beta_r``.

    ``max(alpha / eta, alpha + theta)`` where ``theta`` compares the
    unsold value above ``P(eta)`` to the online value collected up to ``eta``.
    """
    if not beta_r > 0.0:
        raise ParameterError(f"multi-resource bound needs beta_r > 0, got {beta_r!r}")
    eta = _require_eta(eta)
    params = PricingParams.from_gamma(gamma, beta_r)
    alpha = params.alpha
    theta = (
        (1.0 + beta_r - eta)
        * (params.p_ceil - _raw_price(eta, params))
        / integrate_price(0.0, eta, params)
    )
    return max(alpha / eta, alpha + theta)


def multi_slot_bound(lam: float, eta: float, params: PricingParams) -> float:
    """Ratio bound for elastic multi-slot scheduling with window stretch ``lam``.

    ``(lam + 1) / (lam - 1) * max(alpha / eta, 1 / eta')`` with
    ``eta' = ∫_0^eta P / p_ceil``. Operational cost is ignored.
    """
    lam = float(lam)
    if not lam > 1.0:
        raise ParameterError(f"multi-slot bound needs lambda > 1, got {lam!r}")
    eta = _require_eta(eta)
    if not params.beta > 0.0:
        raise ParameterError("multi-slot bound needs beta > 0")
    base = params.without_cost()
    eta_prime = integrate_price(0.0, eta, base) / base.p_ceil
    return (lam + 1.0) / (lam - 1.0) * max(base.alpha / eta, 1.0 / eta_prime)


@dataclass(frozen=True)
class BoundInputs:
    """Utilization-balance inputs of the multi-resource / multi-slot bounds."""

    eta: float
    lam: float
    num_resources: int
    params: PricingParams

    def __post_init__(self):
        _require_eta(self.eta)
        if not self.lam > 1.0:
            raise ParameterError(f"lambda must exceed 1, got {self.lam!r}")
        if self.num_resources < 1:
            raise ParameterError("need at least one resource")

    @property
    def eta_prime(self) -> float:
        base = self.params.without_cost()
        return integrate_price(0.0, self.eta, base) / base.p_ceil

    def multi_resource(self) -> float:
        return multi_resource_bound(self.params.gamma, self.params.beta, self.eta)

    def multi_slot(self) -> float:
        return multi_slot_bound(self.lam, self.eta, self.params)
