"""Online posted-price allocation.

Users arrive one at a time. Each is quoted a take-it-or-leave-it price from
the current utilization of the resources it asks for; it accepts iff its
valuation covers the price and capacity allows. Accepted jobs are committed
immediately and never revisited.

The general path (:func:`process_user`) covers multiple resources and
multiple slots with elastic windows: a job needing ``m`` slots starting at
``tau`` may run in any ``m`` slots of ``[tau, tau + ceil(lam * m) - 1]``
(clamped to the horizon), and is charged for the cheapest feasible choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import InvariantViolation, MalformedRequest, ParameterError
from .pricing import EXHAUSTED, PricingParams, unit_price, unit_price_array

__all__ = [
    "CAPACITY_TOL",
    "JobRequest",
    "ResourceLedger",
    "Quote",
    "Decision",
    "Trace",
    "EngineConfig",
    "window_size",
    "request_window",
    "quote_single",
    "process_user_single",
    "quote_multi_resource",
    "quote_multi_slot",
    "process_user",
    "run_sequence",
]

# Slack on every capacity comparison; absorbs float error in summed demands.
CAPACITY_TOL = 1e-9


@dataclass(frozen=True)
class JobRequest:
    """One user's job.

    ``demands[r]`` is the fraction of resource ``r``'s total supply needed
    in each of ``slot_count`` slots, starting no earlier than ``start_slot``.
    """

    id: Union[int, str]
    demands: tuple
    valuation: float
    slot_count: int = 1
    start_slot: int = 0

    def __post_init__(self):
        demands = tuple(float(d) for d in np.atleast_1d(self.demands))
        object.__setattr__(self, "demands", demands)
        if any(not math.isfinite(d) or d < 0.0 for d in demands):
            raise MalformedRequest(f"request {self.id}: demands must be finite and >= 0")
        if not math.isfinite(self.valuation):
            raise MalformedRequest(f"request {self.id}: valuation must be finite")
        if int(self.slot_count) != self.slot_count or self.slot_count < 1:
            raise MalformedRequest(f"request {self.id}: slot_count must be a positive integer")
        if int(self.start_slot) != self.start_slot or self.start_slot < 0:
            raise MalformedRequest(f"request {self.id}: start_slot must be a non-negative integer")

    @cached_property
    def total_demand(self) -> float:
        return self.slot_count * math.fsum(self.demands)

    @property
    def unit_value(self) -> float:
        return self.valuation / self.total_demand


class ResourceLedger:
    """Per-resource, per-slot utilization with each resource's price knobs.

    ``utilization[r, t]`` only ever grows, through :meth:`commit`.
    """

    def __init__(
        self,
        num_resources: int = 1,
        horizon: int = 1,
        params: Union[PricingParams, Sequence[PricingParams]] = PricingParams(),
    ):
        if num_resources < 1 or horizon < 1:
            raise ParameterError("ledger needs at least one resource and one slot")
        if isinstance(params, PricingParams):
            params = [params] * num_resources
        params = list(params)
        if len(params) != num_resources:
            raise ParameterError(
                f"got {len(params)} PricingParams for {num_resources} resources"
            )
        self.num_resources = int(num_resources)
        self.horizon = int(horizon)
        self.per_resource_params = params
        self.utilization = np.zeros((self.num_resources, self.horizon))

    def copy(self) -> "ResourceLedger":
        other = ResourceLedger(self.num_resources, self.horizon, self.per_resource_params)
        other.utilization = self.utilization.copy()
        return other

    def rho(self, r: int = 0, t: int = 0) -> float:
        return float(self.utilization[r, t])

    def commit(self, demands: Sequence[float], slots: Iterable[int]) -> None:
        """Add ``demands`` to every slot in ``slots``.

        Raises InvariantViolation if any cell would exceed capacity; quotes
        exclude such slots, so this signals an engine bug.
        """
        slots = list(slots)
        d = np.asarray(demands, dtype=float)[:, None]
        updated = self.utilization[:, slots] + d
        if np.any(updated > 1.0 + CAPACITY_TOL):
            raise InvariantViolation(f"commit would exceed capacity in slots {slots}")
        updated[np.abs(updated - 1.0) <= CAPACITY_TOL] = 1.0
        self.utilization[:, slots] = updated

    def __repr__(self) -> str:
        return (
            f"ResourceLedger(num_resources={self.num_resources}, "
            f"horizon={self.horizon}, max_rho={self.utilization.max():.4g})"
        )


@dataclass(frozen=True)
class Quote:
    total_price: float
    chosen_slots: tuple = ()
    per_slot_cost: tuple = ()
    feasible: bool = False
    reason: Optional[str] = None


@dataclass(frozen=True)
class Decision:
    request_id: Union[int, str]
    accepted: bool
    slots: tuple
    price_paid: float
    valuation: float
    reason: Optional[str] = None

    @property
    def utility(self) -> float:
        return self.valuation - self.price_paid if self.accepted else 0.0

    def indicator(self, horizon: int) -> np.ndarray:
        """Slot-occupancy indicator over the horizon (all zero if rejected)."""
        y = np.zeros(horizon, dtype=np.uint8)
        if self.accepted:
            y[list(self.slots)] = 1
        return y


@dataclass
class Trace:
    decisions: list = field(default_factory=list)
    final_utilization: Optional[np.ndarray] = None
    errors: list = field(default_factory=list)

    @property
    def welfare_online(self) -> float:
        return math.fsum(d.valuation for d in self.decisions if d.accepted)

    @property
    def revenue(self) -> float:
        return math.fsum(d.price_paid for d in self.decisions if d.accepted)

    @property
    def accepted_ids(self) -> list:
        return [d.request_id for d in self.decisions if d.accepted]

    @property
    def num_accepted(self) -> int:
        return sum(1 for d in self.decisions if d.accepted)


@dataclass(frozen=True)
class EngineConfig:
    """Shape of the market plus the window stretch ``lam`` (>= 1)."""

    num_resources: int = 1
    horizon: int = 1
    params: Union[PricingParams, tuple] = PricingParams()
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam >= 1.0:
            raise ParameterError(f"lambda must be >= 1, got {self.lam!r}")
        if not isinstance(self.params, PricingParams):
            object.__setattr__(self, "params", tuple(self.params))

    def new_ledger(self) -> ResourceLedger:
        return ResourceLedger(self.num_resources, self.horizon, self.params)


def window_size(slot_count: int, lam: float) -> int:
    """``ceil(lam * slot_count)``, guarded against float round-up (1.2*5)."""
    return max(int(slot_count), math.ceil(lam * slot_count - 1e-9))


def request_window(request: JobRequest, lam: float, horizon: int) -> tuple:
    """Inclusive slot window ``(lo, hi)`` of a request, clamped to the horizon."""
    if not 0 <= request.start_slot < horizon:
        raise MalformedRequest(
            f"request {request.id}: start slot {request.start_slot} outside horizon {horizon}"
        )
    lo = int(request.start_slot)
    hi = min(lo + window_size(request.slot_count, lam) - 1, horizon - 1)
    return lo, hi


def _check_shape(ledger: ResourceLedger, request: JobRequest) -> None:
    if len(request.demands) != ledger.num_resources:
        raise MalformedRequest(
            f"request {request.id}: {len(request.demands)} demands for "
            f"{ledger.num_resources} resources"
        )
    if not any(d > 0.0 for d in request.demands):
        raise MalformedRequest(f"request {request.id}: zero total demand")


def quote_single(
    ledger: ResourceLedger, demand: float, params: Optional[PricingParams] = None
) -> Quote:
    """Price ``demand`` units of the single resource at its current utilization."""
    demand = float(demand)
    if params is None:
        params = ledger.per_resource_params[0]
    if not demand > 0.0:
        raise MalformedRequest(f"demand must be positive, got {demand!r}")
    if demand > 1.0:
        return Quote(math.inf, reason="oversize")
    rho = ledger.rho(0, 0)
    price = unit_price(rho, params)
    if price is EXHAUSTED:
        return Quote(math.inf, reason="exhausted")
    total = demand * price
    fits = rho + demand <= 1.0 + CAPACITY_TOL
    return Quote(total, (0,), (total,), fits, None if fits else "capacity")


def _decide(request: JobRequest, quote: Quote) -> Decision:
    if not quote.feasible:
        return Decision(request.id, False, (), 0.0, request.valuation, quote.reason)
    if request.valuation >= quote.total_price:
        return Decision(request.id, True, quote.chosen_slots, quote.total_price, request.valuation)
    return Decision(request.id, False, (), 0.0, request.valuation, "price")


def process_user_single(
    ledger: ResourceLedger, request: JobRequest, params: Optional[PricingParams] = None
) -> Decision:
    """Quote, decide, and commit one arrival on a single-resource, single-slot ledger."""
    if ledger.num_resources != 1 or ledger.horizon != 1 or len(request.demands) != 1:
        raise MalformedRequest("process_user_single needs a 1x1 ledger and scalar demand")
    decision = _decide(request, quote_single(ledger, request.demands[0], params))
    if decision.accepted:
        ledger.commit(request.demands, (0,))
    return decision


def quote_multi_resource(
    ledger: ResourceLedger,
    request: JobRequest,
    per_resource_params: Optional[Sequence[PricingParams]] = None,
) -> Quote:
    """Total price ``sum_r d_r * P(rho_r; beta_r)`` in the request's start slot."""
    _check_shape(ledger, request)
    if per_resource_params is None:
        per_resource_params = ledger.per_resource_params
    t = request.start_slot
    if not 0 <= t < ledger.horizon:
        raise MalformedRequest(f"request {request.id}: start slot {t} outside horizon")
    total = 0.0
    fits = True
    for r, d in enumerate(request.demands):
        if d == 0.0:
            continue
        if d > 1.0:
            return Quote(math.inf, reason="oversize")
        rho = ledger.rho(r, t)
        price = unit_price(rho, per_resource_params[r])
        if price is EXHAUSTED:
            return Quote(math.inf, reason="exhausted")
        total += d * price
        if rho + d > 1.0 + CAPACITY_TOL:
            fits = False
    return Quote(total, (t,), (total,), fits, None if fits else "capacity")


def _slot_costs(ledger: ResourceLedger, request: JobRequest, lo: int, hi: int):
    """Per-slot cost and feasibility over the window ``[lo, hi]``."""
    width = hi - lo + 1
    cost = np.zeros(width)
    feasible = np.ones(width, dtype=bool)
    for r, d in enumerate(request.demands):
        if d == 0.0:
            continue
        rho = ledger.utilization[r, lo : hi + 1]
        prices = unit_price_array(rho, ledger.per_resource_params[r])
        cost += d * prices
        feasible &= rho + d <= 1.0 + CAPACITY_TOL
    feasible &= np.isfinite(cost)
    return cost, feasible


def quote_multi_slot(ledger: ResourceLedger, request: JobRequest, lam: float = 1.0) -> Quote:
    """Cheapest ``slot_count`` feasible slots in the request's window.

    The objective separates across slots, so picking the cheapest slots
    (earliest first among ties) is optimal.
    """
    if not lam >= 1.0:
        raise ParameterError(f"lambda must be >= 1, got {lam!r}")
    _check_shape(ledger, request)
    lo, hi = request_window(request, lam, ledger.horizon)
    if max(request.demands) > 1.0:
        return Quote(math.inf, reason="oversize")
    m = request.slot_count
    cost, feasible = _slot_costs(ledger, request, lo, hi)
    candidates = np.flatnonzero(feasible)
    if len(candidates) < m:
        exhausted = not np.all(np.isfinite(cost))
        return Quote(math.inf, reason="exhausted" if exhausted else "window")
    # stable sort keeps earlier slots first among equal costs
    pick = np.sort(candidates[np.argsort(cost[candidates], kind="stable")[:m]])
    per_slot = tuple(float(cost[k]) for k in pick)
    return Quote(sum(per_slot), tuple(int(lo + k) for k in pick), per_slot, True)


def process_user(ledger: ResourceLedger, request: JobRequest, lam: float = 1.0) -> Decision:
    """Quote, decide, and commit one arrival in the general configuration."""
    decision = _decide(request, quote_multi_slot(ledger, request, lam))
    if decision.accepted:
        ledger.commit(request.demands, decision.slots)
    return decision


def run_sequence(requests: Iterable[JobRequest], config: EngineConfig) -> Trace:
    """Drive the online engine over ``requests`` in the given order.

    Malformed requests are recorded in ``Trace.errors`` and rejected; the run
    continues.
    """
    ledger = config.new_ledger()
    trace = Trace()
    for k, req in enumerate(requests):
        try:
            decision = process_user(ledger, req, config.lam)
        except MalformedRequest as exc:
            trace.errors.append((k, str(exc)))
            decision = Decision(req.id, False, (), 0.0, req.valuation, "malformed")
        trace.decisions.append(decision)
    trace.final_utilization = ledger.utilization.copy()
    return trace
