"""Exact offline welfare maximization, the yardstick for online performance.

Three problem classes, matching the engine's configurations:

* one resource, one slot: 0-1 knapsack, solved by DP on a capacity grid;
* several resources, one slot: depth-first branch and bound;
* several resources and slots with elastic windows: branch and bound over
  accept/reject, backtracking over slot subsets inside each window.

Each has a brute-force twin (``exhaustive_*``) used to cross-check it, and
every returned solution can be re-verified with :func:`check_solution`.
Windows are clamped to the horizon exactly as the engine clamps them, so
online and offline optimize over the same feasible set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .engine import CAPACITY_TOL, EngineConfig, JobRequest, request_window
from .errors import MalformedRequest, OracleCapacityError, QuantizationError

__all__ = [
    "DEFAULT_GRANULARITY",
    "OracleLimits",
    "OracleInstance",
    "OracleSolution",
    "quantize",
    "optimal_basic",
    "optimal_multi_resource",
    "optimal_multi_slot",
    "exhaustive_basic",
    "exhaustive_multi_resource",
    "exhaustive_multi_slot",
    "check_solution",
    "solve",
]

DEFAULT_GRANULARITY = 1e-4


@dataclass(frozen=True)
class OracleLimits:
    """Search budgets for exact solving."""

    basic_exhaustive_users: int = 20
    multi_resource_users: int = 25
    multi_resource_exhaustive_users: int = 20
    multi_slot_users: int = 15
    multi_slot_horizon: int = 30
    multi_slot_window: int = 10
    multi_slot_exhaustive_users: int = 15


LIMITS = OracleLimits()


@dataclass(frozen=True)
class OracleInstance:
    requests: tuple
    num_resources: int = 1
    horizon: int = 1
    lam: float = 1.0
    limits: OracleLimits = LIMITS

    @classmethod
    def from_config(cls, requests: Sequence[JobRequest], config: EngineConfig):
        return cls(tuple(requests), config.num_resources, config.horizon, config.lam)


@dataclass
class OracleSolution:
    """Optimal offline selection.

    ``chosen`` holds positions into the request list; ``schedules`` maps each
    chosen position to its slots; ``utilization`` is the resulting
    per-resource, per-slot load, kept as the feasibility record.
    """

    chosen: tuple
    schedules: dict
    welfare_opt: float
    utilization: Optional[np.ndarray] = None
    requests: tuple = field(default=(), repr=False)

    @property
    def chosen_ids(self) -> list:
        return [self.requests[i].id for i in self.chosen]

    @property
    def max_utilization(self) -> float:
        if self.utilization is None or self.utilization.size == 0:
            return 0.0
        return float(self.utilization.max())


def _welfare(requests, chosen) -> float:
    return math.fsum(requests[i].valuation for i in chosen)


def _load(requests, schedules, num_resources, horizon) -> np.ndarray:
    util = np.zeros((num_resources, horizon))
    for i, slots in schedules.items():
        util[:, list(slots)] += np.asarray(requests[i].demands)[:, None]
    return util


def _density_order(requests, indices) -> list:
    """Indices sorted by value density, highest first (stable)."""
    def key(i):
        d = requests[i].total_demand
        return -requests[i].valuation / d if d > 0.0 else -math.inf

    return sorted(indices, key=key)


def quantize(demand: float, granularity: float = DEFAULT_GRANULARITY) -> int:
    """Demand expressed in whole grid units; misaligned demands are an error."""
    units = demand / granularity
    k = round(units)
    if abs(units - k) > 1e-6 * max(1.0, abs(units)):
        raise QuantizationError(
            f"demand {demand!r} is not a multiple of granularity {granularity!r}"
        )
    return int(k)


def _single_slot_demands(requests) -> None:
    for req in requests:
        if req.slot_count != 1:
            raise MalformedRequest(f"request {req.id}: single-slot oracle got slot_count {req.slot_count}")


def optimal_basic(
    requests: Sequence[JobRequest], granularity: float = DEFAULT_GRANULARITY
) -> OracleSolution:
    """Single resource, single slot: exact 0-1 knapsack by dynamic programming."""
    requests = tuple(requests)
    if not requests:
        return OracleSolution((), {}, 0.0, np.zeros((1, 1)), requests)
    _single_slot_demands(requests)
    for req in requests:
        if len(req.demands) != 1:
            raise MalformedRequest(f"request {req.id}: basic oracle needs one resource")
    capacity = quantize(1.0, granularity)
    weights = np.array([quantize(r.demands[0], granularity) for r in requests], dtype=np.int64)
    values = np.array([r.valuation for r in requests])
    _, mask = kernels.knapsack_dp(weights, values, capacity)
    chosen = tuple(int(i) for i in np.flatnonzero(mask))
    schedules = {i: (0,) for i in chosen}
    return OracleSolution(
        chosen, schedules, _welfare(requests, chosen),
        _load(requests, schedules, 1, 1), requests,
    )


def exhaustive_basic(requests: Sequence[JobRequest], limits: OracleLimits = LIMITS) -> OracleSolution:
    """Brute force over all subsets (float demands, no grid)."""
    requests = tuple(requests)
    _single_slot_demands(requests)
    if len(requests) > limits.basic_exhaustive_users:
        raise OracleCapacityError(
            f"{len(requests)} users exceed the exhaustive budget of {limits.basic_exhaustive_users}"
        )
    d = np.array([[r.demands[0]] for r in requests]).reshape(len(requests), 1)
    return _exhaustive_single_slot(requests, d)


def _exhaustive_single_slot(requests, d) -> OracleSolution:
    n, nres = d.shape
    values = np.array([r.valuation for r in requests])
    # Subset sums by doubling: bit i of the subset index selects request i.
    loads = np.zeros((1, nres))
    totals = np.zeros(1)
    for i in range(n):
        loads = np.concatenate([loads, loads + d[i]])
        totals = np.concatenate([totals, totals + values[i]])
    ok = np.all(loads <= 1.0 + CAPACITY_TOL, axis=1)
    totals = np.where(ok, totals, -np.inf)
    best = int(np.argmax(totals))
    chosen = tuple(i for i in range(n) if best >> i & 1)
    schedules = {i: (0,) for i in chosen}
    return OracleSolution(
        chosen, schedules, _welfare(requests, chosen),
        _load(requests, schedules, nres, 1), requests,
    )


def optimal_multi_resource(
    requests: Sequence[JobRequest], limits: OracleLimits = LIMITS
) -> OracleSolution:
    """Several resources, one slot: branch and bound with a remaining-value bound."""
    requests = tuple(requests)
    n = len(requests)
    if n > limits.multi_resource_users:
        raise OracleCapacityError(
            f"{n} users exceed the multi-resource budget of {limits.multi_resource_users}; "
            "shrink the instance"
        )
    if n == 0:
        return OracleSolution((), {}, 0.0, None, requests)
    _single_slot_demands(requests)
    nres = len(requests[0].demands)
    order = _density_order(requests, range(n))
    d = np.array([requests[i].demands for i in order], dtype=float)
    v = np.array([requests[i].valuation for i in order])
    _, mask = kernels.bnb_multi_resource(d, v, CAPACITY_TOL)
    chosen = tuple(sorted(order[k] for k in np.flatnonzero(mask)))
    schedules = {i: (0,) for i in chosen}
    return OracleSolution(
        chosen, schedules, _welfare(requests, chosen),
        _load(requests, schedules, nres, 1), requests,
    )


def exhaustive_multi_resource(
    requests: Sequence[JobRequest], limits: OracleLimits = LIMITS
) -> OracleSolution:
    requests = tuple(requests)
    if len(requests) > limits.multi_resource_exhaustive_users:
        raise OracleCapacityError(f"{len(requests)} users exceed the exhaustive budget")
    _single_slot_demands(requests)
    if not requests:
        return OracleSolution((), {}, 0.0, None, requests)
    d = np.array([r.demands for r in requests], dtype=float)
    return _exhaustive_single_slot(requests, d)


def _servable(requests, lam, horizon) -> tuple:
    """Indices the engine could ever accept, with their clamped windows.

    Zero-demand and out-of-horizon requests are malformed for the engine and
    are excluded here too.
    """
    keep, windows = [], {}
    for i, req in enumerate(requests):
        if req.total_demand <= 0.0 or not 0 <= req.start_slot < horizon:
            continue
        lo, hi = request_window(req, lam, horizon)
        windows[i] = (lo, hi)
        if hi - lo + 1 >= req.slot_count and max(req.demands) <= 1.0:
            keep.append(i)
    return keep, windows


def _check_multi_slot_limits(requests, lam, horizon, limits, exhaustive=False):
    cap = limits.multi_slot_exhaustive_users if exhaustive else limits.multi_slot_users
    if len(requests) > cap:
        raise OracleCapacityError(f"{len(requests)} users exceed the multi-slot budget of {cap}")
    if horizon > limits.multi_slot_horizon:
        raise OracleCapacityError(
            f"horizon {horizon} exceeds the multi-slot budget of {limits.multi_slot_horizon}"
        )
    for req in requests:
        if not 0 <= req.start_slot < horizon:
            continue  # unservable; dropped by _servable
        lo, hi = request_window(req, lam, horizon)
        if hi - lo + 1 > limits.multi_slot_window:
            raise OracleCapacityError(
                f"request {req.id}: window of {hi - lo + 1} slots exceeds {limits.multi_slot_window}"
            )


def optimal_multi_slot(
    requests: Sequence[JobRequest],
    lam: float,
    horizon: int,
    limits: OracleLimits = LIMITS,
) -> OracleSolution:
    """Several resources and slots: each accepted user gets ``slot_count`` slots
    anywhere inside its (clamped) elastic window."""
    requests = tuple(requests)
    _check_multi_slot_limits(requests, lam, horizon, limits)
    if not requests:
        return OracleSolution((), {}, 0.0, None, requests)
    nres = len(requests[0].demands)
    keep, windows = _servable(requests, lam, horizon)
    order = _density_order(requests, keep)
    if not order:
        return OracleSolution((), {}, 0.0, np.zeros((nres, horizon)), requests)
    d = np.array([requests[i].demands for i in order], dtype=float)
    v = np.array([requests[i].valuation for i in order])
    cnt = np.array([requests[i].slot_count for i in order])
    lo = np.array([windows[i][0] for i in order])
    hi = np.array([windows[i][1] for i in order])
    _, mask, sched = kernels.bnb_multi_slot(d, v, cnt, lo, hi, horizon, CAPACITY_TOL)
    schedules = {
        order[k]: tuple(int(t) for t in np.flatnonzero(sched[k])) for k in np.flatnonzero(mask)
    }
    chosen = tuple(sorted(schedules))
    schedules = {i: schedules[i] for i in chosen}
    return OracleSolution(
        chosen, schedules, _welfare(requests, chosen),
        _load(requests, schedules, nres, horizon), requests,
    )


def _assign(requests, subset, windows, nres, horizon):
    """Plain backtracking: find slot subsets for every user in ``subset``, or None."""
    util = [[0.0] * horizon for _ in range(nres)]
    limit = 1.0 + CAPACITY_TOL
    plan = {}

    def place(k):
        if k == len(subset):
            return True
        i = subset[k]
        req = requests[i]
        used = [(r, d) for r, d in enumerate(req.demands) if d > 0.0]
        lo, hi = windows[i]
        for slots in combinations(range(lo, hi + 1), req.slot_count):
            if all(util[r][t] + d <= limit for t in slots for r, d in used):
                for t in slots:
                    for r, d in used:
                        util[r][t] += d
                plan[i] = slots
                if place(k + 1):
                    return True
                for t in slots:
                    for r, d in used:
                        util[r][t] -= d
                del plan[i]
        return False

    return dict(plan) if place(0) else None


def exhaustive_multi_slot(
    requests: Sequence[JobRequest],
    lam: float,
    horizon: int,
    limits: OracleLimits = LIMITS,
) -> OracleSolution:
    """Maximum over all user subsets, scanning subsets by decreasing value and
    returning the first one that admits a schedule."""
    requests = tuple(requests)
    _check_multi_slot_limits(requests, lam, horizon, limits, exhaustive=True)
    if not requests:
        return OracleSolution((), {}, 0.0, None, requests)
    nres = len(requests[0].demands)
    keep, windows = _servable(requests, lam, horizon)
    n = len(keep)
    values = np.array([requests[i].valuation for i in keep])
    totals = np.zeros(1)
    for i in range(n):
        totals = np.concatenate([totals, totals + values[i]])
    index = np.arange(totals.size)
    # supersets of an infeasible subset are infeasible too
    doomed = np.zeros(totals.size, dtype=bool)
    for mask in np.argsort(-totals, kind="stable"):
        mask = int(mask)
        if doomed[mask]:
            continue
        subset = [keep[k] for k in range(n) if mask >> k & 1]
        plan = _assign(requests, subset, windows, nres, horizon)
        if plan is not None:
            chosen = tuple(sorted(plan))
            schedules = {i: tuple(plan[i]) for i in chosen}
            return OracleSolution(
                chosen, schedules, _welfare(requests, chosen),
                _load(requests, schedules, nres, horizon), requests,
            )
        doomed |= (index & mask) == mask
    raise AssertionError("the empty subset is always feasible")


def check_solution(
    requests: Sequence[JobRequest],
    solution: OracleSolution,
    lam: float = 1.0,
    horizon: int = 1,
) -> list:
    """Re-verify capacity, slot-count and window constraints from scratch.

    Returns a list of violation messages; empty means feasible.
    """
    requests = tuple(requests)
    problems = []
    if not requests:
        return problems if solution.welfare_opt == 0.0 else ["non-zero welfare for empty instance"]
    nres = len(requests[0].demands)
    util = np.zeros((nres, horizon))
    for i in solution.chosen:
        req = requests[i]
        slots = solution.schedules.get(i, ())
        lo, hi = request_window(req, lam, horizon)
        if len(set(slots)) != len(slots):
            problems.append(f"request {req.id}: repeated slot")
        if len(slots) != req.slot_count:
            problems.append(f"request {req.id}: {len(slots)} slots, needs {req.slot_count}")
        if any(not lo <= t <= hi for t in slots):
            problems.append(f"request {req.id}: slot outside window [{lo}, {hi}]")
        for t in slots:
            for r, d in enumerate(req.demands):
                util[r, t] += d
    if np.any(util > 1.0 + CAPACITY_TOL):
        problems.append(f"capacity exceeded (max {util.max():.12g})")
    if set(solution.schedules) != set(solution.chosen):
        problems.append("schedules and chosen set disagree")
    welfare = math.fsum(requests[i].valuation for i in solution.chosen)
    if welfare != solution.welfare_opt:
        problems.append(f"welfare {solution.welfare_opt!r} != recomputed {welfare!r}")
    return problems


def solve(
    requests: Sequence[JobRequest],
    config: EngineConfig,
    granularity: float = DEFAULT_GRANULARITY,
    limits: OracleLimits = LIMITS,
) -> OracleSolution:
    """Pick the exact solver matching the engine configuration."""
    requests = tuple(requests)
    if config.horizon == 1:
        keep, _ = _servable(requests, config.lam, 1)
        sub = tuple(requests[i] for i in keep)
        if config.num_resources == 1:
            try:
                sol = optimal_basic(sub, granularity)
            except QuantizationError:
                if len(sub) > limits.multi_resource_users:
                    raise
                sol = optimal_multi_resource(sub, limits)
        else:
            sol = optimal_multi_resource(sub, limits)
        chosen = tuple(keep[k] for k in sol.chosen)
        return OracleSolution(
            chosen, {i: (0,) for i in chosen}, sol.welfare_opt, sol.utilization, requests
        )
    return optimal_multi_slot(requests, config.lam, config.horizon, limits)
