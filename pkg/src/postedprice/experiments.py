"""Desk-scale experiment sweeps.

Each sweep varies one axis of the market, runs the online engine and the
exact oracle on the same seeded instances, and aggregates over seeds. All
instances are sized for the exact oracles (at most 15 users, horizon at most
30), so every ratio is measured rather than bounded.

The reported ratio of a row is mean V_opt / mean V_ol over the seeds.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import oracle
from .engine import EngineConfig, JobRequest, run_sequence
from .errors import OracleCapacityError, ParameterError
from .pricing import PricingParams, Regime
from .workload import AdversaryConfig, StochasticConfig, gen_worstcase_mid, gen_worstcase_single

__all__ = [
    "SweepRow",
    "SweepSpec",
    "AXES",
    "composition_instance",
    "run_cell",
    "sweep",
    "DEFAULT_GRIDS",
    "PRESETS",
]

AXES = ("demand", "resources", "slots", "lambda", "amplitude", "beta", "gamma")


@dataclass
class SweepRow:
    axis: str
    value: float
    v_ol: float
    v_opt: float
    bound: float
    seeds: int
    unsolved: int = 0
    runtime: float = 0.0

    @property
    def ratio(self) -> float:
        if self.seeds == 0 or not self.v_ol > 0:
            return math.nan
        return self.v_opt / self.v_ol


@dataclass(frozen=True)
class SweepSpec:
    """Base scenario shared by every cell of a sweep; the swept axis overrides one field."""

    gamma: float = 10.0
    beta: Optional[float] = None  # None: set from the instance's true excess demand
    op_cost: float = 0.0
    lam: float = 1.0
    horizon: int = 1
    num_resources: int = 1
    num_users: int = 12
    relative_demand: float = 1.5
    mean_slot_count: int = 1
    # varied job lengths: 1 + Poisson(mean - 1), capped at max_slots
    varied_slots: bool = False
    max_slots: int = 7
    amplitude: float = 0.0
    seeds: int = 50
    seed: int = 0
    demand_units: int = 100


def composition_instance(
    rng: np.random.Generator,
    num_users: int,
    relative_demand: float,
    num_resources: int = 1,
    horizon: int = 1,
    slot_count: Union[int, Sequence[int]] = 1,
    starts: Optional[Sequence[int]] = None,
    units: int = 100,
    p_floor: float = 1.0,
    p_ceil: float = 10.0,
) -> list:
    """Users whose slot-weighted demand on each resource sums to
    ``relative_demand * horizon`` capacity.

    Demands live on a ``1/units`` grid. Each resource's total is split into
    positive parts at uniformly random cut points (redrawn while any part
    exceeds one unit of capacity). With a common ``slot_count`` the total is
    exact; with per-user slot counts each user's part is divided by its slot
    count and rounded, so the total is approximate.
    """
    if starts is None:
        starts = [0] * num_users
    if isinstance(slot_count, (int, np.integer)):
        counts = [int(slot_count)] * num_users
        per_slot_total = relative_demand * horizon * units / slot_count
        total = round(per_slot_total)
        if abs(per_slot_total - total) > 1e-9 or not num_users <= total <= num_users * units:
            raise ParameterError(
                f"cannot split {relative_demand} x {horizon} slots of demand into "
                f"{num_users} users of {slot_count} slots on a 1/{units} grid"
            )
        divisor = np.ones(num_users)
    else:
        counts = [int(m) for m in slot_count]
        total = round(relative_demand * horizon * units)
        divisor = np.array(counts, dtype=float)
        if total < num_users:
            raise ParameterError("total demand too small for the number of users")
    cols = []
    for _ in range(num_resources):
        while True:
            cuts = np.sort(rng.choice(np.arange(1, total), size=num_users - 1, replace=False))
            parts = np.diff(np.concatenate(([0], cuts, [total])))
            parts = np.maximum(1, np.rint(parts / divisor)).astype(int)
            if parts.max() <= units:
                break
        cols.append(parts)
    out = []
    for i in range(num_users):
        demands = tuple(int(c[i]) / units for c in cols)
        d_total = counts[i] * math.fsum(demands)
        unit = rng.uniform(p_floor, p_ceil)
        out.append(JobRequest(i, demands, unit * d_total, counts[i], int(starts[i])))
    return out


def _params(spec: SweepSpec, requests, capacity: float) -> PricingParams:
    if spec.beta is not None:
        beta = spec.beta
    else:
        nres = len(requests[0].demands) if requests else 1
        per_res = [math.fsum(r.slot_count * r.demands[k] for r in requests) for k in range(nres)]
        beta = max(per_res) / capacity - 1.0 if requests else 0.0
    return PricingParams.from_gamma(spec.gamma, beta, spec.op_cost)


def _instance(spec: SweepSpec, seed: int) -> list:
    rng = np.random.default_rng([spec.seed, seed])
    n, H = spec.num_users, spec.horizon
    if H == 1:
        return composition_instance(rng, n, spec.relative_demand, spec.num_resources, 1,
                                    units=spec.demand_units)
    if spec.varied_slots:
        counts = np.minimum(1 + rng.poisson(spec.mean_slot_count - 1, n), min(spec.max_slots, H))
    else:
        counts = np.full(n, spec.mean_slot_count)
    # arrival slots follow the (possibly modulated) rate with period = horizon
    rate = StochasticConfig(rate_amplitude=spec.amplitude, period=H, horizon=H).rate(np.arange(H))
    starts = []
    for m in counts:
        w = rate[: H - m + 1]
        starts.append(int(rng.choice(w.size, p=w / w.sum())))
    order = np.argsort(starts, kind="stable")
    counts, starts = counts[order], np.array(starts)[order]
    slot_count = int(counts[0]) if not spec.varied_slots else counts
    return composition_instance(rng, n, spec.relative_demand, spec.num_resources, H,
                                slot_count, starts, spec.demand_units)


def run_cell(spec: SweepSpec, axis: str, value: float) -> SweepRow:
    t0 = time.perf_counter()
    v_ol, v_opt, bounds = [], [], []
    unsolved = 0
    for s in range(spec.seeds):
        reqs = _instance(spec, s)
        params = _params(spec, reqs, spec.horizon)
        cfg = EngineConfig(spec.num_resources, spec.horizon, params, spec.lam)
        try:
            opt = oracle.solve(reqs, cfg).welfare_opt
        except OracleCapacityError:
            unsolved += 1
            continue
        v_ol.append(run_sequence(reqs, cfg).welfare_online)
        v_opt.append(opt)
        bounds.append(params.alpha)
    k = len(v_ol)
    mean = (lambda xs: math.fsum(xs) / k) if k else (lambda xs: math.nan)
    return SweepRow(axis, float(value), mean(v_ol), mean(v_opt), mean(bounds), k, unsolved,
                    time.perf_counter() - t0)


def _adversary_cell(spec: SweepSpec, axis: str, value: float, gamma: float, beta: float) -> SweepRow:
    """Measured worst case for one (gamma, beta) point at granularity 1e-3."""
    t0 = time.perf_counter()
    params = PricingParams.from_gamma(gamma, beta, spec.op_cost)
    if params.regime is Regime.SLACK:
        return SweepRow(axis, value, math.nan, math.nan, params.alpha, 0, 0, time.perf_counter() - t0)
    adv = AdversaryConfig(0.9, 1e-3, 1e-3)
    gen = gen_worstcase_single if params.regime is Regime.LARGE_DEMAND else gen_worstcase_mid
    reqs = gen(params, adv)
    cfg = EngineConfig(1, 1, params)
    v_ol = run_sequence(reqs, cfg).welfare_online
    v_opt = oracle.solve(reqs, cfg).welfare_opt
    return SweepRow(axis, value, v_ol, v_opt, params.alpha, 1, 0, time.perf_counter() - t0)


DEFAULT_GRIDS = {
    "demand": (0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0),
    "resources": (1, 2, 3, 4, 5),
    "slots": (1, 2, 3),
    "lambda": (1.0, 1.2, 1.4),
    "amplitude": (0.0, 0.25, 0.5, 0.75, 1.0),
    "beta": (0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 2.0),
    "gamma": (2.0, 5.0, 10.0, 20.0, 50.0),
}


# Base scenario per axis, sized for the exact oracles.
PRESETS = {
    "demand": SweepSpec(horizon=1, num_users=12),
    "resources": SweepSpec(horizon=1, num_users=12, relative_demand=1.5),
    "slots": SweepSpec(horizon=6, num_users=15, relative_demand=1.25, lam=1.2),
    "lambda": SweepSpec(horizon=15, num_users=12, relative_demand=1.5, mean_slot_count=5,
                        varied_slots=True),
    # the low-amplitude welfare change is small at lam=1.2; 400 seeds resolve it
    "amplitude": SweepSpec(horizon=10, num_users=12, relative_demand=1.5, mean_slot_count=3,
                           lam=1.2, seeds=400),
    "beta": SweepSpec(),
    "gamma": SweepSpec(),
}


def axis_spec(base: SweepSpec, axis: str, value: float) -> SweepSpec:
    """The scenario of one sweep cell."""
    if axis == "demand":
        return dataclasses.replace(base, relative_demand=float(value))
    if axis == "resources":
        return dataclasses.replace(base, num_resources=int(value))
    if axis == "slots":
        # total demand per slot held fixed while jobs get longer
        return dataclasses.replace(base, mean_slot_count=int(value))
    if axis == "lambda":
        return dataclasses.replace(base, lam=float(value))
    if axis == "amplitude":
        return dataclasses.replace(base, amplitude=float(value))
    raise ParameterError(f"unknown sweep axis {axis!r}; choose from {AXES}")


def sweep(axis: str, base: SweepSpec = SweepSpec(), grid: Optional[Sequence[float]] = None) -> list:
    """Rows of a sweep, in grid order."""
    if axis not in AXES:
        raise ParameterError(f"unknown sweep axis {axis!r}; choose from {AXES}")
    grid = DEFAULT_GRIDS[axis] if grid is None else grid
    rows = []
    for value in grid:
        if axis == "beta":
            rows.append(_adversary_cell(base, axis, value, base.gamma, float(value)))
        elif axis == "gamma":
            beta = 2.0 if base.beta is None else base.beta
            rows.append(_adversary_cell(base, axis, value, float(value), beta))
        else:
            rows.append(run_cell(axis_spec(base, axis, value), axis, value))
    return rows
