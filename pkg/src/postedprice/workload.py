"""Request-sequence generators and the request file format.

Stochastic sequences follow a (possibly sinusoidally modulated) Poisson
arrival process. Adversarial sequences replay the worst-case constructions
for the posted-price engine: a first phase of tiny users whose valuations
equal the price they are quoted, then a flood that the engine turns away but
the offline optimum would have taken.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .engine import JobRequest, ResourceLedger, quote_multi_slot, window_size
from .errors import MalformedRequest, OracleCapacityError, ParameterError
from .pricing import PricingParams, Regime, unit_price

__all__ = [
    "StochasticConfig",
    "AdversaryConfig",
    "SmallRandomConfig",
    "gen_stochastic",
    "gen_worstcase_single",
    "gen_worstcase_mid",
    "gen_worstcase_multi",
    "gen_small_random",
    "align_demand",
    "write_requests",
    "read_requests",
    "dumps_requests",
    "loads_requests",
]

FORMAT_TAG = "postedprice-requests v1"


def align_demand(d: float, granularity: float) -> float:
    """Round ``d`` to the nearest positive multiple of ``granularity`` (at most 1)."""
    per_unit = round(1.0 / granularity)
    k = min(max(1, round(d * per_unit)), per_unit)
    return k / per_unit


@dataclass(frozen=True)
class StochasticConfig:
    """Poisson workload with optional sinusoidal rate modulation.

    ``arrival_rate`` is the mean number of users per slot; with amplitude A the
    slot-t rate is ``arrival_rate * (1 + A * sin(2*pi*t/period))``. When
    ``num_users`` is set, exactly that many users are drawn, their arrival
    slots sampled in proportion to the modulated rate.
    """

    arrival_rate: float = 20.0
    rate_amplitude: float = 0.0
    period: float = 100.0
    mean_demand: float = 0.02
    demand_stddev: float = 0.01
    mean_slot_count: float = 1.0
    p_floor: float = 1.0
    p_ceil: float = 10.0
    horizon: int = 100
    num_resources: int = 1
    seed: int = 0
    num_users: Optional[int] = None
    granularity: float = 1e-4

    def __post_init__(self):
        if not (self.arrival_rate >= 0 and math.isfinite(self.arrival_rate)):
            raise ParameterError(f"arrival_rate must be finite and >= 0, got {self.arrival_rate!r}")
        if not 0.0 <= self.rate_amplitude <= 1.0:
            raise ParameterError(f"rate_amplitude must lie in [0, 1], got {self.rate_amplitude!r}")
        if not self.period > 0:
            raise ParameterError("period must be positive")
        if not 0.0 < self.mean_demand <= 1.0:
            raise ParameterError(f"mean_demand must lie in (0, 1], got {self.mean_demand!r}")
        if not self.demand_stddev >= 0:
            raise ParameterError("demand_stddev must be >= 0")
        if not self.mean_slot_count >= 1.0:
            raise ParameterError("mean_slot_count must be >= 1")
        if not 0 < self.p_floor <= self.p_ceil:
            raise ParameterError("need 0 < p_floor <= p_ceil")
        if self.horizon < 1 or self.num_resources < 1:
            raise ParameterError("horizon and num_resources must be >= 1")
        if self.num_users is not None and self.num_users < 0:
            raise ParameterError("num_users must be >= 0")
        if not 0 < self.granularity <= 0.01:
            raise ParameterError("granularity must lie in (0, 0.01]")

    def rate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.arrival_rate * (1.0 + self.rate_amplitude * np.sin(2 * np.pi * t / self.period))


def _truncated_normal(rng, mean, sd, size) -> np.ndarray:
    """Normal draws restricted to (0, 1] by resampling."""
    out = np.empty(size)
    if sd == 0:
        out.fill(min(max(mean, 1e-12), 1.0))
        return out
    todo = np.arange(size)
    while todo.size:
        x = rng.normal(mean, sd, todo.size)
        ok = (x > 0) & (x <= 1.0)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def _draw_user(rng, cfg: StochasticConfig, uid, slot, m) -> JobRequest:
    raw = _truncated_normal(rng, cfg.mean_demand, cfg.demand_stddev, cfg.num_resources)
    demands = tuple(align_demand(x, cfg.granularity) for x in raw)
    total = m * math.fsum(demands)
    unit = rng.uniform(cfg.p_floor, cfg.p_ceil)
    value = min(max(unit * total, cfg.p_floor * total), cfg.p_ceil * total)
    return JobRequest(uid, demands, value, m, slot)


def gen_stochastic(cfg: StochasticConfig) -> list:
    """Seeded stochastic sequence, ordered by arrival slot.

    Jobs that could not finish inside the horizon even with no stretching
    are left out.
    """
    rng = np.random.default_rng(cfg.seed)
    H = cfg.horizon
    extra = cfg.mean_slot_count - 1.0
    out = []
    if cfg.num_users is None:
        counts = rng.poisson(cfg.rate(np.arange(H)))
        uid = 0
        for t in range(H):
            for _ in range(int(counts[t])):
                m = 1 + int(rng.poisson(extra)) if extra > 0 else 1
                req = _draw_user(rng, cfg, uid, t, m)
                uid += 1
                if t + m <= H:
                    out.append(req)
        return out
    weights = cfg.rate(np.arange(H))
    draws = []
    for uid in range(cfg.num_users):
        m = 1 + int(rng.poisson(extra)) if extra > 0 else 1
        m = min(m, H)
        w = weights[: H - m + 1]
        w = w / w.sum() if w.sum() > 0 else np.full(w.size, 1.0 / w.size)
        t = int(rng.choice(w.size, p=w))
        draws.append(_draw_user(rng, cfg, uid, t, m))
    draws.sort(key=lambda r: r.start_slot)
    return draws


@dataclass(frozen=True)
class AdversaryConfig:
    """Worst-case construction knobs.

    ``granularity`` is the demand of each first-phase user; the flood is cut
    into users of ``flood_granularity`` (defaults to ``granularity``).
    ``flood_demand_total`` of None picks the regime's default; 0 disables the
    flood.
    """

    target_rho_star: float = 0.7
    epsilon: float = 1e-3
    granularity: float = 1e-3
    flood_demand_total: Optional[float] = None
    flood_granularity: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.target_rho_star <= 1.0:
            raise ParameterError(f"target_rho_star must lie in (0, 1], got {self.target_rho_star!r}")
        if not 0.0 < self.granularity <= 1.0:
            raise ParameterError("granularity must lie in (0, 1]")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        if self.flood_demand_total is not None and self.flood_demand_total < 0:
            raise ParameterError("flood_demand_total must be >= 0")

    @property
    def flood_size(self) -> float:
        return self.flood_granularity if self.flood_granularity is not None else self.granularity


def _units(x: float, g: float) -> int:
    return int(math.floor(x / g + 1e-9))


def _phase_one(params: PricingParams, units: int, g: float, start_id: int = 0) -> tuple:
    """Users of size ``g`` valued at exactly their quote, filling ``units`` steps."""
    ledger = ResourceLedger(1, 1, params)
    out = []
    for k in range(units):
        req = JobRequest(start_id + k, (g,), 0.0)
        q = quote_multi_slot(ledger, req)
        if not q.feasible:
            raise ParameterError("first phase ran out of capacity before reaching the target")
        out.append(JobRequest(start_id + k, (g,), q.total_price))
        ledger.commit((g,), q.chosen_slots)
    return out, ledger


def _worstcase_one_resource(params, adv: AdversaryConfig, flood_total: float) -> list:
    g = adv.granularity
    k = max(1, round(adv.target_rho_star / g))
    phase1, ledger = _phase_one(params, k, g)
    rho = ledger.rho()
    if flood_total <= 0:
        return phase1
    if rho >= 1.0 - 1e-12:
        raise ParameterError("target utilization of 1 leaves no room for a priced flood")
    if rho <= params.flat_end + 1e-12:
        raise ParameterError(
            f"target {adv.target_rho_star} lies in the flat region (<= {params.flat_end:.6g}); "
            "the flood would be accepted"
        )
    unit = max(unit_price(rho, params) - adv.epsilon, params.p_floor)
    gf = adv.flood_size
    n = _units(flood_total, gf)
    flood = [JobRequest(k + j, (gf,), unit * gf) for j in range(n)]
    return phase1 + flood


def gen_worstcase_single(params: PricingParams, adv: AdversaryConfig) -> list:
    """Large-demand worst case: accepted prefix up to ``rho*``, then a flood of
    total demand 1 priced just under ``P(rho*)``."""
    if params.regime is not Regime.LARGE_DEMAND:
        raise ParameterError("single-resource worst case needs beta >= 1; use gen_worstcase_mid")
    total = 1.0 if adv.flood_demand_total is None else adv.flood_demand_total
    return _worstcase_one_resource(params, adv, total)


def gen_worstcase_mid(params: PricingParams, adv: AdversaryConfig) -> list:
    """Worst case for 0 < beta < 1: the flood totals ``1 + beta - rho*`` so the
    whole sequence stays within ``1 + beta``."""
    if params.regime not in (Regime.MID_DEMAND, Regime.LOW_DEMAND):
        raise ParameterError("gen_worstcase_mid needs 0 < beta < 1")
    g = adv.granularity
    k = max(1, round(adv.target_rho_star / g))
    room = 1.0 + params.beta - k * g
    total = room if adv.flood_demand_total is None else min(adv.flood_demand_total, room)
    return _worstcase_one_resource(params, adv, max(total, 0.0))


def gen_worstcase_multi(
    params: PricingParams,
    num_resources: int,
    adv: AdversaryConfig,
    variant: str = "omega2",
) -> list:
    """Multi-resource worst cases (single slot).

    ``omega2``: the first phase fills one resource to the end of its flat
    region; the flood asks for ``min(1, 1+beta)`` of every resource at unit
    value ``p_floor - epsilon`` and is priced out.
    ``omega3``: the first phase drives one resource to exhaustion at its
    quoted prices; the flood asks for every resource at unit value
    ``p_ceil`` and is blocked by the exhausted resource.
    ``balanced``: first-phase users ask for equal shares of every resource
    (perfect balance), driving all of them to ``rho*``; the flood is priced
    just under the quote.

    With one resource the single-resource construction is returned.
    """
    if num_resources < 1:
        raise ParameterError("num_resources must be >= 1")
    if num_resources == 1:
        if params.regime is Regime.LARGE_DEMAND:
            return gen_worstcase_single(params, adv)
        return gen_worstcase_mid(params, adv)
    R = num_resources
    g, gf = adv.granularity, adv.flood_size
    share = min(1.0, 1.0 + params.beta)
    if share <= 0:
        raise ParameterError("slack regime has no worst case")
    ledger = ResourceLedger(R, 1, params)
    out = []

    def first_phase(units, footprint, size=g):
        for k in range(units):
            d = tuple(size * f for f in footprint)
            q = quote_multi_slot(ledger, JobRequest(len(out), d, 0.0))
            if not q.feasible:
                raise ParameterError("first phase ran out of capacity")
            out.append(JobRequest(len(out), d, q.total_price))
            ledger.commit(d, q.chosen_slots)

    one = tuple(1.0 if r == 0 else 0.0 for r in range(R))
    if variant == "omega2":
        # Flat prices make user size irrelevant here: split the flat region
        # (rounded up to a 1e-4 grid) into equal users no larger than g.
        target = math.ceil(params.flat_end * 1e4 - 1e-6) / 1e4
        n = max(1, math.ceil(target / g - 1e-9))
        first_phase(n, one, target / n)
        unit = params.p_floor - adv.epsilon
    elif variant == "omega3":
        first_phase(round(1.0 / g), one)
        unit = params.p_ceil
    elif variant == "balanced":
        first_phase(max(1, round(adv.target_rho_star / g)), (1.0,) * R)
        rho = ledger.rho(0, 0)
        if rho <= params.flat_end + 1e-12:
            raise ParameterError("balanced target lies in the flat region")
        unit = max(unit_price(rho, params) - adv.epsilon, params.p_floor)
        share = min(share, 1.0 + params.beta - rho) if params.beta < 1 else share
    else:
        raise ParameterError(f"unknown variant {variant!r}")
    if unit <= 0:
        raise ParameterError("epsilon must be below p_floor")
    for _ in range(_units(share, gf)):
        d = (gf,) * R
        out.append(JobRequest(len(out), d, unit * gf * R))
    return out


@dataclass(frozen=True)
class SmallRandomConfig:
    """Small grid-aligned instances sized for the exact oracles.

    Valuations are multiples of 2**-10 so that float sums of any subset are
    exact and welfare comparisons between solvers can be strict.
    """

    num_users: int = 10
    num_resources: int = 1
    horizon: int = 1
    max_slots: int = 1
    lam: float = 1.0
    demand_low: float = 0.05
    demand_high: float = 0.5
    demand_step: float = 0.05
    p_floor: float = 1.0
    p_ceil: float = 10.0
    seed: int = 0


SMALL_MULTI_SLOT_USERS = 15
SMALL_SINGLE_SLOT_USERS = 25


def gen_small_random(cfg: SmallRandomConfig) -> list:
    multi_slot = cfg.horizon > 1
    cap = SMALL_MULTI_SLOT_USERS if multi_slot else SMALL_SINGLE_SLOT_USERS
    if cfg.num_users > cap:
        raise OracleCapacityError(f"{cfg.num_users} users exceed the exact-oracle budget of {cap}")
    if multi_slot and (cfg.horizon > 30 or window_size(cfg.max_slots, cfg.lam) > 10):
        raise OracleCapacityError("horizon or window exceeds the exact-oracle budget")
    if cfg.max_slots > cfg.horizon:
        raise ParameterError("max_slots exceeds the horizon")
    rng = np.random.default_rng(cfg.seed)
    lo = round(cfg.demand_low / cfg.demand_step)
    hi = round(cfg.demand_high / cfg.demand_step)
    per_unit = round(1.0 / cfg.demand_step)
    out = []
    for uid in range(cfg.num_users):
        m = int(rng.integers(1, cfg.max_slots + 1))
        t = int(rng.integers(0, cfg.horizon - m + 1))
        demands = tuple(int(k) / per_unit for k in rng.integers(lo, hi + 1, cfg.num_resources))
        total = m * math.fsum(demands)
        unit = rng.uniform(cfg.p_floor, cfg.p_ceil)
        v = math.floor(unit * total * 1024) / 1024
        while v < cfg.p_floor * total:
            v += 1 / 1024
        out.append(JobRequest(uid, demands, v, m, t))
    return out


# -- request files -----------------------------------------------------------


def _fmt_id(x) -> str:
    s = str(x)
    if "," in s or "\n" in s:
        raise MalformedRequest(f"id {s!r} contains a separator")
    return s


def dumps_requests(requests: Sequence[JobRequest], comment: str = "") -> str:
    """Serialize to the line format. Floats use ``repr`` so reading back is bit-exact."""
    requests = list(requests)
    R = len(requests[0].demands) if requests else 1
    buf = io.StringIO()
    buf.write(f"# {FORMAT_TAG}\n")
    for line in comment.splitlines():
        buf.write(f"# {line}\n")
    buf.write(f"# resources: {R}\n")
    cols = ["id", "arrival_slot", "slot_count", "valuation"] + [f"d_{r + 1}" for r in range(R)]
    buf.write(",".join(cols) + "\n")
    for req in requests:
        if len(req.demands) != R:
            raise MalformedRequest(f"request {req.id}: expected {R} demands")
        fields = [_fmt_id(req.id), str(req.start_slot), str(req.slot_count), repr(float(req.valuation))]
        fields += [repr(float(d)) for d in req.demands]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def _parse_id(s: str):
    try:
        return int(s)
    except ValueError:
        return s


def loads_requests(text: str) -> list:
    out = []
    header = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if header is None:
            header = parts
            if header[:4] != ["id", "arrival_slot", "slot_count", "valuation"] or len(header) < 5:
                raise MalformedRequest(f"line {lineno}: bad header {line!r}")
            continue
        if len(parts) != len(header):
            raise MalformedRequest(f"line {lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            out.append(
                JobRequest(
                    _parse_id(parts[0]),
                    tuple(float(x) for x in parts[4:]),
                    float(parts[3]),
                    int(parts[2]),
                    int(parts[1]),
                )
            )
        except ValueError as exc:
            raise MalformedRequest(f"line {lineno}: {exc}") from exc
    return out


def write_requests(path: Union[str, os.PathLike], requests: Iterable[JobRequest], comment: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_requests(list(requests), comment))


def read_requests(path: Union[str, os.PathLike]) -> list:
    with open(path, encoding="utf-8") as fh:
        return loads_requests(fh.read())
