"""Derivative-free tuning of pricing parameters against empirical welfare.

The search is a compass (coordinate) pattern search: every iteration probes
each tuned parameter at plus and minus the current step and keeps a probe
only if it strictly raises the objective. Steps shrink geometrically. The
objective is mean online welfare over a fixed set of seeded instances, so
every candidate is scored on the same draws.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import oracle
from .engine import EngineConfig, run_sequence
from .errors import ParameterError
from .pricing import PricingParams
from .workload import StochasticConfig, gen_stochastic

__all__ = [
    "Scenario",
    "Evaluation",
    "TuneSchedule",
    "TrajectoryRow",
    "TuneResult",
    "empirical_ratio",
    "pattern_search",
    "BETA_MIN",
    "BETA_MAX",
]

BETA_MIN = -0.9
BETA_MAX = 10.0
_OPEN_EDGE = 1e-6


@dataclass(frozen=True)
class Scenario:
    """A family of instances indexed by seed, plus the market shape to run them on."""

    name: str
    builder: Callable[[int], list]
    num_resources: int = 1
    horizon: int = 1
    lam: float = 1.0

    def instance(self, seed: int) -> list:
        return self.builder(seed)

    def config(self, params: PricingParams) -> EngineConfig:
        return EngineConfig(self.num_resources, self.horizon, params, self.lam)

    @classmethod
    def stochastic(cls, name: str, cfg: StochasticConfig, lam: float = 1.0) -> "Scenario":
        def build(seed: int) -> list:
            return gen_stochastic(dataclasses.replace(cfg, seed=seed))

        return cls(name, build, cfg.num_resources, cfg.horizon, lam)


@dataclass(frozen=True)
class Evaluation:
    mean_ratio: float
    mean_welfare: float
    mean_opt: float
    trials: int


def _ratio(opt: float, online: float) -> float:
    if online > 0:
        return opt / online
    return 1.0 if opt <= 0 else math.inf


def empirical_ratio(
    scenario: Scenario,
    params: PricingParams,
    trials: int = 10,
    seed: int = 0,
    with_oracle: bool = True,
) -> Evaluation:
    """Mean offline/online ratio and mean online welfare over seeds
    ``seed .. seed + trials - 1``.

    With ``with_oracle=False`` only welfare is computed (no size limit) and the
    ratio fields are NaN.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    cfg = scenario.config(params)
    welfare, opts, ratios = [], [], []
    for k in range(trials):
        reqs = scenario.instance(seed + k)
        online = run_sequence(reqs, cfg).welfare_online
        welfare.append(online)
        if with_oracle:
            opt = oracle.solve(reqs, cfg).welfare_opt
            opts.append(opt)
            ratios.append(_ratio(opt, online))
    mean_w = math.fsum(welfare) / trials
    if not with_oracle:
        return Evaluation(math.nan, mean_w, math.nan, trials)
    return Evaluation(math.fsum(ratios) / trials, mean_w, math.fsum(opts) / trials, trials)


TUNABLE = ("beta", "p_floor", "p_ceil")


@dataclass(frozen=True)
class TuneSchedule:
    iterations: int = 20
    initial_perturbation: dict = field(
        default_factory=lambda: {"beta": 1.0, "p_floor": 0.5, "p_ceil": 1.0}
    )
    decay: float = 0.7
    trials_per_eval: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if not 0.0 < self.decay < 1.0:
            raise ParameterError(f"decay must lie in (0, 1), got {self.decay!r}")
        if self.trials_per_eval < 1:
            raise ParameterError("trials_per_eval must be >= 1")
        for k, v in self.initial_perturbation.items():
            if k not in TUNABLE:
                raise ParameterError(f"cannot tune {k!r}; choose from {TUNABLE}")
            if not v > 0:
                raise ParameterError(f"perturbation for {k} must be positive")

    def step(self, name: str, iteration: int) -> float:
        return self.initial_perturbation[name] * self.decay**iteration


@dataclass(frozen=True)
class TrajectoryRow:
    iteration: int
    parameter: str
    step: float
    beta: float
    p_floor: float
    p_ceil: float
    objective: float
    best_objective: float
    accepted: bool


@dataclass
class TuneResult:
    params: PricingParams
    initial_objective: float
    best_objective: float
    trajectory: list
    final_steps: dict

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "parameter", "step", "beta", "p_floor", "p_ceil",
                    "objective", "best_objective", "accepted"])
        for r in self.trajectory:
            w.writerow([r.iteration, r.parameter, f"{r.step:.9g}", f"{r.beta:.9g}",
                        f"{r.p_floor:.9g}", f"{r.p_ceil:.9g}", f"{r.objective:.9g}",
                        f"{r.best_objective:.9g}", int(r.accepted)])
        return buf.getvalue()


def _project(params: PricingParams, name: str, value: float) -> PricingParams:
    """Move one coordinate and clip into the admissible box."""
    beta, lo, hi = params.beta, params.p_floor, params.p_ceil
    if name == "beta":
        beta = min(max(value, BETA_MIN + _OPEN_EDGE), BETA_MAX)
    elif name == "p_floor":
        lo = min(max(value, _OPEN_EDGE * hi), hi)
    elif name == "p_ceil":
        hi = max(value, lo)
    return PricingParams(lo, hi, beta, params.op_cost)


def pattern_search(
    scenario: Scenario,
    initial: PricingParams,
    schedule: TuneSchedule = TuneSchedule(),
    objective: Optional[Callable[[PricingParams], float]] = None,
) -> TuneResult:
    """Compass search maximizing mean online welfare.

    ``objective`` overrides the default (mean welfare over
    ``schedule.trials_per_eval`` seeded instances).
    """
    if objective is None:
        instances = [scenario.instance(schedule.seed + k) for k in range(schedule.trials_per_eval)]

        def objective(p: PricingParams) -> float:
            cfg = scenario.config(p)
            return math.fsum(run_sequence(r, cfg).welfare_online for r in instances) / len(instances)

    current = _project(initial, "beta", initial.beta)
    best = objective(current)
    start = best
    rows = []
    names = [n for n in TUNABLE if n in schedule.initial_perturbation]
    for it in range(schedule.iterations):
        for name in names:
            step = schedule.step(name, it)
            base = getattr(current, name)
            for sign in (1.0, -1.0):
                cand = _project(current, name, base + sign * step)
                if cand == current:
                    continue
                val = objective(cand)
                improved = val > best
                if improved:
                    current, best = cand, val
                rows.append(TrajectoryRow(it, name, step, cand.beta, cand.p_floor, cand.p_ceil,
                                          val, best, improved))
                if improved:
                    break
    final = {n: schedule.step(n, schedule.iterations) for n in names}
    return TuneResult(current, start, best, rows, final)
