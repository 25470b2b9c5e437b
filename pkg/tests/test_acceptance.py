"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL criterion N: ...`` line; the lines
are repeated in the pytest terminal summary.
"""

import math
from itertools import combinations

import mpmath
import numpy as np
import pytest

from postedprice import oracle
from postedprice.engine import CAPACITY_TOL, EngineConfig, JobRequest, ResourceLedger, quote_multi_slot, run_sequence
from postedprice.experiments import PRESETS, sweep
from postedprice.pricing import (
    EXHAUSTED,
    PricingParams,
    _alpha_low,
    _alpha_mid,
    beta_zero,
    competitive_alpha,
    lambert_w0,
    unit_price,
    unit_price_array,
)
from postedprice.tuner import Scenario, TuneSchedule, pattern_search
from postedprice.workload import (
    AdversaryConfig,
    SmallRandomConfig,
    StochasticConfig,
    gen_small_random,
    gen_worstcase_mid,
    gen_worstcase_single,
)

mpmath.mp.dps = 40


def test_criterion_1_lambert_w(acceptance):
    b0 = beta_zero(10)
    xs = np.concatenate([[0.0], np.logspace(-12, 12, 2000)])
    worst = max(abs(w * math.exp(w) - x) / max(1.0, x) for x in xs for w in [lambert_w0(x)])
    ok = abs(b0 - 0.399) <= 1e-3 and worst <= 1e-12
    acceptance(1, ok, f"beta0(10)={b0:.6f}, max scaled W residual {worst:.2e} over {xs.size} points")


def _mp_alpha(gamma, beta):
    L = mpmath.log(gamma)
    b = mpmath.mpf(beta)
    b0 = mpmath.lambertw(L).real / L
    if b > b0:
        return (L + 1) / (b - mpmath.log(b))
    return L / ((1 + b) * L - mpmath.lambertw(b * mpmath.mpf(gamma) ** (1 + b) * L).real)


def test_criterion_2_constants(acceptance):
    lg = math.log(10)
    a1 = competitive_alpha(10, 2).alpha
    a2 = competitive_alpha(10, 0.5).alpha
    a3 = competitive_alpha(10, 0.2).alpha
    e1 = abs(a1 - (lg + 1))
    e2 = abs(a2 - float(_mp_alpha(10, 0.5)))
    e3 = abs(a3 - float(_mp_alpha(10, 0.2)))
    b0 = beta_zero(10)
    # both closed forms evaluated at the regime boundaries
    jump_b0 = abs(_alpha_mid(lg, b0) - _alpha_low(lg, b0))
    jump_1 = abs(_alpha_mid(lg, 1.0) - (lg + 1))
    ok = e1 <= 1e-12 and e2 <= 1e-9 and e3 <= 1e-9 and jump_b0 <= 1e-9 and jump_1 <= 1e-9
    acceptance(2, ok, f"alpha1 err {e1:.1e}, alpha2={a2:.9f} err {e2:.1e}, alpha3={a3:.9f} err {e3:.1e}, "
                      f"jump at beta0 {jump_b0:.1e}, at 1 {jump_1:.1e}")


def test_criterion_3_price_properties(acceptance):
    rng = np.random.default_rng(2024)
    grid = np.arange(10_000) / 10_000
    problems = []
    for k in range(50):
        gamma = float(np.exp(rng.uniform(np.log(1.5), np.log(100))))
        beta = float(rng.uniform(-0.5, 3.0)) if k % 5 else float(rng.uniform(0.01, beta_zero(gamma)))
        cost = float(rng.choice([0.0, rng.uniform(0, 2)]))
        p = PricingParams.from_gamma(gamma, beta, cost, float(rng.uniform(0.5, 2)))
        prices = unit_price_array(grid, p)
        if np.any(np.diff(prices) < 0):
            problems.append(f"non-monotone at gamma={gamma:.3g}, beta={beta:.3g}")
        for b in p.breakpoints():
            left = unit_price(math.nextafter(b, 0), p)
            right = unit_price(math.nextafter(b, 1), p)
            if abs(right - left) > 1e-9 * right:
                problems.append(f"jump {right - left:.2e} at {b:.6f}")
        # largest step must be explained by the slope on the grid
        steps = np.diff(prices)
        slope = np.gradient(prices, grid)
        if np.any(steps > 2 * np.maximum(slope[:-1], slope[1:]) * 1e-4 + 1e-12):
            problems.append(f"grid jump at gamma={gamma:.3g}, beta={beta:.3g}")
        if unit_price(0.0, p) != p.p_floor + p.op_cost:
            problems.append("P(0) != p_floor + c")
        if beta > 0:
            top = unit_price(math.nextafter(1.0, 0), p)
            if abs(top - (p.p_ceil + p.op_cost)) > 1e-9 * (p.p_ceil + p.op_cost):
                problems.append(f"P(1-)={top!r} at gamma={gamma:.3g}, beta={beta:.3g}")
        if unit_price(1.0, p) is not EXHAUSTED:
            problems.append("rho=1 not exhausted")
    acceptance(3, not problems, "50 random (gamma, beta, c) on a 1e4 grid" + (f": {problems[:3]}" if problems else ""))


def _ratio(reqs, params):
    cfg = EngineConfig(1, 1, params)
    return oracle.solve(reqs, cfg).welfare_opt / run_sequence(reqs, cfg).welfare_online


@pytest.mark.slow
def test_criterion_4_tightness(acceptance):
    adv_big = AdversaryConfig(0.7, 1e-3, 1e-4)
    adv_mid = AdversaryConfig(0.9, 1e-3, 1e-4)
    rows = []
    p1 = PricingParams.from_gamma(10, 2)
    r1 = _ratio(gen_worstcase_single(p1, adv_big), p1)
    rows.append(("alpha1", r1, p1.alpha, 0.98 * p1.alpha <= r1 <= 1.01 * p1.alpha))
    for beta, name in ((0.5, "alpha2"), (0.2, "alpha3")):
        p = PricingParams.from_gamma(10, beta)
        r = _ratio(gen_worstcase_mid(p, adv_mid), p)
        rows.append((name, r, p.alpha, 0.95 * p.alpha <= r <= 1.02 * p.alpha))
    ok = all(r[3] for r in rows)
    acceptance(4, ok, ", ".join(f"{n} measured {r:.5f} vs {a:.5f}" for n, r, a, _ in rows))


@pytest.mark.slow
def test_criterion_5_bound_soundness(acceptance):
    rng = np.random.default_rng(55)
    violations, worst = 0, 0.0
    regimes = set()
    for seed in range(200):
        rel = float(rng.uniform(0.5, 3.0))
        reqs, total = [], 0.0
        while total < rel:
            d = int(rng.integers(1, 201)) / 10_000  # at most 0.02 on the 1e-4 grid
            reqs.append(JobRequest(len(reqs), (d,), 0.0))
            total += d
        reqs = [JobRequest(r.id, r.demands, float(rng.uniform(1, 10)) * r.demands[0]) for r in reqs]
        beta = math.fsum(r.demands[0] for r in reqs) - 1.0
        params = PricingParams.from_gamma(10, beta)
        regimes.add(params.regime.value)
        cfg = EngineConfig(1, 1, params)
        v_ol = run_sequence(reqs, cfg).welfare_online
        v_opt = oracle.solve(reqs, cfg).welfare_opt
        dmax = max(r.demands[0] for r in reqs)
        ratio = v_opt / v_ol
        worst = max(worst, ratio / (params.alpha * (1 + 5 * dmax)))
        violations += ratio > params.alpha * (1 + 5 * dmax)
    acceptance(5, violations == 0, f"200 instances ({', '.join(sorted(regimes))}), {violations} violations, "
                                   f"max ratio/bound {worst:.4f}")


def test_criterion_6_greedy_exact(acceptance):
    rng = np.random.default_rng(66)
    params = (PricingParams.from_gamma(10, 2), PricingParams.from_gamma(10, 0.5), PricingParams.from_gamma(4, 0.2))
    mismatches = 0
    for _ in range(1000):
        w = int(rng.integers(1, 13))
        m = int(rng.integers(1, w + 1))
        R = int(rng.integers(1, 4))
        led = ResourceLedger(R, w, params[:R])
        led.utilization[:] = rng.choice([0.0, 0.1, 0.35, 0.5, 0.8, 0.93, 1.0], size=(R, w))
        d = tuple(float(x) for x in rng.choice([0.0, 0.02, 0.05, 0.1], size=R))
        if sum(d) == 0:
            d = (0.05,) + d[1:]
        q = quote_multi_slot(led, JobRequest(0, d, 1.0, m, 0), w / m)
        cost = {}
        for t in range(w):
            rho = led.utilization[:, t]
            if all(di == 0 or (rho[r] < 1 and rho[r] + di <= 1 + CAPACITY_TOL) for r, di in enumerate(d)):
                cost[t] = math.fsum(di * unit_price(rho[r], params[r]) for r, di in enumerate(d) if di > 0)
        if len(cost) < m:
            mismatches += q.feasible
            continue
        best = min(math.fsum(cost[t] for t in c) for c in combinations(sorted(cost), m))
        got = math.fsum(cost[t] for t in q.chosen_slots) if q.feasible else math.inf
        mismatches += got != best
    acceptance(6, mismatches == 0, f"1000 windows up to 12 slots, {mismatches} mismatches")


@pytest.mark.slow
def test_criterion_7_oracle_cross_check(acceptance):
    counts = {}
    for s in range(200):
        reqs = gen_small_random(SmallRandomConfig(num_users=15, seed=s))
        counts["basic"] = counts.get("basic", 0) + (
            oracle.optimal_basic(reqs).welfare_opt != oracle.exhaustive_basic(reqs).welfare_opt)
        reqs = gen_small_random(SmallRandomConfig(num_users=12, num_resources=3, seed=s))
        counts["multi-resource"] = counts.get("multi-resource", 0) + (
            oracle.optimal_multi_resource(reqs).welfare_opt != oracle.exhaustive_multi_resource(reqs).welfare_opt)
        cfg = SmallRandomConfig(num_users=12, num_resources=2, horizon=6, max_slots=3, lam=1.2,
                                demand_low=0.1, seed=s)
        reqs = gen_small_random(cfg)
        a = oracle.optimal_multi_slot(reqs, cfg.lam, cfg.horizon)
        b = oracle.exhaustive_multi_slot(reqs, cfg.lam, cfg.horizon)
        bad = a.welfare_opt != b.welfare_opt or oracle.check_solution(reqs, a, cfg.lam, cfg.horizon)
        counts["multi-slot"] = counts.get("multi-slot", 0) + bool(bad)
    acceptance(7, not any(counts.values()),
               "200 instances per class, mismatches " + ", ".join(f"{k}={v}" for k, v in counts.items()))


def _spread(rows):
    r = [row.ratio for row in rows]
    return max(r) - min(r)


@pytest.mark.slow
def test_criterion_8_qualitative_sweeps(acceptance):
    checks = []
    demand = sweep("demand", PRESETS["demand"])
    low = [r for r in demand if r.value <= 1.0]
    high = [r for r in demand if r.value >= 1.0]
    a = all(abs(r.ratio - 1.0) <= 0.02 for r in low) and all(
        x.ratio < y.ratio for x, y in zip(high, high[1:]))
    checks.append(("a", a, "demand ratios " + " ".join(f"{r.value:g}:{r.ratio:.3f}" for r in demand)))
    res = sweep("resources", PRESETS["resources"])
    checks.append(("b", _spread(res) < 0.35, f"resource spread {_spread(res):.3f}"))
    slots = sweep("slots", PRESETS["slots"])
    checks.append(("c", _spread(slots) < 0.2, f"slot spread {_spread(slots):.3f}"))
    lam = sweep("lambda", PRESETS["lambda"])
    g1, g2 = lam[1].v_ol - lam[0].v_ol, lam[2].v_ol - lam[1].v_ol
    checks.append(("d", g1 > g2, f"lambda gains {g1:.3f} then {g2:.3f}"))
    amp = sweep("amplitude", PRESETS["amplitude"])
    dec = all(x.v_ol > y.v_ol and x.v_opt > y.v_opt for x, y in zip(amp, amp[1:]))
    band = max(abs(r.ratio - amp[0].ratio) for r in amp)
    checks.append(("e", dec and band <= 0.3, f"amplitude V_ol/V_opt decreasing={dec}, ratio band {band:.3f}"))
    for name, rows in (("demand", demand), ("resources", res), ("slots", slots), ("lambda", lam), ("amplitude", amp)):
        assert all(r.seeds >= 50 and r.unsolved == 0 for r in rows), name
    ok = all(c[1] for c in checks)
    acceptance(8, ok, "; ".join(f"({n}) {'ok' if c else 'FAILED'} {d}" for n, c, d in checks))


@pytest.mark.slow
def test_criterion_9_tuner(acceptance):
    scenario = Scenario.stochastic("excess", StochasticConfig(horizon=1, num_users=75))
    start = PricingParams.from_gamma(10, 5)
    res = pattern_search(scenario, start, TuneSchedule())
    best = [r.best_objective for r in res.trajectory]
    monotone = all(x <= y for x, y in zip(best, best[1:]))
    ok = res.best_objective > res.initial_objective and monotone
    acceptance(9, ok, f"mean welfare {res.initial_objective:.4f} -> {res.best_objective:.4f}, "
                      f"trace non-decreasing={monotone}, tuned beta={res.params.beta:.3g}, "
                      f"p_floor={res.params.p_floor:.3g}, p_ceil={res.params.p_ceil:.3g}")
