"""Command-line entry point.

Every command writes CSV (UTF-8, header row, floats at 9 significant digits)
to ``--out`` or stdout. With ``--out`` a ``<out>.meta.json`` sidecar records
the seed, the resolved options and the package version. Wall-clock timings
are only emitted with ``--timing`` so that repeated runs are byte-identical.

A JSON file passed to ``--config`` supplies defaults: top-level keys apply to
every command, a nested object under a command name applies to that command
only. Flags given on the command line always win.

Exit codes: 0 success, 2 validation error, 3 oracle capacity error.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import sys
from typing import Optional

import click

from . import __version__, experiments, kernels, oracle, tuner, workload
from .engine import EngineConfig, run_sequence
from .errors import OracleCapacityError, PostedPriceError
from .pricing import EXHAUSTED, PricingParams, Regime, ratio_curve, unit_price

EXIT_VALIDATION = 2
EXIT_CAPACITY = 3


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.9g}"
    return str(x)


def _emit(ctx: click.Context, header, rows, meta: Optional[dict] = None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    out = ctx.params.get("out")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        record = {
            "command": ctx.info_name,
            "version": __version__,
            "backend": kernels.BACKEND,
            "options": {k: v for k, v in sorted(ctx.params.items()) if k not in ("out", "timing")},
        }
        if meta:
            record.update(meta)
        with open(f"{out}.meta.json", "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    else:
        click.echo(buf.getvalue(), nl=False)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


class _Group(click.Group):
    """Maps library errors to exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except OracleCapacityError as exc:
            _fail(EXIT_CAPACITY, str(exc))
        except (PostedPriceError, ValueError) as exc:
            _fail(EXIT_VALIDATION, str(exc))


_ALIASES = {"lambda": "lam", "requests": "requests_path"}


def _key(name: str) -> str:
    name = name.replace("-", "_")
    return _ALIASES.get(name, name)


def _load_config(ctx, _param, path):
    if not path:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(f"cannot read config: {exc}") from exc
    if not isinstance(raw, dict):
        raise click.BadParameter("config must be a JSON object")
    shared = {_key(k): v for k, v in raw.items() if not isinstance(v, dict)}
    default_map = {}
    for name in cli.commands:
        section = {_key(k): v for k, v in raw.get(name, {}).items()}
        default_map[name] = {**shared, **section}
    ctx.default_map = default_map
    return path


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="postedprice")
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config,
              is_eager=True, expose_value=False, help="JSON file of option defaults.")
def cli():
    """Posted pricing for online cloud resource allocation."""


def _market_options(f):
    opts = [
        click.option("--gamma", type=float, default=10.0, show_default=True, help="p_ceil / p_floor."),
        click.option("--beta", type=float, default=1.0, show_default=True, help="Scarcity level."),
        click.option("--cost", type=float, default=0.0, show_default=True, help="Operational cost per unit."),
        click.option("--p-floor", type=float, default=1.0, show_default=True),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


_out = click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV output path.")
_seed = click.option("--seed", type=int, default=0, show_default=True)


def _params(gamma, beta, cost, p_floor) -> PricingParams:
    return PricingParams.from_gamma(gamma, beta, cost, p_floor)


@cli.command()
@_market_options
@click.option("--rho", type=float, multiple=True, default=(0.0,), show_default=True,
              help="Utilization level; repeatable.")
@_out
@click.pass_context
def price(ctx, gamma, beta, cost, p_floor, rho, out):
    """Unit price at the given utilization levels."""
    p = _params(gamma, beta, cost, p_floor)
    rows = []
    for r in rho:
        value = unit_price(r, p)
        rows.append((r, "EXHAUSTED" if value is EXHAUSTED else value, p.alpha, p.regime.value))
    _emit(ctx, ["rho", "price", "alpha", "regime"], rows)


@cli.command()
@_market_options
@click.option("--points", type=int, default=20, show_default=True, help="Grid points on [0, 1).")
@_out
@click.pass_context
def curve(ctx, gamma, beta, cost, p_floor, points, out):
    """Price curve with worst-case online and offline welfare per final utilization."""
    if points < 1:
        raise click.BadParameter("points must be >= 1", param_hint="--points")
    p = _params(gamma, beta, cost, p_floor)
    free = p.without_cost()
    rows = []
    for k in range(points):
        rho = k / points
        pt = ratio_curve(rho, free)
        rows.append((rho, unit_price(rho, p), pt.v_ol, pt.v_opt_sup, pt.ratio))
    _emit(ctx, ["rho", "price", "v_ol", "v_opt_sup", "ratio"], rows)


def _requests_from_options(requests_path, seed, users, resources, horizon, arrival_rate,
                           amplitude, granularity, p_floor, gamma, mean_slots):
    if requests_path:
        return workload.read_requests(requests_path)
    cfg = workload.StochasticConfig(
        arrival_rate=arrival_rate, rate_amplitude=amplitude,
        period=100.0 if horizon >= 100 else float(horizon),
        mean_slot_count=mean_slots, p_floor=p_floor, p_ceil=p_floor * gamma,
        horizon=horizon, num_resources=resources, seed=seed, num_users=users,
        granularity=granularity,
    )
    return workload.gen_stochastic(cfg)


def _workload_options(f):
    opts = [
        click.option("--requests", "requests_path", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="Read the request sequence from a file."),
        click.option("--lambda", "lam", type=float, default=1.0, show_default=True, help="Window stretch."),
        click.option("--horizon", type=int, default=1, show_default=True),
        click.option("--resources", type=int, default=1, show_default=True),
        click.option("--arrival-rate", type=float, default=20.0, show_default=True),
        click.option("--amplitude", type=float, default=0.0, show_default=True),
        click.option("--users", type=int, default=None, help="Fixed user count instead of Poisson arrivals."),
        click.option("--mean-slots", type=float, default=1.0, show_default=True),
        click.option("--granularity", type=float, default=1e-4, show_default=True),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@cli.command()
@_market_options
@_workload_options
@click.option("--save-requests", type=click.Path(dir_okay=False), default=None)
@_seed
@_out
@click.pass_context
def simulate(ctx, gamma, beta, cost, p_floor, requests_path, lam, horizon, resources, arrival_rate,
             amplitude, users, mean_slots, granularity, save_requests, seed, out):
    """Run the online engine on a stochastic or saved workload; one row per request."""
    reqs = _requests_from_options(requests_path, seed, users, resources, horizon, arrival_rate,
                                  amplitude, granularity, p_floor, gamma, mean_slots)
    if save_requests:
        workload.write_requests(save_requests, reqs)
    cfg = EngineConfig(resources, horizon, _params(gamma, beta, cost, p_floor), lam)
    trace = run_sequence(reqs, cfg)
    rows = [
        (d.request_id, r.start_slot, int(d.accepted), d.price_paid, d.valuation,
         " ".join(map(str, d.slots)), d.reason or "")
        for r, d in zip(reqs, trace.decisions)
    ]
    _emit(ctx, ["id", "arrival_slot", "accepted", "price_paid", "valuation", "slots", "reason"], rows,
          {"welfare_online": trace.welfare_online, "revenue": trace.revenue})
    click.echo(f"welfare={fmt(trace.welfare_online)} revenue={fmt(trace.revenue)} "
               f"accepted={trace.num_accepted}/{len(reqs)}", err=True)


def _small(seed, users, resources, horizon, lam, max_slots):
    return workload.gen_small_random(workload.SmallRandomConfig(
        num_users=users, num_resources=resources, horizon=horizon,
        max_slots=max_slots, lam=lam, seed=seed))


@cli.command(name="oracle")
@click.option("--requests", "requests_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--lambda", "lam", type=float, default=1.0, show_default=True)
@click.option("--horizon", type=int, default=1, show_default=True)
@click.option("--resources", type=int, default=1, show_default=True)
@click.option("--users", type=int, default=10, show_default=True)
@click.option("--max-slots", type=int, default=1, show_default=True)
@click.option("--granularity", type=float, default=oracle.DEFAULT_GRANULARITY, show_default=True)
@_seed
@_out
@click.pass_context
def oracle_cmd(ctx, requests_path, lam, horizon, resources, users, max_slots, granularity, seed, out):
    """Exact offline optimum; one row per chosen request."""
    reqs = (workload.read_requests(requests_path) if requests_path
            else _small(seed, users, resources, horizon, lam, max_slots))
    cfg = EngineConfig(resources, horizon, PricingParams(), lam)
    sol = oracle.solve(reqs, cfg, granularity)
    problems = oracle.check_solution(reqs, sol, lam, horizon)
    if problems:
        raise RuntimeError("; ".join(problems))
    rows = [(reqs[i].id, reqs[i].valuation, " ".join(map(str, sol.schedules[i]))) for i in sol.chosen]
    _emit(ctx, ["id", "valuation", "slots"], rows, {"welfare_opt": sol.welfare_opt})
    click.echo(f"welfare_opt={fmt(sol.welfare_opt)} chosen={len(sol.chosen)}/{len(reqs)}", err=True)


@cli.command()
@_market_options
@click.option("--lambda", "lam", type=float, default=1.0, show_default=True)
@click.option("--horizon", type=int, default=1, show_default=True)
@click.option("--resources", type=int, default=1, show_default=True)
@click.option("--users", type=int, default=12, show_default=True)
@click.option("--max-slots", type=int, default=1, show_default=True)
@click.option("--trials", type=int, default=10, show_default=True)
@_seed
@_out
@click.pass_context
def ratio(ctx, gamma, beta, cost, p_floor, lam, horizon, resources, users, max_slots, trials, seed, out):
    """Offline/online welfare ratio on seeded small random instances."""
    p = _params(gamma, beta, cost, p_floor)
    cfg = EngineConfig(resources, horizon, p, lam)
    rows = []
    for s in range(seed, seed + trials):
        reqs = _small(s, users, resources, horizon, lam, max_slots)
        v_ol = run_sequence(reqs, cfg).welfare_online
        v_opt = oracle.solve(reqs, cfg).welfare_opt
        rows.append((s, v_ol, v_opt, v_opt / v_ol if v_ol > 0 else math.nan))
    _emit(ctx, ["seed", "v_ol", "v_opt", "ratio"], rows)


@cli.command()
@click.option("--axis", type=click.Choice(experiments.AXES), required=True)
@click.option("--grid", type=str, default=None, help="Comma-separated axis values.")
@click.option("--gamma", type=float, default=None)
@click.option("--beta", type=float, default=None, help="Fixed beta; default uses each instance's true excess demand.")
@click.option("--cost", type=float, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--resources", type=int, default=None)
@click.option("--users", type=int, default=None)
@click.option("--demand", type=float, default=None, help="Relative total demand.")
@click.option("--mean-slots", type=int, default=None)
@click.option("--amplitude", type=float, default=None)
@click.option("--seeds", type=int, default=None, help="Instances per cell.")
@click.option("--timing", is_flag=True, help="Add a runtime column.")
@_seed
@_out
@click.pass_context
def sweep(ctx, axis, grid, gamma, beta, cost, lam, horizon, resources, users, demand, mean_slots,
          amplitude, seeds, timing, seed, out):
    """One experiment sweep, one row per axis value."""
    overrides = {
        "gamma": gamma, "beta": beta, "op_cost": cost, "lam": lam, "horizon": horizon,
        "num_resources": resources, "num_users": users, "relative_demand": demand,
        "mean_slot_count": mean_slots, "amplitude": amplitude, "seeds": seeds, "seed": seed,
    }
    base = dataclasses.replace(experiments.PRESETS[axis],
                               **{k: v for k, v in overrides.items() if v is not None})
    values = None
    if grid:
        try:
            values = [float(x) for x in grid.split(",") if x.strip()]
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--grid") from exc
    rows = experiments.sweep(axis, base, values)
    header = ["axis", "value", "v_ol", "v_opt", "bound", "ratio", "seeds", "unsolved"]
    if timing:
        header.append("runtime_s")
    out_rows = []
    for r in rows:
        row = [r.axis, r.value, r.v_ol, r.v_opt, r.bound, r.ratio, r.seeds, r.unsolved]
        if timing:
            row.append(r.runtime)
        out_rows.append(row)
    _emit(ctx, header, out_rows, {"base": dataclasses.asdict(base)})


@cli.command()
@click.option("--gamma", type=float, default=10.0, show_default=True)
@click.option("--beta", type=float, default=5.0, show_default=True, help="Initial beta.")
@click.option("--cost", type=float, default=0.0, show_default=True)
@click.option("--p-floor", type=float, default=1.0, show_default=True)
@click.option("--users", type=int, default=75, show_default=True)
@click.option("--demand", type=float, default=0.02, show_default=True, help="Mean per-user demand.")
@click.option("--iterations", type=int, default=20, show_default=True)
@click.option("--decay", type=float, default=0.7, show_default=True)
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--step-beta", type=float, default=1.0, show_default=True)
@click.option("--step-floor", type=float, default=0.5, show_default=True)
@click.option("--step-ceil", type=float, default=1.0, show_default=True)
@_seed
@_out
@click.pass_context
def tune(ctx, gamma, beta, cost, p_floor, users, demand, iterations, decay, trials, step_beta,
         step_floor, step_ceil, seed, out):
    """Pattern search over (beta, p_floor, p_ceil) on a one-slot stochastic scenario.

    Writes the search trajectory; the tuned parameters go to stderr.
    """
    cfg = workload.StochasticConfig(horizon=1, num_users=users, mean_demand=demand,
                                    demand_stddev=demand / 2, p_floor=p_floor,
                                    p_ceil=p_floor * gamma)
    scenario = tuner.Scenario.stochastic("cli", cfg)
    schedule = tuner.TuneSchedule(iterations, {"beta": step_beta, "p_floor": step_floor,
                                               "p_ceil": step_ceil}, decay, trials, seed)
    res = tuner.pattern_search(scenario, _params(gamma, beta, cost, p_floor), schedule)
    rows = [(r.iteration, r.parameter, r.step, r.beta, r.p_floor, r.p_ceil, r.objective,
             r.best_objective, r.accepted) for r in res.trajectory]
    _emit(ctx, ["iteration", "parameter", "step", "beta", "p_floor", "p_ceil", "objective",
                "best_objective", "accepted"], rows,
          {"tuned": dataclasses.asdict(res.params), "initial_objective": res.initial_objective,
           "best_objective": res.best_objective})
    t = res.params
    click.echo(f"beta={fmt(t.beta)} p_floor={fmt(t.p_floor)} p_ceil={fmt(t.p_ceil)} "
               f"welfare {fmt(res.initial_objective)} -> {fmt(res.best_objective)}", err=True)


@cli.command()
@_market_options
@click.option("--rho-star", type=float, default=0.7, show_default=True)
@click.option("--epsilon", type=float, default=1e-3, show_default=True)
@click.option("--granularity", type=float, default=1e-3, show_default=True)
@click.option("--flood-total", type=float, default=None, help="Flood demand; default per regime.")
@click.option("--resources", type=int, default=1, show_default=True)
@click.option("--variant", type=click.Choice(["omega2", "omega3", "balanced"]), default="omega2",
              show_default=True, help="Multi-resource construction (resources > 1).")
@click.option("--save-requests", type=click.Path(dir_okay=False), default=None)
@_out
@click.pass_context
def adversary(ctx, gamma, beta, cost, p_floor, rho_star, epsilon, granularity, flood_total,
              resources, variant, save_requests, out):
    """Worst-case sequence: measured offline/online ratio against the theoretical alpha."""
    p = _params(gamma, beta, cost, p_floor)
    adv = workload.AdversaryConfig(rho_star, epsilon, granularity, flood_total,
                                   None if resources == 1 else 1.0)
    if resources > 1:
        reqs = workload.gen_worstcase_multi(p, resources, adv, variant)
    elif p.regime is Regime.LARGE_DEMAND:
        reqs = workload.gen_worstcase_single(p, adv)
    else:
        reqs = workload.gen_worstcase_mid(p, adv)
    if save_requests:
        workload.write_requests(save_requests, reqs)
    cfg = EngineConfig(resources, 1, p)
    v_ol = run_sequence(reqs, cfg).welfare_online
    v_opt = oracle.solve(reqs, cfg).welfare_opt
    theory = ratio_curve(rho_star, p.without_cost()).ratio if resources == 1 else math.nan
    _emit(ctx, ["gamma", "beta", "rho_star", "granularity", "epsilon", "users", "v_ol", "v_opt",
                "ratio", "alpha", "theory_ratio"],
          [(gamma, beta, rho_star, granularity, epsilon, len(reqs), v_ol, v_opt,
            v_opt / v_ol if v_ol > 0 else math.nan, p.alpha, theory)])


def main(argv=None) -> None:
    cli.main(args=argv, prog_name="postedprice")


if __name__ == "__main__":
    main()
