"""Command-line frontend.

Subcommands: solve-uniform, solve-discriminatory, nash, simulate, sweep,
case-study. Each takes a JSON scenario config (--config); results go to
--out when given. Exit codes: 0 success, 1 solver non-convergence,
2 usage/config errors. Human summaries print at 6 significant digits;
files keep full double precision.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .demand import solve_stage_two
from .errors import ConfigError, HashMarketError
from .market import DemandProfile, MarketParams, PriceSchedule
from .montecarlo import SimConfig, simulate_races
from .scenarios import (
    MonteCarloSettings,
    ScenarioConfig,
    build_profiles,
    case_study_rows,
    case_study_three_miners,
    default_scenario,
    dump_config,
    load_config,
    run_sweep,
    write_results,
)
from .pricing import StackelbergResult, solve_discriminatory, solve_uniform

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2


def _fmt6(v: float) -> str:
    return f"{v:.6g}"


def _load(config_path: str | None, seed: int | None) -> ScenarioConfig:
    if config_path is None:
        cfg = default_scenario()
    else:
        cfg = load_config(config_path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, population=dataclasses.replace(cfg.population, seed=seed))
        if cfg.montecarlo is not None:
            cfg = dataclasses.replace(
                cfg, montecarlo=dataclasses.replace(cfg.montecarlo, seed=seed)
            )
    return cfg


def _schedule_from_config(raw_path: str | None, params: MarketParams) -> PriceSchedule:
    """Optional "schedule" section of the config; the price cap by default."""
    if raw_path is not None:
        raw = json.loads(Path(raw_path).read_text(encoding="utf-8"))
        section = raw.get("schedule")
        if section:
            if "uniform" in section:
                return PriceSchedule.uniform(float(section["uniform"]), params.n)
            if "discriminatory" in section:
                return PriceSchedule.discriminatory(
                    [float(p) for p in section["discriminatory"]]
                )
            raise ConfigError("schedule section needs a 'uniform' or 'discriminatory' key")
    return PriceSchedule.uniform(params.p_max, params.n)


def _result_payload(result: StackelbergResult, seed: int) -> dict:
    return {
        "scheme": result.schedule.scheme,
        "prices": result.schedule.prices.tolist(),
        "demand": result.demand.x.tolist(),
        "profit": result.profit,
        "utilities": result.utilities.tolist(),
        "converged": result.converged,
        "iterations": result.iterations,
        "strict_condition": result.strict_condition_holds,
        "seed": seed,
    }


def _write_json(payload: dict, out: str | None) -> None:
    if out:
        Path(out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _summary(result: StackelbergResult) -> str:
    return (
        f"profit={_fmt6(result.profit)} total_demand={_fmt6(result.demand.total)} "
        f"converged={str(result.converged).lower()}"
    )


def _cmd_solve(args, scheme: str) -> int:
    cfg = _load(args.config, args.seed)
    profiles = build_profiles(cfg.population)
    if scheme == "uniform":
        result = solve_uniform(profiles, cfg.params)
    else:
        result = solve_discriminatory(profiles, cfg.params)
    _write_json(_result_payload(result, cfg.population.seed), args.out)
    print(f"{scheme}: {_summary(result)}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _cmd_nash(args) -> int:
    cfg = _load(args.config, args.seed)
    profiles = build_profiles(cfg.population)
    schedule = _schedule_from_config(args.config, cfg.params)
    if args.scheme == "uniform" and not schedule.is_uniform:
        raise ConfigError("--scheme uniform given but config schedule is discriminatory")
    result = solve_stage_two(profiles, schedule, cfg.params)
    payload = {
        "prices": schedule.prices.tolist(),
        "demand": result.demand.x.tolist(),
        "total_demand": result.demand.total,
        "iterations": result.iterations,
        "converged": result.converged,
        "interior": result.interior,
        "strict_condition": result.strict_condition_holds,
        "seed": cfg.population.seed,
    }
    _write_json(payload, args.out)
    print(
        f"nash: total_demand={_fmt6(result.demand.total)} "
        f"interior={str(result.interior).lower()} converged={str(result.converged).lower()}"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _cmd_simulate(args) -> int:
    cfg = _load(args.config, args.seed)
    profiles = build_profiles(cfg.population)
    mc = cfg.montecarlo or MonteCarloSettings()
    if args.trials is not None:
        mc = dataclasses.replace(mc, trials=args.trials)
    if args.seed is not None:
        mc = dataclasses.replace(mc, seed=args.seed)
    schedule = PriceSchedule.uniform(cfg.params.p_max, cfg.params.n)
    if mc.demand is not None:
        demand = DemandProfile.of(np.asarray(mc.demand), profiles)
    else:
        demand = solve_stage_two(profiles, schedule, cfg.params).demand
    sim = SimConfig(
        profiles=profiles, params=cfg.params, demand=demand, trials=mc.trials, seed=mc.seed
    )
    report = simulate_races(sim)
    payload = {
        "trials": report.trials,
        "seed": mc.seed,
        "win_rate": report.win_rate.tolist(),
        "reward_mean": report.reward_mean.tolist(),
        "stderr": report.stderr.tolist(),
        "demand": demand.x.tolist(),
    }
    _write_json(payload, args.out)
    print(
        f"simulate: trials={report.trials} seed={mc.seed} "
        f"total_win_rate={_fmt6(float(report.win_rate.sum()))}"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args.config, args.seed)
    if args.scheme and args.scheme != "both":
        cfg = dataclasses.replace(cfg, schemes=(args.scheme,))
    rows = run_sweep(cfg)
    if args.out:
        write_results(rows, args.out)
    ok = all(r.converged for r in rows)
    total_profit = sum(r.profit for r in rows)
    print(
        f"sweep: axis={cfg.sweep.axis} points={len(rows)} "
        f"profit_sum={_fmt6(total_profit)} converged={str(ok).lower()}"
    )
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _cmd_case_study(args) -> int:
    uniform, discriminatory = case_study_three_miners()
    if args.out:
        write_results(case_study_rows(uniform, discriminatory), args.out)
    prices = " ".join(_fmt6(p) for p in discriminatory.schedule.prices)
    print(f"case-study: discriminatory prices [{prices}]")
    print(f"  uniform: {_summary(uniform)}")
    print(f"  discriminatory: {_summary(discriminatory)}")
    ok = uniform.converged and discriminatory.converged
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hashmarket",
        description="Solve and simulate the provider/miner pricing game.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, needs_config=True):
        cmd = sub.add_parser(name, help=help_)
        cmd.add_argument(
            "--config", required=needs_config, help="scenario config JSON path"
        )
        cmd.add_argument("--out", help="output file path")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        return cmd

    add("solve-uniform", "optimal single price and induced demands")
    add("solve-discriminatory", "optimal per-miner prices via gradient ascent")
    nash = add("nash", "stage-II demand equilibrium at the config's schedule")
    nash.add_argument(
        "--scheme", choices=["uniform", "discriminatory"], help="sanity check on the schedule kind"
    )
    sim = add("simulate", "Monte Carlo mining races at the equilibrium demands")
    sim.add_argument("--trials", type=int, help="number of races")
    sweep = add("sweep", "solve every sweep point and write the CSV")
    sweep.add_argument(
        "--scheme",
        choices=["uniform", "discriminatory", "both"],
        default="both",
        help="restrict the schemes solved",
    )
    add("case-study", "three-miner comparison of the two schemes", needs_config=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    handlers = {
        "solve-uniform": lambda a: _cmd_solve(a, "uniform"),
        "solve-discriminatory": lambda a: _cmd_solve(a, "discriminatory"),
        "nash": _cmd_nash,
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "case-study": _cmd_case_study,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HashMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    raise SystemExit(main())
