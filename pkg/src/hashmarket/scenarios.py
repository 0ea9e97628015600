"""Experiment harness: miner populations, parameter sweeps, result files.

A scenario bundles market params, a miner population (explicit block sizes
or Gaussian-sampled ones), the sweep axis and the pricing schemes to
compare. Sweep output is a flat CSV with the fixed header

    axis,axis_value,scheme,total_demand,profit,avg_price,converged,strict_condition,seed

written UTF-8 with '.' decimals and LF line endings; floats use repr so a
round trip is exact and repeated runs with the same seeds are
byte-identical. The three-miner case study reuses the same row shape with
axis="miner" and per-miner demand/price in the total_demand/avg_price
columns.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .demand import NashSolveOptions
from .errors import ConfigError
from .market import MarketParams, MinerProfile
from .pricing import GradientOptions, StackelbergResult, solve_discriminatory, solve_uniform

__all__ = [
    "GaussianPopulation",
    "ExplicitPopulation",
    "SweepSpec",
    "MonteCarloSettings",
    "ScenarioConfig",
    "SweepRow",
    "CSV_HEADER",
    "DEFAULT_SEED",
    "default_scenario",
    "build_profiles",
    "run_sweep",
    "case_study_three_miners",
    "case_study_rows",
    "write_results",
    "write_results_json",
    "read_results",
    "load_config",
    "dump_config",
]

CSV_HEADER = (
    "axis,axis_value,scheme,total_demand,profit,avg_price,converged,strict_condition,seed"
)
SWEEP_AXES = ("N", "R", "r", "z", "c", "none")
SCHEMES = ("uniform", "discriminatory")
DEFAULT_SEED = 1729

# Block-arrival rate: one block per ten minutes.
DEFAULT_LAMBDA = 1.0 / 600.0


@dataclass(frozen=True)
class GaussianPopulation:
    """Block sizes drawn from N(mu_t, sigma_sq), rounded toward zero.

    sigma_sq is the variance (the draw uses its square root). Draws are
    truncated below at zero; with the default mu_t this never triggers.
    The same seed with a larger n extends the same draw sequence, so
    populations are nested across an N sweep.
    """

    mu_t: float
    sigma_sq: float
    n: int
    seed: int
    x_min: float = 1e-2
    x_max: float = 100.0

    def __post_init__(self):
        if self.sigma_sq < 0:
            raise ValueError("sigma_sq must be nonnegative")
        if self.n < 2:
            raise ValueError("population needs at least 2 miners")


@dataclass(frozen=True)
class ExplicitPopulation:
    t: tuple[int, ...]
    x_min: float = 1e-2
    x_max: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if len(self.t) < 2:
            raise ValueError("population needs at least 2 miners")


Population = GaussianPopulation | ExplicitPopulation


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; use one of {SWEEP_AXES}")
        if self.axis != "none" and not self.values:
            raise ValueError("a sweep needs at least one value")


@dataclass(frozen=True)
class MonteCarloSettings:
    trials: int = 1_000_000
    seed: int = 0
    demand: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    params: MarketParams
    population: Population
    sweep: SweepSpec
    schemes: tuple[str, ...]
    montecarlo: MonteCarloSettings | None = None

    def __post_init__(self):
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class SweepRow:
    axis: str
    axis_value: float
    scheme: str
    total_demand: float
    profit: float
    avg_price: float
    converged: bool
    strict_condition: bool
    seed: int


def default_scenario(seed: int = DEFAULT_SEED) -> ScenarioConfig:
    """The stock scenario: 100 miners with ~200-transaction blocks."""
    params = MarketParams(
        R=1e4, r=20.0, lambda_=DEFAULT_LAMBDA, z=5e-3, c=1e-3, p_max=100.0, n=100, T=1.0
    )
    return ScenarioConfig(
        params=params,
        population=GaussianPopulation(mu_t=200.0, sigma_sq=5.0, n=100, seed=seed),
        sweep=SweepSpec(axis="N", values=(20.0, 40.0, 60.0, 80.0, 100.0)),
        schemes=SCHEMES,
    )


def build_profiles(population: Population, n: int | None = None) -> tuple[MinerProfile, ...]:
    """Materialize miner profiles; n overrides the population size."""
    if isinstance(population, ExplicitPopulation):
        ts = population.t if n is None else population.t[:n]
        if n is not None and len(ts) < n:
            raise ValueError(f"explicit population has {len(population.t)} miners, needs {n}")
        return tuple(
            MinerProfile(i, int(t), population.x_min, population.x_max)
            for i, t in enumerate(ts)
        )
    size = n if n is not None else population.n
    rng = np.random.default_rng(population.seed)
    draws = rng.normal(population.mu_t, math.sqrt(population.sigma_sq), size)
    ts = np.maximum(np.trunc(draws), 0.0).astype(int)
    return tuple(
        MinerProfile(i, int(t), population.x_min, population.x_max) for i, t in enumerate(ts)
    )


def _point_inputs(
    cfg: ScenarioConfig, value: float
) -> tuple[MarketParams, tuple[MinerProfile, ...]]:
    axis = cfg.sweep.axis
    if axis == "none":
        return cfg.params, build_profiles(cfg.population)
    if axis == "N":
        n = int(value)
        return replace(cfg.params, n=n), build_profiles(cfg.population, n=n)
    return replace(cfg.params, **{axis: value}), build_profiles(cfg.population)


def _solve_point(
    cfg: ScenarioConfig,
    value: float,
    scheme: str,
    gradient_opts: GradientOptions | None,
    nash_opts: NashSolveOptions | None,
) -> SweepRow:
    seed = cfg.population.seed
    axis = cfg.sweep.axis
    try:
        params, profiles = _point_inputs(cfg, value)
        if scheme == "uniform":
            result = solve_uniform(profiles, params, nash_opts)
        else:
            result = solve_discriminatory(profiles, params, gradient_opts, nash_opts)
        return SweepRow(
            axis=axis,
            axis_value=float(value),
            scheme=scheme,
            total_demand=result.demand.total,
            profit=result.profit,
            avg_price=float(result.schedule.prices.mean()),
            converged=result.converged,
            strict_condition=result.strict_condition_holds,
            seed=seed,
        )
    except Exception:
        # A failed point must not kill the sweep; the row records the failure.
        return SweepRow(
            axis=axis,
            axis_value=float(value),
            scheme=scheme,
            total_demand=math.nan,
            profit=math.nan,
            avg_price=math.nan,
            converged=False,
            strict_condition=False,
            seed=seed,
        )


def run_sweep(
    cfg: ScenarioConfig,
    gradient_opts: GradientOptions | None = None,
    nash_opts: NashSolveOptions | None = None,
    max_workers: int = 1,
) -> list[SweepRow]:
    """Solve every (axis value, scheme) point; rows come back in axis order.

    Points are independent and may run on a thread pool; ordering of the
    returned rows never depends on completion order.
    """
    values = cfg.sweep.values if cfg.sweep.axis != "none" else (0.0,)
    tasks = [(v, scheme) for v in values for scheme in cfg.schemes]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(
                pool.map(
                    lambda vs: _solve_point(cfg, vs[0], vs[1], gradient_opts, nash_opts), tasks
                )
            )
    else:
        rows = [_solve_point(cfg, v, s, gradient_opts, nash_opts) for v, s in tasks]
    return rows


def case_study_three_miners(
    gradient_opts: GradientOptions | None = None,
) -> tuple[StackelbergResult, StackelbergResult]:
    """Three miners with blocks of 100, 200 and 300 transactions.

    Returns the uniform and the discriminatory solutions, in that order.
    """
    params = MarketParams(
        R=1e4, r=20.0, lambda_=DEFAULT_LAMBDA, z=5e-3, c=1e-3, p_max=100.0, n=3, T=1.0
    )
    profiles = build_profiles(ExplicitPopulation(t=(100, 200, 300)))
    uniform = solve_uniform(profiles, params)
    discriminatory = solve_discriminatory(profiles, params, gradient_opts)
    return uniform, discriminatory


def case_study_rows(
    uniform: StackelbergResult, discriminatory: StackelbergResult, seed: int = 0
) -> list[SweepRow]:
    """Flatten the case study into per-miner rows (axis="miner").

    total_demand carries the miner's own demand and avg_price its own
    price; profit repeats the scheme's total profit.
    """
    rows = []
    for scheme, result in (("uniform", uniform), ("discriminatory", discriminatory)):
        for i in range(result.demand.x.size):
            rows.append(
                SweepRow(
                    axis="miner",
                    axis_value=float(i + 1),
                    scheme=scheme,
                    total_demand=float(result.demand.x[i]),
                    profit=result.profit,
                    avg_price=float(result.schedule.prices[i]),
                    converged=result.converged,
                    strict_condition=result.strict_condition_holds,
                    seed=seed,
                )
            )
    return rows


# -- files --------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_results(rows: Sequence[SweepRow], path: str | Path) -> None:
    """Write rows as CSV under the fixed header (LF endings, repr floats)."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(
                    ",".join(
                        (
                            row.axis,
                            _fmt(row.axis_value),
                            row.scheme,
                            _fmt(row.total_demand),
                            _fmt(row.profit),
                            _fmt(row.avg_price),
                            "true" if row.converged else "false",
                            "true" if row.strict_condition else "false",
                            str(row.seed),
                        )
                    )
                    + "\n"
                )
    except OSError as exc:
        raise ConfigError(f"cannot write results to {path}: {exc}") from exc


def read_results(path: str | Path) -> list[SweepRow]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read results from {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: unexpected CSV header")
    rows = []
    for line in lines[1:]:
        axis, value, scheme, demand, profit, price, conv, strict, seed = line.split(",")
        rows.append(
            SweepRow(
                axis=axis,
                axis_value=float(value),
                scheme=scheme,
                total_demand=float(demand),
                profit=float(profit),
                avg_price=float(price),
                converged=conv == "true",
                strict_condition=strict == "true",
                seed=int(seed),
            )
        )
    return rows


def write_results_json(rows: Sequence[SweepRow], path: str | Path) -> None:
    """JSON mirror of the CSV rows."""
    payload = [
        {
            "axis": r.axis,
            "axis_value": r.axis_value,
            "scheme": r.scheme,
            "total_demand": r.total_demand,
            "profit": r.profit,
            "avg_price": r.avg_price,
            "converged": r.converged,
            "strict_condition": r.strict_condition,
            "seed": r.seed,
        }
        for r in rows
    ]
    try:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write results to {path}: {exc}") from exc


# -- config files ---------------------------------------------------------------

def _params_from_dict(d: dict) -> MarketParams:
    d = dict(d)
    if "lambda" in d:
        d["lambda_"] = d.pop("lambda")
    try:
        return MarketParams(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad params section: {exc}") from exc


def _population_from_dict(d: dict) -> Population:
    d = dict(d)
    kind = d.pop("type", None)
    try:
        if kind == "gaussian":
            return GaussianPopulation(**d)
        if kind == "explicit":
            d["t"] = tuple(int(t) for t in d["t"])
            return ExplicitPopulation(**d)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad population section: {exc}") from exc
    raise ConfigError(f"population type must be 'gaussian' or 'explicit', got {kind!r}")


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse a scenario JSON file; raises ConfigError with the path on any problem."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        params = _params_from_dict(raw["params"])
        population = _population_from_dict(raw["population"])
        sweep_raw = raw.get("sweep", {"axis": "none", "values": []})
        sweep = SweepSpec(axis=sweep_raw["axis"], values=tuple(sweep_raw.get("values", ())))
        schemes = tuple(raw.get("schemes", list(SCHEMES)))
        mc = None
        if "montecarlo" in raw and raw["montecarlo"] is not None:
            mc_raw = dict(raw["montecarlo"])
            if "demand" in mc_raw and mc_raw["demand"] is not None:
                mc_raw["demand"] = tuple(float(v) for v in mc_raw["demand"])
            mc = MonteCarloSettings(**mc_raw)
        return ScenarioConfig(
            params=params, population=population, sweep=sweep, schemes=schemes, montecarlo=mc
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config {path} is malformed: {exc}") from exc


def dump_config(cfg: ScenarioConfig) -> dict:
    """The JSON-ready dict form of a config (inverse of load_config)."""
    params = {
        "R": cfg.params.R,
        "r": cfg.params.r,
        "lambda": cfg.params.lambda_,
        "z": cfg.params.z,
        "c": cfg.params.c,
        "T": cfg.params.T,
        "p_max": cfg.params.p_max,
        "n": cfg.params.n,
    }
    if isinstance(cfg.population, GaussianPopulation):
        population = {
            "type": "gaussian",
            "mu_t": cfg.population.mu_t,
            "sigma_sq": cfg.population.sigma_sq,
            "n": cfg.population.n,
            "seed": cfg.population.seed,
            "x_min": cfg.population.x_min,
            "x_max": cfg.population.x_max,
        }
    else:
        population = {
            "type": "explicit",
            "t": list(cfg.population.t),
            "x_min": cfg.population.x_min,
            "x_max": cfg.population.x_max,
            "seed": cfg.population.seed,
        }
    out = {
        "params": params,
        "population": population,
        "sweep": {"axis": cfg.sweep.axis, "values": list(cfg.sweep.values)},
        "schemes": list(cfg.schemes),
    }
    if cfg.montecarlo is not None:
        out["montecarlo"] = {
            "trials": cfg.montecarlo.trials,
            "seed": cfg.montecarlo.seed,
            "demand": list(cfg.montecarlo.demand) if cfg.montecarlo.demand else None,
        }
    return out
