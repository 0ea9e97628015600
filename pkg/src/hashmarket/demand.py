"""Stage II: the noncooperative demand game among the miners.

Given prices, each miner picks its demand to maximize its utility. The
interior first-order condition gives the best response

    BR_i(S) = sqrt(a_i * S / p_i) - S,    S = sum of opponents' demand,

clipped to [x_min, x_max], with a_i the delay-discounted reward. When every
unclipped equilibrium demand is strictly interior, the fixed point has the
closed form

    x_i* = (n-1)/K - ((n-1)/K)^2 * w_i,   w_i = p_i / a_i,  K = sum_j w_j,

whose total demand is (n-1)/K. The solver uses the closed form when it is
interior and otherwise falls back to Gauss-Seidel best-response sweeps,
which handle the box constraints.

Two per-miner diagnostics are reported: the strict sufficient uniqueness
condition 2*(n-1)*w_i < K and the weaker positivity condition
(n-1)*w_i < K under which the closed-form demand is positive. The strict
condition fails for any symmetric instance with n >= 2 (it reduces to
2*(n-1) < n); it is surfaced as a flag, never an error.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDemandError
from .market import (
    DemandProfile,
    MarketParams,
    MinerProfile,
    PriceSchedule,
    bounds_arrays,
    t_vector,
)

__all__ = [
    "SolveMode",
    "NashSolveOptions",
    "StageTwoResult",
    "UniquenessDiagnostics",
    "best_response",
    "closed_form_ne_uniform",
    "closed_form_ne_discriminatory",
    "best_response_dynamics",
    "solve_stage_two",
    "uniqueness_diagnostics",
]


class SolveMode(enum.Enum):
    CLOSED_FORM = "closed-form"
    BEST_RESPONSE_DYNAMICS = "best-response-dynamics"
    CLOSED_FORM_WITH_FALLBACK = "closed-form-with-fallback"


@dataclass(frozen=True)
class NashSolveOptions:
    """Knobs for the Stage-II solver.

    epsilon is the relative L1 change of the demand vector between
    Gauss-Seidel sweeps below which the dynamics stop.
    """

    epsilon: float = 1e-10
    max_iters: int = 10_000
    mode: SolveMode = SolveMode.CLOSED_FORM_WITH_FALLBACK

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class StageTwoResult:
    demand: DemandProfile
    iterations: int
    converged: bool
    strict_condition_holds: bool
    interior: bool


@dataclass(frozen=True)
class UniquenessDiagnostics:
    """Per-miner truth values of the two equilibrium conditions."""

    strict: np.ndarray
    positivity: np.ndarray

    @property
    def strict_all(self) -> bool:
        return bool(self.strict.all())

    @property
    def positivity_all(self) -> bool:
        return bool(self.positivity.all())


# -- internal compiled instance -------------------------------------------

@dataclass(frozen=True)
class _Instance:
    """Arrays precomputed from profiles+params, shared by the solvers."""

    a: np.ndarray       # effective rewards (R + r*t) * exp(-lambda*z*t)
    x_min: np.ndarray
    x_max: np.ndarray

    @property
    def n(self) -> int:
        return self.a.size


def _compile(profiles: Sequence[MinerProfile], params: MarketParams) -> _Instance:
    if len(profiles) != params.n:
        raise ValueError(f"{len(profiles)} profiles for n={params.n} miners")
    t = t_vector(profiles)
    a = (params.R + params.r * t) * np.exp(-params.lambda_ * params.z * t)
    lo, hi = bounds_arrays(profiles)
    return _Instance(a, lo, hi)


def _closed_form_raw(prices: np.ndarray, inst: _Instance) -> np.ndarray:
    """Unclipped fixed point of the interior first-order conditions."""
    w = prices / inst.a
    total = (inst.n - 1) / w.sum()
    return total - total * total * w


def _strict_condition(prices: np.ndarray, inst: _Instance) -> np.ndarray:
    w = prices / inst.a
    return 2.0 * (inst.n - 1) * w < w.sum()


def _positivity_condition(prices: np.ndarray, inst: _Instance) -> np.ndarray:
    w = prices / inst.a
    return (inst.n - 1) * w < w.sum()


def _brd(
    prices: np.ndarray, inst: _Instance, epsilon: float, max_iters: int
) -> tuple[np.ndarray, int, bool]:
    """Gauss-Seidel best-response sweeps in ascending miner order.

    Starts every miner at the midpoint of its bounds; x_min > 0 keeps the
    opponents' total positive throughout.
    """
    n = inst.n
    a = inst.a.tolist()
    p = prices.tolist()
    lo = inst.x_min.tolist()
    hi = inst.x_max.tolist()
    x = [(lo[i] + hi[i]) / 2.0 for i in range(n)]
    sqrt = math.sqrt
    for it in range(1, max_iters + 1):
        # Refresh the aggregate every sweep: carrying it incrementally from
        # the (possibly huge) initial scale bakes cancellation error into
        # the fixed point.
        total = math.fsum(x)
        denom = sum(abs(v) for v in x)
        change = 0.0
        for i in range(n):
            others = total - x[i]
            if others <= 0.0:
                raise DegenerateDemandError("degenerate opponent profile in dynamics")
            xi = sqrt(a[i] * others / p[i]) - others
            if xi < lo[i]:
                xi = lo[i]
            elif xi > hi[i]:
                xi = hi[i]
            change += abs(xi - x[i])
            total += xi - x[i]
            x[i] = xi
        if change <= epsilon * denom:
            return np.array(x), it, True
    return np.array(x), max_iters, False


# -- public operations ------------------------------------------------------

def _equilibrium_via_aggregate(prices: np.ndarray, inst: _Instance) -> np.ndarray:
    """Constrained equilibrium by bisection on the aggregate demand.

    Given a total X, each miner's optimal demand is
    clip(X - w_i * X^2, x_min, x_max) with w_i = p_i / a_i (the interior
    first-order condition, saturated at the box edges), so an equilibrium
    total solves sum_i x_i(X) = X. The mismatch is >= 0 at X = sum(x_min)
    and <= 0 at X = sum(x_max), and the equilibrium is unique, so bisection
    pins it. Much faster than best-response sweeps; used on the hot paths,
    while the sweeps remain the independent reference dynamics.
    """
    w = prices / inst.a

    def demands(total):
        return np.clip(total - w * total * total, inst.x_min, inst.x_max)

    low = float(inst.x_min.sum())
    high = float(inst.x_max.sum())
    for _ in range(200):
        mid = 0.5 * (low + high)
        if float(demands(mid).sum()) >= mid:
            low = mid
        else:
            high = mid
        if high - low <= 1e-15 * high:
            break
    return demands(0.5 * (low + high))


def best_response(
    i: int,
    x_others: Sequence[float],
    p_i: float,
    profile: MinerProfile,
    params: MarketParams,
) -> float:
    """Miner i's optimal demand against a fixed opponent total.

    x_others holds the other miners' demands (length n-1, order
    irrelevant); only their sum S enters. S = 0 makes the response
    undefined.
    """
    if p_i <= 0:
        raise ValueError(f"price must be positive, got {p_i}")
    others = float(np.sum(np.asarray(x_others, dtype=float)))
    if others <= 0.0:
        raise DegenerateDemandError("degenerate opponent profile: zero opponent demand")
    a_i = (params.R + params.r * profile.t) * math.exp(-params.lambda_ * params.z * profile.t)
    unclipped = math.sqrt(a_i * others / p_i) - others
    return min(max(unclipped, profile.x_min), profile.x_max)


def _closed_form(
    profiles: Sequence[MinerProfile], prices: np.ndarray, params: MarketParams
) -> StageTwoResult:
    inst = _compile(profiles, params)
    raw = _closed_form_raw(prices, inst)
    x = np.clip(raw, inst.x_min, inst.x_max)
    interior = bool(np.all(raw > inst.x_min) and np.all(raw < inst.x_max))
    return StageTwoResult(
        demand=DemandProfile(x, (x > inst.x_min) & (x < inst.x_max)),
        iterations=0,
        converged=True,
        strict_condition_holds=bool(_strict_condition(prices, inst).all()),
        interior=interior,
    )


def closed_form_ne_uniform(
    profiles: Sequence[MinerProfile], p: float, params: MarketParams
) -> StageTwoResult:
    """Closed-form equilibrium under one shared price.

    Valid at interior points only; the result carries interior=False when
    any unclipped demand leaves its bounds, in which case the dynamics
    solver is the right tool.
    """
    if p <= 0:
        raise ValueError(f"price must be positive, got {p}")
    return _closed_form(profiles, np.full(params.n, float(p)), params)


def closed_form_ne_discriminatory(
    profiles: Sequence[MinerProfile], prices: Sequence[float], params: MarketParams
) -> StageTwoResult:
    """Closed-form equilibrium under per-miner prices."""
    pv = np.asarray(prices, dtype=float)
    if np.any(pv <= 0):
        raise ValueError("all prices must be positive")
    return _closed_form(profiles, pv, params)


def best_response_dynamics(
    profiles: Sequence[MinerProfile],
    schedule: PriceSchedule,
    params: MarketParams,
    opts: NashSolveOptions | None = None,
) -> StageTwoResult:
    """Iterate best responses until the demand vector stops moving."""
    opts = opts or NashSolveOptions()
    inst = _compile(profiles, params)
    x, iters, converged = _brd(schedule.prices, inst, opts.epsilon, opts.max_iters)
    return StageTwoResult(
        demand=DemandProfile(x, (x > inst.x_min) & (x < inst.x_max)),
        iterations=iters,
        converged=converged,
        strict_condition_holds=bool(_strict_condition(schedule.prices, inst).all()),
        interior=bool(np.all(x > inst.x_min) and np.all(x < inst.x_max)),
    )


def solve_stage_two(
    profiles: Sequence[MinerProfile],
    schedule: PriceSchedule,
    params: MarketParams,
    opts: NashSolveOptions | None = None,
) -> StageTwoResult:
    """Solve the demand game per the requested mode.

    CLOSED_FORM_WITH_FALLBACK silently switches to the dynamics whenever
    the unclipped closed form leaves the bounds or positivity fails, since
    the formula only describes interior equilibria.
    """
    opts = opts or NashSolveOptions()
    if opts.mode is SolveMode.BEST_RESPONSE_DYNAMICS:
        return best_response_dynamics(profiles, schedule, params, opts)
    result = _closed_form(profiles, schedule.prices, params)
    if opts.mode is SolveMode.CLOSED_FORM:
        return result
    if result.interior:
        return result
    dyn = best_response_dynamics(profiles, schedule, params, opts)
    return StageTwoResult(
        demand=dyn.demand,
        iterations=dyn.iterations,
        converged=dyn.converged,
        strict_condition_holds=dyn.strict_condition_holds,
        interior=False,
    )


def uniqueness_diagnostics(
    profiles: Sequence[MinerProfile],
    schedule: PriceSchedule,
    params: MarketParams,
) -> UniquenessDiagnostics:
    """Evaluate both equilibrium conditions per miner.

    The weights are price-scaled, w_i = p_i / a_i; under a uniform schedule
    the shared price cancels, so this reduces to the unweighted conditions.
    """
    inst = _compile(profiles, params)
    return UniquenessDiagnostics(
        strict=_strict_condition(schedule.prices, inst),
        positivity=_positivity_condition(schedule.prices, inst),
    )
