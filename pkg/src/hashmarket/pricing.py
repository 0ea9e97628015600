"""Stage I: the provider's profit maximization over prices.

Uniform pricing has a closed-form profit

    Pi(p) = (p - c*T)/p * (n-1) / sum_j (1/a_j),

whose derivative c*T*(n-1) / (p^2 * sum_j 1/a_j) is positive everywhere, so
the optimum sits at the price cap. Discriminatory pricing maximizes

    Pi(p) = sum_i (p_i - c*T) * x_i*(p)

over the box [price_floor, p_max]^n, where x*(p) is the induced Stage-II
equilibrium. The solver is projected gradient ascent with central
finite-difference gradients and a backtracking step size; it starts from
the uniform optimum (all prices at the cap), which makes the discriminatory
profit dominate the uniform one by construction.

Diagnostics follow the curvature analysis of the profit: per coordinate i
the sign of

    v_i = sum_{j != i} (a_i + a_j) * (1 - n*q_j / Q),   q = p/a,  Q = sum q,

separates a concave regime (v_i <= 0) from a decreasing one (v_i > 0,
requiring additionally q_i >= Q/(n-1)^2), and a Monte Carlo probe checks
monotonicity of F = -grad(Pi) on the concave-regime set K, the empirical
counterpart of the uniqueness argument via variational inequalities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .demand import (
    NashSolveOptions,
    _compile,
    _equilibrium_via_aggregate,
    _Instance,
    solve_stage_two,
)
from .errors import InfeasiblePricingError, NumericsError
from .market import (
    DemandProfile,
    MarketParams,
    MinerProfile,
    PriceSchedule,
    cfp_profit,
    miner_utilities,
)

__all__ = [
    "GradientOptions",
    "Regime",
    "ConcavityReport",
    "VIProbeReport",
    "PricingDiagnostics",
    "StackelbergResult",
    "uniform_profit",
    "uniform_profit_derivative",
    "solve_uniform",
    "discriminatory_profit",
    "solve_discriminatory",
    "concavity_regime",
    "vi_monotonicity_probe",
]

# Step below which backtracking gives up and declares the iterate stationary,
# as a fraction of p_max.
_MIN_STEP_FRACTION = 1e-13
# Finite-difference half-width for price gradients, as a fraction of p_max.
_FD_FRACTION = 1e-6


@dataclass(frozen=True)
class GradientOptions:
    """Knobs for the discriminatory gradient ascent.

    step_mu defaults to 1e-2 * p_max and price_floor to c*T * (1 + 1e-6)
    (resolved against the market params at solve time); epsilon is the
    relative L1 price change under which the iteration stops.
    """

    step_mu: float | None = None
    epsilon: float = 1e-6
    max_iters: int = 50_000
    backtracking: bool = True
    price_floor: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_mu is not None and self.step_mu <= 0:
            raise ValueError("step_mu must be positive")

    def resolved_floor(self, params: MarketParams) -> float:
        floor = self.price_floor
        if floor is None:
            mc = params.marginal_cost
            floor = mc * (1.0 + 1e-6) if mc > 0 else 1e-9 * params.p_max
        if floor <= params.marginal_cost:
            raise ValueError(
                f"price_floor={floor} must exceed the marginal cost {params.marginal_cost}"
            )
        if floor >= params.p_max:
            raise ValueError("price_floor must lie below the price cap")
        return floor

    def resolved_step(self, params: MarketParams) -> float:
        return self.step_mu if self.step_mu is not None else 1e-2 * params.p_max


class Regime(enum.Enum):
    CONCAVE = "concave"
    DECREASING = "decreasing"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ConcavityReport:
    """Per-coordinate curvature classification of the profit at one price vector."""

    regimes: tuple[Regime, ...]
    sums: np.ndarray          # v_i; v_i <= 0 marks the concave regime
    condition4: np.ndarray    # q_i >= Q/(n-1)^2, hypothesis of the decreasing regime
    f_value: float            # cost part  -c*T * (n-1)/Q
    g_value: float            # revenue part sum_i p_i * x_i* (interior closed form)


@dataclass(frozen=True)
class VIProbeReport:
    """Empirical monotonicity of F = -grad(Pi) on the concave-regime set.

    fraction is the share of sampled pairs with
    (p' - p'')^T (F(p') - F(p'')) >= 0, or None when no pair inside the set
    was found. A diagnostic, not a proof.
    """

    fraction: float | None
    pairs: int
    candidates_tried: int


@dataclass(frozen=True)
class PricingDiagnostics:
    concavity: ConcavityReport
    vi: VIProbeReport | None


@dataclass(frozen=True)
class StackelbergResult:
    """A solved leader-follower outcome: prices, induced demands, profit."""

    schedule: PriceSchedule
    demand: DemandProfile
    profit: float
    utilities: np.ndarray
    trace: list[tuple[int, np.ndarray, float]]
    diagnostics: PricingDiagnostics
    converged: bool
    iterations: int
    strict_condition_holds: bool


# -- uniform pricing ---------------------------------------------------------

def _inverse_reward_sum(profiles: Sequence[MinerProfile], params: MarketParams) -> float:
    inst = _compile(profiles, params)
    return float(np.sum(1.0 / inst.a))


def uniform_profit(p: float, profiles: Sequence[MinerProfile], params: MarketParams) -> float:
    """Provider profit at the interior Stage-II equilibrium under one price."""
    if p <= 0:
        raise ValueError(f"price must be positive, got {p}")
    return (p - params.marginal_cost) / p * (params.n - 1) / _inverse_reward_sum(profiles, params)


def uniform_profit_derivative(
    p: float, profiles: Sequence[MinerProfile], params: MarketParams
) -> float:
    """Analytic dPi/dp; positive for any p > 0 whenever c*T > 0."""
    if p <= 0:
        raise ValueError(f"price must be positive, got {p}")
    return params.marginal_cost / p**2 * (params.n - 1) / _inverse_reward_sum(profiles, params)


def solve_uniform(
    profiles: Sequence[MinerProfile],
    params: MarketParams,
    nash_opts: NashSolveOptions | None = None,
) -> StackelbergResult:
    """Optimal uniform price and the equilibrium it induces.

    The profit is strictly increasing in p (flat when c*T = 0), so the cap
    binds; a bounded scalar search over (price_floor, p_max] cross-checks
    that conclusion whenever the profit is not flat.
    """
    mc = params.marginal_cost
    if params.p_max <= mc:
        raise InfeasiblePricingError("no profitable price exists: p_max <= c*T")
    p_star = params.p_max
    if mc > 0:
        floor = mc * (1.0 + 1e-6)
        found = minimize_scalar(
            lambda p: -uniform_profit(p, profiles, params),
            bounds=(floor, params.p_max),
            method="bounded",
            options={"xatol": 1e-9 * params.p_max},
        )
        if abs(float(found.x) - p_star) > 1e-6 * params.p_max:
            raise NumericsError(
                f"scalar search found p={found.x}, expected the cap {p_star}"
            )
    schedule = PriceSchedule.uniform(p_star, params.n)
    stage2 = solve_stage_two(profiles, schedule, params, nash_opts)
    profit = cfp_profit(stage2.demand, schedule, params)
    diagnostics = PricingDiagnostics(
        concavity=concavity_regime(schedule.prices, profiles, params), vi=None
    )
    return StackelbergResult(
        schedule=schedule,
        demand=stage2.demand,
        profit=profit,
        utilities=miner_utilities(stage2.demand, schedule, profiles, params),
        trace=[(0, schedule.prices.copy(), profit)],
        diagnostics=diagnostics,
        converged=stage2.converged,
        iterations=stage2.iterations,
        strict_condition_holds=stage2.strict_condition_holds,
    )


# -- discriminatory pricing --------------------------------------------------

def _stage2_batch(
    price_rows: np.ndarray, inst: _Instance, opts: NashSolveOptions
) -> np.ndarray:
    """Stage-II demands for a batch of price vectors (rows).

    Vectorized closed form; rows whose unclipped fixed point leaves the
    bounds are re-solved through the aggregate-consistency equation, which
    handles the box constraints at a fraction of the sweep cost.
    """
    w = price_rows / inst.a
    total = (inst.n - 1) / w.sum(axis=1)
    raw = total[:, None] - (total * total)[:, None] * w
    ok = np.logical_and(raw > inst.x_min, raw < inst.x_max).all(axis=1)
    x = np.clip(raw, inst.x_min, inst.x_max)
    for row in np.flatnonzero(~ok):
        x[row] = _equilibrium_via_aggregate(price_rows[row], inst)
    return x


def _profit_rows(price_rows: np.ndarray, inst: _Instance, mc: float, opts: NashSolveOptions) -> np.ndarray:
    x = _stage2_batch(price_rows, inst, opts)
    return np.einsum("ij,ij->i", price_rows - mc, x)


def discriminatory_profit(
    prices: Sequence[float], profiles: Sequence[MinerProfile], params: MarketParams
) -> float:
    """Profit at the Stage-II equilibrium induced by a per-miner price vector."""
    pv = np.atleast_2d(np.asarray(prices, dtype=float))
    if np.any(pv <= 0):
        raise ValueError("all prices must be positive")
    inst = _compile(profiles, params)
    return float(_profit_rows(pv, inst, params.marginal_cost, NashSolveOptions())[0])


def _fd_gradient(
    prices: np.ndarray, profit_of: Callable[[np.ndarray], np.ndarray], h: float
) -> np.ndarray:
    n = prices.size
    batch = np.repeat(prices[None, :], 2 * n, axis=0)
    idx = np.arange(n)
    batch[2 * idx, idx] += h
    batch[2 * idx + 1, idx] -= h
    values = profit_of(batch)
    return (values[0::2] - values[1::2]) / (2.0 * h)


def solve_discriminatory(
    profiles: Sequence[MinerProfile],
    params: MarketParams,
    opts: GradientOptions | None = None,
    nash_opts: NashSolveOptions | None = None,
    vi_samples: int = 4,
) -> StackelbergResult:
    """Projected gradient ascent on the discriminatory profit.

    Each iteration re-solves Stage II, estimates grad(Pi) by central finite
    differences, steps along it and projects back onto the price box. With
    backtracking on, a step is only accepted if the profit does not drop,
    so the profit trace is nondecreasing. Stops when the relative L1 price
    change falls below epsilon (or no improving step exists); returns the
    best iterate seen.
    """
    opts = opts or GradientOptions()
    nash_opts = nash_opts or NashSolveOptions()
    mc = params.marginal_cost
    if params.p_max <= mc:
        raise InfeasiblePricingError("no profitable price exists: p_max <= c*T")
    floor = opts.resolved_floor(params)
    inst = _compile(profiles, params)
    profit_of = lambda rows: _profit_rows(rows, inst, mc, nash_opts)
    h = _FD_FRACTION * params.p_max
    mu0 = opts.resolved_step(params)
    step_floor = _MIN_STEP_FRACTION * params.p_max

    prices = np.full(params.n, float(params.p_max))
    profit = float(profit_of(prices[None, :])[0])
    if not math.isfinite(profit):
        raise NumericsError("profit is not finite at the starting prices")
    trace: list[tuple[int, np.ndarray, float]] = [(0, prices.copy(), profit)]
    best_profit, best_prices = profit, prices.copy()
    mu = mu0
    converged = False
    iterations = 0

    for k in range(1, opts.max_iters + 1):
        iterations = k
        grad = _fd_gradient(prices, profit_of, h)
        if not np.all(np.isfinite(grad)):
            raise NumericsError(f"gradient is not finite at iteration {k}")
        step = mu
        while True:
            candidate = np.clip(prices + step * grad, floor, params.p_max)
            cand_profit = float(profit_of(candidate[None, :])[0])
            if not math.isfinite(cand_profit):
                raise NumericsError(f"profit is not finite at iteration {k}")
            if not opts.backtracking or cand_profit >= profit or step < step_floor:
                break
            step *= 0.5
        if opts.backtracking and cand_profit < profit:
            converged = True  # no improving step at the minimum step size
            break
        rel_change = float(np.abs(candidate - prices).sum() / np.abs(prices).sum())
        prices, profit = candidate, cand_profit
        trace.append((k, prices.copy(), profit))
        if profit > best_profit:
            best_profit, best_prices = profit, prices.copy()
        mu = min(step * 2.0, mu0)
        if rel_change < opts.epsilon:
            converged = True
            break

    schedule = PriceSchedule.discriminatory(best_prices)
    stage2 = solve_stage_two(profiles, schedule, params, nash_opts)
    final_profit = cfp_profit(stage2.demand, schedule, params)
    vi = (
        vi_monotonicity_probe(profiles, params, vi_samples, price_floor=floor)
        if vi_samples > 0
        else None
    )
    diagnostics = PricingDiagnostics(
        concavity=concavity_regime(best_prices, profiles, params), vi=vi
    )
    return StackelbergResult(
        schedule=schedule,
        demand=stage2.demand,
        profit=final_profit,
        utilities=miner_utilities(stage2.demand, schedule, profiles, params),
        trace=trace,
        diagnostics=diagnostics,
        converged=converged and stage2.converged,
        iterations=iterations,
        strict_condition_holds=stage2.strict_condition_holds,
    )


# -- curvature diagnostics ---------------------------------------------------

def _concavity_sums(prices: np.ndarray, a: np.ndarray) -> np.ndarray:
    n = a.size
    q = prices / a
    term = 1.0 - n * q / q.sum()
    return a * (term.sum() - term) + (a * term).sum() - a * term


def concavity_regime(
    prices: Sequence[float], profiles: Sequence[MinerProfile], params: MarketParams
) -> ConcavityReport:
    """Classify each price coordinate as concave / decreasing / indeterminate.

    Also reports the cost/revenue decomposition of the profit at the
    interior closed-form demands: f = -c*T*(n-1)/Q and g = sum_i p_i x_i*.
    """
    pv = np.asarray(prices, dtype=float)
    inst = _compile(profiles, params)
    sums = _concavity_sums(pv, inst.a)
    q = pv / inst.a
    big_q = q.sum()
    condition4 = q >= big_q / (params.n - 1) ** 2
    regimes = tuple(
        Regime.CONCAVE
        if v <= 0.0
        else (Regime.DECREASING if c4 else Regime.INDETERMINATE)
        for v, c4 in zip(sums, condition4)
    )
    total = (params.n - 1) / big_q
    x_raw = total - total * total * q
    return ConcavityReport(
        regimes=regimes,
        sums=sums,
        condition4=condition4,
        f_value=float(-params.marginal_cost * total),
        g_value=float(np.dot(pv, x_raw)),
    )


def vi_monotonicity_probe(
    profiles: Sequence[MinerProfile],
    params: MarketParams,
    samples: int,
    seed: int = 0,
    price_floor: float | None = None,
) -> VIProbeReport:
    """Sample price pairs inside the concave-regime set and test monotonicity.

    Membership requires v_i <= 0 for every i. Random box points rarely land
    there when the miners are close to symmetric (the set collapses toward
    the equal-price diagonal), so diagonal candidates are interleaved with
    box candidates; both are membership-checked. Deterministic per seed.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    inst = _compile(profiles, params)
    floor = price_floor if price_floor is not None else GradientOptions().resolved_floor(params)
    mc = params.marginal_cost
    nash_opts = NashSolveOptions()
    h = _FD_FRACTION * params.p_max
    profit_of = lambda rows: _profit_rows(rows, inst, mc, nash_opts)

    rng = np.random.default_rng(seed)
    accepted: list[np.ndarray] = []
    tried = 0
    max_tries = 200 * samples
    # Roundoff slack: on the equal-price diagonal the sums are exactly zero
    # in real arithmetic but come out at ~1e-16 relative in floats.
    slack = 1e-9 * params.n * float(inst.a.max())
    while len(accepted) < 2 * samples and tried < max_tries:
        if tried % 2 == 0:
            candidate = rng.uniform(floor, params.p_max, size=params.n)
        else:
            candidate = np.full(params.n, rng.uniform(floor, params.p_max))
        tried += 1
        if np.all(_concavity_sums(candidate, inst.a) <= slack):
            accepted.append(candidate)

    pairs = len(accepted) // 2
    if pairs == 0:
        return VIProbeReport(fraction=None, pairs=0, candidates_tried=tried)
    nonneg = 0
    for k in range(pairs):
        p1, p2 = accepted[2 * k], accepted[2 * k + 1]
        f1 = -_fd_gradient(p1, profit_of, h)
        f2 = -_fd_gradient(p2, profit_of, h)
        if float(np.dot(p1 - p2, f1 - f2)) >= 0.0:
            nonneg += 1
    return VIProbeReport(fraction=nonneg / pairs, pairs=pairs, candidates_tried=tried)
