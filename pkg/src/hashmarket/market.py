"""Economic primitives of the mining-service market.

A provider sells computing service to N miners who race to solve
proof-of-work puzzles. A miner buying demand x_i out of a total X holds the
hash share alpha_i = x_i / X and wins the race with probability alpha_i
discounted by the chance its block is orphaned while propagating:

    P_win(i) = alpha_i * exp(-lambda * z * t_i)

where lambda is the block arrival rate, z the propagation delay per
transaction and t_i the number of transactions in miner i's block. Winning
pays a fixed reward R plus r per transaction, so a miner's expected payoff
net of the service bill at unit price p_i is

    u_i = (R + r*t_i) * alpha_i * exp(-lambda * z * t_i) - p_i * x_i

and the provider's profit is revenue minus an electricity/service cost of
c*T per demand unit:

    profit = sum_i p_i * x_i - sum_i c * T * x_i

Everything in this module is an immutable record or a pure function of
them; all vectors are float64 numpy arrays of length n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDemandError

__all__ = [
    "MinerProfile",
    "MarketParams",
    "PriceSchedule",
    "DemandProfile",
    "EffectiveReward",
    "hash_share",
    "hash_shares",
    "orphan_probability",
    "win_probability",
    "miner_utility",
    "miner_utilities",
    "miner_utility_gradient",
    "cfp_profit",
    "effective_rewards",
    "t_vector",
    "bounds_arrays",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MinerProfile:
    """One miner: block size and admissible demand range.

    t is the number of transactions the miner packs into a block (a
    nonnegative integer count); demand is constrained to [x_min, x_max].
    """

    id: int
    t: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if not (self.t >= 0 and float(self.t).is_integer()):
            raise ValueError(f"miner {self.id}: t must be a nonnegative integer, got {self.t}")
        if not (0.0 < self.x_min < self.x_max):
            raise ValueError(
                f"miner {self.id}: demand bounds must satisfy 0 < x_min < x_max, "
                f"got ({self.x_min}, {self.x_max})"
            )


@dataclass(frozen=True)
class MarketParams:
    """Global market constants.

    R      fixed block reward (tokens)
    r      variable reward per transaction (tokens/transaction)
    lambda_  block arrival rate (1/seconds); JSON/config key is "lambda"
    z      propagation delay per transaction (seconds/transaction)
    c      electricity cost factor (money per demand unit per time unit)
    T      service-time factor (seconds); c*T is the marginal cost per unit
    p_max  price cap
    n      number of miners, at least 2
    """

    R: float
    r: float
    lambda_: float
    z: float
    c: float
    p_max: float
    n: int
    T: float = 1.0

    def __post_init__(self):
        for name in ("R", "r", "lambda_", "z", "c", "p_max", "T"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.r < 0 or self.z < 0 or self.c < 0:
            raise ValueError("r, z and c must be nonnegative")
        if self.lambda_ <= 0:
            raise ValueError(f"lambda must be positive, got {self.lambda_}")
        if self.T <= 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.p_max <= self.marginal_cost:
            raise ValueError(
                f"p_max={self.p_max} must exceed the marginal cost c*T={self.marginal_cost}"
            )

    @property
    def marginal_cost(self) -> float:
        return self.c * self.T


@dataclass(frozen=True)
class PriceSchedule:
    """Unit prices charged to the miners: one shared price or one per miner."""

    prices: np.ndarray
    is_uniform: bool

    def __post_init__(self):
        object.__setattr__(self, "prices", _frozen_array(self.prices))
        if self.prices.ndim != 1 or self.prices.size == 0:
            raise ValueError("prices must be a nonempty 1-d vector")
        if not np.all(self.prices > 0.0):
            raise ValueError("every price must be positive")
        if self.is_uniform and self.prices.size > 1 and not np.all(self.prices == self.prices[0]):
            raise ValueError("uniform schedule with unequal prices")

    @classmethod
    def uniform(cls, p: float, n: int) -> "PriceSchedule":
        return cls(np.full(n, float(p)), is_uniform=True)

    @classmethod
    def discriminatory(cls, prices: Sequence[float]) -> "PriceSchedule":
        return cls(np.asarray(prices, dtype=float), is_uniform=False)

    @property
    def scheme(self) -> str:
        return "uniform" if self.is_uniform else "discriminatory"

    def price_of(self, i: int) -> float:
        return float(self.prices[i])

    def validate_cap(self, params: MarketParams) -> None:
        if self.prices.size != params.n:
            raise ValueError(f"schedule has {self.prices.size} prices for n={params.n} miners")
        if np.any(self.prices > params.p_max):
            raise ValueError(f"prices exceed the cap p_max={params.p_max}")

    def scaled(self, factor: float) -> "PriceSchedule":
        return PriceSchedule(self.prices * factor, self.is_uniform)


@dataclass(frozen=True)
class DemandProfile:
    """Service demand vector plus per-miner strict-interiority flags."""

    x: np.ndarray
    interior: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x))
        object.__setattr__(self, "interior", _frozen_array(self.interior, dtype=bool))
        if self.x.shape != self.interior.shape:
            raise ValueError("x and interior must have the same length")
        if self.x.sum() <= 0.0:
            raise DegenerateDemandError("total demand must be positive")

    @classmethod
    def of(cls, x: Sequence[float], profiles: Sequence[MinerProfile] | None = None) -> "DemandProfile":
        """Build from a demand vector, flagging entries strictly inside the bounds.

        Without profiles the bounds are unknown and every positive entry is
        treated as interior.
        """
        xv = np.asarray(x, dtype=float)
        if profiles is None:
            return cls(xv, xv > 0.0)
        lo, hi = bounds_arrays(profiles)
        slack = 1e-9 * np.maximum(1.0, hi)
        if np.any(xv < lo - slack) or np.any(xv > hi + slack):
            raise ValueError("demand outside the [x_min, x_max] bounds")
        return cls(xv, (xv > lo) & (xv < hi))

    @property
    def total(self) -> float:
        return float(self.x.sum())

    @property
    def all_interior(self) -> bool:
        return bool(self.interior.all())


@dataclass(frozen=True)
class EffectiveReward:
    """Delay-discounted block rewards a_i = (R + r*t_i) * exp(-lambda*z*t_i)."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen_array(self.a))
        if not np.all(self.a > 0.0):
            raise ValueError("effective rewards must be positive")


def t_vector(profiles: Sequence[MinerProfile]) -> np.ndarray:
    return np.array([p.t for p in profiles], dtype=float)


def bounds_arrays(profiles: Sequence[MinerProfile]) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([p.x_min for p in profiles], dtype=float)
    hi = np.array([p.x_max for p in profiles], dtype=float)
    return lo, hi


def hash_shares(demand: DemandProfile) -> np.ndarray:
    """All relative computing powers x_i / sum_j x_j; they sum to one."""
    total = demand.x.sum()
    if total <= 0.0:
        raise DegenerateDemandError("hash shares undefined for zero total demand")
    return demand.x / total


def hash_share(demand: DemandProfile, i: int) -> float:
    """Miner i's share of the total purchased computing power."""
    total = demand.x.sum()
    if total <= 0.0:
        raise DegenerateDemandError("hash share undefined for zero total demand")
    return float(demand.x[i] / total)


def orphan_probability(t: int, params: MarketParams) -> float:
    """Chance a freshly mined block of t transactions is orphaned in transit.

    Propagation takes z*t seconds while competing blocks arrive at rate
    lambda, so survival is exp(-lambda*z*t).
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return -math.expm1(-params.lambda_ * params.z * t)


def win_probability(demand: DemandProfile, i: int, t_i: int, params: MarketParams) -> float:
    """Probability miner i both solves the puzzle first and avoids orphaning."""
    return hash_share(demand, i) * math.exp(-params.lambda_ * params.z * t_i)


def miner_utility(
    demand: DemandProfile,
    i: int,
    schedule: PriceSchedule,
    profiles: Sequence[MinerProfile],
    params: MarketParams,
) -> float:
    """Expected reward minus service bill for miner i."""
    t_i = profiles[i].t
    reward = (params.R + params.r * t_i) * win_probability(demand, i, t_i, params)
    return reward - schedule.price_of(i) * float(demand.x[i])


def miner_utilities(
    demand: DemandProfile,
    schedule: PriceSchedule,
    profiles: Sequence[MinerProfile],
    params: MarketParams,
) -> np.ndarray:
    t = t_vector(profiles)
    a = (params.R + params.r * t) * np.exp(-params.lambda_ * params.z * t)
    return a * hash_shares(demand) - schedule.prices * demand.x


def miner_utility_gradient(
    demand: DemandProfile,
    i: int,
    schedule: PriceSchedule,
    profiles: Sequence[MinerProfile],
    params: MarketParams,
) -> float:
    """Analytic du_i/dx_i.

    The share derivative is S_i / X^2 with S_i the opponents' demand and X
    the total, so du_i/dx_i = a_i * S_i / X^2 - p_i.
    """
    t_i = profiles[i].t
    a_i = (params.R + params.r * t_i) * math.exp(-params.lambda_ * params.z * t_i)
    total = demand.x.sum()
    if total <= 0.0:
        raise DegenerateDemandError("utility gradient undefined for zero total demand")
    others = total - float(demand.x[i])
    return a_i * others / total**2 - schedule.price_of(i)


def cfp_profit(demand: DemandProfile, schedule: PriceSchedule, params: MarketParams) -> float:
    """Provider profit: revenue minus the c*T marginal cost on every unit sold."""
    if schedule.prices.size != demand.x.size:
        raise ValueError("schedule and demand lengths disagree")
    return float(np.dot(schedule.prices - params.marginal_cost, demand.x))


def effective_rewards(profiles: Sequence[MinerProfile], params: MarketParams) -> EffectiveReward:
    """Per-miner stakes in the race: block reward discounted by orphaning risk."""
    t = t_vector(profiles)
    return EffectiveReward((params.R + params.r * t) * np.exp(-params.lambda_ * params.z * t))
