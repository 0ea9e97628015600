"""Monte Carlo mining races validating the analytic win probabilities.

Each trial is one block race. Because the first arrival among independent
Poisson clocks with rates proportional to demand lands on miner i with
probability equal to its hash share alpha_i, the winner is drawn from the
categorical distribution over alpha directly; the winner's block then
survives propagation with probability exp(-lambda*z*t_i), else the race
pays nobody. Survivors collect R + r*t_i.

Randomness is counter-based (Philox keyed by the seed): trial k consumes
exactly the uniforms at stream positions 2k and 2k+1, so results are
bit-identical for any sharding of the trial range, and shards merge by
exact integer summation of win counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDemandError
from .market import (
    DemandProfile,
    MarketParams,
    MinerProfile,
    PriceSchedule,
    t_vector,
)

__all__ = ["SimConfig", "SimReport", "simulate_races", "empirical_utility"]

_DRAWS_PER_TRIAL = 2  # one uniform picks the winner, one decides orphaning


@dataclass(frozen=True)
class SimConfig:
    profiles: tuple[MinerProfile, ...]
    params: MarketParams
    demand: DemandProfile
    trials: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if len(self.profiles) != self.demand.x.size:
            raise ValueError("profiles and demand lengths disagree")


@dataclass(frozen=True)
class SimReport:
    """Empirical race outcomes: per-miner win rates and mean rewards.

    stderr is the binomial standard error of win_rate; the reward standard
    error is (R + r*t_i) times it, since the payout per won race is fixed.
    Win rates sum to at most one (orphaned races pay nobody).
    """

    win_rate: np.ndarray
    reward_mean: np.ndarray
    stderr: np.ndarray
    trials: int
    wins: np.ndarray

    def reward_stderr(self, profiles: Sequence[MinerProfile], params: MarketParams) -> np.ndarray:
        t = t_vector(profiles)
        return (params.R + params.r * t) * self.stderr


def _uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """The count uniforms at positions [start, start+count) of the Philox
    stream keyed by seed.

    Philox advances in counter blocks of four 64-bit outputs and each
    float64 consumes one output, so we advance whole blocks and discard the
    within-block remainder.
    """
    bitgen = np.random.Philox(key=seed)
    bitgen.advance(start // 4)
    gen = np.random.Generator(bitgen)
    remainder = start % 4
    if remainder:
        gen.random(remainder)
    return gen.random(count)


def simulate_races(cfg: SimConfig, shards: int = 1) -> SimReport:
    """Run cfg.trials independent block races.

    shards only controls the work-splitting granularity; any value yields
    the identical report for the same seed.
    """
    if shards < 1:
        raise ValueError("shards must be at least 1")
    x = cfg.demand.x
    total = x.sum()
    if total <= 0.0:
        raise DegenerateDemandError("cannot race with zero total demand")
    n = x.size
    alpha_cum = np.cumsum(x / total)
    t = t_vector(cfg.profiles)
    survival = np.exp(-cfg.params.lambda_ * cfg.params.z * t)

    wins = np.zeros(n, dtype=np.int64)
    bounds = np.linspace(0, cfg.trials, shards + 1).astype(np.int64)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi == lo:
            continue
        u = _uniforms(cfg.seed, _DRAWS_PER_TRIAL * int(lo), _DRAWS_PER_TRIAL * int(hi - lo))
        winner = np.searchsorted(alpha_cum, u[0::2], side="right")
        np.clip(winner, 0, n - 1, out=winner)  # guard the cumsum's float edge
        survived = u[1::2] < survival[winner]
        wins += np.bincount(winner[survived], minlength=n)

    win_rate = wins / cfg.trials
    reward = (cfg.params.R + cfg.params.r * t) * win_rate
    stderr = np.sqrt(win_rate * (1.0 - win_rate) / cfg.trials)
    return SimReport(
        win_rate=win_rate,
        reward_mean=reward,
        stderr=stderr,
        trials=cfg.trials,
        wins=wins,
    )


def empirical_utility(cfg: SimConfig, schedule: PriceSchedule, shards: int = 1) -> np.ndarray:
    """Mean per-race utility: empirical expected reward minus the service bill."""
    report = simulate_races(cfg, shards=shards)
    return report.reward_mean - schedule.prices * cfg.demand.x
