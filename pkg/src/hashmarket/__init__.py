"""Pricing and demand equilibria for cloud-assisted proof-of-work mining.

A provider (leader) prices computing service; miners (followers) buy
demand and race for block rewards. The package solves both stages under
uniform and per-miner pricing, validates the analytic race probabilities
by Monte Carlo, and runs reproducible parameter sweeps.
"""

from .errors import (
    ConfigError,
    DegenerateDemandError,
    HashMarketError,
    InfeasiblePricingError,
    NumericsError,
)
from .market import (
    DemandProfile,
    EffectiveReward,
    MarketParams,
    MinerProfile,
    PriceSchedule,
    cfp_profit,
    effective_rewards,
    hash_share,
    hash_shares,
    miner_utilities,
    miner_utility,
    miner_utility_gradient,
    orphan_probability,
    win_probability,
)
from .demand import (
    NashSolveOptions,
    SolveMode,
    StageTwoResult,
    UniquenessDiagnostics,
    best_response,
    best_response_dynamics,
    closed_form_ne_discriminatory,
    closed_form_ne_uniform,
    solve_stage_two,
    uniqueness_diagnostics,
)
from .pricing import (
    ConcavityReport,
    GradientOptions,
    PricingDiagnostics,
    Regime,
    StackelbergResult,
    VIProbeReport,
    concavity_regime,
    discriminatory_profit,
    solve_discriminatory,
    solve_uniform,
    uniform_profit,
    uniform_profit_derivative,
    vi_monotonicity_probe,
)
from .montecarlo import SimConfig, SimReport, empirical_utility, simulate_races
from .scenarios import (
    DEFAULT_SEED,
    ExplicitPopulation,
    GaussianPopulation,
    MonteCarloSettings,
    ScenarioConfig,
    SweepRow,
    SweepSpec,
    build_profiles,
    case_study_rows,
    case_study_three_miners,
    default_scenario,
    load_config,
    read_results,
    run_sweep,
    write_results,
    write_results_json,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateDemandError",
    "HashMarketError",
    "InfeasiblePricingError",
    "NumericsError",
    "DemandProfile",
    "EffectiveReward",
    "MarketParams",
    "MinerProfile",
    "PriceSchedule",
    "cfp_profit",
    "effective_rewards",
    "hash_share",
    "hash_shares",
    "miner_utilities",
    "miner_utility",
    "miner_utility_gradient",
    "orphan_probability",
    "win_probability",
    "NashSolveOptions",
    "SolveMode",
    "StageTwoResult",
    "UniquenessDiagnostics",
    "best_response",
    "best_response_dynamics",
    "closed_form_ne_discriminatory",
    "closed_form_ne_uniform",
    "solve_stage_two",
    "uniqueness_diagnostics",
    "ConcavityReport",
    "GradientOptions",
    "PricingDiagnostics",
    "Regime",
    "StackelbergResult",
    "VIProbeReport",
    "concavity_regime",
    "discriminatory_profit",
    "solve_discriminatory",
    "solve_uniform",
    "uniform_profit",
    "uniform_profit_derivative",
    "vi_monotonicity_probe",
    "SimConfig",
    "SimReport",
    "empirical_utility",
    "simulate_races",
    "DEFAULT_SEED",
    "ExplicitPopulation",
    "GaussianPopulation",
    "MonteCarloSettings",
    "ScenarioConfig",
    "SweepRow",
    "SweepSpec",
    "build_profiles",
    "case_study_rows",
    "case_study_three_miners",
    "default_scenario",
    "load_config",
    "read_results",
    "run_sweep",
    "write_results",
    "write_results_json",
]
