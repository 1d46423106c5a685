"""Monte Carlo study of discretized arbitrage strategies in fBm markets."""

from .fbm import (
    CovarianceFactorizationError,
    GaussianPath,
    assemble_fbm_path,
    fbm_covariance,
    generate_fbm_exact,
    generate_fbm_spectral,
    generate_increments_spectral,
    increment_autocovariance,
    spectral_density_truncated,
)
from .ledger import (
    CostSchedule,
    TradeLedger,
    net_liquidation_revenue,
    rebalancing_cost,
    run_discrete_strategy,
    sample_strategy,
    trading_volume,
    transaction_cost,
    verify_generalized_self_financing,
)
from .market import (
    AssetParams,
    MarketConfig,
    MarketScenario,
    build_scenario,
    map_positions_to_original,
    rescale_to_common_start,
    simulate_scenario,
)
from .montecarlo import (
    OutcomeTable,
    ScenarioOutcome,
    SummaryStats,
    SweepAxis,
    histogram,
    loss_probability,
    quantile,
    run_experiment,
    running_minimum,
    sweep,
)
from .strategy import (
    SalopekStrategy,
    ShiryaevStrategy,
    StrategySpec,
    power_mean,
    salopek_hat_positions,
    salopek_positions,
    salopek_value_continuous,
    shiryaev_positions,
    shiryaev_value_continuous,
)

__version__ = "0.1.0"
