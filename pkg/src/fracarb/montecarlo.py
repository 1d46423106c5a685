"""Monte Carlo experiments over market scenarios and parameter sweeps.

Scenario i always consumes the stream derived from (master_seed, i), so an
experiment is reproducible bit for bit regardless of block size or worker
count, and sweeps reuse the same draws at every grid point (common random
numbers).  Reductions run over arrays laid out in path order, so summary
statistics are order-deterministic too.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .ledger import BatchOutcomes, CostSchedule, run_batch
from .market import MarketConfig, simulate_price_block
from .strategy import SalopekStrategy, StrategySpec

# grid of persistence levels spanning the interesting range, used by the
# command line when a Hurst sweep gives no explicit grid
DEFAULT_HURST_GRID = (0.51, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.99)

DEFAULT_SWEEP_SCENARIOS = 10_000

OUTCOME_FIELDS = ("terminal_discrete", "terminal_continuous", "running_min", "account_drain")


def default_order_grid(low: int = -30, high: int = 30, stride: int = 5):
    """(alpha, beta) pairs on an integer grid plus the infinite boundary row."""
    levels = [float(a) for a in range(low, high + 1, stride)]
    pairs = [(a, b) for a in levels for b in levels if a < b]
    pairs.append((-math.inf, math.inf))
    return tuple(pairs)


@dataclass(frozen=True)
class ScenarioOutcome:
    """Terminal outcome of one executed scenario."""

    path_index: int
    terminal_discrete: float
    terminal_continuous: float
    running_min: float
    account_drain: float  # frictionless terminal wealth minus the realized one


class OutcomeTable:
    """Column-stored sequence of ScenarioOutcome, one row per path index."""

    def __init__(self, terminal_discrete, terminal_continuous, running_min):
        self.terminal_discrete = np.asarray(terminal_discrete, dtype=float)
        self.terminal_continuous = np.asarray(terminal_continuous, dtype=float)
        self.running_min = np.asarray(running_min, dtype=float)
        if not (
            self.terminal_discrete.shape
            == self.terminal_continuous.shape
            == self.running_min.shape
        ) or self.terminal_discrete.ndim != 1:
            raise ValueError("outcome columns must be 1-d arrays of equal length")

    @property
    def account_drain(self) -> np.ndarray:
        return self.terminal_continuous - self.terminal_discrete

    def column(self, field: str) -> np.ndarray:
        if field not in OUTCOME_FIELDS:
            raise KeyError(field)
        return getattr(self, field)

    def __len__(self) -> int:
        return self.terminal_discrete.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            raise TypeError("slicing not supported; use the column arrays")
        i = int(i)
        n = len(self)
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError(i)
        return ScenarioOutcome(
            path_index=i,
            terminal_discrete=float(self.terminal_discrete[i]),
            terminal_continuous=float(self.terminal_continuous[i]),
            running_min=float(self.running_min[i]),
            account_drain=float(self.terminal_continuous[i] - self.terminal_discrete[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def quantile(samples, q: float) -> float:
    """Order statistic with linear interpolation at rank q * (n - 1)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level must lie in [0, 1], got {q}")
    return float(np.quantile(samples, q))


def loss_probability(samples) -> float:
    """Fraction of strictly negative samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    return float(np.count_nonzero(samples < 0) / samples.size)


def running_minimum(values) -> np.ndarray:
    """Prefix minima of a value series."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one value")
    return np.minimum.accumulate(values)


def histogram(samples, n_bins: int):
    """Equal-width histogram spanning [min, max]; returns (counts, edges).

    The final bin is closed on the right, so the counts always sum to the
    sample size.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    n_bins = int(n_bins)
    if n_bins < 1:
        raise ValueError(f"need at least one bin, got {n_bins}")
    return np.histogram(samples, bins=n_bins, range=(samples.min(), samples.max()))


@dataclass(frozen=True)
class SummaryStats:
    """Distribution summary of one outcome column."""

    n_scenarios: int
    mean: float
    stdev: float
    minimum: float
    q05: float
    median: float
    q95: float
    maximum: float
    loss_probability: float

    @classmethod
    def from_samples(cls, samples) -> "SummaryStats":
        samples = np.asarray(samples, dtype=float)
        if samples.size == 0:
            raise ValueError("need at least one sample")
        return cls(
            n_scenarios=int(samples.size),
            mean=float(samples.mean()),
            stdev=float(samples.std(ddof=1)) if samples.size > 1 else 0.0,
            minimum=float(samples.min()),
            q05=quantile(samples, 0.05),
            median=quantile(samples, 0.5),
            q95=quantile(samples, 0.95),
            maximum=float(samples.max()),
            loss_probability=loss_probability(samples),
        )


def summarize(outcomes: OutcomeTable) -> dict:
    return {field: SummaryStats.from_samples(outcomes.column(field)) for field in OUTCOME_FIELDS}


def run_experiment(
    market: MarketConfig,
    spec: StrategySpec,
    schedule: CostSchedule,
    n_scenarios: int,
    generator: str = "spectral",
    n_threads: int = 1,
    block_size: int = 4096,
):
    """Execute the strategy on ``n_scenarios`` independent scenarios.

    Returns (OutcomeTable, {outcome field -> SummaryStats}).  Blocks of
    paths are simulated and executed vectorized; with n_threads > 1 the
    blocks run on a thread pool (the heavy numpy kernels release the GIL),
    each writing its own disjoint slice, so results do not depend on the
    worker count.
    """
    n_scenarios = int(n_scenarios)
    if n_scenarios < 1:
        raise ValueError(f"need at least one scenario, got {n_scenarios}")
    if int(n_threads) < 1:
        raise ValueError(f"need at least one worker, got {n_threads}")
    block_size = max(1, int(block_size))

    terminal_discrete = np.empty(n_scenarios)
    terminal_continuous = np.empty(n_scenarios)
    running_min = np.empty(n_scenarios)

    def do_block(lo: int, hi: int) -> None:
        prices = simulate_price_block(market, lo, hi, generator=generator)
        res: BatchOutcomes = run_batch(prices, spec, schedule)
        terminal_discrete[lo:hi] = res.terminal_discrete
        terminal_continuous[lo:hi] = res.terminal_continuous
        running_min[lo:hi] = res.running_min

    bounds = [(lo, min(lo + block_size, n_scenarios)) for lo in range(0, n_scenarios, block_size)]
    if int(n_threads) == 1:
        for lo, hi in bounds:
            do_block(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=int(n_threads)) as pool:
            for future in [pool.submit(do_block, lo, hi) for lo, hi in bounds]:
                future.result()

    outcomes = OutcomeTable(terminal_discrete, terminal_continuous, running_min)
    return outcomes, summarize(outcomes)


SWEEP_FIELDS = ("drift", "volatility", "hurst", "hurst_pair", "orders", "horizon", "frequency")

# trading dates per unit horizon when a horizon sweep rebuilds the grid
DATES_PER_YEAR = 250


@dataclass(frozen=True)
class SweepAxis:
    """One swept configuration field with its explicit grid."""

    field: str
    grid: tuple

    def __post_init__(self):
        if self.field not in SWEEP_FIELDS:
            raise ValueError(
                f"unknown sweep field {self.field!r}; supported: {', '.join(SWEEP_FIELDS)}"
            )
        object.__setattr__(self, "grid", tuple(self.grid))
        if len(self.grid) == 0:
            raise ValueError("sweep grid must not be empty")


@dataclass
class SweepPoint:
    """Results at one grid point."""

    value: object
    stats: dict


def _apply_point(market: MarketConfig, spec: StrategySpec, field: str, value):
    if field == "drift":
        assets = tuple(replace(a, drift=float(value)) for a in market.assets)
        return replace(market, assets=assets), spec
    if field == "volatility":
        assets = tuple(replace(a, volatility=float(value)) for a in market.assets)
        return replace(market, assets=assets), spec
    if field == "hurst":
        assets = tuple(replace(a, hurst=float(value)) for a in market.assets)
        return replace(market, assets=assets), spec
    if field == "hurst_pair":
        values = tuple(float(v) for v in np.atleast_1d(np.asarray(value, dtype=float)))
        if len(values) != market.n_assets:
            raise ValueError(
                f"hurst_pair point needs {market.n_assets} entries, got {len(values)}"
            )
        assets = tuple(replace(a, hurst=h) for a, h in zip(market.assets, values))
        return replace(market, assets=assets), spec
    if field == "orders":
        if not isinstance(spec, SalopekStrategy):
            raise ValueError("the orders sweep applies to the power-mean strategy only")
        alpha, beta = (float(v) for v in value)
        return market, replace(spec, alpha=alpha, beta=beta)
    if field == "horizon":
        horizon = float(value)
        return (
            replace(market, horizon=horizon, n_periods=round(DATES_PER_YEAR * horizon)),
            spec,
        )
    if field == "frequency":
        return replace(market, n_periods=int(value)), spec
    raise ValueError(f"unknown sweep field {field!r}")


def sweep(
    market: MarketConfig,
    spec: StrategySpec,
    schedule: CostSchedule,
    axis: SweepAxis,
    n_scenarios: int = DEFAULT_SWEEP_SCENARIOS,
    generator: str = "spectral",
    n_threads: int = 1,
):
    """Run one experiment per grid point of ``axis``.

    Every point keeps the same master seed, hence the same underlying
    draws: differences across the grid are not polluted by sampling noise
    beyond the parameter effect itself.
    """
    points = []
    for value in axis.grid:
        market_v, spec_v = _apply_point(market, spec, axis.field, value)
        _, stats = run_experiment(
            market_v, spec_v, schedule, n_scenarios, generator=generator, n_threads=n_threads
        )
        points.append(SweepPoint(value=value, stats=stats))
    return points
