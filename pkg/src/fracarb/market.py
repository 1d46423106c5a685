"""Geometric fBm market scenarios.

Each risky asset follows S_t = s0 * exp(mu * t + sigma * B_t) for an fBm B
with its own Hurst index, independent across assets; the risk-free asset is
identically 1.  The arbitrage constructions downstream need persistence, so
the market layer insists on H > 1/2 even though the raw generators accept
any H in (0, 1).

Reproducibility contract: the stream for (scenario, asset) is
PCG64(SeedSequence(master_seed, spawn_key=(path_index, asset_index))), an
injective derivation, so scenario i is the same bits no matter how many
scenarios are run, in what order, or on how many workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fbm


@dataclass(frozen=True)
class AssetParams:
    """Parameters of one risky asset."""

    drift: float
    volatility: float
    hurst: float
    initial_price: float

    def __post_init__(self):
        if not np.isfinite(self.drift):
            raise ValueError(f"drift must be finite, got {self.drift}")
        if not self.volatility > 0:
            raise ValueError(f"volatility must be positive, got {self.volatility}")
        if not 0.5 < self.hurst < 1.0:
            raise ValueError(
                f"hurst must lie in (1/2, 1) for a persistent market, got {self.hurst}"
            )
        if not self.initial_price > 0:
            raise ValueError(f"initial price must be positive, got {self.initial_price}")


@dataclass(frozen=True)
class MarketConfig:
    """A simulated market: assets, grid, and the master seed."""

    assets: tuple[AssetParams, ...]
    horizon: float = 1.0
    n_periods: int = 250
    master_seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        if len(self.assets) < 1:
            raise ValueError("a market needs at least one risky asset")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_periods) < 1:
            raise ValueError(f"n_periods must be >= 1, got {self.n_periods}")
        object.__setattr__(self, "n_periods", int(self.n_periods))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_periods + 1)


@dataclass
class MarketScenario:
    """One realized market path on the grid."""

    times: np.ndarray       # (N+1,)
    prices: np.ndarray      # (n_assets, N+1), strictly positive
    fbm_values: np.ndarray  # (n_assets, N+1), the driving fBm draws

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.prices = np.atleast_2d(np.asarray(self.prices, dtype=float))
        self.fbm_values = np.atleast_2d(np.asarray(self.fbm_values, dtype=float))
        n = self.times.size
        if self.prices.shape[1] != n or self.fbm_values.shape != self.prices.shape:
            raise ValueError("prices and fbm_values must be (n_assets, len(times))")
        if np.any(self.prices <= 0):
            raise ValueError("prices must be strictly positive")

    @property
    def n_assets(self) -> int:
        return self.prices.shape[0]

    @property
    def n_periods(self) -> int:
        return self.times.size - 1

    @property
    def riskfree(self) -> np.ndarray:
        """Price path of the risk-free asset, identically one."""
        return np.ones_like(self.times)

    @property
    def initial_prices(self) -> np.ndarray:
        return self.prices[:, 0]


def asset_rng(master_seed: int, path_index: int, asset_index: int) -> np.random.Generator:
    """Independent stream for one (scenario, asset) pair."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(path_index), int(asset_index)))
    return np.random.Generator(np.random.PCG64(seq))


def build_scenario(config: MarketConfig, fbm_values) -> MarketScenario:
    """Price a scenario from given fBm draws (also the deterministic test hook).

    ``fbm_values`` has shape (n_assets, n_periods + 1) with zeros in the
    first column; passing zeros everywhere yields S_t = s0 * exp(mu * t).
    """
    times = config.times
    fbm_values = np.atleast_2d(np.asarray(fbm_values, dtype=float))
    if fbm_values.shape != (config.n_assets, times.size):
        raise ValueError(
            f"fbm_values must have shape {(config.n_assets, times.size)}, "
            f"got {fbm_values.shape}"
        )
    prices = np.empty_like(fbm_values)
    for i, asset in enumerate(config.assets):
        prices[i] = asset.initial_price * np.exp(
            asset.drift * times + asset.volatility * fbm_values[i]
        )
    return MarketScenario(times=times, prices=prices, fbm_values=fbm_values)


def simulate_scenario(
    config: MarketConfig, path_index: int, generator: str = "spectral"
) -> MarketScenario:
    """Simulate scenario ``path_index`` of the market."""
    fbm_values = _fbm_block(config, path_index, path_index + 1, generator)[0]
    return build_scenario(config, fbm_values)


def simulate_price_block(
    config: MarketConfig, start: int, stop: int, generator: str = "spectral"
) -> np.ndarray:
    """Price paths for scenarios ``start .. stop-1``, shape (B, n_assets, N+1).

    Identical bits to running simulate_scenario per index; used by the Monte
    Carlo driver to amortize FFT and matrix work across a block.
    """
    fbm_values = _fbm_block(config, start, stop, generator)
    times = config.times
    prices = np.empty_like(fbm_values)
    for i, asset in enumerate(config.assets):
        prices[:, i, :] = asset.initial_price * np.exp(
            asset.drift * times + asset.volatility * fbm_values[:, i, :]
        )
    return prices


def _fbm_block(config: MarketConfig, start: int, stop: int, generator: str) -> np.ndarray:
    """Driving fBm draws for scenarios start..stop-1, shape (B, n_assets, N+1)."""
    if generator not in ("spectral", "exact"):
        raise ValueError(f"unknown generator {generator!r}")
    n = config.n_periods
    n_paths = stop - start
    if n_paths < 0:
        raise ValueError("stop must be >= start")
    out = np.empty((n_paths, config.n_assets, n + 1))
    out[:, :, 0] = 0.0
    for i, asset in enumerate(config.assets):
        if generator == "spectral":
            n_even = n + (n % 2)
            draws = np.empty((n_paths, n_even))
            for b in range(n_paths):
                rng = asset_rng(config.master_seed, start + b, i)
                draws[b] = fbm.draw_phases(rng, n_even)
            incr = fbm.spectral_increments_from_phases(draws, asset.hurst)[:, :n]
            np.cumsum(incr, axis=-1, out=out[:, i, 1:])
            out[:, i, 1:] *= (config.horizon / n) ** asset.hurst
        else:
            factor = fbm.exact_covariance_factor(asset.hurst, n, config.horizon)
            # one matrix-vector product per path: a batched matmul rounds
            # differently for different batch shapes, which would break the
            # bit-identity between block sizes
            for b in range(n_paths):
                rng = asset_rng(config.master_seed, start + b, i)
                out[b, i, 1:] = factor @ rng.standard_normal(n)
    return out


def rescale_to_common_start(scenario: MarketScenario, target: float):
    """Rescale every asset to start at ``target``.

    Returns (rescaled scenario, per-asset scale factors).  Scaling the price
    grid commutes with simulation: the driving fBm draws are untouched.
    """
    target = float(target)
    if target <= 0:
        raise ValueError(f"target start price must be positive, got {target}")
    factors = target / scenario.initial_prices
    rescaled = MarketScenario(
        times=scenario.times,
        prices=scenario.prices * factors[:, None],
        fbm_values=scenario.fbm_values,
    )
    return rescaled, factors


def map_positions_to_original(positions, factors):
    """Map risky positions computed on a rescaled market back to the original.

    A position of psi shares of the rescaled asset equals factor * psi shares
    of the original asset (same wealth trajectory).  ``positions`` may be a
    vector (n_assets,) or any array whose last axis runs over assets.
    """
    positions = np.asarray(positions, dtype=float)
    factors = np.asarray(factors, dtype=float)
    return positions * factors
