"""Discrete execution of a continuous position rule, with transaction costs.

The continuous rule is sampled at the grid dates with a one-period delay:
the holdings traded into at date t_n are the rule evaluated at t_{n-1}, the
position at t_0 is bought outright, and everything is liquidated at t_N.
All costs and the rebalancing drag accumulate in a pure transaction account
(asset index d+1, price identically 1) so that the package of legs plus
account is self-financing in the generalized sense: portfolio value drops
by exactly the fee paid at every trading date.

Fees: a trade of volume y > 0 costs max(p1 * y, p2); zero volume is free.
Volume only counts risky legs; moving the risk-free or account balance is
free.  p1 is a fraction here (0.001, not 0.1): the config layer owns the
percent convention and converts exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import MarketScenario
from . import strategy as strat
from .strategy import SalopekStrategy, ShiryaevStrategy, StrategySpec


@dataclass(frozen=True)
class CostSchedule:
    """Proportional-with-minimum fee schedule (p1 as a fraction of volume)."""

    proportional: float = 0.0
    minimum_fee: float = 0.0

    def __post_init__(self):
        if self.proportional < 0 or not np.isfinite(self.proportional):
            raise ValueError(f"proportional rate must be >= 0, got {self.proportional}")
        if self.minimum_fee < 0 or not np.isfinite(self.minimum_fee):
            raise ValueError(f"minimum fee must be >= 0, got {self.minimum_fee}")


@dataclass
class TradeLedger:
    """Full accounting record of one discretely executed scenario.

    Row n of ``holdings`` (n = 0 .. N) is the position traded into at date
    t_n: columns 0..d are the risk-free and risky legs, column d+1 the
    transaction account.  The last row holds only the account: the risky
    book is flat after liquidation.
    """

    holdings: np.ndarray           # (N+1, d+2)
    volumes: np.ndarray            # (N+1,) traded volume at each date
    costs: np.ndarray              # (N+1,) fee paid at each date
    rebalancing: np.ndarray        # (N+1,) self-financing drag, 0 at both ends
    net_revenue: float             # liquidation proceeds net of the final fee
    values: np.ndarray             # (N+1,) discrete portfolio value V_Phi
    continuous_values: np.ndarray  # (N+1,) frictionless wealth V_Psi
    running_min: np.ndarray        # (N+1,) prefix minimum of values


def transaction_cost(volume, schedule: CostSchedule):
    """Fee for traded volume y: max(p1 y, p2) if y > 0, else 0."""
    volume = np.asarray(volume, dtype=float)
    if np.any(volume < 0):
        raise ValueError("volume cannot be negative")
    fee = np.where(
        volume > 0,
        np.maximum(schedule.proportional * volume, schedule.minimum_fee),
        0.0,
    )
    return fee if fee.ndim else float(fee)


def trading_volume(previous, new, prices, phase: str):
    """Turnover in currency at one date, risky legs only.

    ``previous`` and ``new`` are holdings rows over assets 0..d (risk-free
    first), ``prices`` the matching price row with prices[0] = 1.  The
    ``phase`` is "purchase" (buy ``new`` from nothing), "rebalance"
    (``previous`` to ``new``), or "liquidate" (close out ``previous``).
    """
    previous = np.asarray(previous, dtype=float)
    new = np.asarray(new, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if phase == "purchase":
        traded = new[1:]
    elif phase == "rebalance":
        traded = new[1:] - previous[1:]
    elif phase == "liquidate":
        traded = previous[1:]
    else:
        raise ValueError(f"unknown phase {phase!r}")
    return float(np.abs(traded) @ prices[1:])


def rebalancing_cost(previous, new, prices):
    """Cash injected to move from ``previous`` to ``new`` at ``prices``.

    Sums over all legs 0..d including the risk-free one.  Positive values
    drain the transaction account; negative values credit it.
    """
    previous = np.asarray(previous, dtype=float)
    new = np.asarray(new, dtype=float)
    prices = np.asarray(prices, dtype=float)
    return float((new - previous) @ prices)


def net_liquidation_revenue(final_holdings, final_prices, schedule: CostSchedule):
    """Proceeds of closing the book at terminal prices, net of the fee.

    The fee is charged on risky turnover only; the risk-free balance is
    redeemed for free but counts toward proceeds.
    """
    final_holdings = np.asarray(final_holdings, dtype=float)
    final_prices = np.asarray(final_prices, dtype=float)
    volume = trading_volume(final_holdings, np.zeros_like(final_holdings), final_prices, "liquidate")
    return float(final_holdings @ final_prices) - transaction_cost(volume, schedule)


def sample_strategy(scenario: MarketScenario, spec: StrategySpec) -> np.ndarray:
    """Holdings grid of the delayed-sampling execution, legs 0..d only.

    Row n (n = 0 .. N-1) is the continuous rule evaluated at date t_n, i.e.
    the position traded into at t_n and held over (t_n, t_{n+1}]; row N is
    zero, the liquidation.  Shape (N+1, d+1).
    """
    n = scenario.n_periods
    d = scenario.n_assets
    out = np.zeros((n + 1, d + 1))
    if isinstance(spec, ShiryaevStrategy):
        if d != 1:
            raise ValueError(f"the quadratic rule trades exactly one risky asset, market has {d}")
        s = scenario.prices[0, :n]
        psi0, psi1 = strat.shiryaev_positions(scenario.initial_prices[0], s, spec.gamma)
        out[:n, 0] = psi0
        out[:n, 1] = psi1
    elif isinstance(spec, SalopekStrategy):
        if d < 2:
            raise ValueError(f"the power-mean rule needs at least two risky assets, market has {d}")
        # price grid transposed to (dates, assets) so the asset axis is last
        out[:n, 1:] = strat.salopek_positions(
            scenario.prices[:, :n].T, spec.alpha, spec.beta, spec.gamma, axis=-1
        )
    else:
        raise TypeError(f"unknown strategy spec {spec!r}")
    return out


def continuous_value(scenario: MarketScenario, spec: StrategySpec) -> np.ndarray:
    """Frictionless wealth V_Psi along the whole grid, from the closed forms."""
    if isinstance(spec, ShiryaevStrategy):
        return strat.shiryaev_value_continuous(
            scenario.initial_prices[0], scenario.prices[0], spec.gamma
        )
    if isinstance(spec, SalopekStrategy):
        return strat.salopek_value_continuous(
            scenario.prices.T, spec.alpha, spec.beta, spec.gamma, axis=-1
        )
    raise TypeError(f"unknown strategy spec {spec!r}")


def run_discrete_strategy(
    scenario: MarketScenario, spec: StrategySpec, schedule: CostSchedule
) -> TradeLedger:
    """Execute the rule on one scenario and account for every trade.

    This is the readable single-scenario reference; the Monte Carlo driver
    runs the same arithmetic in vectorized form (see ``run_batch``) and the
    test suite pins the two against each other.
    """
    n = scenario.n_periods
    legs = sample_strategy(scenario, spec)                   # (N+1, d+1)
    aug = np.vstack([np.ones(n + 1), scenario.prices]).T     # (N+1, d+1) with S^0 = 1

    volumes = np.empty(n + 1)
    rebalancing = np.zeros(n + 1)
    volumes[0] = trading_volume(np.zeros_like(legs[0]), legs[0], aug[0], "purchase")
    for k in range(1, n):
        volumes[k] = trading_volume(legs[k - 1], legs[k], aug[k], "rebalance")
        rebalancing[k] = rebalancing_cost(legs[k - 1], legs[k], aug[k])
    volumes[n] = trading_volume(legs[n - 1], legs[n], aug[n], "liquidate")
    costs = transaction_cost(volumes, schedule)

    account = np.empty(n + 1)
    account[0] = -costs[0]
    for k in range(1, n):
        account[k] = account[k - 1] - rebalancing[k] - costs[k]
    revenue = net_liquidation_revenue(legs[n - 1], aug[n], schedule)
    account[n] = account[n - 1] + revenue

    values = np.einsum("ni,ni->n", legs, aug) + account
    values[n] = account[n]  # risky book is flat after liquidation
    return TradeLedger(
        holdings=np.hstack([legs, account[:, None]]),
        volumes=volumes,
        costs=costs,
        rebalancing=rebalancing,
        net_revenue=revenue,
        values=values,
        continuous_values=np.asarray(continuous_value(scenario, spec), dtype=float),
        running_min=np.minimum.accumulate(values),
    )


def verify_generalized_self_financing(ledger: TradeLedger, scenario: MarketScenario) -> float:
    """Largest violation of "value drops by exactly the fee at each trade".

    At every date the pre-trade value of the incoming book, minus the fee
    paid, must equal the post-trade value; the incoming book at t_0 is the
    zero initial endowment.  Returns max |residual| over the grid, which is
    rounding noise for any ledger this module produced.
    """
    n = scenario.n_periods
    aug = np.vstack([np.ones(n + 1), scenario.prices, np.ones(n + 1)]).T  # (N+1, d+2)
    pre = np.empty(n + 1)
    pre[0] = 0.0
    pre[1:] = np.einsum("ni,ni->n", ledger.holdings[:-1], aug[1:])
    return float(np.max(np.abs(pre - ledger.costs - ledger.values)))


@dataclass
class BatchOutcomes:
    """Terminal statistics of a block of scenarios, one entry per path."""

    terminal_discrete: np.ndarray    # V_Phi at T after liquidation
    terminal_continuous: np.ndarray  # V_Psi at T
    running_min: np.ndarray          # min over the grid of V_Phi


def run_batch(prices: np.ndarray, spec: StrategySpec, schedule: CostSchedule) -> BatchOutcomes:
    """Vectorized execution over a block of price grids.

    ``prices`` has shape (n_paths, n_assets, N+1).  Implements exactly the
    arithmetic of ``run_discrete_strategy`` with the path axis in front,
    returning only the per-path outcome fields the Monte Carlo layer needs.
    """
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 3:
        raise ValueError("prices must have shape (n_paths, n_assets, n_periods + 1)")
    n_paths, d, n_plus_1 = prices.shape
    n = n_plus_1 - 1

    if isinstance(spec, ShiryaevStrategy):
        if d != 1:
            raise ValueError(f"the quadratic rule trades exactly one risky asset, market has {d}")
        s = prices[:, 0, :]
        s0 = s[:, :1]
        risky = (2.0 * spec.gamma * (s[:, :n] - s0) / s0)[:, :, None]  # (B, N, 1)
        riskfree = spec.gamma * (s0 * s0 - s[:, :n] ** 2) / s0         # (B, N)
        v_psi = spec.gamma * (s - s0) ** 2 / s0                        # (B, N+1)
    elif isinstance(spec, SalopekStrategy):
        if d < 2:
            raise ValueError(f"the power-mean rule needs at least two risky assets, market has {d}")
        grid = np.swapaxes(prices, 1, 2)                               # (B, N+1, d)
        risky = strat.salopek_positions(grid[:, :n, :], spec.alpha, spec.beta, spec.gamma)
        riskfree = np.zeros((n_paths, n))
        v_psi = strat.salopek_value_continuous(grid, spec.alpha, spec.beta, spec.gamma, axis=-1)
    else:
        raise TypeError(f"unknown strategy spec {spec!r}")

    s_risky = np.swapaxes(prices, 1, 2)  # (B, N+1, d)

    volumes = np.empty((n_paths, n + 1))
    volumes[:, 0] = np.einsum("bi,bi->b", np.abs(risky[:, 0, :]), s_risky[:, 0, :])
    d_risky = np.diff(risky, axis=1)                                   # (B, N-1, d)
    volumes[:, 1:n] = np.einsum("bni,bni->bn", np.abs(d_risky), s_risky[:, 1:n, :])
    volumes[:, n] = np.einsum("bi,bi->b", np.abs(risky[:, n - 1, :]), s_risky[:, n, :])
    fees = transaction_cost(volumes, schedule)

    # self-financing drag at interior dates, all legs at once
    drag = np.zeros((n_paths, n + 1))
    drag[:, 1:n] = np.diff(riskfree, axis=1) + np.einsum(
        "bni,bni->bn", d_risky, s_risky[:, 1:n, :]
    )

    account = -np.cumsum(fees[:, :n] + drag[:, :n], axis=1)            # (B, N) rows t_0..t_{N-1}
    revenue = (
        riskfree[:, n - 1]
        + np.einsum("bi,bi->b", risky[:, n - 1, :], s_risky[:, n, :])
        - fees[:, n]
    )

    v_phi = np.empty((n_paths, n + 1))
    v_phi[:, :n] = riskfree + np.einsum("bni,bni->bn", risky, s_risky[:, :n, :]) + account
    v_phi[:, n] = account[:, n - 1] + revenue

    return BatchOutcomes(
        terminal_discrete=v_phi[:, n],
        terminal_continuous=v_psi[:, n],
        running_min=v_phi.min(axis=1),
    )
