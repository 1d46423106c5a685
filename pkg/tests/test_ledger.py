"""Tests for discrete execution and transaction accounting.

A small hand-checkable scenario (three dates, one asset) pins every ledger
column to closed-form numbers; property tests then cover the identities the
accounting must satisfy on simulated markets, and the vectorized batch
engine is held bit-close to the scalar reference.
"""

import numpy as np
import pytest

from fracarb import fbm, ledger, market, strategy


def hand_scenario(prices, times=None):
    """Single-asset scenario with explicit prices (fbm column is unused)."""
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    if times is None:
        times = np.linspace(0.0, 1.0, prices.shape[1])
    return market.MarketScenario(times, prices, np.zeros_like(prices))


def simulated_scenarios(n, **kwargs):
    defaults = dict(drift=0.1, volatility=0.8, hurst=0.6, initial_price=100.0)
    defaults.update(kwargs)
    config = market.MarketConfig(
        assets=(market.AssetParams(**defaults),), n_periods=50, master_seed=7
    )
    return [market.simulate_scenario(config, i) for i in range(n)]


def two_asset_scenarios(n, n_periods=50, start=(100.0, 100.0)):
    assets = tuple(
        market.AssetParams(0.05, 0.4, 0.7, s0) for s0 in start
    )
    config = market.MarketConfig(assets=assets, n_periods=n_periods, master_seed=19)
    return [market.simulate_scenario(config, i) for i in range(n)]


class TestCostSchedule:
    def test_fee_examples(self):
        schedule = ledger.CostSchedule(proportional=0.001, minimum_fee=0.5)
        assert ledger.transaction_cost(200.0, schedule) == 0.5    # minimum binds
        assert ledger.transaction_cost(2000.0, schedule) == 2.0   # proportional binds
        assert ledger.transaction_cost(0.0, schedule) == 0.0      # no trade, no fee

    def test_fee_is_elementwise(self):
        schedule = ledger.CostSchedule(proportional=0.01, minimum_fee=1.0)
        fees = ledger.transaction_cost(np.array([0.0, 50.0, 500.0]), schedule)
        assert np.array_equal(fees, [0.0, 1.0, 5.0])

    def test_rejects_negative_volume(self):
        with pytest.raises(ValueError):
            ledger.transaction_cost(-1.0, ledger.CostSchedule())

    def test_rejects_bad_schedule(self):
        with pytest.raises(ValueError):
            ledger.CostSchedule(proportional=-0.1)
        with pytest.raises(ValueError):
            ledger.CostSchedule(minimum_fee=-1.0)
        with pytest.raises(ValueError):
            ledger.CostSchedule(proportional=np.inf)


class TestVolumes:
    def test_phase_examples(self):
        prices = np.array([1.0, 100.0])
        assert ledger.trading_volume([0.0, 0.0], [-150.0, 2.0], prices, "purchase") == 200.0
        assert ledger.trading_volume([-150.0, 2.0], [30.0, 3.5], prices, "rebalance") == 150.0
        assert ledger.trading_volume([5.0, 0.2], [0.0, 0.0], np.array([1.0, 110.0]), "liquidate") == 22.0

    def test_riskfree_leg_is_free(self):
        prices = np.array([1.0, 50.0])
        assert ledger.trading_volume([0.0, 1.0], [999.0, 1.0], prices, "rebalance") == 0.0

    def test_unknown_phase(self):
        with pytest.raises(ValueError):
            ledger.trading_volume([0.0], [0.0], [1.0], "swap")

    def test_net_liquidation_revenue(self):
        schedule = ledger.CostSchedule(proportional=0.001)
        revenue = ledger.net_liquidation_revenue(
            [5.0, 0.2], np.array([1.0, 110.0]), schedule
        )
        assert revenue == pytest.approx(26.978, rel=1e-14)


class TestHandScenario:
    """gamma = 10, s0 = 10, prices 10 -> 10.5 -> 11, fees (1%, 0.2)."""

    def build(self):
        scenario = hand_scenario([10.0, 10.5, 11.0])
        spec = strategy.ShiryaevStrategy(gamma=10.0)
        schedule = ledger.CostSchedule(proportional=0.01, minimum_fee=0.2)
        return ledger.run_discrete_strategy(scenario, spec, schedule), scenario

    def test_holdings_follow_the_delayed_rule(self):
        result, _ = self.build()
        assert result.holdings.shape == (3, 3)
        assert np.allclose(result.holdings[0, :2], [0.0, 0.0], atol=1e-14)
        assert np.allclose(result.holdings[1, :2], [-10.25, 1.0], rtol=1e-14)
        assert np.array_equal(result.holdings[2, :2], [0.0, 0.0])

    def test_volumes_and_fees(self):
        result, _ = self.build()
        assert np.allclose(result.volumes, [0.0, 10.5, 11.0], rtol=1e-14)
        # zero volume is free even with a positive minimum fee
        assert np.allclose(result.costs, [0.0, 0.2, 0.2], rtol=1e-14)

    def test_rebalancing_drag_closed_form(self):
        # quadratic rule: drag at an interior date is gamma (Delta S)^2 / s0
        result, _ = self.build()
        assert result.rebalancing[1] == pytest.approx(0.25, rel=1e-12)
        assert result.rebalancing[0] == 0.0 and result.rebalancing[2] == 0.0

    def test_account_and_values(self):
        result, _ = self.build()
        assert result.net_revenue == pytest.approx(0.55, rel=1e-12)
        assert np.allclose(result.holdings[:, -1], [0.0, -0.45, 0.1], rtol=1e-12, atol=1e-14)
        assert np.allclose(result.values, [0.0, -0.2, 0.1], rtol=1e-12, atol=1e-14)
        assert np.allclose(result.running_min, [0.0, -0.2, -0.2], rtol=1e-12, atol=1e-14)
        assert np.allclose(result.continuous_values, [0.0, 0.25, 1.0], rtol=1e-12)

    def test_self_financing_holds(self):
        result, scenario = self.build()
        assert ledger.verify_generalized_self_financing(result, scenario) < 1e-12


class TestLedgerIdentities:
    def test_flat_start_pays_no_initial_fee(self):
        # both rules start with a zero-value book on the benchmark markets
        # (quadratic rule: flat by construction; spread rule: equal starts),
        # and a zero-volume purchase is free even under a minimum fee
        schedule = ledger.CostSchedule(proportional=0.001, minimum_fee=0.5)
        for scenario, spec in [
            (simulated_scenarios(1)[0], strategy.ShiryaevStrategy()),
            (two_asset_scenarios(1)[0], strategy.SalopekStrategy()),
        ]:
            result = ledger.run_discrete_strategy(scenario, spec, schedule)
            assert result.volumes[0] == 0.0
            assert result.costs[0] == 0.0
            assert result.values[0] == 0.0

    def test_unequal_start_requires_initial_capital(self):
        # with unequal start prices the spread rule opens a book worth
        # V_Psi(0) > 0; the account funds only the fee, so the initial value
        # is V_Psi(0) - L_0 and the account column starts at -L_0
        scenario = two_asset_scenarios(1, start=(80.0, 125.0))[0]
        schedule = ledger.CostSchedule(proportional=0.001, minimum_fee=0.5)
        result = ledger.run_discrete_strategy(
            scenario, strategy.SalopekStrategy(), schedule
        )
        assert result.costs[0] > 0
        assert result.continuous_values[0] > 0
        assert result.values[0] == pytest.approx(
            result.continuous_values[0] - result.costs[0], rel=1e-12
        )
        assert result.holdings[0, -1] == pytest.approx(-result.costs[0], rel=1e-12)

    def test_value_minus_continuous_equals_account(self):
        # before liquidation both books hold the same-date rule, so the gap
        # between discrete and frictionless wealth is the account balance
        schedule = ledger.CostSchedule(proportional=0.001, minimum_fee=0.5)
        for scenario in simulated_scenarios(5):
            result = ledger.run_discrete_strategy(
                scenario, strategy.ShiryaevStrategy(), schedule
            )
            n = scenario.n_periods
            gap = result.values[:n] - result.continuous_values[:n]
            scale = np.abs(result.continuous_values).max() + 1.0
            assert np.allclose(gap, result.holdings[:n, -1], atol=1e-9 * scale)

    def test_self_financing_on_simulated_markets(self):
        schedule = ledger.CostSchedule(proportional=0.001, minimum_fee=0.5)
        for scenario in simulated_scenarios(5) + two_asset_scenarios(5):
            spec = (
                strategy.ShiryaevStrategy()
                if scenario.n_assets == 1
                else strategy.SalopekStrategy()
            )
            result = ledger.run_discrete_strategy(scenario, spec, schedule)
            residual = ledger.verify_generalized_self_financing(result, scenario)
            scale = np.abs(result.values).max() + 1.0
            assert residual < 1e-9 * scale

    def test_self_financing_flags_costly_entry(self):
        # the check measures against a zero initial endowment, so a book
        # that costs money to open shows up as a residual of exactly that size
        scenario = two_asset_scenarios(1, start=(80.0, 125.0))[0]
        result = ledger.run_discrete_strategy(
            scenario, strategy.SalopekStrategy(), ledger.CostSchedule()
        )
        residual = ledger.verify_generalized_self_financing(result, scenario)
        assert residual == pytest.approx(result.continuous_values[0], rel=1e-9)

    def test_self_financing_detects_corruption(self):
        scenario = simulated_scenarios(1)[0]
        result = ledger.run_discrete_strategy(
            scenario, strategy.ShiryaevStrategy(), ledger.CostSchedule()
        )
        result.holdings[10, -1] += 1e-3
        result.values[10] += 1e-3  # keep values consistent with holdings
        assert ledger.verify_generalized_self_financing(result, scenario) > 1e-4

    def test_quadratic_rule_drag_is_nonnegative(self):
        # moving along the quadratic rule always injects cash at interior dates
        for scenario in simulated_scenarios(20):
            result = ledger.run_discrete_strategy(
                scenario, strategy.ShiryaevStrategy(), ledger.CostSchedule()
            )
            floor = -1e-14 * 100.0 * 100.0  # gamma * s0 float-noise scale
            assert np.all(result.rebalancing >= floor)

    def test_terminal_value_scales_with_gamma_when_fees_are_proportional(self):
        scenario = two_asset_scenarios(1)[0]
        schedule = ledger.CostSchedule(proportional=0.001)
        base = ledger.run_discrete_strategy(
            scenario, strategy.SalopekStrategy(gamma=100.0), schedule
        )
        for c in (0.5, 10.0):
            scaled = ledger.run_discrete_strategy(
                scenario, strategy.SalopekStrategy(gamma=100.0 * c), schedule
            )
            assert np.allclose(scaled.values, c * base.values, rtol=1e-12)

    def test_flat_market_produces_an_empty_ledger(self):
        config = market.MarketConfig(
            assets=(market.AssetParams(0.0, 0.2, 0.6, 100.0),), n_periods=12
        )
        scenario = market.build_scenario(config, np.zeros((1, 13)))
        result = ledger.run_discrete_strategy(
            scenario,
            strategy.ShiryaevStrategy(),
            ledger.CostSchedule(proportional=0.01, minimum_fee=2.0),
        )
        assert np.array_equal(result.volumes, np.zeros(13))
        assert np.array_equal(result.costs, np.zeros(13))
        assert np.array_equal(result.values, np.zeros(13))

    def test_strategy_market_mismatch_raises(self):
        one = simulated_scenarios(1)[0]
        two = two_asset_scenarios(1)[0]
        with pytest.raises(ValueError):
            ledger.run_discrete_strategy(two, strategy.ShiryaevStrategy(), ledger.CostSchedule())
        with pytest.raises(ValueError):
            ledger.run_discrete_strategy(one, strategy.SalopekStrategy(), ledger.CostSchedule())


class TestDiscretizationConvergence:
    def test_terminal_gap_shrinks_with_refinement(self):
        # execute on coarser subsamples of common fine paths; the frictionless
        # terminal gap is the accumulated drag, which scales like N^(1 - 2H)
        n_fine, n_paths, h, s0, sigma = 4000, 100, 0.75, 100.0, 0.4
        paths = np.empty((n_paths, 1, n_fine + 1))
        for b in range(n_paths):
            rng = np.random.default_rng([424, b])
            path = fbm.generate_fbm_spectral(h, n_fine, 1.0, rng)
            paths[b, 0] = s0 * np.exp(sigma * path.values)
        spec = strategy.ShiryaevStrategy(gamma=100.0)
        gaps = []
        for stride in (16, 8, 4, 2):
            out = ledger.run_batch(paths[:, :, ::stride], spec, ledger.CostSchedule())
            gaps.append(np.mean(np.abs(out.terminal_continuous - out.terminal_discrete)))
        gaps = np.array(gaps)
        assert np.all(np.diff(gaps) < 0)
        assert np.all(gaps[1:] / gaps[:-1] < 0.85)  # theory: 2^(1-2H) ~ 0.71
        assert gaps[-1] / gaps[0] < 0.45            # theory: 8^(1-2H) ~ 0.35


class TestBatchEngine:
    def test_batch_matches_scalar_reference(self):
        schedule = ledger.CostSchedule(proportional=0.001, minimum_fee=0.5)
        for scenarios, spec in [
            (simulated_scenarios(8), strategy.ShiryaevStrategy()),
            (two_asset_scenarios(8), strategy.SalopekStrategy()),
            (two_asset_scenarios(8), strategy.SalopekStrategy(alpha=-np.inf, beta=np.inf)),
        ]:
            prices = np.stack([sc.prices for sc in scenarios])
            batch = ledger.run_batch(prices, spec, schedule)
            for i, scenario in enumerate(scenarios):
                ref = ledger.run_discrete_strategy(scenario, spec, schedule)
                scale = np.abs(ref.values).max() + 1.0
                assert abs(batch.terminal_discrete[i] - ref.values[-1]) < 1e-10 * scale
                assert abs(
                    batch.terminal_continuous[i] - ref.continuous_values[-1]
                ) < 1e-10 * scale
                assert abs(batch.running_min[i] - ref.running_min[-1]) < 1e-10 * scale

    def test_batch_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            ledger.run_batch(np.ones((4, 5)), strategy.ShiryaevStrategy(), ledger.CostSchedule())

    def test_batch_strategy_market_mismatch(self):
        prices = np.full((3, 2, 11), 100.0)
        with pytest.raises(ValueError):
            ledger.run_batch(prices, strategy.ShiryaevStrategy(), ledger.CostSchedule())
        with pytest.raises(ValueError):
            ledger.run_batch(prices[:, :1], strategy.SalopekStrategy(), ledger.CostSchedule())
