from dataclasses import replace

import numpy as np
import pytest

from mvhedge.analytics import (
    ProfitDistribution,
    Strategy,
    build_instance,
    correlation_sweep,
    hedged_profit_distribution,
    quantile,
    quantile_table,
    solve_strategy,
    volatility_sweep,
)
from mvhedge.distributions import case_study_specs
from mvhedge.errors import InvalidInputError
from mvhedge.frontier import frontier_sweep
from mvhedge.moments import assemble_system
from mvhedge.solver import solve_general, two_fund_basis, verify_foc

from oracles import random_instance, scenario_table


def dist(values, probs):
    return ProfitDistribution(np.asarray(values, float), np.asarray(probs, float))


class TestQuantile:
    def test_two_point_median_is_lower_value(self):
        assert quantile(dist([-100, 100], [0.5, 0.5]), [0.5])[0] == -100

    def test_near_one_is_maximum(self):
        d = dist([-3.0, 1.0, 7.0], [0.2, 0.3, 0.5])
        assert quantile(d, [1 - 1e-9])[0] == 7.0

    def test_step_function(self):
        d = dist([-3.0, 1.0, 7.0], [0.2, 0.3, 0.5])
        np.testing.assert_array_equal(quantile(d, [0.1, 0.2, 0.21, 0.5, 0.6]), [-3, -3, 1, 1, 7])

    def test_empty(self):
        with pytest.raises(InvalidInputError, match="empty distribution"):
            quantile(dist([], []), [0.5])

    @pytest.mark.parametrize("levels", [[0.0], [1.0], [0.5, 0.2], [0.2, 0.2]])
    def test_bad_levels(self, levels):
        with pytest.raises(InvalidInputError):
            quantile(dist([1.0], [1.0]), levels)


class TestHedgedDistribution:
    def test_matches_scenario_table(self, rng):
        psi, phi, r = random_instance(rng, 3, 2, 3)
        sol = solve_general(assemble_system(psi, phi, r), 1.0)
        d = hedged_profit_distribution(psi, r, sol)
        v, p, _, _ = scenario_table(psi, r, sol.x_p, sol.x_w)
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert d.mean == pytest.approx(p @ v, rel=1e-10)
        for level in (0.05, 0.3, 0.77):
            order = np.argsort(v)
            k = np.searchsorted(np.cumsum(p[order]), level)
            assert quantile(d, [level])[0] == pytest.approx(v[order][k], rel=1e-12)

    def test_mean_equals_frontier_mean(self, general_instance):
        inst = general_instance
        sol = solve_general(inst.system, 1.0)
        d = hedged_profit_distribution(inst.psi, 120.0, sol)
        (pt,) = frontier_sweep(inst.system, [1.0])
        assert d.mean == pytest.approx(pt.mean, rel=1e-9)
        assert d.variance == pytest.approx(pt.variance, rel=1e-8)

    def test_equal_outcomes_merged(self):
        psi, _, _ = random_instance(np.random.default_rng(1), 2, 2, 2)
        # at r equal to a price level that price contributes zero for every q
        d = hedged_profit_distribution(psi, float(psi.grid.prices[0]))
        assert (d.values == 0).sum() == 1
        assert d.probs[d.values == 0][0] == pytest.approx(psi.price_marginal[0], rel=1e-12)

    def test_dimension_mismatch(self, rng):
        psi, phi, r = random_instance(rng, 3, 2, 3)
        other, phi2, _ = random_instance(rng, 4, 2, 3)
        sol = solve_general(assemble_system(other, phi2, r), 1.0)
        with pytest.raises(InvalidInputError):
            hedged_profit_distribution(psi, r, sol)


class TestStrategies:
    def test_variance_ordering_general_case(self, general_instance):
        inst = general_instance
        var = {}
        for s in (Strategy.NO_HEDGE, Strategy.PRICE_ONLY, Strategy.WEATHER_ONLY, Strategy.PRICE_AND_WEATHER):
            sol = solve_strategy(inst.system, 1.0, s)
            var[s] = hedged_profit_distribution(inst.psi, 120.0, sol, s.value).variance
        assert var[Strategy.PRICE_AND_WEATHER] <= min(var[Strategy.PRICE_ONLY], var[Strategy.WEATHER_ONLY])
        assert max(var[Strategy.PRICE_ONLY], var[Strategy.WEATHER_ONLY]) <= var[Strategy.NO_HEDGE]

    def test_minimum_variance_fund_beats_restricted(self, general_instance):
        sys = general_instance.system
        x = two_fund_basis(sys).x_inf
        d = hedged_profit_distribution(general_instance.psi, 120.0, replace(
            solve_general(sys, 1.0), x_p=x[: sys.n], x_w=x[sys.n :]))
        for s in (Strategy.PRICE_ONLY, Strategy.WEATHER_ONLY, Strategy.NO_HEDGE):
            other = hedged_profit_distribution(general_instance.psi, 120.0, solve_strategy(sys, 1.0, s))
            assert d.variance <= other.variance

    def test_optimizing_strategies_pass_foc(self, general_instance):
        sys = general_instance.system
        for s in (Strategy.PRICE_ONLY, Strategy.WEATHER_ONLY, Strategy.PRICE_AND_WEATHER):
            assert verify_foc(sys, solve_strategy(sys, 1.0, s)).passed(), s

    def test_unknown_label(self, general_instance):
        with pytest.raises(ValueError):
            solve_strategy(general_instance.system, 1.0, "Everything")

    def test_quantile_table_keys(self, independence_instance):
        inst = independence_instance
        dists = [hedged_profit_distribution(inst.psi, 120.0, solve_strategy(inst.system, 1.0, s), s.value)
                 for s in (Strategy.NO_HEDGE, Strategy.PRICE_ONLY)]
        table = quantile_table(dists, [0.01, 0.05])
        assert set(table) == {"NoHedge", "PriceOnly"}
        assert table["NoHedge"][0] < 0


@pytest.fixture(scope="module")
def records():
    psi_spec, phi_spec = case_study_specs(0.0, 8)
    return correlation_sweep(psi_spec, phi_spec, [0.0, 0.13, 0.33, 0.75], 1.0, 120.0)


class TestCorrelationSweep:
    def test_zero_correlation_general_equals_proxy(self, records):
        rec = records[0]
        np.testing.assert_allclose(rec.general.x, rec.proxy.x, rtol=0, atol=1e-9 * np.abs(rec.general.x).max())
        assert rec.utility_gap == pytest.approx(0.0, abs=1e-9 * abs(rec.general_utility))

    def test_general_never_worse(self, records):
        for rec in records:
            assert rec.utility_gap >= -1e-9 * abs(rec.general_utility)

    def test_gap_grows_with_correlation(self, records):
        gaps = [rec.utility_gap for rec in records]
        assert all(b >= a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] > 0

    def test_rejects_perfect_correlation(self):
        psi_spec, phi_spec = case_study_specs(0.0, 4)
        with pytest.raises(InvalidInputError):
            correlation_sweep(psi_spec, phi_spec, [1.0], 1.0, 120.0)


class TestVolatilitySweep:
    def test_base_sigma_reproduces_base_run(self):
        psi_spec, phi_spec = case_study_specs(0.75, 8)
        (rec,) = volatility_sweep(psi_spec, phi_spec, [psi_spec.sd_log_price], "price", 1.0, 120.0)
        base = solve_general(build_instance(psi_spec, phi_spec, 120.0).system, 1.0)
        np.testing.assert_array_equal(rec.solution.x, base.x)

    def test_price_payoff_range_grows(self):
        psi_spec, phi_spec = case_study_specs(0.0, 10)
        low, high = volatility_sweep(psi_spec, phi_spec, [0.1, 0.72], "price", 1.0, 120.0)
        assert high.payoff_range > low.payoff_range

    def test_weather_axis(self):
        psi_spec, phi_spec = case_study_specs(0.0, 6)
        recs = volatility_sweep(psi_spec, phi_spec, [10.0, 40.0], "weather", 1.0, 120.0)
        assert recs[0].system.weather[-1] - recs[0].system.weather[0] == pytest.approx(60.0)
        assert all(verify_foc(r.system, r.solution).passed() for r in recs)

    @pytest.mark.parametrize("sigma, axis", [(-0.1, "price"), (0.0, "weather"), (0.3, "quantity")])
    def test_rejects_bad_input(self, sigma, axis):
        psi_spec, phi_spec = case_study_specs(0.0, 4)
        with pytest.raises(InvalidInputError):
            volatility_sweep(psi_spec, phi_spec, [sigma], axis, 1.0, 120.0)
