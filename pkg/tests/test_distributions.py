import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal, norm

from mvhedge.distributions import (
    GaussianSpec,
    RealWorldMeasure,
    RiskNeutralMeasure,
    ScenarioGrid,
    case_study_specs,
    discretize_real_world,
    discretize_risk_neutral,
    load_measure,
    load_spec,
    measure_from_dict,
    save_measure,
    validate_measure,
)
from mvhedge.errors import InvalidInputError

GRID2 = ScenarioGrid(prices=[100.0, 140.0], quantities=[10.0, 20.0], weather=[0.0, 1.0])


def standard_spec(n, rho_pq=0.0, rho_wq=0.0, rho_wp=0.0):
    return GaussianSpec(
        mean_log_price=0.0, sd_log_price=1.0,
        mean_log_quantity=0.0, sd_log_quantity=1.0,
        mean_weather=0.0, sd_weather=1.0,
        rho_pq=rho_pq, rho_wq=rho_wq, rho_wp=rho_wp, grid_points=n,
    )


class TestScenarioGrid:
    def test_rejects_unsorted(self):
        with pytest.raises(InvalidInputError, match="strictly increasing"):
            ScenarioGrid(prices=[2.0, 1.0], quantities=[1.0, 2.0], weather=[0.0, 1.0])

    def test_rejects_single_level(self):
        with pytest.raises(InvalidInputError, match="at least 2"):
            ScenarioGrid(prices=[1.0], quantities=[1.0, 2.0], weather=[0.0, 1.0])

    def test_rejects_negative_price(self):
        with pytest.raises(InvalidInputError, match="nonnegative"):
            ScenarioGrid(prices=[-1.0, 1.0], quantities=[1.0, 2.0], weather=[0.0, 1.0])

    def test_negative_weather_allowed(self):
        ScenarioGrid(prices=[1.0, 2.0], quantities=[1.0, 2.0], weather=[-40.0, -1.0])


class TestValidateMeasure:
    def test_uniform_is_valid(self):
        psi = RealWorldMeasure(GRID2, np.full((2, 2, 2), 0.125))
        assert validate_measure(psi) == []
        np.testing.assert_array_equal(psi.price_marginal, [0.5, 0.5])

    def test_negative_entry(self):
        probs = np.full((2, 2, 2), 0.125)
        probs[0, 0, 0] = -0.1
        probs[1, 1, 1] += 0.225
        problems = validate_measure(RealWorldMeasure(GRID2, probs))
        assert any("negative probability" in p for p in problems)

    def test_total_not_one(self):
        probs = np.full((2, 2, 2), 0.98 / 8)
        problems = validate_measure(RealWorldMeasure(GRID2, probs))
        assert any("total != 1" in p for p in problems)

    def test_risk_neutral_report(self):
        phi = RiskNeutralMeasure([1.0, 2.0], [0.0, 1.0], [0.6, 0.5], [0.5, 0.5])
        assert validate_measure(phi) == ["price marginal: total != 1 (sum = 1.1)"]

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError, match="shape"):
            RealWorldMeasure(GRID2, np.full((2, 2, 3), 1 / 12))

    def test_table_is_read_only(self):
        psi = RealWorldMeasure(GRID2, np.full((2, 2, 2), 0.125))
        with pytest.raises(ValueError):
            psi.probs[0, 0, 0] = 1.0


class TestDiscretizeRealWorld:
    def test_case_study_log_price_mean(self):
        psi_spec, _ = case_study_specs(0.0, 100)
        psi = discretize_real_world(psi_spec)
        mean_log_p = psi.price_marginal @ np.log(psi.grid.prices)
        assert abs(mean_log_p - 4.15) < 0.01

    def test_zero_correlation_factorizes(self):
        psi = discretize_real_world(standard_spec(10))
        outer = np.einsum("i,j,k->ijk", psi.price_marginal, psi.quantity_marginal, psi.weather_marginal)
        np.testing.assert_allclose(psi.probs, outer, atol=1e-12, rtol=0)

    def test_three_point_grid_matches_hand_normalized_pdf(self):
        psi = discretize_real_world(standard_spec(3))
        nodes = np.array([-3.0, 0.0, 3.0])
        dens = np.einsum("i,j,k->ijk", norm.pdf(nodes), norm.pdf(nodes), norm.pdf(nodes))
        np.testing.assert_allclose(psi.probs, dens / dens.sum(), rtol=1e-12)
        assert psi.probs.argmax() == np.ravel_multi_index((1, 1, 1), (3, 3, 3))

    def test_correlated_nodes_follow_pairwise_density_times_conditional(self):
        spec = standard_spec(4, rho_pq=0.3, rho_wq=-0.2, rho_wp=0.5)
        psi = discretize_real_world(spec)
        nodes = np.linspace(-3, 3, 4)
        cov = spec.correlation_matrix()
        full = multivariate_normal(np.zeros(3), cov).pdf(
            np.stack(np.meshgrid(nodes, nodes, nodes, indexing="ij"), -1)
        )
        pw = multivariate_normal(np.zeros(2), cov[np.ix_([0, 2], [0, 2])]).pdf(
            np.stack(np.meshgrid(nodes, nodes, indexing="ij"), -1)
        )
        expected = pw[:, None, :] * full / full.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(psi.probs, expected / expected.sum(), rtol=1e-10)

    def test_endpoints_exact(self):
        psi_spec, _ = case_study_specs(0.33, 17)
        psi = discretize_real_world(psi_spec)
        logp = np.log(psi.grid.prices)
        assert np.isclose(logp[0], 4.15 - 3 * 0.65, rtol=0, atol=1e-14)
        assert np.isclose(logp[-1], 4.15 + 3 * 0.65, rtol=0, atol=1e-14)
        assert psi.grid.weather[0] == 50.5 - 3 * 43.5
        assert psi.grid.weather[-1] == 50.5 + 3 * 43.5

    def test_invalid_correlation_structure(self):
        with pytest.raises(InvalidInputError, match="invalid correlation structure"):
            discretize_real_world(standard_spec(5, rho_pq=0.9, rho_wq=0.9, rho_wp=-0.9))

    def test_zero_price_weather_correlation_gives_zero_empirical_correlation(self):
        psi_spec, _ = case_study_specs(0.0, 10)
        psi = discretize_real_world(psi_spec)
        p, w = psi.grid.prices, psi.grid.weather
        joint = psi.price_weather_marginal
        ep, ew = psi.price_marginal @ p, psi.weather_marginal @ w
        cov = p @ joint @ w - ep * ew
        sd = np.sqrt((psi.price_marginal @ p**2 - ep**2) * (psi.weather_marginal @ w**2 - ew**2))
        assert abs(cov / sd) < 1e-10

    def test_needs_quantity(self):
        _, phi_spec = case_study_specs()
        with pytest.raises(InvalidInputError):
            discretize_real_world(phi_spec)


class TestDiscretizeRiskNeutral:
    def test_case_study_log_price_mean(self):
        _, phi_spec = case_study_specs(0.0, 100)
        phi = discretize_risk_neutral(phi_spec)
        assert abs(phi.price_marginal @ np.log(phi.prices) - 4.40) < 0.01

    def test_degenerate_sd_rejected(self):
        with pytest.raises(InvalidInputError):
            GaussianSpec(mean_log_price=4.4, sd_log_price=0.0, mean_weather=50.0, sd_weather=1.0)
        with pytest.raises(InvalidInputError, match="strictly increasing"):
            ScenarioGrid(prices=np.full(5, 81.0), quantities=[1.0, 2.0], weather=[0.0, 1.0])

    def test_zero_correlation_factorizes(self):
        _, phi_spec = case_study_specs(0.0, 12)
        phi = discretize_risk_neutral(phi_spec)
        np.testing.assert_allclose(phi.joint, np.outer(phi.price_marginal, phi.weather_marginal), atol=1e-12, rtol=0)

    def test_on_foreign_grid(self):
        psi_spec, phi_spec = case_study_specs(0.33, 10)
        psi = discretize_real_world(psi_spec)
        phi = discretize_risk_neutral(phi_spec, psi.grid.prices, psi.grid.weather)
        np.testing.assert_array_equal(phi.prices, psi.grid.prices)
        assert validate_measure(phi, tol=1e-12) == []
        # higher risk-neutral log-price mean shifts mass to the right
        assert phi.price_marginal @ np.log(phi.prices) > psi.price_marginal @ np.log(psi.grid.prices)


@settings(max_examples=40, deadline=None)
@given(
    rho_pq=st.floats(-0.6, 0.6),
    rho_wq=st.floats(-0.6, 0.6),
    rho_wp=st.floats(-0.6, 0.6),
    n=st.integers(2, 9),
)
def test_marginalization_commutes(rho_pq, rho_wq, rho_wp, n):
    spec = standard_spec(n, rho_pq, rho_wq, rho_wp)
    if np.linalg.eigvalsh(spec.correlation_matrix()).min() <= 1e-6:
        with pytest.raises(InvalidInputError):
            discretize_real_world(spec)
        return
    psi = discretize_real_world(spec)
    assert abs(psi.probs.sum() - 1) <= 1e-12
    np.testing.assert_array_equal(psi.probs.sum(axis=(1, 2)), psi.price_marginal)
    np.testing.assert_array_equal(psi.probs.sum(axis=(0, 1)), psi.weather_marginal)
    np.testing.assert_array_equal(psi.probs.sum(axis=1), psi.price_weather_marginal)
    assert validate_measure(psi, tol=1e-12) == []


class TestFiles:
    def test_measure_round_trip(self, tmp_path):
        psi = discretize_real_world(case_study_specs(0.33, 4)[0])
        save_measure(psi, tmp_path / "psi.json")
        data = json.loads((tmp_path / "psi.json").read_text())
        assert len(data["probs"]) == 4 * 4 * 4
        loaded = load_measure(tmp_path / "psi.json")
        np.testing.assert_array_equal(loaded.probs, psi.probs)
        np.testing.assert_array_equal(loaded.grid.weather, psi.grid.weather)

    def test_risk_neutral_round_trip(self, tmp_path):
        phi = discretize_risk_neutral(case_study_specs(0.0, 5)[1])
        save_measure(phi, tmp_path / "phi.json")
        loaded = load_measure(tmp_path / "phi.json")
        np.testing.assert_array_equal(loaded.price_marginal, phi.price_marginal)

    def test_user_tolerance_accepts_rounding(self):
        probs = np.round(np.full(8, 0.125) + [1e-10, -1e-10, 0, 0, 0, 0, 0, 0], 12)
        data = {"grid": {"prices": [1, 2], "quantities": [1, 2], "weather": [0, 1]}, "probs": probs.tolist()}
        assert measure_from_dict(data).probs.shape == (2, 2, 2)

    def test_invalid_file_rejected(self):
        data = {"grid": {"prices": [1, 2], "quantities": [1, 2], "weather": [0, 1]}, "probs": [0.2] * 8}
        with pytest.raises(InvalidInputError, match="total != 1"):
            measure_from_dict(data)

    def test_spec_file(self, tmp_path):
        psi_spec, _ = case_study_specs(0.33, 10)
        (tmp_path / "spec.json").write_text(json.dumps(psi_spec.to_dict()))
        assert load_spec(tmp_path / "spec.json") == psi_spec

    def test_spec_unknown_field(self):
        with pytest.raises(InvalidInputError, match="unknown"):
            GaussianSpec.from_dict({"mean_log_price": 1, "sd_log_price": 1, "mean_weather": 0,
                                    "sd_weather": 1, "volatility": 3})
