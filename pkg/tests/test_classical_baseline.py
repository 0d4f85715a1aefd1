import numpy as np
import pytest
from scipy import linalg

from classical_baseline import (LtiSisoAdapter, avg_d_optimal_criterion, batch_avg_d_optimal, batch_sensitivities,
                                sensitivity_sweep, stationary_kalman_gain)
from conftest import random_signal
from errors import ConfigurationError, NumericalError
from model_core import DiscretePrior, InputSignal, atomic_oscillator_matrices, make_example


class TestStationaryGain:
    def test_scalar_riccati_root(self):
        a, g, r = 0.9, 0.3, 0.5
        result = stationary_kalman_gain(np.array([[a]]), np.array([[g]]), np.array([[1.0]]), r)
        q = g * g
        b = r * (1 - a * a) - q
        expected = (-b + np.sqrt(b * b + 4 * q * r)) / 2
        assert result.covariance[0, 0] == pytest.approx(expected, rel=1e-10)
        assert result.gain[0, 0] == pytest.approx(a * expected / (expected + r), rel=1e-10)

    def test_no_process_noise(self):
        result = stationary_kalman_gain(np.array([[0.5]]), np.zeros((1, 1)), np.array([[1.0]]), 1.0)
        assert result.covariance[0, 0] == 0.0
        assert result.gain[0, 0] == 0.0

    def test_matches_scipy_dare(self):
        A, _, G = atomic_oscillator_matrices(np.array(54.6637), 5.7471e-3, 1e5)
        C = np.array([[0.0, 1.0]])
        result = stationary_kalman_gain(A, G, C, 11.85 ** 2)
        expected = linalg.solve_discrete_are(A.T, C.T, G @ G.T, np.array([[11.85 ** 2]]))
        np.testing.assert_allclose(result.covariance, expected, rtol=1e-8, atol=1e-12)

    def test_fixed_point(self):
        A = np.array([[0.7, 0.2], [0.0, 0.5]])
        G = np.eye(2) * 0.4
        C = np.array([[1.0, 0.0]])
        result = stationary_kalman_gain(A, G, C, 0.2)
        S = result.covariance
        AS_Ct = A @ S @ C.T
        S_next = A @ S @ A.T + G @ G.T - AS_Ct @ AS_Ct.T / (C @ S @ C.T + 0.2).item()
        assert np.max(np.abs(S_next - S)) < 1e-12

    def test_undetectable_system_fails(self):
        A = np.array([[1.2, 0.0], [0.0, 0.5]])
        C = np.array([[0.0, 1.0]])
        with pytest.raises(NumericalError):
            stationary_kalman_gain(A, np.eye(2), C, 1.0)


class TestSensitivities:
    @pytest.mark.parametrize("name, provider, theta, theta_G", [
        ("example1", "analytic_example1", np.array([0.8, 0.2]), (0, 1)),
        ("dc_motor", "analytic_example2", np.array([1.0]), (0,)),
        ("atomic_oscillator", "analytic_example3", np.array([54.6637]), (0,)),
    ])
    def test_analytic_matches_finite_difference(self, name, provider, theta, theta_G):
        model = make_example(name)
        signal = random_signal(4, 60).values[:, 0]
        analytic = batch_sensitivities(LtiSisoAdapter(model, theta_G, provider), theta, signal[None])
        numeric = batch_sensitivities(LtiSisoAdapter(model, theta_G, "finite_difference"), theta, signal[None])
        assert analytic.shape == (1, 60, len(theta_G))
        scale = np.max(np.abs(numeric), axis=(0, 1))
        np.testing.assert_allclose(analytic / scale, numeric / scale, atol=1e-5)

    def test_zero_signal_gives_zero_sensitivity(self, example1):
        sweep = sensitivity_sweep(LtiSisoAdapter(example1, (0, 1), "analytic_example1"), np.array([0.8, 0.2]),
                                  InputSignal(np.zeros((10, 1))))
        np.testing.assert_array_equal(sweep.psi, 0.0)

    def test_unstable_filter_detected(self, example1):
        adapter = LtiSisoAdapter(example1, (0, 1), "analytic_example1")
        with pytest.raises(NumericalError):
            batch_sensitivities(adapter, np.array([1.5, 0.2]), np.ones((1, 200)))

    def test_adapter_rejects_input_dependent_models(self):
        with pytest.raises(ConfigurationError):
            LtiSisoAdapter(make_example("opm_reduced"), (0,))

    def test_adapter_rejects_bad_indices(self, example1):
        with pytest.raises(ConfigurationError):
            LtiSisoAdapter(example1, (2,))


class TestCriterion:
    def test_zero_signal_has_zero_information(self, example1, two_node_prior):
        adapter = LtiSisoAdapter(example1, (0, 1), "analytic_example1")
        assert avg_d_optimal_criterion(adapter, two_node_prior, np.zeros(12)) == 0.0

    def test_homogeneous_in_signal_scale(self, example1, two_node_prior):
        adapter = LtiSisoAdapter(example1, (0, 1), "analytic_example1")
        U = random_signal(2, 12).stacked
        values = batch_avg_d_optimal(adapter, two_node_prior, np.stack([U, 2 * U]))
        assert values[0] > 0
        assert values[1] == pytest.approx(16 * values[0], rel=1e-10)

    def test_weights_average_nodes(self, example1):
        adapter = LtiSisoAdapter(example1, (1,), "analytic_example1")
        U = random_signal(3, 12).stacked
        nodes = np.array([[0.8, 0.2], [0.6, 0.4]])
        mixed = avg_d_optimal_criterion(adapter, DiscretePrior(nodes, np.array([0.25, 0.75])), U)
        first = avg_d_optimal_criterion(adapter, DiscretePrior(nodes[:1], np.array([1.0])), U)
        second = avg_d_optimal_criterion(adapter, DiscretePrior(nodes[1:], np.array([1.0])), U)
        assert mixed == pytest.approx(0.25 * first + 0.75 * second, rel=1e-12)
