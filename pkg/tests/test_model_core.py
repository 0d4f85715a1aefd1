import math

import numpy as np
import pytest
from scipy import integrate, linalg, stats

from errors import ConfigurationError, DimensionError
from model_core import (BallConstraint, BoxConstraint, DiscretePrior, GaussianPrior, InputSignal, UniformBoxPrior,
                        atomic_oscillator_matrices, dc_motor_matrices, discretize_lti, example_prior, make_example,
                        process_noise_covariance, sample_prior, simulate)


class TestExamples:
    @pytest.mark.parametrize("name", ["example1", "dc_motor", "atomic_oscillator", "opm_reduced"])
    def test_batched_evaluation_matches_single(self, name):
        model = make_example(name)
        prior = example_prior(name)
        lower, upper = prior.search_span(2.0)
        thetas = np.linspace(lower, upper, 5)
        u = np.linspace(-1.0, 1.0, 5)[:, None]
        batched = model.eval_A(thetas, u)
        for k in range(5):
            np.testing.assert_allclose(batched[k], model.eval_A(thetas[k], u[k])[0], rtol=1e-14)
        assert model.eval_B(thetas, u).shape == (5, model.state_dim)
        assert model.eval_G(thetas, u).shape == (5, model.state_dim, model.noise_dim)

    def test_unknown_example(self):
        with pytest.raises(ConfigurationError):
            make_example("pendulum")

    def test_unknown_override(self):
        with pytest.raises(ConfigurationError):
            make_example("example1", {"friction": 1.0})

    def test_override_changes_constants(self):
        model = make_example("example1", {"sigma_v": 0.5})
        np.testing.assert_allclose(model.S_v, [[0.25]])

    def test_example_prior_override(self):
        prior = example_prior("dc_motor", {"prior_lower": [0.1], "prior_upper": [1.0]})
        np.testing.assert_allclose(prior.lower, [0.1])
        np.testing.assert_allclose(prior.upper, [1.0])

    def test_sensor_display_scale(self):
        model = make_example("atomic_oscillator")
        np.testing.assert_allclose(model.to_display_units(np.array([2 * np.pi * 0.87e-3])), [1.0])


class TestDiscretization:
    def test_process_noise_matches_quadrature(self):
        A_c = np.array([[0.0, 1.0], [-4.0, -0.3]])
        G_c = np.array([[0.0], [0.7]])
        dt = 0.2

        def integrand(t, i, j):
            E = linalg.expm(A_c * t) @ G_c
            return (E @ E.T)[i, j]

        D = process_noise_covariance(A_c, G_c, dt)
        for i in range(2):
            for j in range(2):
                expected, _ = integrate.quad(integrand, 0.0, dt, args=(i, j), epsabs=1e-14)
                assert D[i, j] == pytest.approx(expected, abs=1e-12)

    def test_discretize_lti_reconstructs_covariance(self):
        A_c = np.array([[-1.0, 0.5], [0.0, -2.0]])
        G_c = np.eye(2)
        A, B_mat, G = discretize_lti(A_c, np.array([1.0, 0.0]), G_c, 0.1)
        np.testing.assert_allclose(A, linalg.expm(0.1 * A_c), rtol=1e-12)
        np.testing.assert_allclose(G @ G.T, process_noise_covariance(A_c, G_c, 0.1), atol=1e-15)
        assert B_mat.shape == (2, 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_doubling_the_step_composes(self, seed):
        rng = np.random.default_rng(seed)
        n = 1 + seed % 3
        A_c = rng.standard_normal((n, n)) - 1.5 * np.eye(n)
        B_c, G_c = rng.standard_normal(n), rng.standard_normal((n, n))
        dt = 0.05 * (1 + seed)
        A, B_mat, G = discretize_lti(A_c, B_c, G_c, dt)
        A2, B2, G2 = discretize_lti(A_c, B_c, G_c, 2 * dt)
        np.testing.assert_allclose(A2, A @ A, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(B2, A @ B_mat + B_mat, rtol=1e-9, atol=1e-13)
        D = G @ G.T
        np.testing.assert_allclose(G2 @ G2.T, A @ D @ A.T + D, rtol=1e-9, atol=1e-11)
        D2 = process_noise_covariance(A_c, G_c, 2 * dt)
        assert np.linalg.eigvalsh(D2).min() >= -1e-12 * np.linalg.eigvalsh(D2).max()

    def test_rank_deficient_noise_stays_semidefinite(self):
        A_c = np.array([[0.0, 1.0], [-2.0, -0.5]])
        _, _, G = discretize_lti(A_c, np.array([0.0, 1.0]), np.array([0.0, 1e-3]), 1e-3)
        eigvals = np.linalg.eigvalsh(G @ G.T)
        assert eigvals.min() >= -1e-12 * eigvals.max()
        assert np.all(np.isfinite(G))

    def test_atomic_oscillator_at_sensor_settings(self):
        theta, dt, b_c = 54.6637, 5.7471e-3, 1e5
        A, B, G = atomic_oscillator_matrices(np.array(theta), dt, b_c)
        decay, angle = math.exp(-dt), theta * dt
        expected_A = decay * np.array([[math.cos(angle), math.sin(angle)], [-math.sin(angle), math.cos(angle)]])
        np.testing.assert_allclose(A, expected_A, rtol=1e-13, atol=1e-16)
        np.testing.assert_allclose(G @ G.T, -math.expm1(-2 * dt) * np.eye(2), rtol=1e-12)
        A_c = np.array([[-1.0, theta], [-theta, -1.0]])
        A_ref, B_ref, G_ref = discretize_lti(A_c, np.array([0.0, b_c]), np.sqrt(2.0) * np.eye(2), dt)
        np.testing.assert_allclose(A, A_ref, rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(B, B_ref[:, 0], rtol=1e-8)
        np.testing.assert_allclose(G_ref @ G_ref.T, G @ G.T, rtol=1e-9)

    def test_discretize_rejects_bad_step(self):
        with pytest.raises(ConfigurationError):
            discretize_lti(np.eye(1), np.ones(1), np.ones(1), 0.0)

    def test_dc_motor_closed_form_matches_van_loan(self):
        theta, dt = 0.7, 0.05
        A_c = np.array([[0.0, 1.0], [0.0, -theta]])
        A, B, D = dc_motor_matrices(np.array(theta), dt)
        A_ref, B_ref, _ = discretize_lti(A_c, np.array([0.0, theta]), np.array([0.0, 1.0]), dt)
        np.testing.assert_allclose(A, A_ref, rtol=1e-10)
        np.testing.assert_allclose(B, B_ref[:, 0], rtol=1e-9)
        np.testing.assert_allclose(D, process_noise_covariance(A_c, np.array([0.0, 1.0]), dt), rtol=1e-9)

    def test_atomic_closed_form_matches_van_loan(self):
        theta, dt, b_c = 3.0, 0.01, 2.0
        A_c = np.array([[-1.0, theta], [-theta, -1.0]])
        A, B, G = atomic_oscillator_matrices(np.array(theta), dt, b_c)
        A_ref, B_ref, _ = discretize_lti(A_c, np.array([0.0, b_c]), np.eye(2), dt)
        np.testing.assert_allclose(A, A_ref, rtol=1e-10)
        np.testing.assert_allclose(B, B_ref[:, 0], rtol=1e-8)
        np.testing.assert_allclose(G @ G.T, process_noise_covariance(A_c, np.sqrt(2.0) * np.eye(2), dt), rtol=1e-9)


class TestPriors:
    def test_gaussian_log_density(self):
        prior = GaussianPrior(np.array([1.0, -1.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
        theta = np.array([0.5, 0.2])
        expected = stats.multivariate_normal.logpdf(theta, prior.mean, prior.cov)
        assert prior.log_density(theta) == pytest.approx(expected, rel=1e-12)

    def test_uniform_support(self):
        prior = UniformBoxPrior(np.array([0.0]), np.array([2.0]))
        assert prior.log_density(np.array([1.0])) == pytest.approx(-np.log(2.0))
        assert prior.log_density(np.array([3.0])) == -np.inf

    def test_discrete_rejects_bad_weights(self):
        with pytest.raises(ConfigurationError):
            DiscretePrior(np.array([[0.0], [1.0]]), np.array([0.5, 0.6]))

    def test_discrete_rejects_duplicate_nodes(self):
        with pytest.raises(ConfigurationError):
            DiscretePrior(np.array([[0.0], [0.0]]), np.array([0.5, 0.5]))

    def test_discrete_density_only_at_nodes(self, scalar_prior):
        assert scalar_prior.log_density(np.array([0.5])) == pytest.approx(np.log(0.3))
        assert scalar_prior.log_density(np.array([0.55])) == -np.inf

    def test_sample_prior_is_deterministic(self):
        prior = example_prior("example1")
        np.testing.assert_array_equal(sample_prior(prior, 11), sample_prior(prior, 11))


class TestConstraints:
    def test_ball_projection(self):
        ball = BallConstraint(np.zeros(3), 2.0)
        inside = np.array([0.5, 0.5, 0.5])
        np.testing.assert_array_equal(ball.project(inside), inside)
        outside = ball.project(np.array([3.0, 4.0, 0.0]))
        assert np.linalg.norm(outside) == pytest.approx(2.0)
        np.testing.assert_allclose(outside, [1.2, 1.6, 0.0])

    def test_box_projection_and_activity(self):
        box = BoxConstraint(np.zeros(4), np.ones(4))
        projected = box.project(np.array([-1.0, 0.5, 2.0, 1.0]))
        np.testing.assert_array_equal(projected, [0.0, 0.5, 1.0, 1.0])
        assert box.activity(projected)["fraction_on_bounds"] == pytest.approx(0.75)

    def test_box_rejects_inverted_bounds(self):
        with pytest.raises(ConfigurationError):
            BoxConstraint(np.ones(2), np.zeros(2))


class TestSimulate:
    def test_shapes_and_determinism(self, example1):
        U = InputSignal(np.ones((10, 1)))
        first = simulate(example1, np.array([0.8, 0.2]), U, 5)
        second = simulate(example1, np.array([0.8, 0.2]), U, 5)
        assert first.states.shape == (11, 1)
        assert first.outputs.shape == (11, 1)
        np.testing.assert_array_equal(first.outputs, second.outputs)

    def test_zero_input_has_zero_mean(self, example1):
        U = InputSignal(np.zeros((20, 1)))
        outputs = np.array([simulate(example1, np.array([0.8, 0.2]), U, seed).outputs for seed in range(400)])
        assert abs(outputs.mean()) < 0.02

    def test_wrong_theta_dimension(self, example1):
        with pytest.raises(DimensionError):
            simulate(example1, np.array([0.8]), InputSignal(np.zeros((3, 1))), 0)
