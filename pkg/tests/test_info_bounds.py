import math

import numpy as np
import pytest

from conftest import random_quasi_linear_model, random_signal
from errors import ConfigurationError
from info_bounds import (ITB_UNIFORM_LIMIT_BOUND, MixtureDesignProblem, cond_entropy_Y_given_theta, differential_entropy,
                         itb_bcrb_gap_demo, itb_bcrb_gap_gaussian, itb_floor, kt_from_distances, kt_from_two_alt,
                         kt_lower_bound, kt_values, mi_monte_carlo, pairwise_distances, prior_entropy,
                         two_alt_objective)
from kalman_engine import dense_moments, dense_pair_distance
from model_core import (BallConstraint, BoxConstraint, DiscretePrior, GaussianPrior, QuasiLinearModel, UniformBoxPrior,
                        example_prior, make_example)
from quadrature import discretize_prior


def _problem(model, dprior, horizon, radius=1.0, fast_path=False):
    constraint = BallConstraint(np.zeros(horizon * model.input_dim), radius)
    return MixtureDesignProblem(model, dprior, horizon, constraint, fast_path)


class TestClosedForms:
    def test_prior_entropy(self):
        assert prior_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))
        assert prior_entropy(np.array([1.0, 0.0])) == 0.0

    def test_itb_floor_without_information(self):
        assert itb_floor(1.3, 1.3, 2) == pytest.approx(2 / (2 * math.pi * math.e))

    def test_zero_distances_give_zero_information(self):
        weights = np.array([0.2, 0.3, 0.5])
        assert kt_from_distances(np.zeros((3, 3)), weights) == pytest.approx(0.0, abs=1e-15)

    def test_separated_components_reach_prior_entropy(self):
        weights = np.array([0.2, 0.3, 0.5])
        distances = np.full((3, 3), 1e6) - 1e6 * np.eye(3)
        assert kt_from_distances(distances, weights) == pytest.approx(prior_entropy(weights), rel=1e-12)

    def test_huge_distances_stay_finite(self):
        weights = np.array([0.5, 0.5])
        distances = np.array([[0.0, 1e308], [1e308, 0.0]])
        assert kt_from_distances(distances, weights) == pytest.approx(math.log(2))

    def test_two_alternative_closed_form(self):
        for d in (0.0, 0.3, 2.0, 40.0):
            distances = np.array([[0.0, d], [d, 0.0]])
            weights = np.array([0.3, 0.7])
            assert kt_from_two_alt(d, 0.3, 0.7) == pytest.approx(kt_from_distances(distances, weights), rel=1e-12, abs=1e-15)


class TestBound:
    def test_matches_dense_distances(self, scalar_prior):
        model = random_quasi_linear_model(7)
        problem = _problem(model, scalar_prior, 5)
        U = random_signal(7, 5, scale=0.3).stacked
        distances = pairwise_distances(problem, U[None])[0]
        moments = [dense_moments(model, node, U.reshape(5, 1)) for node in scalar_prior.nodes]
        for i in range(4):
            for j in range(4):
                expected = 0.0 if i == j else dense_pair_distance(moments[i], moments[j])
                assert distances[i, j] == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_report_invariants(self, example1, two_node_prior):
        problem = _problem(example1, two_node_prior, 10, fast_path=True)
        report = kt_lower_bound(problem, random_signal(3, 10).stacked / 4)
        d = np.array(report.d_matrix)
        np.testing.assert_allclose(d, d.T)
        np.testing.assert_array_equal(np.diag(d), 0.0)
        assert 0.0 <= report.I_l <= report.H_theta
        assert report.I_l_bits == pytest.approx(report.I_l / math.log(2))
        assert report.itb_floor >= 2 / (2 * math.pi * math.e) - 1e-12

    def test_zero_signal_is_uninformative_for_example1(self, example1):
        nodes = np.array([[0.8, 0.2], [0.8, 0.3]])
        problem = _problem(example1, DiscretePrior(nodes, np.array([0.5, 0.5])), 6, fast_path=True)
        assert kt_values(problem, np.zeros((1, 6)))[0] == pytest.approx(0.0, abs=1e-14)

    def test_batch_values_match_report(self, example1, two_node_prior):
        problem = _problem(example1, two_node_prior, 6)
        batch = np.stack([random_signal(s, 6).stacked for s in range(3)])
        values = kt_values(problem, batch)
        for b in range(3):
            assert values[b] == pytest.approx(kt_lower_bound(problem, batch[b]).I_l, rel=1e-12)

    def test_threads_do_not_change_values(self, scalar_prior):
        problem = _problem(random_quasi_linear_model(2), scalar_prior, 6)
        U = random_signal(1, 6).stacked[None]
        np.testing.assert_array_equal(pairwise_distances(problem, U, 1), pairwise_distances(problem, U, 3))

    def test_two_alt_needs_two_nodes(self, scalar_prior):
        problem = _problem(random_quasi_linear_model(2), scalar_prior, 4)
        with pytest.raises(ConfigurationError):
            two_alt_objective(problem, np.zeros(4))

    def test_constraint_dimension_checked(self, example1, two_node_prior):
        with pytest.raises(ConfigurationError):
            MixtureDesignProblem(example1, two_node_prior, 5, BallConstraint(np.zeros(4), 1.0))


def _linear_gaussian_model():
    """x_{k+1} = 0.5 x_k + theta u_k + 0.3 w_k, y_k = x_k + v_k: outputs are linear in theta."""
    return QuasiLinearModel(
        name="linear_gaussian", state_dim=1, noise_dim=1, output_dim=1, input_dim=1, param_dim=1,
        A=lambda theta, u: np.array([[0.5]]), B=lambda theta, u: np.array([theta[0] * u[0]]),
        G=lambda theta, u: np.array([[0.3]]), C=np.array([[1.0]]), S_v=np.array([[0.1]]),
        m0=lambda theta: np.zeros(1), S0=lambda theta: np.array([[0.2]]),
        input_dependent_covariance=False,
    )


class TestErrorFloor:
    def test_differential_entropy(self):
        cov = np.array([[2e-3, 5e-4], [5e-4, 1e-3]])
        expected = 0.5 * (2 * math.log(2 * math.pi * math.e) + math.log(np.linalg.det(cov)))
        assert differential_entropy(GaussianPrior(np.array([0.8, 0.2]), cov)) == pytest.approx(expected, rel=1e-12)
        box = UniformBoxPrior(np.array([0.05, -1.0]), np.array([2.0, 1.0]))
        assert differential_entropy(box) == pytest.approx(math.log(1.95) + math.log(2.0), rel=1e-12)
        assert differential_entropy(DiscretePrior(np.array([[0.1], [0.2]]), np.array([0.5, 0.5]))) is None

    def test_magnetometer_floor_below_prior_variance(self):
        model = make_example("opm_reduced")
        prior = example_prior("opm_reduced")
        horizon = 60
        constraint = BoxConstraint(np.zeros(horizon), np.ones(horizon))
        problem = MixtureDesignProblem(model, discretize_prior(prior, "sigma_2n"), horizon, constraint, prior=prior)
        omega = prior.mean[0] * model.time_step
        U = 0.5 * (1.0 + np.cos(omega * np.arange(horizon)))
        report = kt_lower_bound(problem, U)
        assert 0.0 <= report.I_l <= report.H_theta + 1e-12
        assert report.H_prior < 0.0
        assert report.itb_floor <= 3e-3
        assert report.itb_floor == pytest.approx(3e-3 * math.exp(-2.0 * report.I_l), rel=1e-9)

    def test_floor_between_posterior_and_prior_variance(self):
        model = _linear_gaussian_model()
        prior = GaussianPrior(np.array([1.0]), np.array([[0.04]]))
        horizon = 8
        problem = MixtureDesignProblem(model, discretize_prior(prior, "sigma_2n"), horizon,
                                       BallConstraint(np.zeros(horizon), 3.0), fast_path=True, prior=prior)
        U = random_signal(5, horizon).stacked
        unit = dense_moments(model, [1.0], U.reshape(horizon, 1))
        precision = unit.mean @ np.linalg.solve(unit.cov, unit.mean)
        posterior_variance = 1.0 / (1.0 / 0.04 + precision)
        report = kt_lower_bound(problem, U)
        assert report.I_l > 0.0
        assert posterior_variance <= report.itb_floor * (1 + 1e-9)
        assert report.itb_floor <= 0.04

    def test_discrete_prior_falls_back_to_node_entropy(self, example1, two_node_prior):
        problem = _problem(example1, two_node_prior, 6, fast_path=True)
        report = kt_lower_bound(problem, random_signal(2, 6).stacked / 4)
        assert report.H_prior is None
        assert report.itb_floor == pytest.approx(itb_floor(math.log(2), report.I_l, 2), rel=1e-12)


class TestMonteCarloOracle:
    def test_lower_bound_below_mutual_information(self, scalar_prior):
        model = random_quasi_linear_model(9)
        problem = _problem(model, scalar_prior, 4)
        U = random_signal(9, 4).stacked
        I_l = kt_lower_bound(problem, U).I_l
        estimate, stderr = mi_monte_carlo(problem, U, 20000, seed=1)
        assert I_l <= estimate + 4 * stderr
        assert estimate <= prior_entropy(scalar_prior.weights) + 4 * stderr

    @pytest.mark.parametrize("seed", range(20))
    def test_bound_sandwich_on_random_instances(self, seed, scalar_prior):
        model = random_quasi_linear_model(300 + seed, state_dim=1 + seed % 3, output_dim=1 + seed % 2)
        problem = _problem(model, scalar_prior, 3)
        U = random_signal(400 + seed, 3, scale=0.5 + 0.1 * seed).stacked
        distances = pairwise_distances(problem, U[None])[0]
        assert np.all(distances >= -1e-10)
        I_l = float(kt_from_distances(distances, scalar_prior.weights))
        estimate, stderr = mi_monte_carlo(problem, U, 6000, seed=seed)
        assert I_l <= estimate + 4 * stderr + 1e-9
        assert estimate <= prior_entropy(scalar_prior.weights) + 4 * stderr

    def test_single_node_has_no_information(self):
        problem = _problem(random_quasi_linear_model(11), DiscretePrior(np.array([[0.3]]), np.array([1.0])), 5)
        U = random_signal(11, 5).stacked
        coarse = mi_monte_carlo(problem, U, 1000, seed=2)
        fine = mi_monte_carlo(problem, U, 16000, seed=3)
        assert abs(fine[0]) <= 4 * fine[1]
        assert fine[1] == pytest.approx(coarse[1] / 4, rel=0.3)

    def test_separated_nodes_reach_log_two(self):
        model = _linear_gaussian_model()
        problem = MixtureDesignProblem(model, DiscretePrior(np.array([[-5.0], [5.0]]), np.array([0.5, 0.5])), 6,
                                       BallConstraint(np.zeros(6), 3.0), True)
        U = np.full(6, 1.0)
        estimate, stderr = mi_monte_carlo(problem, U, 8000, seed=4)
        assert estimate == pytest.approx(math.log(2), abs=4 * stderr + 1e-3)
        assert kt_lower_bound(problem, U).I_l == pytest.approx(math.log(2), abs=1e-6)

    def test_conditional_entropy_matches_dense(self, two_node_prior, example1):
        problem = _problem(example1, two_node_prior, 3)
        U = np.array([0.2, -0.1, 0.4])
        expected = 0.0
        for node, weight in zip(two_node_prior.nodes, two_node_prior.weights):
            _, logdet = np.linalg.slogdet(dense_moments(example1, node, U.reshape(3, 1)).cov)
            expected += weight * 0.5 * (4 * math.log(2 * math.pi * math.e) + logdet)
        assert cond_entropy_Y_given_theta(problem, U) == pytest.approx(expected, rel=1e-12)

    def test_oracle_size_guard(self, example1, two_node_prior):
        problem = _problem(example1, two_node_prior, 40)
        with pytest.raises(ConfigurationError):
            mi_monte_carlo(problem, np.zeros(40), 10, seed=0)


class TestGapDemo:
    def test_data_information_is_one(self):
        for alpha in (1.0, 10.0):
            assert itb_bcrb_gap_demo(alpha).J_D == 1.0

    def test_bcrb_decreases_and_prior_fisher_bound_holds(self):
        reports = [itb_bcrb_gap_demo(alpha) for alpha in (1.0, 10.0, 100.0, 1000.0)]
        floors = [r.bcrb_floor for r in reports]
        assert all(a > b for a, b in zip(floors, floors[1:]))
        assert all(r.jp_bound_holds for r in reports)
        for r in reports:
            assert r.J_P >= r.alpha / (2 * math.sqrt(math.pi))

    def test_itb_exceeds_bcrb_for_sharp_priors(self):
        for alpha in (10.0, 100.0):
            report = itb_bcrb_gap_demo(alpha)
            assert report.itb_floor > report.bcrb_floor

    def test_itb_floor_limit(self):
        """
        As alpha grows the prior tends to U(-1, 1) with entropy ln 2, and
        y = theta + v has variance 4/3, so I <= ln(4/3) / 2 and the floor
        stays above 4 (3/4) / (2 pi e) = 3 / (2 pi e) ~ 0.176; numerically
        it settles near 0.178. The constant 3 sqrt(2) / (8 pi e) ~ 0.050
        quoted elsewhere lies far below the limit and would make the lower
        check vacuous.
        """
        floors = [itb_bcrb_gap_demo(alpha).itb_floor for alpha in (100.0, 1000.0, 10000.0)]
        assert floors[-1] >= 0.99 * ITB_UNIFORM_LIMIT_BOUND
        assert abs(floors[-1] - floors[-2]) < 1e-3
        assert floors[-1] < 0.2

    def test_small_alpha_reports_bound_without_raising(self):
        report = itb_bcrb_gap_demo(0.1)
        assert not report.jp_bound_holds

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ConfigurationError):
            itb_bcrb_gap_demo(0.0)

    def test_gaussian_variant_floors_coincide(self):
        report = itb_bcrb_gap_gaussian(2.0)
        assert report.itb_floor == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert report.bcrb_floor == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert report.alpha is None
