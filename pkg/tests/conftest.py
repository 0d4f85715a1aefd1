import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from model_core import DiscretePrior, InputSignal, QuasiLinearModel, make_example  # noqa: E402


def random_quasi_linear_model(seed, state_dim=2, input_dependent=True, output_dim=1):
    """Small stable model whose A, B and G all depend on theta (scalar) and u; evaluated element-wise."""
    rng = np.random.default_rng(seed)
    n = state_dim
    A0 = rng.standard_normal((n, n))
    A0 *= 0.6 / max(abs(np.linalg.eigvals(A0)))
    A1 = 0.1 * rng.standard_normal((n, n))
    A2 = 0.05 * rng.standard_normal((n, n)) if input_dependent else np.zeros((n, n))
    b = rng.standard_normal(n)
    G0 = 0.2 * rng.standard_normal((n, n))
    C = rng.standard_normal((output_dim, n))

    def A(theta, u):
        return A0 + theta[0] * A1 + u[0] * A2

    def B(theta, u):
        return theta[0] * b * u[0] + 0.1 * b

    def G(theta, u):
        scale = 1.0 + 0.3 * u[0] ** 2 if input_dependent else 1.0
        return (1.0 + 0.5 * theta[0]) * scale * G0 + 0.05 * np.eye(n)

    return QuasiLinearModel(
        name=f"random_{seed}", state_dim=n, noise_dim=n, output_dim=output_dim, input_dim=1, param_dim=1,
        A=A, B=B, G=G, C=C, S_v=0.3 * np.eye(output_dim),
        m0=lambda theta: np.full(n, 0.2 * theta[0]),
        S0=lambda theta: (0.5 + 0.1 * theta[0] ** 2) * np.eye(n),
        vectorized=False, input_dependent_covariance=input_dependent,
    )


def random_signal(seed, horizon, input_dim=1, scale=1.0):
    rng = np.random.default_rng(seed)
    return InputSignal(scale * rng.standard_normal((horizon, input_dim)))


@pytest.fixture
def example1():
    return make_example("example1")


@pytest.fixture
def random_model():
    return random_quasi_linear_model(3)


@pytest.fixture
def two_node_prior():
    return DiscretePrior(np.array([[0.8, 0.2], [0.7, 0.3]]), np.array([0.5, 0.5]))


@pytest.fixture
def scalar_prior():
    return DiscretePrior(np.array([[-0.4], [0.1], [0.5], [0.9]]), np.array([0.1, 0.2, 0.3, 0.4]))
