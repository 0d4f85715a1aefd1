"""
Time-domain averaged D-optimal input design for SISO LTI members of the
model family, used as the classical comparison method.

Sensitivities psi_k = H^-1(theta, z) dG(theta, z)/dtheta u_k are produced
either by rational filters built from closed-form polynomials of the example
models, or by central differences of stationary innovation sweeps.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Literal, Tuple

import numpy as np
from scipy import signal

from errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

Provider = Literal["analytic_example1", "analytic_example2", "analytic_example3", "finite_difference"]
UNSTABLE_LIMIT = 1e12


@dataclass(frozen=True)
class StationaryFilter:
    gain: np.ndarray
    covariance: np.ndarray
    innovation_variance: float
    iterations: int


def stationary_kalman_gain(A, G, C, noise_var, tol=1e-12, max_iterations=100_000):
    """
    Fixed-point iteration of the prediction Riccati equation from S = G G^T.

    Returns the predictor gain K = A S C^T (C S C^T + sigma_v^2)^-1 together
    with S and the innovation variance.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    G = np.asarray(G, dtype=float).reshape(n, -1)
    C = np.asarray(C, dtype=float).reshape(1, n)
    Q = G @ G.T
    S = Q.copy()
    for iteration in range(1, max_iterations + 1):
        CS = C @ S
        variance = (CS @ C.T).item() + noise_var
        AS_Ct = A @ CS.T
        S_next = A @ S @ A.T + Q - (AS_Ct @ AS_Ct.T) / variance
        S_next = 0.5 * (S_next + S_next.T)
        if not np.all(np.isfinite(S_next)):
            raise NumericalError("Riccati iteration diverged; (A, C) is probably not detectable")
        done = np.max(np.abs(S_next - S)) < tol
        S = S_next
        if done:
            break
    else:
        raise NumericalError(f"Riccati iteration did not converge within {max_iterations} iterations")
    variance = (C @ S @ C.T).item() + noise_var
    gain = A @ S @ C.T / variance
    return StationaryFilter(gain=gain, covariance=S, innovation_variance=variance, iterations=iteration)


# --- Polynomials in z^-1 ---
def _poly_sub(p, q):
    size = max(len(p), len(q))
    return np.pad(p, (0, size - len(p))) - np.pad(q, (0, size - len(q)))


def _char_poly(M):
    return np.real(np.poly(np.atleast_2d(M)))


def _example1_polynomials(theta, constants):
    theta1, theta2 = theta
    a = np.array([1.0, -theta1])
    b = np.array([theta2])
    return a, [(b, np.array([0.0, -1.0]), np.array([0.0])),
               (b, np.array([0.0, 0.0]), np.array([1.0]))]


def _dc_motor_polynomials(theta, constants):
    (th,) = theta
    dt = constants["dt"]
    em = np.expm1(-th * dt)
    e = 1.0 + em
    one_minus_e = -em
    a = np.array([1.0, -(1.0 + e), e])
    da = np.array([0.0, dt * e, -dt * e])
    b = np.array([dt - one_minus_e / th, one_minus_e / th - dt * e])
    db = np.array([(-em - th * dt * e) / th ** 2, (em + th * dt * e) / th ** 2 + dt ** 2 * e])
    return a, [(b, da, db)]


def _atomic_polynomials(theta, constants):
    (th,) = theta
    dt, b_c = constants["dt"], constants["b_c"]
    e = np.exp(-dt)
    c, s = np.cos(th * dt), np.sin(th * dt)
    dc, ds = -dt * s, dt * c
    f = b_c / (1.0 + th ** 2)
    df = -2.0 * th * b_c / (1.0 + th ** 2) ** 2
    g1, dg1 = th - e * (th * c + s), 1.0 - e * (c - th * dt * s + dt * c)
    g2, dg2 = 1.0 - e * (c - th * s), e * (dt * s + s + th * dt * c)
    B1, dB1 = f * g1, df * g1 + f * dg1
    B2, dB2 = f * g2, df * g2 + f * dg2
    a = np.array([1.0, -2.0 * e * c, e ** 2])
    da = np.array([0.0, 2.0 * e * dt * s, 0.0])
    b = np.array([B2, -e * (s * B1 + c * B2)])
    db = np.array([dB2, -e * (ds * B1 + s * dB1 + dc * B2 + c * dB2)])
    return a, [(b, da, db)]


ANALYTIC_POLYNOMIALS = {
    "analytic_example1": _example1_polynomials,
    "analytic_example2": _dc_motor_polynomials,
    "analytic_example3": _atomic_polynomials,
}


# --- Adapter ---
@dataclass
class LtiSisoAdapter:
    model: object
    theta_G: Tuple[int, ...]
    provider: Provider = "finite_difference"
    _filters: Dict[tuple, StationaryFilter] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.model.input_dim != 1 or self.model.output_dim != 1:
            raise ConfigurationError(f"model '{self.model.name}' is not single-input single-output")
        if self.model.input_dependent_covariance:
            raise ConfigurationError(f"model '{self.model.name}' has input-dependent matrices; it is not LTI")
        if self.provider not in ANALYTIC_POLYNOMIALS and self.provider != "finite_difference":
            raise ConfigurationError(f"unknown sensitivity provider '{self.provider}'")
        self.theta_G = tuple(int(i) for i in self.theta_G)
        if not self.theta_G or any(i < 0 or i >= self.model.param_dim for i in self.theta_G):
            raise ConfigurationError(f"theta_G indices {self.theta_G} out of range")

    @property
    def noise_var(self):
        return float(self.model.S_v[0, 0])

    def matrices(self, theta):
        """Discrete (A, B_mat, G) at theta; B_mat is the slope of the drift in u."""
        theta = np.asarray(theta, dtype=float).reshape(1, -1)
        zero, one = np.zeros((1, 1)), np.ones((1, 1))
        A = self.model.eval_A(theta, zero)[0]
        B_mat = self.model.eval_B(theta, one)[0] - self.model.eval_B(theta, zero)[0]
        G = self.model.eval_G(theta, zero)[0]
        return A, B_mat, G

    def stationary_filter(self, theta):
        key = tuple(np.asarray(theta, dtype=float).reshape(-1).tolist())
        if key not in self._filters:
            A, _, G = self.matrices(theta)
            self._filters[key] = stationary_kalman_gain(A, G, self.model.C, self.noise_var)
        return self._filters[key]


@dataclass
class SensitivitySweep:
    psi: np.ndarray      # (N, n_theta_G)
    theta: np.ndarray


# --- Sensitivity providers ---
def _analytic_sensitivities(adapter, theta, signals):
    a, parts = ANALYTIC_POLYNOMIALS[adapter.provider](theta, adapter.model.constants)
    A, _, _ = adapter.matrices(theta)
    K = adapter.stationary_filter(theta).gain
    c = _char_poly(A - K @ adapter.model.C)
    denominator = np.convolve(a, c)
    padded = np.pad(signals, ((0, 0), (0, 1)))
    columns = []
    for index in adapter.theta_G:
        b, da, db = parts[index]
        numerator = np.concatenate([[0.0], _poly_sub(np.convolve(db, a), np.convolve(b, da))])
        columns.append(signal.lfilter(numerator, denominator, padded, axis=-1)[:, 1:])
    return np.stack(columns, axis=-1)


def _innovations(adapter, theta, response, signals):
    A, B_mat, _ = adapter.matrices(theta)
    K = adapter.stationary_filter(theta).gain[:, 0]
    C = adapter.model.C[0]
    batch, steps = response.shape
    state = np.zeros((batch, A.shape[0]))
    out = np.empty((batch, steps))
    for k in range(steps):
        out[:, k] = response[:, k] - state @ C
        if k < steps - 1:
            state = state @ A.T + signals[:, k, None] * B_mat + out[:, k, None] * K
    return out


def _noise_free_response(adapter, theta, signals):
    A, B_mat, _ = adapter.matrices(theta)
    C = adapter.model.C[0]
    batch, horizon = signals.shape
    state = np.zeros((batch, A.shape[0]))
    out = np.empty((batch, horizon + 1))
    for k in range(horizon + 1):
        out[:, k] = state @ C
        if k < horizon:
            state = state @ A.T + signals[:, k, None] * B_mat
    return out


def _finite_difference_sensitivities(adapter, theta, signals):
    response = _noise_free_response(adapter, theta, signals)
    columns = []
    for index in adapter.theta_G:
        delta = 1e-5 * (1.0 + abs(theta[index]))
        up, down = theta.copy(), theta.copy()
        up[index] += delta
        down[index] -= delta
        diff = _innovations(adapter, up, response, signals) - _innovations(adapter, down, response, signals)
        columns.append(-diff[:, 1:] / (2.0 * delta))
    return np.stack(columns, axis=-1)


def batch_sensitivities(adapter, theta, signals):
    """psi_1..psi_N for a batch of scalar signals (B, N); returns (B, N, n_theta_G)."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    signals = np.atleast_2d(np.asarray(signals, dtype=float).reshape(-1, np.shape(signals)[-1]))
    if adapter.provider == "finite_difference":
        psi = _finite_difference_sensitivities(adapter, theta, signals)
    else:
        psi = _analytic_sensitivities(adapter, theta, signals)
    if not np.all(np.isfinite(psi)) or np.max(np.abs(psi), initial=0.0) > UNSTABLE_LIMIT:
        raise NumericalError(f"sensitivity filter is unstable at theta={theta.tolist()}")
    return psi


def sensitivity_sweep(adapter, theta, U):
    values = np.asarray(getattr(U, "stacked", U), dtype=float).reshape(1, -1)
    psi = batch_sensitivities(adapter, theta, values)[0]
    return SensitivitySweep(psi=psi, theta=np.asarray(theta, dtype=float).reshape(-1))


# --- Criterion ---
def batch_avg_d_optimal(adapter, dprior, signals):
    """Q(U) = sum_j p_j det(sum_k psi_k psi_k^T / (N sigma_e^2)) for a batch of signals."""
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    horizon = signals.shape[-1]
    total = np.zeros(signals.shape[0])
    for node, weight in zip(dprior.nodes, dprior.weights):
        if weight == 0:
            continue
        psi = batch_sensitivities(adapter, node, signals)
        variance = adapter.stationary_filter(node).innovation_variance
        information = np.swapaxes(psi, -1, -2) @ psi / (horizon * variance)
        total += weight * np.linalg.det(information)
    return total


def avg_d_optimal_criterion(adapter, dprior, U):
    values = np.asarray(getattr(U, "stacked", U), dtype=float).reshape(1, -1)
    return float(batch_avg_d_optimal(adapter, dprior, values)[0])
