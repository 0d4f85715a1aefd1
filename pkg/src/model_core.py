"""
Quasi-linear stochastic model family, parameter priors, input signals and
their constraint sets, exact discretization of linear SDEs, and the built-in
example models.

    x_{k+1} = A(theta, u_k) x_k + B(theta, u_k) + G(theta, u_k) w_k
    y_k     = C x_k + v_k,      v_k ~ N(0, S_v),  x_0 ~ N(m0(theta), S0(theta))

Model maps are plain callables. Built-in models are vectorized: theta with
shape (..., n_theta) and u with shape (..., n_u) broadcast against each other
and the result carries the broadcast leading shape.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from errors import CholeskyError, ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

# Coherence time of the sensor examples, used only for the Hz display map
SENSOR_T2 = 0.87e-3


# --- Linear algebra helpers ---
def spd_cholesky(matrix, what, theta=None, step=None):
    """Lower Cholesky factor of a (stack of) SPD matrices, raising CholeskyError otherwise."""
    matrix = np.asarray(matrix, dtype=float)
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if not np.all(np.isfinite(matrix)) or np.max(np.abs(matrix - np.swapaxes(matrix, -1, -2)), initial=0.0) > 1e-9 * scale:
        raise CholeskyError(what, theta, step)
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise CholeskyError(what, theta, step) from None


def symmetric_sqrt(matrix):
    """Principal (symmetric) square root of an SPD matrix via spectral decomposition."""
    eigvals, eigvecs = linalg.eigh(np.asarray(matrix, dtype=float))
    if eigvals[0] <= 0:
        raise CholeskyError("matrix square root")
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def _lead_shape(theta, u=None):
    theta = np.asarray(theta, dtype=float)
    if u is None:
        return theta.shape[:-1]
    return np.broadcast_shapes(theta.shape[:-1], np.asarray(u, dtype=float).shape[:-1])


# --- Model ---
@dataclass(frozen=True)
class QuasiLinearModel:
    name: str
    state_dim: int
    noise_dim: int
    output_dim: int
    input_dim: int
    param_dim: int
    A: Callable
    B: Callable
    G: Callable
    C: np.ndarray
    S_v: np.ndarray
    m0: Callable
    S0: Callable
    vectorized: bool = False
    input_dependent_covariance: bool = True
    time_step: Optional[float] = None
    natural_frequency: Optional[Callable] = None
    display_scale: Optional[float] = None
    constants: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        S_v = np.atleast_2d(np.asarray(self.S_v, dtype=float))
        if C.shape != (self.output_dim, self.state_dim):
            raise DimensionError(f"C has shape {C.shape}, expected {(self.output_dim, self.state_dim)}")
        if S_v.shape != (self.output_dim, self.output_dim):
            raise DimensionError(f"S_v has shape {S_v.shape}, expected {(self.output_dim, self.output_dim)}")
        spd_cholesky(S_v, "measurement noise covariance S_v")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "S_v", S_v)

    # Batched evaluation: theta (B, n_theta), u (B, n_u) -> (B, ...)
    def _evaluate(self, fn, shape, theta, u=None):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if u is not None:
            u = np.atleast_2d(np.asarray(u, dtype=float))
            batch = np.broadcast_shapes(theta.shape[:-1], u.shape[:-1])
        else:
            batch = theta.shape[:-1]
        if self.vectorized:
            out = np.asarray(fn(theta, u) if u is not None else fn(theta), dtype=float)
            return np.broadcast_to(out, batch + shape)
        theta = np.broadcast_to(theta, batch + theta.shape[-1:]).reshape(-1, theta.shape[-1])
        if u is None:
            values = [fn(t) for t in theta]
        else:
            u = np.broadcast_to(u, batch + u.shape[-1:]).reshape(-1, u.shape[-1])
            values = [fn(t, v) for t, v in zip(theta, u)]
        return np.asarray(values, dtype=float).reshape(batch + shape)

    def eval_A(self, theta, u):
        return self._evaluate(self.A, (self.state_dim, self.state_dim), theta, u)

    def eval_B(self, theta, u):
        return self._evaluate(self.B, (self.state_dim,), theta, u)

    def eval_G(self, theta, u):
        return self._evaluate(self.G, (self.state_dim, self.noise_dim), theta, u)

    def eval_m0(self, theta):
        return self._evaluate(self.m0, (self.state_dim,), theta)

    def eval_S0(self, theta):
        return self._evaluate(self.S0, (self.state_dim, self.state_dim), theta)

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1:] != (self.param_dim,):
            raise DimensionError(f"theta has {theta.shape[-1:]} components, model '{self.name}' expects {self.param_dim}")
        if not np.all(np.isfinite(theta)):
            raise ConfigurationError(f"theta must be finite, got {theta.tolist()}")
        return theta

    def to_display_units(self, theta):
        """Map theta to display units (Larmor Hz for the sensor examples)."""
        theta = np.asarray(theta, dtype=float)
        return theta * self.display_scale if self.display_scale is not None else theta


# --- Priors ---
@dataclass(frozen=True)
class GaussianPrior:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(f"prior covariance shape {cov.shape} does not match mean of length {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", spd_cholesky(cov, "prior covariance S_theta"))

    @property
    def n_theta(self):
        return self.mean.size

    def log_density(self, theta):
        diff = np.asarray(theta, dtype=float) - self.mean
        z = np.linalg.solve(self._chol, diff[..., None])[..., 0] if diff.ndim > 1 else linalg.solve_triangular(self._chol, diff, lower=True)
        half_logdet = np.sum(np.log(np.diag(self._chol)))
        return -0.5 * np.sum(z * z, axis=-1) - half_logdet - 0.5 * self.n_theta * np.log(2 * np.pi)

    def contains(self, theta):
        return np.all(np.isfinite(theta), axis=-1)

    def search_span(self, width=4.0):
        sd = np.sqrt(np.diag(self.cov))
        return self.mean - width * sd, self.mean + width * sd

    def sample(self, rng):
        return self.mean + symmetric_sqrt(self.cov) @ rng.standard_normal(self.n_theta)


@dataclass(frozen=True)
class UniformBoxPrior:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape:
            raise DimensionError("uniform prior bounds differ in length")
        if not np.all(lower < upper):
            raise ConfigurationError(f"uniform prior needs lower < upper componentwise, got {lower} and {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_theta(self):
        return self.lower.size

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.all((theta >= self.lower) & (theta <= self.upper), axis=-1)

    def log_density(self, theta):
        inside = self.contains(theta)
        return np.where(inside, -np.sum(np.log(self.upper - self.lower)), -np.inf)

    def search_span(self, width=None):
        return self.lower.copy(), self.upper.copy()

    def sample(self, rng):
        return self.lower + (self.upper - self.lower) * rng.random(self.n_theta)


@dataclass(frozen=True)
class DiscretePrior:
    """Weighted node set; also the output type of the quadrature rules."""
    nodes: np.ndarray
    weights: np.ndarray
    provenance: str = "user_supplied"

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if nodes.shape[0] != weights.size:
            raise DimensionError(f"{nodes.shape[0]} nodes but {weights.size} weights")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"discrete prior weights must be nonnegative and sum to 1, got {weights.tolist()}")
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if np.array_equal(nodes[i], nodes[j]):
                    raise ConfigurationError(f"discrete prior nodes {i} and {j} coincide")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n_theta(self):
        return self.nodes.shape[1]

    @property
    def size(self):
        return self.weights.size

    def _match(self, theta):
        theta = np.asarray(theta, dtype=float)
        hits = np.all(np.abs(theta[..., None, :] - self.nodes) <= 1e-12 * (1 + np.abs(self.nodes)), axis=-1)
        return hits & (self.weights > 0)

    def contains(self, theta):
        return np.any(self._match(theta), axis=-1)

    def log_density(self, theta):
        hits = self._match(theta)
        with np.errstate(divide="ignore"):
            mass = np.sum(np.where(hits, self.weights, 0.0), axis=-1)
            return np.log(mass)

    def search_span(self, width=None):
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    def sample(self, rng):
        return self.nodes[rng.choice(self.size, p=self.weights)].copy()


ParameterPrior = Union[GaussianPrior, UniformBoxPrior, DiscretePrior]


def sample_prior(prior, seed):
    """Draw one parameter vector from the prior, deterministic in the seed."""
    return prior.sample(np.random.default_rng(seed))


# --- Signals and constraints ---
@dataclass(frozen=True)
class InputSignal:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionError(f"signal values must be (N, n_u), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("signal contains non-finite entries")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_stacked(cls, stacked, input_dim=1):
        stacked = np.asarray(stacked, dtype=float)
        if stacked.size % input_dim:
            raise DimensionError(f"stacked signal of length {stacked.size} is not a multiple of n_u={input_dim}")
        return cls(stacked.reshape(-1, input_dim))

    @property
    def horizon(self):
        return self.values.shape[0]

    @property
    def input_dim(self):
        return self.values.shape[1]

    @property
    def stacked(self):
        return self.values.reshape(-1)


@dataclass(frozen=True)
class BallConstraint:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))

    @property
    def dim(self):
        return self.center.size

    @property
    def scale(self):
        return float(self.radius)

    def project(self, U):
        diff = np.asarray(U, dtype=float) - self.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        factor = np.minimum(1.0, self.radius / np.maximum(norm, 1e-300))
        return self.center + factor * diff

    def contains(self, U, tol=1e-9):
        return bool(np.linalg.norm(np.asarray(U, dtype=float) - self.center) <= self.radius * (1 + tol) + tol)

    def activity(self, U):
        return {"kind": "ball", "relative_radius": float(np.linalg.norm(np.asarray(U) - self.center) / self.radius)}


@dataclass(frozen=True)
class BoxConstraint:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionError("box bounds differ in length")
        if np.any(lower > upper):
            raise ConfigurationError("box bounds must satisfy U_min <= U_max componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.size

    @property
    def scale(self):
        return float(np.max(self.upper - self.lower))

    def project(self, U):
        return np.clip(np.asarray(U, dtype=float), self.lower, self.upper)

    def contains(self, U, tol=1e-9):
        U = np.asarray(U, dtype=float)
        return bool(np.all(U >= self.lower - tol) and np.all(U <= self.upper + tol))

    def activity(self, U, tol=1e-6):
        U = np.asarray(U, dtype=float)
        on_bound = (np.abs(U - self.lower) <= tol) | (np.abs(U - self.upper) <= tol)
        return {"kind": "box", "fraction_on_bounds": float(np.mean(on_bound))}


SignalConstraint = Union[BallConstraint, BoxConstraint]


# --- Simulation ---
@dataclass
class Trajectory:
    states: np.ndarray
    outputs: np.ndarray
    theta: np.ndarray
    seed: int


def simulate(model, theta, U, seed):
    """Draw one trajectory x_0..x_N, y_0..y_N for parameter theta under signal U."""
    theta = model.check_theta(np.asarray(theta, dtype=float).reshape(-1))
    if U.input_dim != model.input_dim:
        raise DimensionError(f"signal has n_u={U.input_dim}, model '{model.name}' expects {model.input_dim}")
    N, n = U.horizon, model.state_dim
    rng = np.random.default_rng(seed)
    z0 = rng.standard_normal(n)
    W = rng.standard_normal((N, model.noise_dim))
    V = rng.standard_normal((N + 1, model.output_dim))

    S0 = model.eval_S0(theta[None])[0]
    x = model.eval_m0(theta[None])[0] + spd_cholesky(S0, "initial state covariance S0", theta) @ z0
    thetas = np.broadcast_to(theta, (N, theta.size))
    A = model.eval_A(thetas, U.values)
    B = model.eval_B(thetas, U.values)
    G = model.eval_G(thetas, U.values)

    states = np.empty((N + 1, n))
    states[0] = x
    for k in range(N):
        x = A[k] @ x + B[k] + G[k] @ W[k]
        states[k + 1] = x
    noise = V @ np.linalg.cholesky(model.S_v).T
    outputs = states @ model.C.T + noise
    return Trajectory(states=states, outputs=outputs, theta=theta.copy(), seed=seed)


# --- Exact discretization of linear SDEs ---
def _check_finite(**arrays):
    for name, value in arrays.items():
        if not np.all(np.isfinite(value)):
            raise ConfigurationError(f"{name} contains non-finite entries")


def process_noise_covariance(A_c, G_c, dt):
    """D = int_0^dt exp(A_c t) G_c G_c^T exp(A_c^T t) dt by Van Loan's block exponential."""
    A_c = np.atleast_2d(np.asarray(A_c, dtype=float))
    G_c = np.asarray(G_c, dtype=float).reshape(A_c.shape[0], -1)
    n = A_c.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A_c
    block[:n, n:] = G_c @ G_c.T
    block[n:, n:] = A_c.T
    E = linalg.expm(block * dt)
    F = E[n:, n:].T
    D = F @ E[:n, n:]
    return 0.5 * (D + D.T)


def discretize_lti(A_c, B_c, G_c, dt):
    """
    Exact zero-order-hold discretization of dx = (A_c x + B_c u) dt + G_c dw.

    Returns (A, B_mat, G) with G G^T = D; G comes from the spectral
    decomposition of D with eigenvalues below 1e-12 * max eigenvalue zeroed.
    """
    if not dt > 0:
        raise ConfigurationError(f"discretization step must be positive, got {dt}")
    A_c = np.atleast_2d(np.asarray(A_c, dtype=float))
    n = A_c.shape[0]
    B_c = np.asarray(B_c, dtype=float).reshape(n, -1)
    G_c = np.asarray(G_c, dtype=float).reshape(n, -1)
    _check_finite(A_c=A_c, B_c=B_c, G_c=G_c)

    m = B_c.shape[1]
    block = np.zeros((n + m, n + m))
    block[:n, :n] = A_c
    block[:n, n:] = B_c
    E = linalg.expm(block * dt)
    A, B_mat = E[:n, :n], E[:n, n:]

    D = process_noise_covariance(A_c, G_c, dt)
    eigvals, eigvecs = linalg.eigh(D)
    top = max(float(eigvals.max()), 0.0)
    eigvals = np.where(eigvals < 1e-12 * top, 0.0, eigvals)
    G = eigvecs * np.sqrt(eigvals)
    return A, B_mat, G


# --- Built-in examples ---
def _damped_rotation(decay, angle):
    c, s = np.cos(angle), np.sin(angle)
    rows = (np.stack([c, s], axis=-1), np.stack([-s, c], axis=-1))
    return decay[..., None, None] * np.stack(rows, axis=-2)


def _example1(p):
    sigma_v, g, m0, s0 = p["sigma_v"], p["g"], p["m0"], p["s0"]

    def A(theta, u):
        return np.broadcast_to(theta[..., 0], _lead_shape(theta, u))[..., None, None]

    def B(theta, u):
        return np.broadcast_to(theta[..., 1] * u[..., 0], _lead_shape(theta, u))[..., None]

    def G(theta, u):
        return np.full(_lead_shape(theta, u) + (1, 1), g)

    return QuasiLinearModel(
        name="example1", state_dim=1, noise_dim=1, output_dim=1, input_dim=1, param_dim=2,
        A=A, B=B, G=G, C=np.array([[1.0]]), S_v=np.array([[sigma_v ** 2]]),
        m0=lambda theta: np.full(_lead_shape(theta) + (1,), m0),
        S0=lambda theta: np.full(_lead_shape(theta) + (1, 1), s0),
        vectorized=True, input_dependent_covariance=False, constants=dict(p),
    )


def dc_motor_matrices(theta, dt):
    """Closed-form discrete (A, B_mat, G G^T / d_c) of the DC motor; expm1 keeps small theta*dt accurate."""
    theta = np.asarray(theta, dtype=float)
    x = theta * dt
    em = np.expm1(-x)
    e = 1.0 + em
    x_plus_em = em + x
    zeros, ones = np.zeros_like(theta), np.ones_like(theta)
    A = np.stack([np.stack([ones, -em / theta], -1), np.stack([zeros, e], -1)], -2)
    B = np.stack([x_plus_em / theta, -em], -1)
    d11 = (2.0 * x_plus_em - em ** 2) / (2.0 * theta ** 3)
    d12 = em ** 2 / (2.0 * theta ** 2)
    d22 = -np.expm1(-2.0 * x) / (2.0 * theta)
    D = np.stack([np.stack([d11, d12], -1), np.stack([d12, d22], -1)], -2)
    return A, B, D


def _dc_motor(p):
    dt, d_c, s_v = p["dt"], p["d_c"], p["s_v"]
    S0 = np.diag([p["s0_position"], p["s0_velocity"]])

    def A(theta, u):
        lead = _lead_shape(theta, u)
        return np.broadcast_to(dc_motor_matrices(theta[..., 0], dt)[0], lead + (2, 2))

    def B(theta, u):
        lead = _lead_shape(theta, u)
        return np.broadcast_to(dc_motor_matrices(theta[..., 0], dt)[1], lead + (2,)) * u[..., :1]

    def G(theta, u):
        lead = _lead_shape(theta, u)
        D = dc_motor_matrices(theta[..., 0], dt)[2]
        G = np.sqrt(d_c * theta[..., 0])[..., None, None] * np.linalg.cholesky(D)
        return np.broadcast_to(G, lead + (2, 2))

    return QuasiLinearModel(
        name="dc_motor", state_dim=2, noise_dim=2, output_dim=1, input_dim=1, param_dim=1,
        A=A, B=B, G=G, C=np.array([[1.0, 0.0]]), S_v=np.array([[s_v ** 2]]),
        m0=lambda theta: np.zeros(_lead_shape(theta) + (2,)),
        S0=lambda theta: np.broadcast_to(S0, _lead_shape(theta) + (2, 2)),
        vectorized=True, input_dependent_covariance=False, time_step=dt, constants=dict(p),
    )


def atomic_oscillator_matrices(theta, dt, b_c):
    """Closed-form discrete (A, B_mat, G) of the damped atomic oscillator."""
    theta = np.asarray(theta, dtype=float)
    decay = np.exp(-dt)
    c, s = np.cos(theta * dt), np.sin(theta * dt)
    A = _damped_rotation(np.full_like(theta, decay), theta * dt)
    scale = b_c / (1.0 + theta ** 2)
    B = scale[..., None] * np.stack([theta - decay * (theta * c + s), 1.0 - decay * (c - theta * s)], -1)
    G = np.sqrt(-np.expm1(-2.0 * dt)) * np.eye(2)
    return A, B, G


def _atomic_oscillator(p):
    dt, b_c, s_v = p["dt"], p["b_c"], p["s_v"]

    def A(theta, u):
        return np.broadcast_to(atomic_oscillator_matrices(theta[..., 0], dt, b_c)[0], _lead_shape(theta, u) + (2, 2))

    def B(theta, u):
        B_mat = atomic_oscillator_matrices(theta[..., 0], dt, b_c)[1]
        return np.broadcast_to(B_mat * u[..., :1], _lead_shape(theta, u) + (2,))

    def G(theta, u):
        return np.broadcast_to(np.sqrt(-np.expm1(-2.0 * dt)) * np.eye(2), _lead_shape(theta, u) + (2, 2))

    return QuasiLinearModel(
        name="atomic_oscillator", state_dim=2, noise_dim=2, output_dim=1, input_dim=1, param_dim=1,
        A=A, B=B, G=G, C=np.array([[0.0, 1.0]]), S_v=np.array([[s_v ** 2]]),
        m0=lambda theta: np.zeros(_lead_shape(theta) + (2,)),
        S0=lambda theta: np.broadcast_to(np.eye(2), _lead_shape(theta) + (2, 2)),
        vectorized=True, input_dependent_covariance=False, time_step=dt,
        natural_frequency=lambda theta: float(np.asarray(theta).reshape(-1)[0]),
        display_scale=1.0 / (2 * np.pi * SENSOR_T2), constants=dict(p),
    )


def opm_matrices(theta, u, dt, b_c):
    """Discrete (A, B, G) of the reduced magnetometer with pumping input u; damping is 1 + u."""
    theta = np.asarray(theta, dtype=float)
    a = 1.0 + np.asarray(u, dtype=float)
    theta, a = np.broadcast_arrays(theta, a)
    decay = np.exp(-a * dt)
    c, s = np.cos(theta * dt), np.sin(theta * dt)
    A = _damped_rotation(decay, theta * dt)
    scale = b_c * (a - 1.0) / (a ** 2 + theta ** 2)
    B = scale[..., None] * np.stack([theta - decay * (theta * c + a * s), decay * (theta * s - a * c) + a], -1)
    G = np.sqrt(-np.expm1(-2.0 * a * dt))[..., None, None] * np.eye(2)
    return A, B, G


def _opm_reduced(p):
    dt, b_c, sigma_v = p["dt"], p["b_c"], p["sigma_v"]

    return QuasiLinearModel(
        name="opm_reduced", state_dim=2, noise_dim=2, output_dim=1, input_dim=1, param_dim=1,
        A=lambda theta, u: opm_matrices(theta[..., 0], u[..., 0], dt, b_c)[0],
        B=lambda theta, u: opm_matrices(theta[..., 0], u[..., 0], dt, b_c)[1],
        G=lambda theta, u: opm_matrices(theta[..., 0], u[..., 0], dt, b_c)[2],
        C=np.array([[0.0, 1.0]]), S_v=np.array([[sigma_v ** 2]]),
        m0=lambda theta: np.zeros(_lead_shape(theta) + (2,)),
        S0=lambda theta: np.broadcast_to(np.eye(2), _lead_shape(theta) + (2, 2)),
        vectorized=True, input_dependent_covariance=True, time_step=dt,
        natural_frequency=lambda theta: float(np.asarray(theta).reshape(-1)[0]),
        display_scale=1.0 / (2 * np.pi * SENSOR_T2), constants=dict(p),
    )


# name -> (builder, model constants, prior defaults)
EXAMPLES: Dict[str, Tuple[Callable, Dict[str, float], Dict[str, object]]] = {
    "example1": (
        _example1,
        {"sigma_v": 0.1, "g": 0.01, "m0": 0.0, "s0": 0.01},
        {"prior_kind": "gaussian", "prior_mean": [0.8, 0.2], "prior_var": [1e-3, 1e-3]},
    ),
    "dc_motor": (
        _dc_motor,
        {"dt": 0.05e-3, "d_c": 0.01, "s_v": 0.1, "s0_position": 0.001, "s0_velocity": 0.005},
        {"prior_kind": "uniform", "prior_lower": [0.05], "prior_upper": [2.0]},
    ),
    "atomic_oscillator": (
        _atomic_oscillator,
        {"dt": 5.7471e-3, "s_v": 11.85, "b_c": 1e5},
        {"prior_kind": "gaussian", "prior_mean": [54.6637], "prior_var": [10.76]},
    ),
    "opm_reduced": (
        _opm_reduced,
        {"dt": 5.7471e-3, "b_c": 1.22e6, "sigma_v": 11.85},
        {"prior_kind": "gaussian", "prior_mean": [54.6637], "prior_var": [3e-3]},
    ),
}


def _split_overrides(name, overrides):
    if name not in EXAMPLES:
        raise ConfigurationError(f"unknown example model '{name}'; choose one of {sorted(EXAMPLES)}")
    _, constants, prior_defaults = EXAMPLES[name]
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(constants) - set(prior_defaults))
    if unknown:
        raise ConfigurationError(f"unknown override(s) {unknown} for example '{name}'")
    model_params = {**constants, **{k: float(v) for k, v in overrides.items() if k in constants}}
    prior_params = {**prior_defaults, **{k: v for k, v in overrides.items() if k in prior_defaults}}
    return model_params, prior_params


def make_example(name, overrides=None):
    """Build one of the built-in example models with optional numeric overrides."""
    model_params, _ = _split_overrides(name, overrides)
    logger.debug("building example '%s' with %s", name, model_params)
    return EXAMPLES[name][0](model_params)


def example_prior(name, overrides=None):
    """Default continuous prior of a built-in example, honouring prior_* overrides."""
    _, p = _split_overrides(name, overrides)
    if p["prior_kind"] == "gaussian":
        return GaussianPrior(np.asarray(p["prior_mean"], dtype=float), np.diag(np.asarray(p["prior_var"], dtype=float)))
    return UniformBoxPrior(np.asarray(p["prior_lower"], dtype=float), np.asarray(p["prior_upper"], dtype=float))
