"""
Information-theoretic quantities of the discretized design problem: the
pairwise-distance lower bound on I(theta; Y), prior and conditional
entropies, the error floor implied by an information value, a Monte Carlo
mutual-information oracle, and the ITB-versus-BCRB comparison on the scalar
location model y = theta + v.

All information values are in nats.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, computed_field
from scipy import integrate, special, stats

from errors import ConfigurationError, NumericalError
from kalman_engine import batch_log_det_S, batch_pair_sweep, dense_moments
from model_core import DiscretePrior, GaussianPrior, UniformBoxPrior, spd_cholesky

logger = logging.getLogger(__name__)

MC_MAX_OBSERVATIONS = 32
# Gaussian-entropy lower bound on the limiting floor of the smoothed-uniform prior as alpha grows
ITB_UNIFORM_LIMIT_BOUND = 3.0 / (2.0 * math.pi * math.e)


@dataclass(frozen=True)
class MixtureDesignProblem:
    model: object
    dprior: DiscretePrior
    horizon: int
    constraint: object
    fast_path: bool = False
    prior: object = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {self.horizon}")
        if self.dprior.n_theta != self.model.param_dim:
            raise ConfigurationError(
                f"prior nodes have {self.dprior.n_theta} components, model '{self.model.name}' expects {self.model.param_dim}")
        if self.constraint is not None and self.constraint.dim != self.horizon * self.model.input_dim:
            raise ConfigurationError(
                f"constraint acts on {self.constraint.dim} values, signal has N*n_u = {self.horizon * self.model.input_dim}")

    @property
    def signal_dim(self):
        return self.horizon * self.model.input_dim

    def signal_batch(self, U):
        """Accept an InputSignal, a stacked vector or a (B, N*n_u) batch; return (B, N, n_u)."""
        values = np.asarray(getattr(U, "values", U), dtype=float)
        return values.reshape(-1, self.horizon, self.model.input_dim)


class BoundReport(BaseModel):
    I_l: float = Field(..., description="Pairwise-distance lower bound on I(theta; Y), nats")
    H_theta: float = Field(..., description="Entropy of the discretized prior, nats")
    H_prior: Optional[float] = Field(None, description="Differential entropy of the continuous prior, nats")
    d_matrix: List[List[float]] = Field(..., description="Pairwise distances d_ij, nats")
    itb_floor: float = Field(..., description="Mean squared error floor from H_prior and I_l")
    n_theta: int = Field(..., description="Parameter dimension")

    @computed_field
    @property
    def I_l_bits(self) -> float:
        return self.I_l / math.log(2.0)

    @computed_field
    @property
    def H_theta_bits(self) -> float:
        return self.H_theta / math.log(2.0)


class GapReport(BaseModel):
    alpha: Optional[float] = Field(None, description="Smoothing parameter of the prior; None for the Gaussian prior")
    J_P: float = Field(..., description="Prior Fisher information")
    J_D: float = Field(..., description="Data Fisher information")
    bcrb_floor: float = Field(..., description="1 / (J_P + J_D)")
    itb_floor: float = Field(..., description="exp(2 (H_theta - I)) / (2 pi e)")
    H_theta: float = Field(..., description="Prior entropy, nats")
    information: float = Field(..., description="I(theta; y), nats")
    jp_bound_holds: bool = Field(..., description="J_P >= alpha / (2 sqrt(pi))")


# --- Entropies and the error floor ---
def prior_entropy(weights):
    """H_theta = -sum p ln p with 0 ln 0 = 0."""
    weights = np.asarray(weights, dtype=float)
    return float(-np.sum(special.xlogy(weights, weights)))


def differential_entropy(prior):
    """Differential entropy of a continuous prior in nats; None for a discrete prior."""
    if isinstance(prior, GaussianPrior):
        return float(stats.multivariate_normal(mean=prior.mean, cov=prior.cov).entropy())
    if isinstance(prior, UniformBoxPrior):
        return float(np.sum(np.log(prior.upper - prior.lower)))
    return None


def itb_floor(H_theta, information, n_theta):
    """n_theta / (2 pi e) * exp(2 (H_theta - I) / n_theta)."""
    return n_theta / (2.0 * math.pi * math.e) * math.exp(2.0 * (H_theta - information) / n_theta)


def kt_from_distances(distances, weights):
    """I_l = -sum_i p_i ln sum_j p_j exp(-d_ij), evaluated with log-sum-exp; distances (..., r, r)."""
    weights = np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    inner = special.logsumexp(log_w - np.asarray(distances, dtype=float), axis=-1)
    return -np.sum(np.where(weights > 0, weights * inner, 0.0), axis=-1)


def kt_from_two_alt(d, p1, p2):
    """Closed form of the bound for two components separated by d."""
    log_p1, log_p2 = math.log(p1), math.log(p2)
    return -(p1 * np.logaddexp(log_p1, log_p2 - d) + p2 * np.logaddexp(log_p1 - d, log_p2))


# --- Pairwise distances ---
def _map_ordered(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def pairwise_distances(problem, U, threads=1):
    """d_ij matrices for a batch of signals, shape (B, r, r); zero diagonal, symmetric."""
    signals = problem.signal_batch(U)
    nodes = problem.dprior.nodes
    r = len(nodes)
    pairs = list(combinations(range(r), 2))

    def sweep_pair(pair):
        i, j = pair
        return batch_pair_sweep(problem.model, nodes[i][None], nodes[j][None], signals)

    sweeps = _map_ordered(sweep_pair, pairs, threads)
    log_dets = None
    if not problem.fast_path:
        log_dets = _map_ordered(lambda i: batch_log_det_S(problem.model, nodes[i][None], signals), list(range(r)), threads)

    distances = np.zeros((signals.shape[0], r, r))
    for (i, j), sweep in zip(pairs, sweeps):
        d = sweep.quadratic_term
        if log_dets is not None:
            d = d + sweep.log_det_term - 0.25 * (log_dets[i] + log_dets[j])
        distances[:, i, j] = distances[:, j, i] = d
    return distances


def kt_values(problem, U, threads=1):
    """Vectorized I_l over a batch of signals."""
    return kt_from_distances(pairwise_distances(problem, U, threads), problem.dprior.weights)


def kt_lower_bound(problem, U, threads=1):
    """Full bound report at one signal."""
    stacked = problem.signal_batch(U)[0].reshape(-1)
    if problem.constraint is not None and not problem.constraint.contains(stacked):
        logger.warning("evaluating the bound at a signal outside its constraint set")
    distances = pairwise_distances(problem, stacked[None], threads)[0]
    I_l = float(kt_from_distances(distances, problem.dprior.weights))
    H = prior_entropy(problem.dprior.weights)
    n_theta = problem.dprior.n_theta
    h = differential_entropy(problem.prior)
    if h is None:
        logger.debug("no continuous prior on the problem; the floor uses the node-weight entropy")
    # Information is clipped to the node-weight entropy only; h can be negative.
    information = min(max(I_l, 0.0), H)
    return BoundReport(
        I_l=I_l, H_theta=H, H_prior=h, d_matrix=distances.tolist(),
        itb_floor=itb_floor(H if h is None else h, information, n_theta), n_theta=n_theta,
    )


def two_alt_values(problem, U, threads=1):
    if problem.dprior.size != 2:
        raise ConfigurationError(f"two-alternative objective needs exactly 2 prior nodes, got {problem.dprior.size}")
    return pairwise_distances(problem, U, threads)[:, 0, 1]


def two_alt_objective(problem, U):
    """d_12(U) for a two-node prior."""
    return float(two_alt_values(problem, problem.signal_batch(U)[0].reshape(1, -1))[0])


# --- Entropies of the mixture ---
def cond_entropy_Y_given_theta(problem, U):
    """(1/2) sum_j p_j ln((2 pi e)^{n_Y} |S_j|) with n_Y = (N+1) n_y."""
    signals = problem.signal_batch(U)[:1]
    n_obs = (problem.horizon + 1) * problem.model.output_dim
    weights = problem.dprior.weights
    total = []
    for node, weight in zip(problem.dprior.nodes, weights):
        if weight == 0:
            continue
        log_det = batch_log_det_S(problem.model, node[None], signals)[0]
        total.append(weight * 0.5 * (n_obs * math.log(2 * math.pi * math.e) + log_det))
    return math.fsum(total)


def mi_monte_carlo(problem, U, n_samples, seed):
    """
    Plain Monte Carlo estimate of I(theta; Y) for the discretized mixture.

    Returns (estimate, standard error); intended for small instances only.
    """
    n_obs = (problem.horizon + 1) * problem.model.output_dim
    if n_obs > MC_MAX_OBSERVATIONS:
        raise ConfigurationError(f"Monte Carlo oracle is limited to (N+1) n_y <= {MC_MAX_OBSERVATIONS}, got {n_obs}")
    signal = problem.signal_batch(U)[0]
    weights = problem.dprior.weights
    moments = [dense_moments(problem.model, node, signal) for node in problem.dprior.nodes]

    rng = np.random.default_rng(seed)
    labels = rng.choice(len(weights), size=n_samples, p=weights)
    noise = rng.standard_normal((n_samples, n_obs))
    samples = np.empty((n_samples, n_obs))
    for j, m in enumerate(moments):
        rows = labels == j
        samples[rows] = m.mean + noise[rows] @ spd_cholesky(m.cov, "stacked output covariance").T

    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    log_components = np.stack([stats.multivariate_normal.logpdf(samples, m.mean, m.cov).reshape(n_samples)
                               for m in moments], axis=-1)
    log_mix = special.logsumexp(log_components + log_w, axis=-1)
    H_Y = -float(np.mean(log_mix))
    estimate = H_Y - cond_entropy_Y_given_theta(problem, signal[None])
    stderr = float(np.std(log_mix, ddof=1) / math.sqrt(n_samples))
    return estimate, stderr


# --- ITB versus BCRB on y = theta + v ---
def _simpson(fn, lo, hi, points):
    grid = np.linspace(lo, hi, points)
    return integrate.simpson(fn(grid), x=grid)


def _split_segments(alpha):
    knee = max(0.0, 1.0 - 10.0 / alpha)
    segments = [(knee, 1.0 + 10.0 / alpha)]
    if knee > 0:
        segments.insert(0, (0.0, knee))
    return segments


def _smoothed_uniform_density(alpha, t):
    # Phi(alpha (1 + t)) + Phi(alpha (1 - t)) - 1 without cancellation
    return 0.5 * (special.ndtr(alpha * (1.0 - t)) - special.ndtr(-alpha * (1.0 + t)))


def _prior_fisher_integrand(alpha, t):
    mass = 2.0 * _smoothed_uniform_density(alpha, t)
    slope = stats.norm.pdf(alpha * (1.0 + t)) - stats.norm.pdf(alpha * (1.0 - t))
    return np.where(mass > 0, 0.5 * alpha ** 2 * slope ** 2 / np.maximum(mass, 1e-300), 0.0)


def _even_integral(fn, segments, points):
    return 2.0 * math.fsum(_simpson(fn, lo, hi, points) for lo, hi in segments)


def itb_bcrb_gap_demo(alpha, grid=4001):
    """
    Compare the information-theoretic floor and the Bayesian Cramer-Rao
    floor for y = theta + v, v ~ N(0, 1), under the smoothed uniform prior
    p0 = (Phi(alpha(1+theta)) + Phi(alpha(1-theta)) - 1) / 2.
    """
    if not alpha > 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    grid = int(grid) | 1
    if grid < 17:
        raise ConfigurationError(f"integration grid must have at least 17 points, got {grid}")
    segments = _split_segments(alpha)

    def prior_fisher(points):
        return _even_integral(lambda t: _prior_fisher_integrand(alpha, t), segments, points)

    J_P = prior_fisher(grid)
    J_P_coarse = prior_fisher((grid + 1) // 2)
    if abs(J_P - J_P_coarse) > 1e-4 * max(1.0, abs(J_P)):
        raise NumericalError(f"integration grid of {grid} points is too coarse for alpha={alpha}: "
                             f"J_P changed from {J_P_coarse} to {J_P} on refinement")
    J_D = 1.0

    H_theta = _even_integral(lambda t: -special.xlogy(_smoothed_uniform_density(alpha, t),
                                                       _smoothed_uniform_density(alpha, t)), segments, grid)
    # The output law is the uniform law convolved with N(0, 1 + alpha^-2)
    spread = math.sqrt(1.0 + alpha ** -2)

    def output_density(t):
        return 0.5 * (special.ndtr((1.0 - t) / spread) - special.ndtr(-(1.0 + t) / spread))

    H_y = _even_integral(lambda t: -special.xlogy(output_density(t), output_density(t)),
                         [(0.0, 1.0 + 12.0 * spread)], grid)
    information = H_y - 0.5 * math.log(2 * math.pi * math.e)

    bound = alpha / (2.0 * math.sqrt(math.pi))
    holds = J_P >= bound * (1 - 1e-9)
    if not holds:
        if alpha >= 1.0:
            raise NumericalError(f"J_P={J_P} violates J_P >= alpha/(2 sqrt(pi))={bound} at alpha={alpha}")
        logger.info("alpha=%g is below the edge-dominated regime; J_P=%g < %g", alpha, J_P, bound)

    return GapReport(alpha=alpha, J_P=J_P, J_D=J_D, bcrb_floor=1.0 / (J_P + J_D),
                     itb_floor=itb_floor(H_theta, information, 1), H_theta=H_theta,
                     information=information, jp_bound_holds=bool(holds))


def itb_bcrb_gap_gaussian(variance):
    """Gaussian-prior counterpart, where both floors equal variance / (variance + 1)."""
    if not variance > 0:
        raise ConfigurationError(f"prior variance must be positive, got {variance}")
    J_P = 1.0 / variance
    H_theta = 0.5 * math.log(2 * math.pi * math.e * variance)
    information = 0.5 * math.log1p(variance)
    return GapReport(alpha=None, J_P=J_P, J_D=1.0, bcrb_floor=1.0 / (J_P + 1.0),
                     itb_floor=itb_floor(H_theta, information, 1), H_theta=H_theta,
                     information=information, jp_bound_holds=True)
