"""
Kalman recursions for the log-likelihood / negative log-posterior and for
the pairwise mixture distances d_ij, plus dense-matrix oracles for testing.

All sweeps are batched over a leading axis so that a grid of parameter
values or a set of perturbed signals is filtered in one pass. Every sweep
performs N+1 corrections and N predictions; u_N is never evaluated.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from errors import CholeskyError, ConfigurationError, DimensionError, OutOfSupportError
from model_core import spd_cholesky

logger = logging.getLogger(__name__)

DENSE_MAX_HORIZON = 64


@dataclass
class KalmanSweep:
    """Product of one filtering pass; arrays carry a leading batch axis."""
    predicted_outputs: np.ndarray   # (B, N+1, n_y)   C m_k^-
    innovation_covs: np.ndarray     # (B, N+1, n_y, n_y)
    log_det: np.ndarray             # (B,)  sum_k ln|Sigma_k|
    quad_form: np.ndarray           # (B,)  sum_k |y_k - C m_k^-|^2 in the Sigma_k^-1 metric
    filtered_mean: np.ndarray       # (B, n)
    filtered_cov: np.ndarray        # (B, n, n)


@dataclass
class PairSweep:
    predicted_means: np.ndarray     # (B, N+1, 2n)
    predicted_covs: np.ndarray      # (B, N+1, 2n, 2n)
    innovation_covs: np.ndarray     # (B, N+1, n_y, n_y)
    quadratic_term: np.ndarray      # (B,)  (1/4) sum |C~ m~_k^-|^2
    log_det_term: np.ndarray        # (B,)  (1/2) sum ln|Sigma~_k|


@dataclass
class DenseMoments:
    mean: np.ndarray
    cov: np.ndarray


# --- Batched small-matrix helpers ---
def _cholesky(sigma, step, thetas):
    if sigma.shape[-1] == 1:
        if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
            bad = int(np.argmax(~(sigma.reshape(-1) > 0)))
            raise CholeskyError("innovation covariance", None if thetas is None else thetas[bad], step)
        return np.sqrt(sigma)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise CholeskyError("innovation covariance", None, step) from None


def _solve_lower(chol, rhs):
    if chol.shape[-1] == 1:
        return rhs / chol
    return np.linalg.solve(chol, rhs)


def _transpose(a):
    return np.swapaxes(a, -1, -2)


def _block_diag_pair(first, second):
    batch, r1, c1 = first.shape
    _, r2, c2 = second.shape
    out = np.zeros((batch, r1 + r2, c1 + c2))
    out[:, :r1, :c1] = first
    out[:, r1:, c1:] = second
    return out


def _run_filter(step, C, S_v, mean, cov, horizon, Y=None, thetas=None, keep_covs=False):
    """
    Generic sweep. step(k) returns batched (A_k, B_k, G_k). With Y None the
    observations are taken as zero, which is the form used by the
    observation-free sweeps.
    """
    batch, n = mean.shape
    n_y = C.shape[0]
    outputs = np.empty((batch, horizon + 1, n_y))
    sigmas = np.empty((batch, horizon + 1, n_y, n_y))
    means = np.empty((batch, horizon + 1, n)) if keep_covs else None
    covs = np.empty((batch, horizon + 1, n, n)) if keep_covs else None
    log_det = np.zeros(batch)
    quad = np.zeros(batch)

    for k in range(horizon + 1):
        if keep_covs:
            means[:, k] = mean
            covs[:, k] = cov
        CS = C @ cov
        sigma = CS @ C.T + S_v
        chol = _cholesky(sigma, k, thetas)
        predicted = mean @ C.T
        outputs[:, k] = predicted
        sigmas[:, k] = sigma

        innovation = -predicted if Y is None else Y[:, k] - predicted
        z = _solve_lower(chol, innovation[..., None])
        W = _solve_lower(chol, CS)
        quad += np.sum(z[..., 0] ** 2, axis=-1)
        log_det += 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)

        mean = mean + (_transpose(W) @ z)[..., 0]
        cov = cov - _transpose(W) @ W
        cov = 0.5 * (cov + _transpose(cov))

        if k < horizon:
            A_k, B_k, G_k = step(k)
            mean = (A_k @ mean[..., None])[..., 0] + B_k
            cov = A_k @ cov @ _transpose(A_k) + G_k @ _transpose(G_k)

    return outputs, sigmas, log_det, quad, mean, cov, means, covs


# --- Argument normalization ---
def _signal_batch(model, U):
    values = getattr(U, "values", U)
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3 or values.shape[-1] != model.input_dim:
        raise DimensionError(f"signal batch has shape {values.shape}, expected (B, N, {model.input_dim})")
    return values


def _theta_batch(model, theta, batch):
    theta = model.check_theta(np.atleast_2d(np.asarray(theta, dtype=float)))
    return np.broadcast_to(theta, (batch, model.param_dim)) if theta.shape[0] == 1 else theta


def _observation_batch(model, Y, horizon, batch):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        if Y.size != (horizon + 1) * model.output_dim:
            raise DimensionError(f"observations have {Y.size} entries, expected {(horizon + 1) * model.output_dim}")
        Y = Y.reshape(horizon + 1, model.output_dim)
    if Y.ndim == 2:
        Y = Y[None]
    if Y.shape[1:] != (horizon + 1, model.output_dim):
        raise DimensionError(f"observations have shape {Y.shape[1:]}, expected {(horizon + 1, model.output_dim)}")
    return np.broadcast_to(Y, (batch,) + Y.shape[1:])


# --- Single-model sweeps ---
def batch_kalman_sweep(model, thetas, U, Y=None):
    """Filter a batch of (theta, U, Y) triples; thetas and U broadcast over the batch axis."""
    signals = _signal_batch(model, U)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    batch = max(signals.shape[0], thetas.shape[0])
    thetas = _theta_batch(model, thetas, batch)
    signals = np.broadcast_to(signals, (batch,) + signals.shape[1:])
    horizon = signals.shape[1]
    if Y is not None:
        Y = _observation_batch(model, Y, horizon, batch)

    S0 = model.eval_S0(thetas)
    try:
        spd_cholesky(S0, "initial state covariance S0")
    except CholeskyError:
        for b in range(batch):
            spd_cholesky(S0[b], "initial state covariance S0", thetas[b])
        raise

    def step(k):
        u = signals[:, k]
        return model.eval_A(thetas, u), model.eval_B(thetas, u), model.eval_G(thetas, u)

    outputs, sigmas, log_det, quad, mean, cov, _, _ = _run_filter(
        step, model.C, model.S_v, model.eval_m0(thetas), np.array(S0), horizon, Y, thetas)
    return KalmanSweep(outputs, sigmas, log_det, quad, mean, cov)


def kalman_sweep(model, theta, U, Y=None):
    sweep = batch_kalman_sweep(model, np.asarray(theta, dtype=float).reshape(1, -1), U, Y)
    return KalmanSweep(*(np.asarray(getattr(sweep, name))[0] for name in KalmanSweep.__dataclass_fields__))


def log_likelihood(model, theta, Y, U):
    """ln p(Y | theta, U) by the recursive factorization over innovations."""
    sweep = batch_kalman_sweep(model, np.asarray(theta, dtype=float).reshape(1, -1), U, Y)
    n_obs = sweep.predicted_outputs.shape[1] * model.output_dim
    return float(-0.5 * (sweep.quad_form[0] + sweep.log_det[0] + n_obs * np.log(2 * np.pi)))


def batch_neg_log_posterior(model, prior, thetas, Y, U):
    """Vectorized negative log-posterior; +inf where theta lies outside the prior support."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    log_prior = np.atleast_1d(prior.log_density(thetas))
    values = np.full(thetas.shape[0], np.inf)
    inside = np.isfinite(log_prior)
    if np.any(inside):
        sweep = batch_kalman_sweep(model, thetas[inside], U, Y)
        values[inside] = 0.5 * (sweep.quad_form + sweep.log_det) - log_prior[inside]
    return values


def neg_log_posterior(model, prior, theta, Y, U):
    """(1/2) sum_k (|y_k - C m_k^-|^2 + ln|Sigma_k|) - ln p0(theta)."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    log_prior = float(np.asarray(prior.log_density(theta)))
    if not np.isfinite(log_prior):
        raise OutOfSupportError(theta)
    sweep = batch_kalman_sweep(model, theta[None], U, Y)
    return float(0.5 * (sweep.quad_form[0] + sweep.log_det[0]) - log_prior)


def batch_log_det_S(model, theta, U):
    thetas = np.atleast_2d(np.asarray(theta, dtype=float))
    return batch_kalman_sweep(model, thetas, U).log_det


def log_det_S(model, theta, U):
    """ln|S(theta, U)| = sum_k ln|Sigma_k| without any observation sequence."""
    return float(batch_log_det_S(model, np.asarray(theta, dtype=float).reshape(1, -1), U)[0])


# --- Pair sweep on the stacked model ---
def batch_pair_sweep(model, theta_i, theta_j, U, keep_covs=False):
    signals = _signal_batch(model, U)
    batch, horizon = signals.shape[0], signals.shape[1]
    theta_i = _theta_batch(model, np.atleast_2d(theta_i), batch)
    theta_j = _theta_batch(model, np.atleast_2d(theta_j), batch)
    both = np.concatenate([theta_i, theta_j])
    n = model.state_dim

    S0 = model.eval_S0(both)
    spd_cholesky(S0[0], "initial state covariance S0", both[0])
    spd_cholesky(S0[batch], "initial state covariance S0", both[batch])
    m0 = model.eval_m0(both)
    mean = np.concatenate([m0[:batch], m0[batch:]], axis=-1)
    cov = _block_diag_pair(S0[:batch], S0[batch:])
    C_pair = np.hstack([model.C, -model.C]) / np.sqrt(2.0)

    def step(k):
        u = np.concatenate([signals[:, k], signals[:, k]])
        A, B, G = model.eval_A(both, u), model.eval_B(both, u), model.eval_G(both, u)
        return (_block_diag_pair(A[:batch], A[batch:]),
                np.concatenate([B[:batch], B[batch:]], axis=-1),
                _block_diag_pair(G[:batch], G[batch:]))

    _, sigmas, log_det, quad, _, _, means, covs = _run_filter(
        step, C_pair, model.S_v, mean, cov, horizon, None, None, keep_covs)
    if not keep_covs:
        means = np.empty((batch, 0, 2 * n))
        covs = np.empty((batch, 0, 2 * n, 2 * n))
    return PairSweep(means, covs, sigmas, 0.25 * quad, 0.5 * log_det)


def batch_pair_distance(model, theta_i, theta_j, U, fast_path=False):
    """d_ij for a batch of signals; fast_path keeps only the quadratic term."""
    sweep = batch_pair_sweep(model, theta_i, theta_j, U)
    if fast_path:
        return sweep.quadratic_term
    ld_i = batch_log_det_S(model, theta_i, U)
    ld_j = batch_log_det_S(model, theta_j, U)
    return sweep.quadratic_term + sweep.log_det_term - 0.25 * (ld_i + ld_j)


def pair_distance(model, theta_i, theta_j, U, fast_path=False):
    """
    Chernoff-type distance between the output laws at theta_i and theta_j.

    Runs the 2n-dimensional augmented filter with C~ = [C, -C]/sqrt(2) and
    zero observations. Set fast_path when G and S0 do not depend on the
    input: the log-determinant terms are then constant and omitted.
    """
    theta_i = np.asarray(theta_i, dtype=float).reshape(1, -1)
    theta_j = np.asarray(theta_j, dtype=float).reshape(1, -1)
    return float(batch_pair_distance(model, theta_i, theta_j, U, fast_path)[0])


# --- Dense oracles ---
def dense_moments(model, theta, U):
    """Stacked output mean F(theta, U) and covariance S(theta, U) built explicitly."""
    values = _signal_batch(model, U)[0]
    horizon = values.shape[0]
    if horizon > DENSE_MAX_HORIZON:
        raise ConfigurationError(f"dense oracle is limited to N <= {DENSE_MAX_HORIZON}, got N={horizon}")
    theta = model.check_theta(np.asarray(theta, dtype=float).reshape(1, -1))
    n, n_w, n_y = model.state_dim, model.noise_dim, model.output_dim

    A_cal = np.zeros(((horizon + 1) * n, n))
    B_cal = np.zeros((horizon + 1) * n)
    G_cal = np.zeros(((horizon + 1) * n, max(horizon, 1) * n_w))
    transition, drift, noise_gain = np.eye(n), np.zeros(n), np.zeros((n, max(horizon, 1) * n_w))
    for k in range(horizon + 1):
        rows = slice(k * n, (k + 1) * n)
        A_cal[rows], B_cal[rows], G_cal[rows] = transition, drift, noise_gain
        if k < horizon:
            u = values[k][None]
            A_k, B_k, G_k = model.eval_A(theta, u)[0], model.eval_B(theta, u)[0], model.eval_G(theta, u)[0]
            transition = A_k @ transition
            drift = A_k @ drift + B_k
            noise_gain = A_k @ noise_gain
            noise_gain[:, k * n_w:(k + 1) * n_w] += G_k

    C_cal = np.kron(np.eye(horizon + 1), model.C)
    m0, S0 = model.eval_m0(theta)[0], model.eval_S0(theta)[0]
    F = C_cal @ (A_cal @ m0 + B_cal)
    state_cov = A_cal @ S0 @ A_cal.T + G_cal @ G_cal.T
    S = C_cal @ state_cov @ C_cal.T + np.kron(np.eye(horizon + 1), model.S_v)
    S = 0.5 * (S + S.T)
    spd_cholesky(S, "stacked output covariance", theta[0])
    return DenseMoments(mean=F, cov=S)


def dense_log_likelihood(moments, Y):
    return float(stats.multivariate_normal.logpdf(np.asarray(Y, dtype=float).reshape(-1), moments.mean, moments.cov))


def dense_pair_distance(first, second):
    delta = first.mean - second.mean
    average = 0.5 * (first.cov + second.cov)
    quad = delta @ np.linalg.solve(average, delta)
    _, ld_avg = np.linalg.slogdet(average)
    _, ld_1 = np.linalg.slogdet(first.cov)
    _, ld_2 = np.linalg.slogdet(second.cov)
    return float(quad / 8.0 + 0.5 * ld_avg - 0.25 * (ld_1 + ld_2))
