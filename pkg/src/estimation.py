"""
MAP parameter estimation through the recursive negative log-posterior, and
the Monte Carlo harness measuring mean squared estimation error for a
(model, prior, signal) triple.
"""
import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy import optimize

from errors import ConfigurationError, InfoDesignError, NumericalError
from kalman_engine import batch_neg_log_posterior
from model_core import DiscretePrior, sample_prior, simulate

logger = logging.getLogger(__name__)

GRID_CHUNK = 4096


class MapSearchConfig(BaseModel):
    grid_size: int = Field(101, ge=3, description="Coarse grid points per parameter dimension")
    span_width: float = Field(4.0, gt=0, description="Gaussian priors are scanned over mean +/- span_width * sd")
    tolerance: float = Field(1e-8, gt=0, description="Refinement tolerance relative to the search span")
    max_passes: int = Field(50, ge=1, description="Coordinate-descent passes for multi-parameter refinement")

    model_config = {"extra": "forbid"}


class McReport(BaseModel):
    signal: str = Field("signal", description="Name of the evaluated signal")
    trials: int = Field(..., description="Number of Monte Carlo trials")
    seed: int = Field(..., description="Master seed")
    mse: float = Field(..., description="Mean squared estimation error")
    stderr: float = Field(..., description="Standard error of the mean squared error")
    squared_errors: List[float] = Field(..., description="Per-trial squared errors")
    theta_true: List[List[float]] = Field(..., description="Per-trial true parameters")
    theta_hat: List[List[float]] = Field(..., description="Per-trial MAP estimates")
    theta_digest: str = Field(..., description="Digest of the true-parameter draws, equal across paired signals")
    rmse_display: Optional[float] = Field(None, description="Root mean squared error in display units (Hz)")
    elapsed: float = Field(..., description="Wall time in seconds")


# --- MAP estimation ---
def _grid(lower, upper, size):
    axes = [np.linspace(lo, hi, size) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1), axes


def _posterior_values(model, prior, thetas, Y, U):
    parts = [batch_neg_log_posterior(model, prior, thetas[i:i + GRID_CHUNK], Y, U)
             for i in range(0, len(thetas), GRID_CHUNK)]
    values = np.concatenate(parts)
    return np.where(np.isfinite(values), values, np.inf)


def _line_search(fn, lo, hi, tol):
    # Golden-section search with parabolic acceleration on a bracketing interval
    result = optimize.minimize_scalar(fn, bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": 500})
    return float(result.x), float(result.fun)


def map_estimate(model, prior, Y, U, cfg=None):
    """
    Minimize the negative log-posterior: coarse grid over the search span,
    then golden-section refinement (coordinate passes when n_theta >= 2).
    Grid ties resolve to the lowest index.
    """
    cfg = cfg or MapSearchConfig()
    if isinstance(prior, DiscretePrior):
        values = _posterior_values(model, prior, prior.nodes, Y, U)
        if not np.any(np.isfinite(values)):
            raise ConfigurationError("negative log-posterior is not finite at any prior node")
        return prior.nodes[int(np.argmin(values))].copy()

    lower, upper = prior.search_span(cfg.span_width)
    thetas, axes = _grid(lower, upper, cfg.grid_size)
    values = _posterior_values(model, prior, thetas, Y, U)
    if not np.any(np.isfinite(values)):
        raise ConfigurationError("negative log-posterior is not finite anywhere on the search grid")
    best = int(np.argmin(values))
    theta, value = thetas[best].copy(), float(values[best])
    steps = (upper - lower) / (cfg.grid_size - 1)
    tolerance = cfg.tolerance * (upper - lower)

    def along(index, base):
        def fn(x):
            candidate = base.copy()
            candidate[index] = x
            return float(_posterior_values(model, prior, candidate[None], Y, U)[0])
        return fn

    for _ in range(cfg.max_passes if theta.size > 1 else 1):
        moved = 0.0
        for i in range(theta.size):
            lo = max(lower[i], theta[i] - steps[i])
            hi = min(upper[i], theta[i] + steps[i])
            x, fx = _line_search(along(i, theta), lo, hi, tolerance[i])
            if fx < value:
                moved = max(moved, abs(x - theta[i]))
                theta[i], value = x, fx
        if np.all(moved < tolerance):
            break
    return theta


# --- Monte Carlo harness ---
def trial_seeds(seed, trial):
    """(theta seed, simulation seed) of one trial, derived from the master seed by counter."""
    state = np.random.SeedSequence([int(seed), int(trial)]).generate_state(2)
    return int(state[0]), int(state[1])


def _run_trial(model, prior, U, seed, cfg, trial):
    theta_seed, sim_seed = trial_seeds(seed, trial)
    try:
        theta = np.asarray(sample_prior(prior, theta_seed), dtype=float).reshape(-1)
        trajectory = simulate(model, theta, U, sim_seed)
        estimate = map_estimate(model, prior, trajectory.outputs, U, cfg)
    except InfoDesignError as exc:
        wrapper = NumericalError if isinstance(exc, NumericalError) else ConfigurationError
        raise wrapper(f"Monte Carlo trial {trial} failed: {exc}") from exc
    return theta, estimate


def _digest(thetas):
    return hashlib.sha256(np.ascontiguousarray(thetas, dtype=np.float64).tobytes()).hexdigest()[:16]


def mc_error(model, prior, U, trials, seed, cfg=None, threads=1, name="signal"):
    """Mean squared MAP error over seeded trials; per-trial seeds come from (seed, trial index)."""
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    cfg = cfg or MapSearchConfig()
    began = time.perf_counter()

    def run(trial):
        return _run_trial(model, prior, U, seed, cfg, trial)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, range(trials)))
    else:
        outcomes = [run(trial) for trial in range(trials)]

    theta_true = np.array([o[0] for o in outcomes])
    theta_hat = np.array([o[1] for o in outcomes])
    errors = np.sum((theta_true - theta_hat) ** 2, axis=-1)
    mse = math.fsum(errors.tolist()) / trials
    stderr = float(np.std(errors, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    rmse_display = None
    if model.display_scale is not None:
        rmse_display = math.sqrt(mse) * model.display_scale
    logger.info("%s: mse=%.6g +/- %.2g over %d trials", name, mse, stderr, trials)
    return McReport(
        signal=name, trials=trials, seed=int(seed), mse=mse, stderr=stderr,
        squared_errors=errors.tolist(), theta_true=theta_true.tolist(), theta_hat=theta_hat.tolist(),
        theta_digest=_digest(theta_true), rmse_display=rmse_display, elapsed=time.perf_counter() - began,
    )


def compare_signals(model, prior, signals: Dict[str, object], trials, seed, cfg=None, threads=1):
    """One McReport per named signal over identical trial seeds (paired design)."""
    if not signals:
        raise ConfigurationError("at least one signal is required")
    horizons = {name: U.horizon for name, U in signals.items()}
    if len(set(horizons.values())) != 1:
        raise ConfigurationError(f"signals have different horizons: {horizons}")
    reports = [mc_error(model, prior, U, trials, seed, cfg, threads, name=name) for name, U in signals.items()]
    digests = {r.theta_digest for r in reports}
    if len(digests) != 1:
        raise NumericalError("paired comparison drew different parameters for different signals")
    return reports
