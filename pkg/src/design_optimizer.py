"""
Input-signal optimization: projected-gradient ascent with central
finite-difference gradients and multi-start, plus the eigenvector solution of
the linear two-alternative ball-constrained problem.
"""
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import linalg

from classical_baseline import batch_avg_d_optimal
from errors import ConfigurationError, NumericalError
from info_bounds import kt_values, two_alt_values
from kalman_engine import dense_moments
from model_core import BallConstraint, InputSignal

logger = logging.getLogger(__name__)

Strategy = Literal["zero", "constant", "harmonic", "random"]

# Largest batch of signals pushed through one vectorized sweep
EVALUATION_CHUNK = 512
HALVINGS_PER_ROUND = 8


class DesignOptions(BaseModel):
    objective: Literal["kt_bound", "two_alt", "avg_d_optimal"] = Field(
        "kt_bound", description="Design criterion to maximize")
    max_iterations: int = Field(200, ge=1, description="Ascent iterations per start")
    fd_step: float = Field(1e-4, gt=0, description="Relative central-difference step, scaled by max(1, |U|_inf)")
    tolerance: float = Field(1e-7, gt=0, description="Stop when the relative objective gain falls below this")
    starts: int = Field(4, ge=1, description="Number of multi-starts K")
    init_strategies: List[Strategy] = Field(
        default_factory=lambda: ["zero", "constant", "harmonic", "random"],
        description="Initialization strategies, cycled over the starts")
    max_halvings: int = Field(32, ge=1, description="Backtracking halvings before a start is declared converged")
    seed: int = Field(0, description="Seed for random initializations")

    model_config = {"extra": "forbid"}

    @field_validator("init_strategies")
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("at least one initialization strategy is required")
        return value


@dataclass
class TraceEntry:
    iteration: int
    objective: float
    grad_norm: float
    step: float


@dataclass
class DesignResult:
    u_star: InputSignal
    objective: float
    trace: List[TraceEntry]
    active_constraint: Dict[str, Any]
    wall_time: float
    start_index: int = 0
    strategy: str = "zero"
    start_objectives: List[float] = field(default_factory=list)

    def summary(self, objective_name):
        return DesignSummary(
            objective_name=objective_name, objective=self.objective, iterations=len(self.trace) - 1,
            active_constraint=self.active_constraint, wall_time=self.wall_time,
            start_index=self.start_index, strategy=self.strategy, start_objectives=self.start_objectives,
        )


class DesignSummary(BaseModel):
    objective_name: str = Field(..., description="Maximized criterion")
    objective: float = Field(..., description="Criterion value at the returned signal")
    iterations: int = Field(..., description="Accepted ascent steps of the winning start")
    active_constraint: Dict[str, Any] = Field(..., description="Constraint activity at the optimum")
    wall_time: float = Field(..., description="Seconds spent in the optimizer")
    start_index: int = Field(..., description="Index of the winning start")
    strategy: str = Field(..., description="Initialization of the winning start")
    start_objectives: List[float] = Field(default_factory=list, description="Final objective of every start")


# --- Constraint handling and reference signals ---
def project(U, constraint):
    """Euclidean projection onto the ball or box; keeps the InputSignal type when given one."""
    if isinstance(U, InputSignal):
        return InputSignal.from_stacked(constraint.project(U.stacked), U.input_dim)
    return constraint.project(U)


def reference_signal(kind, constraint, model, horizon, theta_mean=None, rng=None):
    """
    Stacked signal of one of the standard shapes: zero, constant of norm rho
    (ball) or mid-range (box), harmonic at the prior-mean natural frequency,
    or uniformly random inside the constraint set.
    """
    dim = horizon * model.input_dim
    ball = isinstance(constraint, BallConstraint)
    if kind == "zero":
        return constraint.project(np.zeros(dim))
    if kind == "constant":
        if ball:
            return constraint.center + constraint.radius * np.ones(dim) / np.sqrt(dim)
        return 0.5 * (constraint.lower + constraint.upper)
    if kind == "harmonic":
        if model.natural_frequency is None or model.time_step is None or theta_mean is None:
            raise ConfigurationError(f"model '{model.name}' publishes no natural frequency for a harmonic signal")
        omega = model.natural_frequency(theta_mean)
        wave = np.repeat(np.cos(omega * model.time_step * np.arange(horizon)), model.input_dim)
        if ball:
            return constraint.center + constraint.radius * wave / np.linalg.norm(wave)
        return 0.5 * (constraint.lower + constraint.upper) + 0.5 * (constraint.upper - constraint.lower) * wave
    if kind == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        if ball:
            direction = rng.standard_normal(dim)
            direction /= np.linalg.norm(direction)
            return constraint.center + constraint.radius * rng.random() ** (1.0 / dim) * direction
        return constraint.lower + (constraint.upper - constraint.lower) * rng.random(dim)
    raise ConfigurationError(f"unknown signal kind '{kind}'")


def dominant_frequency(U, dt):
    """Angular frequency of the largest FFT bin of the mean-removed scalar signal."""
    values = np.asarray(getattr(U, "stacked", U), dtype=float)
    spectrum = np.abs(np.fft.rfft(values - values.mean()))
    freqs = np.fft.rfftfreq(values.size, d=dt)
    return float(2 * np.pi * freqs[int(np.argmax(spectrum[1:])) + 1])


# --- Objectives ---
def make_objective(problem, objective, adapter=None, threads=1):
    """Batched objective: (B, N*n_u) array -> (B,) values."""
    if objective == "kt_bound":
        return lambda batch: kt_values(problem, batch, threads)
    if objective == "two_alt":
        if problem.dprior.size != 2:
            raise ConfigurationError(f"objective 'two_alt' needs 2 prior nodes, got {problem.dprior.size}")
        return lambda batch: two_alt_values(problem, batch, threads)
    if objective == "avg_d_optimal":
        if adapter is None:
            raise ConfigurationError("objective 'avg_d_optimal' needs an LTI SISO adapter")
        return lambda batch: batch_avg_d_optimal(adapter, problem.dprior, batch)
    raise ConfigurationError(f"unknown objective '{objective}'")


def _evaluate(objective, batch):
    batch = np.atleast_2d(batch)
    parts = [np.asarray(objective(batch[i:i + EVALUATION_CHUNK]), dtype=float).reshape(-1)
             for i in range(0, batch.shape[0], EVALUATION_CHUNK)]
    return np.concatenate(parts)


def _gradient(objective, U, fd_step):
    h = fd_step * max(1.0, float(np.max(np.abs(U))))
    offsets = h * np.eye(U.size)
    values = _evaluate(objective, np.concatenate([U + offsets, U - offsets]))
    grad = (values[:U.size] - values[U.size:]) / (2.0 * h)
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NumericalError(f"non-finite gradient component at index {int(bad[0])}")
    return grad


# --- Ascent ---
def _ascend(objective, constraint, U0, options, label):
    U = constraint.project(np.asarray(U0, dtype=float))
    value = float(_evaluate(objective, U)[0])
    if not np.isfinite(value):
        raise NumericalError(f"objective is not finite at the initial point of start {label}")
    trace = [TraceEntry(0, value, float("nan"), 0.0)]
    step = None

    for iteration in range(1, options.max_iterations + 1):
        grad = _gradient(objective, U, options.fd_step)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm == 0.0:
            break
        if step is None:
            step = 0.1 * constraint.scale / grad_norm

        accepted = None
        for first in range(0, options.max_halvings, HALVINGS_PER_ROUND):
            steps = step * 0.5 ** np.arange(first, min(first + HALVINGS_PER_ROUND, options.max_halvings))
            candidates = constraint.project(U + steps[:, None] * grad)
            values = _evaluate(objective, candidates)
            improved = np.flatnonzero(np.isfinite(values) & (values > value))
            if improved.size:
                best = int(improved[0])
                accepted = (candidates[best], float(values[best]), float(steps[best]))
                break
        if accepted is None:
            break

        gain = accepted[1] - value
        U, value, used = accepted
        trace.append(TraceEntry(iteration, value, grad_norm, used))
        step = used * 1.3
        if gain <= options.tolerance * max(1.0, abs(value)):
            break

    logger.debug("start %s finished at objective %.10g after %d steps", label, value, len(trace) - 1)
    return U, value, trace


def _start_points(problem, options, prior_mean):
    model = problem.model
    points = []
    for index in range(options.starts):
        strategy = options.init_strategies[index % len(options.init_strategies)]
        rng = np.random.default_rng(np.random.SeedSequence([options.seed, index]))
        if strategy == "harmonic" and (model.natural_frequency is None or model.time_step is None):
            strategy = "random"
        points.append((strategy, reference_signal(strategy, problem.constraint, model, problem.horizon,
                                                  prior_mean, rng)))
    return points


def optimize_signal(problem, options, adapter=None, threads=1):
    """
    Maximize the chosen design criterion over the constraint set.

    Each start runs projected-gradient ascent with backtracking halving and
    step growth by 1.3 after a success; the best start wins with ties going
    to the lower start index.
    """
    if problem.constraint is None:
        raise ConfigurationError("signal optimization needs a constraint set")
    began = time.perf_counter()
    objective = make_objective(problem, options.objective, adapter, threads)
    prior_mean = np.sum(problem.dprior.weights[:, None] * problem.dprior.nodes, axis=0)
    starts = _start_points(problem, options, prior_mean)

    def run(item):
        index, (strategy, U0) = item
        return _ascend(objective, problem.constraint, U0, options, f"{index}:{strategy}")

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, enumerate(starts)))
    else:
        outcomes = [run(item) for item in enumerate(starts)]

    best = 0
    for index, (_, value, _) in enumerate(outcomes):
        if value > outcomes[best][1]:
            best = index
    U, value, trace = outcomes[best]
    logger.info("best of %d starts: #%d (%s) with objective %.10g", len(starts), best, starts[best][0], value)
    return DesignResult(
        u_star=InputSignal.from_stacked(U, problem.model.input_dim), objective=value, trace=trace,
        active_constraint=problem.constraint.activity(U), wall_time=time.perf_counter() - began,
        start_index=best, strategy=starts[best][0], start_objectives=[o[1] for o in outcomes],
    )


# --- Linear two-alternative case ---
def linear_response(model, theta, horizon):
    """(F, S) with F(theta, U) = F U for a model whose output mean is linear in U and S independent of U."""
    dim = horizon * model.input_dim
    base = dense_moments(model, theta, np.zeros((horizon, model.input_dim)))
    columns = [dense_moments(model, theta, unit.reshape(horizon, model.input_dim)).mean - base.mean
               for unit in np.eye(dim)]
    return np.column_stack(columns), base.cov


def eigen_solution_linear_two_alt(F1, F2, S1, S2, radius):
    """rho times the top unit eigenvector of Q = (F1-F2)^T (S1+S2)^-1 (F1-F2); first nonzero entry positive."""
    D = np.asarray(F1, dtype=float) - np.asarray(F2, dtype=float)
    Q = D.T @ np.linalg.solve(np.asarray(S1, dtype=float) + np.asarray(S2, dtype=float), D)
    Q = 0.5 * (Q + Q.T)
    try:
        eigvals, eigvecs = linalg.eigh(Q)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-decomposition failed: {exc}") from None
    top = eigvals[-1]
    if eigvals.size > 1 and eigvals[-2] >= top - 1e-10 * max(1.0, abs(top)):
        message = "largest eigenvalue is repeated; returning an arbitrary vector of its eigenspace"
        logger.warning(message)
        warnings.warn(message, RuntimeWarning)
    vector = eigvecs[:, -1]
    lead = np.flatnonzero(np.abs(vector) > 1e-12 * np.max(np.abs(vector)))[0]
    if vector[lead] < 0:
        vector = -vector
    return InputSignal.from_stacked(radius * vector)
