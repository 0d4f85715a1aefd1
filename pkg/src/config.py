"""
Experiment configuration: TOML documents validated into pydantic models,
environment defaults from .env, and builders turning a validated config into
model, prior, constraint and design problem objects.
"""
import hashlib
import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from classical_baseline import LtiSisoAdapter, Provider
from design_optimizer import DesignOptions
from errors import ConfigurationError
from estimation import MapSearchConfig
from info_bounds import MixtureDesignProblem
from model_core import (BallConstraint, BoxConstraint, DiscretePrior, GaussianPrior, UniformBoxPrior,
                        example_prior, make_example)
from quadrature import discretize_prior

logger = logging.getLogger(__name__)

ENV_PATH = Path(__file__).parent.parent / ".env"

Number = Union[float, List[float]]


def load_environment():
    """Read .env once and return the defaults the CLI falls back to."""
    load_dotenv(dotenv_path=ENV_PATH)
    return {
        "threads": int(os.getenv("INFODESIGN_THREADS", "1")),
        "output_dir": os.getenv("INFODESIGN_OUT_DIR", "results"),
        "log_level": os.getenv("INFODESIGN_LOG_LEVEL", "INFO"),
    }


class _Strict(BaseModel):
    model_config = {"extra": "forbid"}


class ModelSpec(_Strict):
    name: str = Field(..., description="Built-in example name", examples=["example1"])
    overrides: Dict[str, Union[float, List[float], str]] = Field(
        default_factory=dict, description="Numeric constants and prior hyperparameters to override")


class PriorSpec(_Strict):
    kind: Literal["default", "gaussian", "uniform", "discrete"] = Field(
        "default", description="'default' uses the example's own prior")
    mean: Optional[Number] = None
    cov: Optional[Union[float, List[float], List[List[float]]]] = Field(
        None, description="Scalar variance, diagonal, or full covariance")
    lower: Optional[Number] = None
    upper: Optional[Number] = None
    nodes: Optional[List[Number]] = None
    weights: Optional[List[float]] = None


class ConstraintSpec(_Strict):
    kind: Literal["ball", "box"] = "ball"
    radius: float = Field(1.0, description="Ball radius rho")
    center: Number = Field(0.0, description="Ball center, scalar broadcast to every component")
    lower: Number = Field(0.0, description="Box lower bound")
    upper: Number = Field(1.0, description="Box upper bound")


class BaselineSpec(_Strict):
    provider: Provider = Field("finite_difference", description="Sensitivity provider for the D-optimal criterion")
    theta_G: List[int] = Field(default_factory=lambda: [0], description="Parameters entering G(theta, z)")


class SignalSpec(_Strict):
    name: str
    kind: Literal["file", "zero", "constant", "harmonic", "random", "design"]
    path: Optional[str] = Field(None, description="CSV signal file for kind = 'file'")
    objective: Optional[Literal["kt_bound", "two_alt", "avg_d_optimal"]] = Field(
        None, description="Objective for kind = 'design'; defaults to design.objective")


class MonteCarloSpec(_Strict):
    trials: int = Field(300, ge=1)
    signals: List[SignalSpec] = Field(default_factory=lambda: [SignalSpec(name="zero", kind="zero")])


class DemoSpec(_Strict):
    alphas: List[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0])
    grid: int = Field(4001, ge=17)


class ExperimentConfig(_Strict):
    model: ModelSpec
    prior: PriorSpec = Field(default_factory=PriorSpec)
    horizon: int = Field(100, ge=1, description="Number of control steps N")
    constraint: ConstraintSpec = Field(default_factory=ConstraintSpec)
    scheme: str = Field("sigma_2n", description="Prior discretization: sigma_2n, gl_2 or gh:<p>")
    fast_path: Optional[bool] = Field(None, description="Omit log-det terms; defaults to True for LTI models")
    design: DesignOptions = Field(default_factory=DesignOptions)
    estimation: MapSearchConfig = Field(default_factory=MapSearchConfig)
    montecarlo: MonteCarloSpec = Field(default_factory=MonteCarloSpec)
    baseline: BaselineSpec = Field(default_factory=BaselineSpec)
    demo: DemoSpec = Field(default_factory=DemoSpec)
    output_dir: Optional[str] = None
    seed: Optional[int] = None
    threads: Optional[int] = Field(None, ge=1)


def load_config(path):
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid TOML: {exc}") from None
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid config {path}: {exc}") from None


def config_digest(config):
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --- Builders ---
def build_model(config):
    return make_example(config.model.name, config.model.overrides)


def _vector(value, size, label):
    array = np.atleast_1d(np.asarray(value, dtype=float)).reshape(-1)
    if array.size == 1:
        return np.full(size, array[0])
    if array.size != size:
        raise ConfigurationError(f"{label} has {array.size} entries, expected {size}")
    return array


def build_prior(config, model):
    spec = config.prior
    n = model.param_dim
    if spec.kind == "default":
        return example_prior(config.model.name, config.model.overrides)
    if spec.kind == "gaussian":
        if spec.mean is None or spec.cov is None:
            raise ConfigurationError("gaussian prior needs 'mean' and 'cov'")
        cov = np.asarray(spec.cov, dtype=float)
        cov = np.diag(_vector(cov, n, "prior.cov")) if cov.ndim < 2 else cov
        return GaussianPrior(_vector(spec.mean, n, "prior.mean"), cov)
    if spec.kind == "uniform":
        if spec.lower is None or spec.upper is None:
            raise ConfigurationError("uniform prior needs 'lower' and 'upper'")
        return UniformBoxPrior(_vector(spec.lower, n, "prior.lower"), _vector(spec.upper, n, "prior.upper"))
    if not spec.nodes or spec.weights is None:
        raise ConfigurationError("discrete prior needs 'nodes' and 'weights'")
    nodes = np.asarray(spec.nodes, dtype=float).reshape(len(spec.nodes), -1)
    if nodes.shape[1] != n:
        raise ConfigurationError(f"discrete prior nodes have {nodes.shape[1]} components, model expects {n}")
    return DiscretePrior(nodes, np.asarray(spec.weights, dtype=float))


def build_constraint(config, model):
    spec = config.constraint
    dim = config.horizon * model.input_dim
    if spec.kind == "ball":
        return BallConstraint(_vector(spec.center, dim, "constraint.center"), spec.radius)
    return BoxConstraint(_vector(spec.lower, dim, "constraint.lower"), _vector(spec.upper, dim, "constraint.upper"))


def build_problem(config, model=None, prior=None):
    model = model or build_model(config)
    prior = prior or build_prior(config, model)
    fast_path = config.fast_path
    if fast_path is None:
        fast_path = not model.input_dependent_covariance
    elif fast_path and model.input_dependent_covariance:
        raise ConfigurationError(f"fast_path is invalid for '{model.name}': its covariances depend on the input")
    return MixtureDesignProblem(
        model=model, dprior=discretize_prior(prior, config.scheme), horizon=config.horizon,
        constraint=build_constraint(config, model), fast_path=fast_path, prior=prior,
    )


def build_adapter(config, model):
    return LtiSisoAdapter(model, tuple(config.baseline.theta_G), config.baseline.provider)


def validate(config):
    """Referential checks: model exists, scheme fits the prior, dimensions agree."""
    model = build_model(config)
    prior = build_prior(config, model)
    build_problem(config, model, prior)
    return model, prior
