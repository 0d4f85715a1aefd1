"""
Quadrature rules turning a continuous prior into a weighted node set, so the
evidence p(Y|U) becomes a finite Gaussian mixture.

Scheme tokens used by the configuration: "sigma_2n", "gl_2", "gh:<p>".
"""
import logging

import numpy as np
from scipy import linalg

from errors import ConfigurationError
from model_core import DiscretePrior, GaussianPrior, UniformBoxPrior, symmetric_sqrt

logger = logging.getLogger(__name__)

MAX_HERMITE_ORDER = 64


def gh_sigma_nodes(mean, cov):
    """2*n_theta nodes mean -/+ sqrt(n_theta) * S^(1/2) e_i with equal weights."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = mean.size
    root = symmetric_sqrt(cov) * np.sqrt(n)
    nodes = np.empty((2 * n, n))
    nodes[0::2] = mean - root.T
    nodes[1::2] = mean + root.T
    return DiscretePrior(nodes, np.full(2 * n, 1.0 / (2 * n)), provenance="gauss_hermite_2n")


def gl_two_point(a, b):
    """Two-point Gauss-Legendre rule for the uniform law on [a, b]."""
    if not a < b:
        raise ConfigurationError(f"Gauss-Legendre interval needs a < b, got ({a}, {b})")
    half = (b - a) / np.sqrt(3.0)
    nodes = np.array([(a + b - half) / 2.0, (a + b + half) / 2.0])
    return DiscretePrior(nodes[:, None], np.array([0.5, 0.5]), provenance="gauss_legendre_2")


def gh_scalar(order, mean, std):
    """
    Gauss-Hermite rule of the given order for N(mean, std^2).

    Nodes and weights come from the eigen-decomposition of the Jacobi matrix
    of the probabilists' Hermite recurrence (Golub-Welsch).
    """
    order = int(order)
    if order < 1:
        raise ConfigurationError(f"Gauss-Hermite order must be >= 1, got {order}")
    if order > MAX_HERMITE_ORDER:
        raise ConfigurationError(f"Gauss-Hermite order {order} exceeds the supported maximum {MAX_HERMITE_ORDER}")
    if not std > 0:
        raise ConfigurationError(f"Gauss-Hermite standard deviation must be positive, got {std}")

    off_diagonal = np.sqrt(np.arange(1, order))
    if order == 1:
        roots, vectors = np.zeros(1), np.ones((1, 1))
    else:
        roots, vectors = linalg.eigh_tridiagonal(np.zeros(order), off_diagonal)
    weights = vectors[0] ** 2
    weights = weights / weights.sum()
    nodes = mean + std * roots
    return DiscretePrior(nodes[:, None], weights, provenance="gauss_hermite_p")


def discretize_prior(prior, scheme):
    """Route a prior to the quadrature rule named by scheme; discrete priors pass through."""
    if isinstance(prior, DiscretePrior):
        return prior
    scheme = str(scheme).strip().lower()

    if isinstance(prior, GaussianPrior):
        if scheme == "sigma_2n":
            return gh_sigma_nodes(prior.mean, prior.cov)
        if scheme.startswith("gh:") or scheme.startswith("gh("):
            if prior.n_theta != 1:
                raise ConfigurationError("scheme 'gh:p' supports scalar Gaussian priors only")
            try:
                order = int(scheme[3:].rstrip(")"))
            except ValueError:
                raise ConfigurationError(f"cannot read the order from scheme '{scheme}'") from None
            return gh_scalar(order, prior.mean[0], np.sqrt(prior.cov[0, 0]))

    if isinstance(prior, UniformBoxPrior) and scheme == "gl_2":
        if prior.n_theta != 1:
            raise ConfigurationError("scheme 'gl_2' supports scalar uniform priors only")
        return gl_two_point(prior.lower[0], prior.upper[0])

    raise ConfigurationError(f"scheme '{scheme}' is not compatible with a {type(prior).__name__}")
