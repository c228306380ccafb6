"""Closed-form Gaussian homotopy posterior for the diagonal sequence model."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .seqmodel import ObservationSet, PriorSpec
from .spectral import SpectralBasis


@dataclass(frozen=True)
class GaussianPosterior:
    mean: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)
    tau: float


def posterior_moments(
    basis: SpectralBasis, prior: PriorSpec, obs: ObservationSet, tau: float
) -> GaussianPosterior:
    """Moments of ``pi_tau ~ exp(-tau/2 |K v - Y|^2_R) N(0, C0)`` with ``R = I/n``.

    Everything is diagonal in the eigenbasis:

        mean_i     = tau c_i k_i Y_i / (tau c_i k_i^2 + 1/n)
        variance_i = c_i - tau c_i^2 k_i^2 / (tau c_i k_i^2 + 1/n)

    where ``c_i`` are the scaled prior variances.
    """
    if tau < 0 or not np.isfinite(tau):
        raise InvalidArgumentError(f"tau must be finite and >= 0, got {tau}")
    d = obs.dim
    if prior.dim < d:
        raise InvalidArgumentError("prior dimension smaller than data dimension")
    c = prior.variances[:d]
    k = basis.kappa[:d]
    r = obs.noise_variance
    denom = tau * c * k**2 + r
    mean = tau * c * k * obs.ytilde / denom
    # c * r / denom is the cancellation-free form of c - tau c^2 k^2 / denom
    variance = c * r / denom
    return GaussianPosterior(mean=mean, variance=variance, tau=float(tau))


def map_estimate(posterior: GaussianPosterior) -> np.ndarray:
    """Mode of a Gaussian posterior, i.e. its mean."""
    return posterior.mean.copy()


def theoretical_rate(beta: float, p: float, alpha: float) -> float:
    """Contraction exponent ``beta / (beta + p + alpha + 1)`` so that ``eps_n = n**-rate``."""
    if beta <= 0 or p <= 0 or alpha < 0:
        raise InvalidArgumentError("need beta > 0, p > 0 and alpha >= 0")
    if beta > 1 + 2 * alpha + 2 * p:
        warnings.warn(
            f"beta={beta} exceeds 1 + 2 alpha + 2 p = {1 + 2 * alpha + 2 * p}; "
            "the rate is not guaranteed in this regime",
            RuntimeWarning,
            stacklevel=2,
        )
    return beta / (beta + p + alpha + 1.0)
