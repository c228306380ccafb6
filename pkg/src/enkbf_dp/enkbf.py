"""Deterministic discrete-time ensemble Kalman-Bucy filter with discrepancy stopping.

The filter targets the homotopy family ``pi_tau`` with noise covariance
``R = I / n``; after ``k`` steps of size ``dt`` the ensemble approximates
``pi_{k dt}``.  Each particle moves by

    v <- v - 1/2 K (K v + m_K - 2 Y),    K = dt Cxy (dt Cyy + R)^-1,

with the empirical cross covariance ``Cxy`` and forward covariance ``Cyy``
recomputed from the pre-update ensemble at every step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solve

from ._backend import kernels
from .errors import DivergenceError, InvalidArgumentError
from .seqmodel import ObservationSet, PriorSpec, apply_forward, fmt, rng_stream
from .spectral import SpectralBasis


@dataclass(frozen=True)
class Ensemble:
    particles: np.ndarray = field(repr=False)
    time_index: int = 0
    dt: float = 0.01

    def __post_init__(self):
        if self.particles.ndim != 2 or self.particles.shape[0] < 2:
            raise InvalidArgumentError("an ensemble needs a (J, D) array with J >= 2")
        if self.dt <= 0:
            raise InvalidArgumentError("dt must be positive")

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    @property
    def tau(self) -> float:
        return self.time_index * self.dt

    @property
    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        return self.particles.var(axis=0, ddof=1)


@dataclass(frozen=True)
class EmpiricalMoments:
    mean: np.ndarray
    forward_mean: np.ndarray
    cov: np.ndarray
    cross_cov: np.ndarray
    forward_cov: np.ndarray


@dataclass(frozen=True)
class StopReport:
    k_dp: int
    tau_dp: float
    residual_path: np.ndarray = field(repr=False)
    hit_cap: bool
    threshold: float
    dt: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "tau", "residual"])
            for k, r in enumerate(self.residual_path):
                w.writerow([k, fmt(k * self.dt), fmt(r)])


def init_ensemble(
    J: int, prior: PriorSpec, seed: int, *, replicate: int = 0, label: int = 0, dt: float = 0.01
) -> Ensemble:
    """Draw ``J`` particles from ``N(0, prior covariance)``.

    ``label`` is an extra stream key (the studies pass the sample size) so
    that different study cells never share an initial ensemble.
    """
    if J < 2:
        raise InvalidArgumentError(f"need at least 2 particles, got {J}")
    rng = rng_stream(seed, "ensemble", replicate, J, prior.dim, label)
    z = rng.standard_normal((J, prior.dim))
    return Ensemble(particles=z * np.sqrt(prior.variances), time_index=0, dt=dt)


def empirical_moments(basis: SpectralBasis, ens: Ensemble, dim: int | None = None) -> EmpiricalMoments:
    """Means and ``(J-1)``-normalised covariances of the particles and their images.

    ``dim`` is the number of observed coordinates (defaults to all of them).
    """
    d = ens.dim if dim is None else dim
    v = ens.particles
    kv = apply_forward(basis, v[:, :d])
    m = v.mean(axis=0)
    mk = kv.mean(axis=0)
    dv = v - m
    dk = kv - mk
    J = ens.size
    return EmpiricalMoments(
        mean=m,
        forward_mean=mk,
        cov=dv.T @ dv / (J - 1),
        cross_cov=dv.T @ dk / (J - 1),
        forward_cov=dk.T @ dk / (J - 1),
    )


def kalman_gain(moments: EmpiricalMoments, dt: float, noise_var: float = 1.0) -> np.ndarray:
    """``dt * Cxy @ inv(dt * Cyy + noise_var * I)``, computed by a linear solve."""
    if dt < 0:
        raise InvalidArgumentError("dt must be non-negative")
    d = moments.forward_cov.shape[0]
    system = dt * moments.forward_cov + noise_var * np.eye(d)
    try:
        return solve(system, dt * moments.cross_cov.T, assume_a="pos").T
    except LinAlgError as exc:
        raise DivergenceError(f"gain system could not be solved: {exc}") from exc


def _check_dims(basis: SpectralBasis, ens: Ensemble, obs: ObservationSet) -> None:
    if ens.dim < obs.dim:
        raise InvalidArgumentError(f"ensemble has {ens.dim} coordinates, data have {obs.dim}")
    if obs.dim > basis.dim:
        raise InvalidArgumentError("data dimension exceeds basis dimension")


def _args(basis, obs):
    kappa = np.ascontiguousarray(basis.kappa[: obs.dim], dtype=float)
    y = np.ascontiguousarray(obs.ytilde, dtype=float)
    return kappa, y


def enkbf_step(basis: SpectralBasis, ens: Ensemble, obs: ObservationSet) -> Ensemble:
    _check_dims(basis, ens, obs)
    p = np.array(ens.particles, dtype=float, order="C", copy=True)
    kappa, y = _args(basis, obs)
    kernels.enkbf_step(p, kappa, y, obs.noise_variance, ens.dt)
    if not np.all(np.isfinite(p)):
        raise DivergenceError(f"non-finite ensemble after step {ens.time_index + 1}; reduce dt")
    return Ensemble(particles=p, time_index=ens.time_index + 1, dt=ens.dt)


def run_until_discrepancy(
    basis: SpectralBasis,
    ens: Ensemble,
    obs: ObservationSet,
    kappa: float,
    k0: int = 1,
    k_max: int = 20_000,
) -> tuple[Ensemble, StopReport]:
    """Step until the residual at the ensemble mean first drops to ``kappa`` (k >= k0).

    Steps are counted from ``ens``; ``hit_cap`` is set when ``k_max`` steps
    pass without the residual reaching the threshold.
    """
    if k0 < 0 or k_max <= k0:
        raise InvalidArgumentError("need 0 <= k0 < k_max")
    if kappa < 0:
        raise InvalidArgumentError("threshold must be non-negative")
    _check_dims(basis, ens, obs)
    p = np.array(ens.particles, dtype=float, order="C", copy=True)
    kv, y = _args(basis, obs)
    path = np.empty(k_max + 1)
    k = int(kernels.advance(p, kv, y, obs.noise_variance, ens.dt, k0, k_max, float(kappa), path))
    path = path[: k + 1].copy()
    hit_cap = not (k >= k0 and path[k] <= kappa)
    out = Ensemble(particles=p, time_index=ens.time_index + k, dt=ens.dt)
    report = StopReport(
        k_dp=k, tau_dp=k * ens.dt, residual_path=path, hit_cap=hit_cap, threshold=float(kappa), dt=ens.dt
    )
    return out, report


def run_steps(basis: SpectralBasis, ens: Ensemble, obs: ObservationSet, n_steps: int) -> tuple[Ensemble, np.ndarray]:
    """Advance exactly ``n_steps`` without stopping; returns the ensemble and residual path."""
    if n_steps < 0:
        raise InvalidArgumentError("n_steps must be non-negative")
    _check_dims(basis, ens, obs)
    p = np.array(ens.particles, dtype=float, order="C", copy=True)
    kv, y = _args(basis, obs)
    path = np.empty(n_steps + 1)
    if n_steps == 0:
        path[0] = kernels.mean_residual(p, kv, y)
    else:
        kernels.advance(p, kv, y, obs.noise_variance, ens.dt, n_steps, n_steps, -np.inf, path)
    return Ensemble(particles=p, time_index=ens.time_index + n_steps, dt=ens.dt), path


def ensemble_quantiles(samples, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate central ``level`` band across particles (linear order-statistic interpolation)."""
    x = samples.particles if isinstance(samples, Ensemble) else np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise InvalidArgumentError("quantiles need at least 2 particles")
    if not 0 < level < 1:
        raise InvalidArgumentError("level must lie in (0, 1)")
    lo, hi = np.quantile(x, [(1 - level) / 2, (1 + level) / 2], axis=0, method="linear")
    return lo, hi
