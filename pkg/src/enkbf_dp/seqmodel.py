"""Linearised sequence-space observation model.

After subtracting the harmonic lift of the boundary data and projecting onto
the first D eigenfunctions, the data are ``Y_i = kappa_i v_i + n**-0.5 xi_i``.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidArgumentError
from .spectral import SpectralBasis


def rng_stream(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, keys...)``.

    Streams do not depend on call order, so replicates can run in any order or
    in parallel and still draw the same numbers.
    """
    tag = zlib.crc32(purpose.encode("utf-8"))
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, tag, *(int(k) for k in keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class PriorSpec:
    """Centred Gaussian prior with diagonal covariance ``scale * i**-exponent``.

    ``exponent`` defaults to ``1 + 2 alpha``; pass ``0.5 + alpha`` for the
    slower-decaying variant.
    """

    alpha: float
    dim: int
    scale: float = 1.0
    exponent: float | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise InvalidArgumentError("alpha must be positive")
        if self.scale < 0:
            raise InvalidArgumentError("prior scale must be non-negative")
        if self.dim < 1:
            raise InvalidArgumentError("prior dimension must be >= 1")

    @property
    def decay(self) -> float:
        return 1.0 + 2.0 * self.alpha if self.exponent is None else self.exponent

    @property
    def eigenvalues(self) -> np.ndarray:
        """Unscaled eigenvalues ``i**-decay``."""
        return np.arange(1, self.dim + 1, dtype=float) ** (-self.decay)

    @property
    def variances(self) -> np.ndarray:
        return self.scale * self.eigenvalues

    def with_scale(self, scale: float) -> "PriorSpec":
        return PriorSpec(self.alpha, self.dim, scale, self.exponent)


@dataclass(frozen=True)
class ObservationSet:
    ytilde: np.ndarray = field(repr=False)
    kappa: np.ndarray = field(repr=False)
    n: float
    seed: int
    truth: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.ytilde.size

    @property
    def noise_variance(self) -> float:
        return 1.0 / self.n

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "kappa_i", "ytilde_i", "truth_i"])
            for i in range(self.dim):
                truth = self.truth[i] if i < self.truth.size else 0.0
                w.writerow([i + 1, fmt(self.kappa[i]), fmt(self.ytilde[i]), fmt(truth)])

    @classmethod
    def from_csv(cls, path, n: float, seed: int = 0) -> "ObservationSet":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        arr = lambda key: np.array([float(r[key]) for r in rows])  # noqa: E731
        return cls(ytilde=arr("ytilde_i"), kappa=arr("kappa_i"), n=n, seed=seed, truth=arr("truth_i"))


def fmt(x: float) -> str:
    """Locale-independent round-trippable float formatting for CSV output."""
    return repr(float(x))


@dataclass
class ModelConfig:
    alpha: float = 2.0
    p: float = 2.0
    n: float = 10_000
    D_override: int | None = None
    dim_constant: float = 1.0
    kappa_constant: float = 1.0
    dt: float = 0.01
    J: int = 512
    seed: int = 0
    k_max: int = 20_000
    k0: int = 1
    quantile_level: float = 0.95
    truth_decay: float = 2.5
    prior_exponent: float | None = None

    def validate(self) -> "ModelConfig":
        checks = [
            (self.alpha > 0, "alpha must be > 0"),
            (self.p > 0, "p must be > 0"),
            (self.n >= 1, "n must be >= 1"),
            (self.D_override is None or self.D_override >= 1, "D_override must be >= 1"),
            (self.dim_constant > 0, "dim_constant must be > 0"),
            (0 < self.kappa_constant <= 1, "kappa_constant must lie in (0, 1]"),
            (self.dt > 0, "dt must be > 0"),
            (self.J >= 2, "J must be >= 2"),
            (self.k_max >= 1, "k_max must be >= 1"),
            (0 <= self.k0 < self.k_max, "need 0 <= k0 < k_max"),
            (0 < self.quantile_level < 1, "quantile_level must lie in (0, 1)"),
            (self.truth_decay > 0.5, "truth_decay must exceed 1/2"),
            (self.prior_exponent is None or self.prior_exponent > 0, "prior_exponent must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def dimension(self, n: float | None = None) -> int:
        if self.D_override is not None:
            return int(self.D_override)
        return effective_dimension(self.n if n is None else n, self.p, self.dim_constant)

    def prior(self, dim: int) -> PriorSpec:
        return PriorSpec(self.alpha, dim, 1.0, self.prior_exponent)

    def replace(self, **changes) -> "ModelConfig":
        data = asdict(self)
        data.update(changes)
        return ModelConfig(**data)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def effective_dimension(n: float, p: float, c: float = 1.0) -> int:
    """``max(1, round(c * n**(1/(2p+1))))``."""
    if n < 1 or p <= 0 or c <= 0:
        raise InvalidArgumentError("need n >= 1, p > 0, c > 0")
    return max(1, int(round(c * float(n) ** (1.0 / (2.0 * p + 1.0)))))


def ground_truth(dim: int, decay: float = 2.5) -> np.ndarray:
    if dim < 1:
        raise InvalidArgumentError("dim must be >= 1")
    if decay <= 0.5:
        raise InvalidArgumentError("decay must exceed 1/2 for a square-summable truth")
    return np.arange(1, dim + 1, dtype=float) ** (-decay)


def apply_forward(basis: SpectralBasis, v) -> np.ndarray:
    """Diagonal action ``(K v)_i = kappa_i v_i``; works row-wise on 2-D arrays."""
    v = np.asarray(v, dtype=float)
    d = v.shape[-1]
    if d > basis.dim:
        raise InvalidArgumentError(f"vector of length {d} exceeds basis dim {basis.dim}")
    return v * basis.kappa[:d]


def generate_observations(
    basis: SpectralBasis,
    v0,
    n: float,
    dim: int,
    seed: int,
    *,
    replicate: int = 0,
    noise_free: bool = False,
) -> ObservationSet:
    v0 = np.asarray(v0, dtype=float)
    if not dim <= v0.size <= basis.dim:
        raise InvalidArgumentError(f"need dim <= len(v0) <= basis.dim, got {dim}, {v0.size}, {basis.dim}")
    if n <= 0:
        raise InvalidArgumentError("n must be positive")
    kappa = basis.kappa[:dim].copy()
    signal = kappa * v0[:dim]
    if noise_free:
        ytilde = signal
    else:
        xi = rng_stream(seed, "observations", replicate, int(n), dim).standard_normal(dim)
        ytilde = signal + xi / np.sqrt(n)
    return ObservationSet(ytilde=ytilde, kappa=kappa, n=float(n), seed=int(seed), truth=v0.copy())


def residual(basis: SpectralBasis, obs: ObservationSet, v) -> float:
    """``sum_{i <= D} (Y_i - kappa_i v_i)**2``."""
    v = np.asarray(v, dtype=float)
    if v.size < obs.dim:
        raise InvalidArgumentError(f"estimate has {v.size} coefficients, data have {obs.dim}")
    r = obs.ytilde - basis.kappa[: obs.dim] * v[: obs.dim]
    return float(r @ r)


def discrepancy_threshold(config: ModelConfig, dim: int, n: float) -> float:
    """Noise-calibrated stopping level ``C * D / n``."""
    return config.kappa_constant * dim / n


def write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
