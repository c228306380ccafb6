"""Dirichlet-Laplacian eigenbasis on (0, 2*pi) and coefficient <-> grid transforms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedProjectionError, InvalidArgumentError

DOMAIN_LENGTH = 2.0 * np.pi


@dataclass(frozen=True)
class SpectralBasis:
    """Analytic eigenpairs of -d^2/dx^2 on (0, 2*pi) with homogeneous Dirichlet data.

    ``phi_i(x) = pi**-0.5 * sin(i x / 2)`` has unit L2 norm and eigenvalue
    ``(i/2)**2``.  The forward operator K = (-Laplacian)^-1 is diagonal in this
    basis with singular values ``kappa_i = 1 / lambda_i``.
    """

    dim: int
    eigenvalues: np.ndarray = field(repr=False)
    forward_singular_values: np.ndarray = field(repr=False)

    @property
    def kappa(self) -> np.ndarray:
        return self.forward_singular_values

    @property
    def indices(self) -> np.ndarray:
        return np.arange(1, self.dim + 1)

    def evaluate(self, x: np.ndarray, dim: int | None = None) -> np.ndarray:
        """Matrix ``Phi[j, i] = phi_{i+1}(x_j)`` for the first ``dim`` modes."""
        dim = self.dim if dim is None else dim
        x = np.asarray(x, dtype=float)
        i = np.arange(1, dim + 1)
        return np.sin(0.5 * np.outer(x, i)) / np.sqrt(np.pi)


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid on (0, 2*pi); endpoints are excluded."""

    points: np.ndarray = field(repr=False)
    spacing: float

    @property
    def size(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.grid.points.shape:
            raise InvalidArgumentError(
                f"values length {self.values.size} does not match grid size {self.grid.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("grid function values must be finite")

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.spacing * np.sum(self.values**2)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "value"])
            for x, v in zip(self.grid.points, self.values):
                w.writerow([repr(float(x)), repr(float(v))])


def eigenpairs(dim: int) -> SpectralBasis:
    if dim < 1:
        raise InvalidArgumentError(f"basis dimension must be >= 1, got {dim}")
    i = np.arange(1, dim + 1, dtype=float)
    lam = (0.5 * i) ** 2
    return SpectralBasis(dim=int(dim), eigenvalues=lam, forward_singular_values=1.0 / lam)


def uniform_grid(m: int) -> Grid:
    """``m`` interior nodes ``x_j = j h`` with ``h = 2 pi / (m + 1)``."""
    if m < 2:
        raise InvalidArgumentError(f"grid needs at least 2 points, got {m}")
    h = DOMAIN_LENGTH / (m + 1)
    return Grid(points=h * np.arange(1, m + 1), spacing=h)


def synthesize(basis: SpectralBasis, v, grid: Grid) -> GridFunction:
    """Evaluate ``sum_i v_i phi_i`` at the grid nodes."""
    c = np.asarray(v, dtype=float)
    if c.ndim != 1 or c.size > basis.dim:
        raise InvalidArgumentError(
            f"coefficient vector of length {c.size} does not fit basis of dim {basis.dim}"
        )
    return GridFunction(grid, basis.evaluate(grid.points, c.size) @ c)


def synthesize_many(basis: SpectralBasis, coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Row-wise synthesis of a ``(J, D)`` coefficient array; returns ``(J, m)``."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if coeffs.shape[1] > basis.dim:
        raise InvalidArgumentError("coefficient arrays exceed basis dimension")
    return coeffs @ basis.evaluate(grid.points, coeffs.shape[1]).T


def analyze(basis: SpectralBasis, u: GridFunction, dim: int) -> np.ndarray:
    """Trapezoid-rule coefficients ``c_i = int u phi_i dx`` for ``i <= dim``.

    The Dirichlet modes vanish at both endpoints, so the trapezoid rule reduces
    to ``h * sum_j`` over the interior nodes.
    """
    if dim < 1 or dim > basis.dim:
        raise InvalidArgumentError(f"dim must lie in [1, {basis.dim}], got {dim}")
    m = u.grid.size
    if dim > m / 4:
        raise IllConditionedProjectionError(
            f"projection onto {dim} modes from {m} grid points would alias (need dim <= m/4)"
        )
    phi = basis.evaluate(u.grid.points, dim)
    return u.grid.spacing * (phi.T @ u.values)


def gram_matrix(basis: SpectralBasis, grid: Grid, dim: int) -> np.ndarray:
    phi = basis.evaluate(grid.points, dim)
    return grid.spacing * (phi.T @ phi)
