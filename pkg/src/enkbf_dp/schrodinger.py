"""Pull-back from the linearised parameter v = -u'' to the Schroedinger potential f.

For ``-s u'' + f u = 0`` with ``u = K v + g~`` (``g~`` the harmonic lift of the
boundary data, ``K`` the inverse Dirichlet Laplacian) the potential is

    f = -v / (c (K v + g~)),    c = 1/s,

so ``c = 2`` for the half Laplacian.  ``sign_convention="paper"`` flips the
sign to ``+``; the default ``roundtrip`` is the one that reproduces the
potential that generated ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ._backend import kernels
from .errors import InvalidArgumentError, ProbeUndefinedError, WellPosednessError
from .seqmodel import rng_stream
from .spectral import DOMAIN_LENGTH, Grid, GridFunction, SpectralBasis, analyze, uniform_grid

SIGNS = {"roundtrip": -1.0, "paper": 1.0}


@dataclass(frozen=True)
class PullbackConfig:
    grid: Grid
    essinf_floor: float = 1e-8
    sign_convention: str = "roundtrip"
    half_laplacian: bool = True

    def __post_init__(self):
        if self.essinf_floor <= 0:
            raise InvalidArgumentError("essinf_floor must be positive")
        if self.sign_convention not in SIGNS:
            raise InvalidArgumentError(f"sign_convention must be one of {sorted(SIGNS)}")

    @property
    def sign(self) -> float:
        return SIGNS[self.sign_convention]

    @property
    def denominator_factor(self) -> float:
        return 2.0 if self.half_laplacian else 1.0


@dataclass(frozen=True)
class PDEInstance:
    """``-(1/2 or 1) u'' + f u = 0`` on (0, 2 pi) with ``u(0), u(2 pi) = boundary``."""

    f: Callable[[np.ndarray], np.ndarray] | GridFunction = field(repr=False)
    boundary: tuple[float, float] = (0.0, 0.0)
    half_laplacian: bool = True

    def potential(self, grid: Grid) -> np.ndarray:
        if isinstance(self.f, GridFunction):
            if self.f.grid.size != grid.size:
                raise InvalidArgumentError("potential grid does not match solver grid")
            return np.asarray(self.f.values, dtype=float)
        return np.broadcast_to(np.asarray(self.f(grid.points), dtype=float), grid.points.shape).copy()


def harmonic_lift(grid: Grid, boundary: tuple[float, float]) -> GridFunction:
    """Linear interpolant of the boundary data; the lift with zero Laplacian."""
    g0, g1 = boundary
    return GridFunction(grid, g0 + (g1 - g0) * grid.points / DOMAIN_LENGTH)


def pullback_values(
    basis: SpectralBasis, coeffs: np.ndarray, grid: Grid, cfg: PullbackConfig, gtilde=None
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the solution map row-wise to a ``(J, D)`` coefficient array.

    Returns ``(f, guarded)``: both ``(J, m)``, with ``f`` set to zero wherever
    ``|K v + g~|`` falls below ``essinf_floor`` times its sup norm.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    d = coeffs.shape[1]
    if d > basis.dim:
        raise InvalidArgumentError("coefficient array exceeds basis dimension")
    phi = basis.evaluate(grid.points, d)
    v = coeffs @ phi.T
    den = (coeffs * basis.kappa[:d]) @ phi.T
    if gtilde is not None:
        den = den + (gtilde.values if isinstance(gtilde, GridFunction) else np.asarray(gtilde))
    floor = cfg.essinf_floor * np.max(np.abs(den), axis=1, keepdims=True)
    guarded = np.abs(den) <= floor
    safe = np.where(guarded, 1.0, den)
    f = np.where(guarded, 0.0, cfg.sign * v / (cfg.denominator_factor * safe))
    return f, guarded


def solution_map_e(basis: SpectralBasis, v, gtilde, grid: Grid, cfg: PullbackConfig) -> GridFunction:
    f, _ = pullback_values(basis, np.asarray(v, dtype=float)[None, :], grid, cfg, gtilde)
    return GridFunction(grid, f[0])


def fd_solve_schrodinger(inst: PDEInstance, m: int) -> GridFunction:
    """Second-order central differences on ``m`` interior nodes, solved by the Thomas algorithm."""
    if m < 16:
        raise InvalidArgumentError("need at least 16 grid points")
    grid = uniform_grid(m)
    f = inst.potential(grid)
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise WellPosednessError("potential must be finite and non-negative")
    s = 0.5 if inst.half_laplacian else 1.0
    h2 = grid.spacing**2
    off = np.full(m - 1, -s / h2)
    diag = 2.0 * s / h2 + f
    rhs = np.zeros(m)
    rhs[0] += s * inst.boundary[0] / h2
    rhs[-1] += s * inst.boundary[1] / h2
    u = kernels.tridiag_solve(off, np.ascontiguousarray(diag), off, rhs)
    if not np.all(np.isfinite(u)):
        raise WellPosednessError("finite-difference system is singular")
    return GridFunction(grid, np.asarray(u))


def linearised_parameter(basis: SpectralBasis, u: GridFunction, boundary, dim: int) -> np.ndarray:
    """Coefficients of ``v = -u''`` from the sine coefficients of ``u - g~`` times ``lambda_i``."""
    lift = harmonic_lift(u.grid, boundary)
    c = analyze(basis, GridFunction(u.grid, u.values - lift.values), dim)
    return basis.eigenvalues[:dim] * c


def round_trip_error(inst: PDEInstance, basis: SpectralBasis, dim: int, cfg: PullbackConfig) -> float:
    """Relative sup error of ``e(L u_f)`` against ``f`` on the unguarded grid nodes.

    Falls back to the absolute sup error when ``f`` vanishes identically.
    """
    grid = cfg.grid
    u = fd_solve_schrodinger(inst, grid.size)
    v = linearised_parameter(basis, u, inst.boundary, dim)
    lift = harmonic_lift(grid, inst.boundary)
    cfg = replace(cfg, half_laplacian=inst.half_laplacian)
    f_rec, guarded = pullback_values(basis, v[None, :], grid, cfg, lift)
    f_true = inst.potential(grid)
    keep = ~guarded[0]
    if not keep.any():
        raise ProbeUndefinedError("guard active at every grid node")
    err = np.max(np.abs(f_rec[0, keep] - f_true[keep]))
    scale = np.max(np.abs(f_true[keep]))
    return float(err / scale) if scale > 0 else float(err)


def lipschitz_probe(
    basis: SpectralBasis,
    v_center,
    radius: float,
    samples: int,
    cfg: PullbackConfig,
    seed: int,
    gtilde=None,
) -> float:
    """Largest observed ``||e(v1) - e(v2)|| / ||v1 - v2||`` over pairs drawn uniformly in a ball.

    Both norms are grid L2 norms.  Pairs that touch the denominator guard are
    skipped; the result is an empirical lower bound on the local Lipschitz
    constant.
    """
    if radius <= 0 or samples < 1:
        raise InvalidArgumentError("need radius > 0 and samples >= 1")
    center = np.asarray(v_center, dtype=float)
    d = center.size
    rng = rng_stream(seed, "lipschitz", samples, d)
    dirs = rng.standard_normal((2 * samples, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=(2 * samples, 1)) ** (1.0 / d)
    points = center + radii * dirs
    f, guarded = pullback_values(basis, points, cfg.grid, cfg, gtilde)
    v = points @ basis.evaluate(cfg.grid.points, d).T
    f1, f2 = f[0::2], f[1::2]
    ok = ~(guarded[0::2].any(axis=1) | guarded[1::2].any(axis=1))
    dv = np.sqrt(cfg.grid.spacing * np.sum((v[0::2] - v[1::2]) ** 2, axis=1))
    ok &= dv > 0
    if not ok.any():
        raise ProbeUndefinedError("every sampled pair hit the denominator guard")
    df = np.sqrt(cfg.grid.spacing * np.sum((f1 - f2) ** 2, axis=1))
    return float(np.max(df[ok] / dv[ok]))
