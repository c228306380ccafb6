"""Early-stopped ensemble Kalman-Bucy inversion for a linearisable Schroedinger inverse problem."""

from ._backend import BACKEND
from .enkbf import (
    Ensemble,
    StopReport,
    empirical_moments,
    enkbf_step,
    ensemble_quantiles,
    init_ensemble,
    kalman_gain,
    run_steps,
    run_until_discrepancy,
)
from .errors import (
    ConfigError,
    DivergenceError,
    EnkbfError,
    IllConditionedProjectionError,
    InvalidArgumentError,
    ProbeUndefinedError,
    WellPosednessError,
)
from .posterior import GaussianPosterior, map_estimate, posterior_moments, theoretical_rate
from .schrodinger import (
    PDEInstance,
    PullbackConfig,
    fd_solve_schrodinger,
    lipschitz_probe,
    linearised_parameter,
    round_trip_error,
    solution_map_e,
)
from .seqmodel import (
    ModelConfig,
    ObservationSet,
    PriorSpec,
    discrepancy_threshold,
    effective_dimension,
    generate_observations,
    ground_truth,
    residual,
)
from .spectral import Grid, GridFunction, SpectralBasis, analyze, eigenpairs, synthesize, uniform_grid

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
