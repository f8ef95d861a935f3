"""Solvers for the convolution recursion lambda_k = mu_k * phi(lambda_{k-1}) on R^d."""

__version__ = "0.1.0"

from .errors import (
    ConsistencyError,
    DecompSolveError,
    HypothesisError,
    InputError,
    NoFixedPointError,
    NoSolutionError,
    PreconditionError,
    SpectralGapError,
)
from .spectral import (
    ContractionSplit,
    LinearMap,
    SeriesResult,
    contraction_split,
    covariance_series,
    lyapunov_fixed_point,
)
from .measures import (
    Dirac,
    Gaussian,
    Mixture,
    Pushforward,
    SampleCloud,
    Shifted,
    UniformBox,
    convolve,
    log_moment,
    pushforward,
    support_coset,
)
from .process import (
    DecayMixtureFamily,
    NoiseProcess,
    PushforwardPower,
    Stationary,
    ZeroTail,
    lp_path_check,
    lp_shift_solvable,
    mp_log_moment,
    solve_shift_recursion,
)
from .mc import backward_partial_sample, energy_distance_test, simulate_paths
from .solver import (
    ExistenceReport,
    SolutionFamily,
    SolverOptions,
    analyze_existence,
    extremal_family,
    solve_fundamental,
    strong_decomposability_check,
    verify_solution,
)
