"""Streaming robust regression from data chunks.

The estimators integrate an interpolated conditional quantile function
against trimmed weight functions, so conditional means and standard
deviations come out of one set of renewable accumulators: statistics
updated chunk by chunk without revisiting historical raw data.
"""

from .bandwidth import (
    AsymptoticConstants,
    BandwidthState,
    ModelOracle,
    asymptotic_constants,
    error_function,
    error_increment,
    estimate_Ch,
    fixed_point_bandwidths,
    next_bandwidth,
    oracle_bandwidth,
)
from .benchmark import (
    ScenarioResult,
    ase,
    nw_curve,
    nw_mean,
    nw_sd,
    rase,
    run_scenario,
    simple_average,
    write_report,
)
from .cdf import InterpolatedCDF, build_cdf, support_preimage
from .checkpoint import load as load_checkpoint
from .checkpoint import payload_bytes, save as save_checkpoint
from .config import Config, fingerprint, resolve_weight
from .errors import (
    CheckpointError,
    ChunkTooSmall,
    ConfigError,
    CurvePointError,
    DataError,
    DegenerateSeparation,
    DensityTooSmall,
    LevelSetEmpty,
    NegativeVariance,
    SingularMomentSystem,
    StreamCQRError,
    ZeroDenominator,
    ZeroKernelMass,
)
from .estimators import (
    CurveEstimate,
    curve_estimate,
    estimate_bundle,
    estimate_mean,
    estimate_sd,
    estimate_theta,
    estimate_w,
    wcqr_integral,
)
from .interpolation import Interpolant, basis, error_bound, nearest_nodes
from .kernels import EPANECHNIKOV, Kernel, get_kernel, kernel_moments
from .optimal_weights import (
    ErrorLaw,
    OptimalWeightSolution,
    gaussian_law,
    logistic_law,
    optimal_weight,
    uniform_law,
    variance_functional,
)
from .pilot import build_grids, check_loss, local_quantile
from .simulate import (
    ERROR_LAWS,
    MODELS,
    ScenarioConfig,
    draw_dataset,
    generate,
    get_error_law,
    get_model,
    replication_rng,
)
from .state import Chunk, RenewableState, init_state, update_chunk
from .weights import (
    WeightFunction,
    mean_weight,
    sd_weight,
    trim_bounds,
    trimmed_component,
)

__version__ = "0.1.0"
