"""Monte Carlo laboratory for sojourn times of stationary Gaussian processes
over random horizons: level scaling, limit-constant estimation, heavy-tailed
horizon models, tail predictions, and simulation experiments comparing them.
"""

__version__ = "0.1.0"

from .errors import (
    ContractError,
    EstimationError,
    GridResolutionError,
    RangeError,
    SchemaError,
    SojournMcError,
    SolverError,
)
from .covariance import (
    FBM_INCREMENT,
    FRAC_OU,
    TABULATED,
    CovarianceModel,
    LevelScaling,
    berman_condition_report,
    eval_correlation,
    fbm_increment,
    frac_ou,
    load_tabulated_csv,
    normal_survival,
    scaling_bundle,
    solve_v,
    tabulated,
)
from .gauss_sim import GridPath, WAlphaPath, simulate_stationary, simulate_w_alpha
from .sojourn import SojournResult, scaled_sojourn, sojourn_time
from .berman import (
    BermanTable,
    default_step,
    estimate_berman,
    estimate_berman_windowed,
    sample_limit_sojourn,
)
from .heavy_tail import (
    D1,
    D2,
    D3,
    D4,
    DETERMINISTIC,
    EXPONENTIAL,
    LOG_PARETO,
    PARETO,
    PARETO1_LOG,
    HorizonModel,
    deterministic,
    exponential,
    integrated_tail,
    log_pareto,
    mean_T,
    pareto,
    pareto1_log_corrected,
    parse_horizon_spec,
    sample_T,
    tail_T,
    tail_inverse,
    tail_quantile,
)
from .asymptotics import (
    AsymptoticPrediction,
    FAlphaConvolution,
    SeriesResult,
    compound_poisson_tail,
    convolve_tails,
    d3_series,
    gamma_one_minus,
    predict_tail,
    predictions_csv,
)
from .experiments import (
    CellResult,
    ComparisonReport,
    ExperimentConfig,
    compound_poisson_convergence_check,
    empirical_sojourn_tail,
    empirical_sup_tail,
    intermediate_horizon_ratio_check,
    run_comparison,
)

__all__ = [name for name in dir() if not name.startswith("_")]
