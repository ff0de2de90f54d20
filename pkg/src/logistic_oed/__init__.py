"""Optimal observation times for logistic growth under IID and OU noise."""

__version__ = "0.1.0"

from .design import (
    Design,
    DesignConstraints,
    candidate_grid,
    even_design,
    optimize_fim_design,
    optimize_global_design,
)
from .errors import (
    ConfigError,
    DegenerateVariance,
    FactorizationFailed,
    InfeasibleConstraints,
    LogisticOEDError,
    NoConvergence,
    TimeNotInGrid,
    TooFewRetained,
)
from .information import InfoMatrix, fim, global_info, log_det_objective
from .likelihood import (
    FitResult,
    fit_mle,
    loglik_iid,
    loglik_ou,
    loglik_ou_sequential,
    sigma2_iid_hat,
    sigma2_ou_hat,
)
from .model import (
    PRIOR_RANGES,
    TRUE_PARAMS,
    LogisticParams,
    ParamRanges,
    sensitivities,
    sensitivities_vec,
    solve,
    solve_vec,
    time_grid,
)
from .noise import (
    CovMatrix,
    IIDNoise,
    Observations,
    OUNoise,
    autocorrelation,
    covariance,
    sample_noise,
    synthesize,
)
from .profile import (
    ConfidenceInterval,
    PredictionBand,
    ProfileResult,
    confidence_interval,
    prediction_band,
    profile_all,
    profile_parameter,
)
from .sobol import SobolProfile, total_effect_indices
