"""Robust loss-based Kalman filtering (KF, WoLF, RoLF) and a GARCH benchmark."""

from .estimators import KalmanFilter, RobustLossFilter, WeightedObservationFilter
from .filters import (
    DEFAULT_IMQ_C,
    DEFAULT_RHO,
    RobustConfig,
    StepTrace,
    WeightFnConfig,
    bayes_conditioning_oracle,
    default_imq_c,
    filter_run,
    final_belief,
    imq_weight,
    kf_predict,
    kf_update_information,
    rolf_predict,
    stf_fading_factor,
)
from .metrics import RunResult, aggregate_runs, per_step_loss, tail_mean_loss, win_rate
from .simulate import (
    GarchParams,
    MixtureNoiseParams,
    ScenarioConfig,
    build_cv_model,
    derive_run_seed,
    garch_step,
    generate_scenario,
)
from .statespace import (
    GaussianBelief,
    LinearGaussianModel,
    Trajectory,
    mahalanobis_sq,
    symmetrize_psd,
    validate_model,
)

__version__ = "0.1.0"
