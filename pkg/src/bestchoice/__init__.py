"""Best-choice rerandomization: design, asymptotic inference and simulation diagnostics."""

__version__ = "0.1.0"

from .asymptotics import (
    AsymParams,
    McConfig,
    NuTable,
    chi2_quantile,
    percent_qr_reduction,
    percent_variance_reduction,
    quantile_nu,
    regime_classify,
    sample_chi2_KT,
    sample_LKT,
    variance_vKT,
)
from .design import Assignment, BestChoiceResult, best_choice, draw_cre, estimate_propensities, mahalanobis, make_rng
from .errors import ArmTooSmall, DomainError, InvalidArm, SingularCovariates, UnitMismatch
from .inference import ObservedData, VarianceEstimate, InferenceResult, ci_constrained, ci_neyman, ci_wald, diff_in_means, estimate_variance
from .population import FinitePopulation, MomentSummary, TrimSpec, compute_moments, standardize, trim
from .simulation import (
    SimConfig,
    SimulationReport,
    TruthSummary,
    compute_truth,
    impute_constant_effect,
    percent_effective_sample_size,
    run_replications,
    worst_case_mse,
)
