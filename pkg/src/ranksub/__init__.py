"""ranksub: dependence estimation on the rank grid via sub-sampling.

Estimate the joint law of componentwise ranks of m-sub-samples, evaluate
its exact null moments under independence, run Monte-Carlo-calibrated
independence tests, and smooth the grid into copula/joint densities.
"""

from .dependence import (
    NullCalibration,
    NullHasZeroCell,
    TestResult,
    calibrate_null,
    independence_test,
    kl_statistic,
    l2_statistic,
)
from .engine import (
    EnumerationTooLarge,
    EstimatorConfig,
    Exhaustive,
    Random,
    RandomBreak,
    Reject,
    SampleMatrix,
    TiesDetected,
    component_ranks,
    default_subsample_count,
    estimate,
    estimate_exhaustive,
    estimate_random,
    pseudo_observations,
    subsample_rank_set,
)
from .exact import (
    BernsteinIndex,
    ExactRational,
    bernstein,
    bernstein_value,
    binomial,
    concordance_integral,
    identity_suite,
    s_constants,
    stirling_bound_check,
)
from .generators import GeneratorSpec, gaussian_copula_density, generate
from .grid import RankGrid, ShapeMismatch, merge_grids
from .nulltheory import (
    PRINTED,
    SIGN_CORRECTED,
    CovarianceTerms,
    NullMoments,
    aggregate_moments,
    border_dimension,
    comonotone_pmf,
    conditional_kernel_mean,
    variance_approx,
    covariance_terms,
    independence_pmf,
    l2_pmf_distance,
    mc_rank_pmf,
    sigma_cov,
    closed_form_moments,
)
from .smoothing import (
    JointDensityModel,
    MarginalModel,
    SmoothedCopula,
    conditional_slice,
    fit_joint_model,
    fit_marginals,
    joint_density,
    sample_copula,
    smooth,
)
from .studies import (
    MomentConfig,
    PowerRow,
    StudyReport,
    run_convergence_study,
    run_moment_study,
    run_power_study,
)

__version__ = "0.1.0"

__all__ = [
    "BernsteinIndex",
    "CovarianceTerms",
    "EnumerationTooLarge",
    "EstimatorConfig",
    "ExactRational",
    "Exhaustive",
    "GeneratorSpec",
    "JointDensityModel",
    "MarginalModel",
    "MomentConfig",
    "NullCalibration",
    "NullHasZeroCell",
    "NullMoments",
    "PRINTED",
    "PowerRow",
    "Random",
    "RandomBreak",
    "RankGrid",
    "Reject",
    "SIGN_CORRECTED",
    "SampleMatrix",
    "ShapeMismatch",
    "SmoothedCopula",
    "StudyReport",
    "TestResult",
    "TiesDetected",
    "aggregate_moments",
    "bernstein",
    "bernstein_value",
    "binomial",
    "border_dimension",
    "calibrate_null",
    "comonotone_pmf",
    "component_ranks",
    "concordance_integral",
    "conditional_kernel_mean",
    "conditional_slice",
    "variance_approx",
    "covariance_terms",
    "default_subsample_count",
    "estimate",
    "estimate_exhaustive",
    "estimate_random",
    "fit_joint_model",
    "fit_marginals",
    "gaussian_copula_density",
    "generate",
    "identity_suite",
    "independence_pmf",
    "independence_test",
    "joint_density",
    "kl_statistic",
    "l2_pmf_distance",
    "l2_statistic",
    "mc_rank_pmf",
    "merge_grids",
    "pseudo_observations",
    "run_convergence_study",
    "run_moment_study",
    "run_power_study",
    "s_constants",
    "sample_copula",
    "sigma_cov",
    "smooth",
    "stirling_bound_check",
    "subsample_rank_set",
    "closed_form_moments",
]
