"""modelsynth: combining independently built Bayesian regression models.

Independently constructed conjugate-mixture models are joined through
pairwise Bayes factors on held-out data; each model's weight is the
normalized geometric mean of its estimated factors (bayesian synthesis) or a
fixed convex weight that is never updated (convex synthesis).  The package
also ships the split-data experiment harness: seeded exchangeable splits,
static and sequential prediction protocols, and the full metric suite
(log-scale SSE, original-scale MSE with lognormal correction, threshold
exceedance classification, interval coverage and calibration).
"""

from .data import (
    BatchSchedule,
    Dataset,
    SplitAssignment,
    batch_partition,
    derive_seed,
    load_ozone_csv,
    split_random,
    split_stratified,
)
from .linmodel import (
    DesignSpec,
    FeatureTransform,
    IntegerPredictive,
    NigPosterior,
    NigPrior,
    PredictiveDistribution,
    ResponseSpec,
    StudentT,
    build_design,
    discretize,
    fit_nig,
    log_marginal_likelihood,
    predictive,
    predictive_mean_ozone,
    update_nig,
)
from .analysts import (
    AnalystProgram,
    ModelMixture,
    bic_weights,
    cv_geometric_weights,
    fixed_subjective_weights,
    forward_selection_ic,
    mixture_log_marginal,
    mixture_predictive,
    mixture_update,
    modified_lars_order,
    run_analyst,
)
from .synthesis import (
    BayesFactorMatrix,
    SynthesisWeights,
    SynthesizedModel,
    bf_matrix,
    convex_weights,
    geometric_mean_weights,
    mc_log_marginal,
    pairwise_log_bf,
    sequential_update,
    synthesize,
)
from .evaluate import (
    ExperimentPlan,
    MetricsReport,
    calibration_summary,
    classify_exceedance_bayes,
    classify_exceedance_point,
    interval_coverage,
    mean_analyst_row,
    mse_ozone_bayes,
    mse_ozone_pointrule,
    run_experiment,
    run_once,
    run_ten_by_ten,
    sse_log,
)

__version__ = "0.1.0"
