"""Mean dimension and Sobol' index estimation for black-box functions.

The package estimates the total-index sum ``delta = sum_j tau2_j`` (and the
mean dimension ``nu = delta / sigma2``) of a function of independent inputs
with four single-coordinate-change sampling strategies, and provides the
exact closed-form variance oracles those estimators are validated against.
A small self-contained feed-forward network evaluator makes classifier
logits and softmax outputs usable as black boxes, including per-pixel
index maps and mean-dimension reports.
"""
from .blackbox import BlackBox, EvaluationError
from .estimators import (
    DeltaEstimate,
    ReplicateResult,
    Strategy,
    WindingState,
    estimate_delta,
    estimate_lower_index,
    estimate_sigma2,
    estimate_total_index_pairs,
    replicate_variance,
    walk_winding_chain,
)
from .inputs import (
    Bernoulli01,
    CoordinateDistribution,
    FiniteSupport,
    Histogram,
    InputModel,
    StdGaussian,
    Uniform01,
    hybrid,
    sample_point,
    winding_index,
)
from .oracles import (
    Lemma1Moments,
    MomentProfile,
    VarianceComponents,
    anova_enumerate,
    covariance_sign_condition,
    lemma1_moments,
    nu_product,
    var_additive,
    var_product,
    winding_lag_covariance_structure,
)
from .rng import RandomStream
from .testfns import (
    TestFunction,
    make_additive,
    make_product,
    make_random_discrete,
    make_sobol_g,
    make_two_norm,
)

__version__ = "0.1.0"

__all__ = [
    "BlackBox",
    "EvaluationError",
    "DeltaEstimate",
    "ReplicateResult",
    "Strategy",
    "WindingState",
    "walk_winding_chain",
    "estimate_delta",
    "estimate_lower_index",
    "estimate_sigma2",
    "estimate_total_index_pairs",
    "replicate_variance",
    "Bernoulli01",
    "CoordinateDistribution",
    "FiniteSupport",
    "Histogram",
    "InputModel",
    "StdGaussian",
    "Uniform01",
    "hybrid",
    "sample_point",
    "winding_index",
    "Lemma1Moments",
    "MomentProfile",
    "VarianceComponents",
    "anova_enumerate",
    "covariance_sign_condition",
    "lemma1_moments",
    "nu_product",
    "var_additive",
    "var_product",
    "winding_lag_covariance_structure",
    "RandomStream",
    "TestFunction",
    "make_additive",
    "make_product",
    "make_random_discrete",
    "make_sobol_g",
    "make_two_norm",
]
