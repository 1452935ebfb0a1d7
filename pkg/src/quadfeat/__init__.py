"""Numerical laboratory for learning hierarchical functions of quadratic features.

Subpackages by concern: sphere math, feature sets, targets, the three-layer
network, layer-wise training, feature reconstruction, Gaussianity diagnostics,
and the experiment runner behind the command-line entry point.
"""

__version__ = "0.1.0"

from .features import FeatureSet, make_sign_features, orthonormalize, eval_features
from .network import ActivationSpec, NetworkParams, init_network, forward
from .sphere import (
    MCEstimate,
    gegenbauer,
    harmonic_dim,
    linearize_product,
    quadratic_moment,
    sample_sphere,
)
from .targets import (
    HessianMatrix,
    LinkPolynomial,
    Target,
    eval_link,
    expected_hessian,
    make_standard_target,
    projection_norm,
)
from .training import (
    Dataset,
    StageOneState,
    TrainConfig,
    TrainedModel,
    calibrate_eta,
    compute_h1,
    gram_scale,
    make_dataset,
    reinit_bias,
    rf_baseline_train,
    rf_state,
    ridge_oracle,
    stage1_step,
    stage2_train,
    test_error,
)
from .reconstruction import (
    ReconMatrix,
    build_Bstar,
    feature_correlations,
    kernel_pair,
    reconstruct_features,
    t_operator_mc,
    t_star,
)
from .universality import sliced_w1, gaussian_floor, moment_diagnostics
