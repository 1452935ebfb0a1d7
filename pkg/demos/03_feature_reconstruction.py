"""Reading the hidden quadratic features back out of the learned layer.

After Stage 1 the representation h1(x) is (approximately) a kernel smoothing
of the target.  A fixed r x m2 matrix B* -- proportional to H^{-1} applied to
the feature values at the inner weights -- maps h1(x) back to the feature
vector p(x).  The linear correlation between reconstruction and truth climbs
toward 1 as the Stage-1 sample size n1 grows from d^2 to d^4.

Run:  python3 demos/03_feature_reconstruction.py   (about a minute)
"""

import numpy as np

from quadfeat.features import eval_features, make_sign_features
from quadfeat.network import ActivationSpec, default_epsilon, init_network
from quadfeat.reconstruction import (build_Bstar, feature_correlations,
                                     reconstruct_features, variance_match)
from quadfeat.sphere import sample_sphere
from quadfeat.targets import expected_hessian, make_standard_target
from quadfeat.training import make_dataset, stage1_step

d, m2 = 8, 2048
m1 = 2          # the middle layer is all that matters for reconstruction
spec = ActivationSpec(d=d)
F = make_sign_features(d)
target = make_standard_target(d, 2, F, seed=1)
H = expected_hessian(target.standardized_link)

print(f"d = {d}, m2 = {m2}; expected Hessian lambda_min = "
      f"{H.lambda_min:.4f} (invertible, so B* exists)\n")

X_test = sample_sphere(d, 512, seed=9)
true = eval_features(F, X_test)

print("n1        per-feature correlation (reconstructed vs. true)")
for n1 in (d ** 2, d ** 3, d ** 4):
    eps = default_epsilon(spec, n1, m1, m2)
    theta0 = init_network(d, m1, m2, eps, seed=3, spec=spec)
    state = stage1_step(theta0, make_dataset(target, n1, seed=30))
    B = build_Bstar(F, H, theta0.V, spec)
    recon = variance_match(reconstruct_features(B, state, X_test), true)
    corr = feature_correlations(recon, true)
    print(f"{n1:7d}   " + "  ".join(f"{c:.4f}" for c in corr))

print("\nEach column is one hidden feature p_k(x) = x'A_k x; the "
      "reconstruction is")
print("variance-matched per feature before computing the Pearson "
      "correlation.")
