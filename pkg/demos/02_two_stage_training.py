"""Two-stage layer-wise training against the random-feature baseline.

A three-layer network with symmetric (exactly-zero-output) initialization is
trained in two stages: one closed-form gradient step on the middle layer
learns a representation h1, then a ridge-regularized head is fit on fresh
data.  The baseline fits the identical head on the untrained random features
h0.  At desk scale the separation is already visible; at the acceptance
scale (d = 16, p = 4, m1 = 2048, m2 = 4096, n = 2^14) it exceeds thirty
combined standard errors.

Run:  python3 demos/02_two_stage_training.py   (about a minute)
"""

import numpy as np

from quadfeat.features import make_sign_features
from quadfeat.network import ActivationSpec, default_epsilon, init_network
from quadfeat.training import (TrainConfig, calibrate_eta, make_dataset,
                               reinit_bias, rf_baseline_train, stage1_step,
                               stage2_train, test_error)

d, p = 16, 4
m1, m2 = 512, 1024
n = 1 << 12

F = make_sign_features(d)
from quadfeat.targets import make_standard_target
target = make_standard_target(d, p, F, seed=1)
spec = ActivationSpec(d=d)
cfg = TrainConfig()

print(f"Target: degree-{p} link over r = {F.r} quadratic features, d = {d}")
print(f"Network: m1 = {m1}, m2 = {m2}; data n = {n} "
      f"(split {n // 2} + {n - n // 2} for the two stages)\n")

for seed in (0, 1, 2):
    n1, n2 = n // 2, n - n // 2
    eps = default_epsilon(spec, n1, m1, m2)
    theta0 = init_network(d, m1, m2, eps, seed=seed, spec=spec)

    # Stage 1: one exact gradient step on the middle layer.
    D1 = make_dataset(target, n1, seed=100 + seed)
    state = stage1_step(theta0, D1)

    # Stage 2: calibrate the score scale, re-draw biases, fit the head.
    D2 = make_dataset(target, n2, seed=200 + seed)
    calibrate_eta(state, D2)
    b = reinit_bias(m1, seed=300 + seed)
    model = stage2_train(state, b, D2, cfg)
    err = test_error(model, target, 5000, seed=400 + seed)

    # Baseline: same architecture, same head fit, untrained representation.
    eps_rf = default_epsilon(spec, n, m1, m2)
    theta_rf = init_network(d, m1, m2, eps_rf, seed=seed, spec=spec)
    D = make_dataset(target, n, seed=200 + seed)
    rf = rf_baseline_train(theta_rf, D, cfg, bias_seed=300 + seed)
    err_rf = test_error(rf, target, 5000, seed=400 + seed)

    print(f"seed {seed}:  two-stage MAE {err['mae']:.4f}   "
          f"random-feature MAE {err_rf['mae']:.4f}   "
          f"(out-of-zone {state.out_of_zone_frac:.3f})")

print("\nA mean prediction of zero would score MAE ~0.77 on this "
      "standardized target;")
print("the untrained features barely beat that while the learned "
      "representation does.")
