"""Gaussianity of the feature vector, and reusing a learned representation.

Part 1: as d grows, the joint law of the r quadratic features approaches a
standard Gaussian.  The sliced Wasserstein-1 estimator quantifies this;
because even true Gaussian draws score a nonzero finite-sample W1, the
honest quantity is the excess over that noise floor.

Part 2: the Stage-1 representation is trained once on a degree-2 link and
then reused, retraining only the ridge head, for degree-4 and degree-6 links
over the same hidden features.  Test error falls as the head's sample size
n2 grows -- the representation transfers.

Run:  python3 demos/04_universality_and_transfer.py   (about two minutes)
"""

import numpy as np

from quadfeat.features import make_sign_features
from quadfeat.network import ActivationSpec, default_epsilon, init_network
from quadfeat.targets import make_standard_target
from quadfeat.training import (TrainConfig, calibrate_eta, make_dataset,
                               reinit_bias, stage1_step, stage2_train,
                               test_error)
from quadfeat.universality import gaussian_floor, sliced_w1

print("=== Part 1: sliced-W1 Gaussianity across dimensions ===")
n, L = 100_000, 32
print(f"(n = {n} samples, L = {L} random directions per estimate)")
for d in (8, 16, 32, 64):
    F = make_sign_features(d)
    s, _ = sliced_w1(F, n, L, seed=5)
    floor, _ = gaussian_floor(F.r, n, L, seed=50)
    print(f"  d = {d:3d}:  sliced W1 {s:.5f}   gaussian floor {floor:.5f}"
          f"   excess {s - floor:.5f}")

print("\n=== Part 2: transfer across link functions ===")
d, m1, m2, n1 = 16, 512, 1024, 1 << 12
spec = ActivationSpec(d=d)
F = make_sign_features(d)
pretrain = make_standard_target(d, 2, F, seed=1)

eps = default_epsilon(spec, n1, m1, m2)
theta0 = init_network(d, m1, m2, eps, seed=7, spec=spec)
state = stage1_step(theta0, make_dataset(pretrain, n1, seed=70))
print(f"Representation pretrained once on the degree-2 link "
      f"(n1 = {n1}, m1 = {m1}, m2 = {m2}).")

cfg = TrainConfig()
for p in (4, 6):
    target2 = make_standard_target(d, p, F, seed=1)
    line = [f"degree-{p} link:"]
    for n2 in (1 << 9, 1 << 11, 1 << 13):
        D2 = make_dataset(target2, n2, seed=700 + n2 + p)
        calibrate_eta(state, D2)
        b = reinit_bias(m1, seed=71)
        model = stage2_train(state, b, D2, cfg, target2=target2)
        err = test_error(model, target2, 5000, seed=710 + p)
        line.append(f"n2={n2}: MAE {err['mae']:.4f}")
    print("  " + "   ".join(line))

print("\nOnly the ridge head is refit per (link, n2); the middle layer "
      "is frozen.")
