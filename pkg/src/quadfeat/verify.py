"""Fast machine-readable invariant checks over every module.

Each check is a named predicate over frozen small-scale computations; the
``verify`` subcommand runs them all and exits nonzero if any fails. These are
smoke-level guarantees (seconds, not minutes) — the full statistical suites
live in the test directory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import eval_features, feature_inner, make_sign_features
from .network import (ActivationSpec, default_epsilon, forward, init_network,
                      sigma1, sigma2)
from .reconstruction import build_Bstar, kernel_pair, reconstruct_features, \
    t_star
from .sphere import gegenbauer, harmonic_dim, linearize_product, \
    quadratic_moment, sample_sphere
from .targets import expected_hessian, make_standard_target
from .training import TrainConfig, calibrate_eta, make_dataset, reinit_bias, \
    ridge_oracle, rf_state, stage1_step, stage2_train
from .universality import gaussian_floor, sliced_w1


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def _check(results: list[Check], name: str, fn) -> None:
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure, not an abort
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    results.append(Check(name=name, passed=bool(ok), detail=str(detail)))


def _gegenbauer_endpoint() -> tuple[bool, str]:
    worst = 0.0
    for d in (8, 16):
        for k in range(9):
            worst = max(worst, abs(gegenbauer(k, d, np.array([float(d)]))[0] - 1.0))
    return worst < 1e-10, f"max |Q_k(d) - 1| = {worst:.3e}"


def _gegenbauer_product() -> tuple[bool, str]:
    worst = 0.0
    t = np.linspace(-4.0, 4.0, 41)
    for d in (8, 16):
        for i in range(1, 4):
            for j in range(i, 4):
                table = linearize_product(i, j, d)
                lhs = gegenbauer(i, d, t) * gegenbauer(j, d, t)
                rhs = table.evaluate(t)
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst < 1e-10, f"max product-linearization error = {worst:.3e}"


def _harmonic_dims() -> tuple[bool, str]:
    expect = {(4, 2): 9, (8, 2): 35, (16, 2): 135}
    got = {k: harmonic_dim(*k) for k in expect}
    return got == expect, f"{got}"


def _sign_feature_moments() -> tuple[bool, str]:
    F = make_sign_features(8)
    worst = 0.0
    for k in range(F.r):
        worst = max(worst, abs(quadratic_moment(F.matrices[k],
                                                F.matrices[k]) - 1.0))
        for j in range(k + 1, F.r):
            worst = max(worst, abs(feature_inner(F.matrices[k],
                                                 F.matrices[j], F.d)))
    return worst < 1e-12, f"max second-moment/orthogonality error = {worst:.3e}"


def _symmetric_init_zero() -> tuple[bool, str]:
    spec = ActivationSpec(d=8)
    theta = init_network(8, 32, 128, 1e-2, seed=3, spec=spec)
    X = sample_sphere(8, 64, seed=4)
    worst = float(np.max(np.abs(forward(theta, X))))
    return worst < 1e-12, f"max |f(x; theta0)| = {worst:.3e}"


def _stage1_closed_form() -> tuple[bool, str]:
    d, m1, m2, n1 = 8, 16, 64, 256
    spec = ActivationSpec(d=d)
    F = make_sign_features(d)
    target = make_standard_target(d, 2, F, n_cal=1 << 14, seed=1)
    eps = default_epsilon(spec, n1, m1, m2)
    theta0 = init_network(d, m1, m2, eps, seed=5, spec=spec)
    D1 = make_dataset(target, n1, seed=6)
    state = stage1_step(theta0, D1)
    H = sigma2(D1.X @ theta0.V.T, spec)
    M = (H * D1.y[:, None]).T @ H / n1
    W_expected = theta0.a[:, None] * (state.Wnorm @ M) / m2
    rel = float(np.max(np.abs(state.W1 - W_expected))
                / np.max(np.abs(W_expected)))
    return rel < 1e-8, f"stage-1 closed-form relative error = {rel:.3e}"


def _stage2_fixed_point() -> tuple[bool, str]:
    rng = np.random.default_rng(0)
    n, m1 = 512, 64
    Phi = rng.standard_normal((n, m1))
    y = rng.standard_normal(n)
    lam = 1e-3
    a = ridge_oracle(Phi, y, m1, lam)
    G = (Phi.T @ Phi) * (2.0 / (n * m1 * m1))
    c = (Phi.T @ y) * (2.0 / (n * m1))
    resid = float(np.linalg.norm(G @ a + lam * a - c) / np.linalg.norm(c))
    return resid < 1e-10, f"normal-equations residual = {resid:.3e}"


def _calibration_ceiling() -> tuple[bool, str]:
    d, m1, m2, n = 8, 16, 128, 256
    spec = ActivationSpec(d=d)
    F = make_sign_features(d)
    target = make_standard_target(d, 2, F, n_cal=1 << 14, seed=1)
    theta0 = init_network(d, m1, m2, default_epsilon(spec, n, m1, m2),
                          seed=5, spec=spec)
    state = rf_state(theta0)
    D = make_dataset(target, n, seed=7)
    calibrate_eta(state, D)
    peak = float(np.max(np.abs(state.eta * state.scores(D.X))))
    return abs(peak - 0.9) < 1e-6, f"post-calibration peak = {peak:.8f}"


def _kernel_consistency() -> tuple[bool, str]:
    d, m2 = 8, 4096
    spec = ActivationSpec(d=d)
    V = sample_sphere(d, m2, seed=12)
    X = sample_sphere(d, 8, seed=13)
    Y = sample_sphere(d, 8, seed=14)
    dev = max(abs(kernel_pair(V, x, y, spec).deviation)
              for x, y in zip(X, Y))
    return dev < 0.05, f"max |K_m2 - K0| = {dev:.3e} at m2 = {m2}"


def _reconstruction_roundtrip() -> tuple[bool, str]:
    d, m1, m2, n1 = 8, 16, 1024, 4096
    spec = ActivationSpec(d=d)
    F = make_sign_features(d)
    target = make_standard_target(d, 2, F, n_cal=1 << 14, seed=1)
    theta0 = init_network(d, m1, m2, default_epsilon(spec, n1, m1, m2),
                          seed=5, spec=spec)
    D1 = make_dataset(target, n1, seed=6)
    state = stage1_step(theta0, D1)
    H = expected_hessian(target.standardized_link)
    B = build_Bstar(F, H, theta0.V, spec)
    X = sample_sphere(d, 4096, seed=8)
    recon = reconstruct_features(B, state, X)
    true = eval_features(F, X)
    corr = min(float(np.corrcoef(recon[:, k], true[:, k])[0, 1])
               for k in range(F.r))
    return corr > 0.8, f"min feature correlation = {corr:.4f}"


def _universality_floor() -> tuple[bool, str]:
    F = make_sign_features(16)
    s, _ = sliced_w1(F, 20_000, 16, seed=21)
    floor, _ = gaussian_floor(F.r, 20_000, 16, seed=22)
    return s > 0 and floor > 0 and s < 1.0, \
        f"sliced W1 = {s:.4f}, floor = {floor:.4f}"


CHECKS = (
    ("gegenbauer_endpoint_normalization", _gegenbauer_endpoint),
    ("gegenbauer_product_linearization", _gegenbauer_product),
    ("harmonic_dimension_table", _harmonic_dims),
    ("sign_feature_moments", _sign_feature_moments),
    ("symmetric_init_zero_output", _symmetric_init_zero),
    ("stage1_closed_form_oracle", _stage1_closed_form),
    ("stage2_normal_equations", _stage2_fixed_point),
    ("eta_calibration_ceiling", _calibration_ceiling),
    ("kernel_empirical_vs_analytic", _kernel_consistency),
    ("feature_reconstruction_roundtrip", _reconstruction_roundtrip),
    ("universality_estimator_sane", _universality_floor),
)


def run_all() -> list[Check]:
    results: list[Check] = []
    for name, fn in CHECKS:
        _check(results, name, fn)
    return results
