"""Acceptance gate: eleven numbered criteria, one printed verdict line each.

Exact identities and oracle equivalences run at the stated scales; the trend
criteria reproduce the headline empirical behaviors (method separation,
transfer, reconstruction, kernel concentration, universality, Stein gap).
Scales and tolerances are frozen; see the repository notes for the few
derived thresholds (0.75 reconstruction floor, Stein normalization).
"""

import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from quadfeat.experiments import ExperimentConfig, run_experiment
from quadfeat.features import eval_features, feature_inner, make_sign_features
from quadfeat.network import (ActivationSpec, default_epsilon, forward,
                              init_network, sigma1, sigma2)
from quadfeat.reconstruction import (build_Bstar, feature_correlations,
                                     kernel_pair, reconstruct_features,
                                     t_operator_mc, t_star, variance_match)
from quadfeat.sphere import (gegenbauer, harmonic_dim, linearize_product,
                             quadratic_moment, sample_sphere)
from quadfeat.targets import expected_hessian, make_standard_target
from quadfeat.training import (TrainConfig, _gram_system, _power_lambda_max,
                               _ridge_gd, calibrate_eta, gram_scale,
                               make_dataset, reinit_bias, stage1_step)
from quadfeat.universality import (gaussian_floor, loglog_slope, sliced_w1)


def _verdict(tag: str, ok: bool, detail: str) -> None:
    print(f"\n[criterion {tag}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {tag}: {detail}"


def test_criterion_01_gegenbauer_suite():
    worst = 0.0
    for d in (8, 16):
        for k in range(9):
            worst = max(worst, abs(gegenbauer(k, d, float(d)) - 1.0))
        t = np.linspace(-d, d, 41)
        explicit = (t * t - d) / (d * (d - 1))
        worst = max(worst, float(np.max(np.abs(gegenbauer(2, d, t)
                                               - explicit))))
    ok = worst <= 1e-12

    rel_worst = 0.0
    for d in (8, 16):
        t = np.linspace(-d, d, 21)
        for i in range(1, 5):
            for j in range(1, 5):
                table = linearize_product(i, j, d)
                lhs = gegenbauer(i, d, t) * gegenbauer(j, d, t)
                rhs = np.zeros_like(t)
                for k, coeff in table.coefficients.items():
                    rhs += float(coeff) * gegenbauer(table.degree(k), d, t)
                rel = np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(lhs)), 1.0)
                rel_worst = max(rel_worst, float(rel))
    ok = ok and rel_worst <= 1e-8

    from quadfeat.sphere import _pochhammer
    bound_ok = True
    for d in (8, 16):
        for i in range(1, 7):
            for j in range(1, 7):
                table = linearize_product(i, j, d)
                for k, c_part in table.c_parts.items():
                    cap = Fraction(1) / _pochhammer(Fraction(d - 2), k)
                    bound_ok &= float(c_part) <= float(cap) * (1 + 1e-12)
    ok = ok and bound_ok
    _verdict("01 gegenbauer", ok,
             f"endpoint/explicit dev {worst:.2e}, linearization rel "
             f"{rel_worst:.2e}, coefficient bound {'held' if bound_ok else 'violated'}")


def test_criterion_02_moment_oracle():
    d, n = 8, 1_000_000
    rng = np.random.default_rng(2)
    X = sample_sphere(d, n, seed=2)
    worst_z = 0.0
    for _ in range(10):
        A = rng.standard_normal((d, d))
        B = rng.standard_normal((d, d))
        A, B = 0.5 * (A + A.T), 0.5 * (B + B.T)
        vals = np.sum((X @ A) * X, axis=1) * np.sum((X @ B) * X, axis=1)
        mc, se = float(np.mean(vals)), float(np.std(vals) / math.sqrt(n))
        ana = quadratic_moment(A, B, d)
        worst_z = max(worst_z, abs(mc - ana) / se)
    F = make_sign_features(d)
    unit_dev = max(abs(feature_inner(A_, A_, d) - 1.0) for A_ in F.matrices)
    ok = worst_z <= 5.0 and unit_dev <= 1e-12
    _verdict("02 moment-oracle", ok,
             f"worst |z| {worst_z:.2f} (limit 5), sign-feature second moment "
             f"dev {unit_dev:.1e}")


def test_criterion_03_symmetric_init_zero():
    worst = 0.0
    spec = ActivationSpec(d=8)
    X = sample_sphere(8, 100, seed=3)
    for seed in range(5):
        theta = init_network(8, 64, 256, 1e-3, seed=seed, spec=spec)
        worst = max(worst, float(np.max(np.abs(forward(theta, X)))))
    ok = worst <= 1e-12
    _verdict("03 zero-init", ok, f"max |f(x; theta0)| = {worst:.2e} over "
             "100 inputs x 5 seeds (limit 1e-12)")


def test_criterion_04_stage1_closed_form():
    d, m1, m2, n1 = 8, 64, 512, 1024
    spec = ActivationSpec(d=d)
    F = make_sign_features(d)
    target = make_standard_target(d, 2, F, n_cal=1 << 16, seed=1)
    eps = default_epsilon(spec, n1, m1, m2)
    theta0 = init_network(d, m1, m2, eps, seed=4, spec=spec)
    D1 = make_dataset(target, n1, seed=40)
    state = stage1_step(theta0, D1)
    H = sigma2(D1.X @ theta0.V.T, spec)
    M = (H * D1.y[:, None]).T @ H / D1.n
    expect = theta0.a[:, None] * (theta0.W / eps @ M) / m2
    rel = float(np.max(np.abs(state.W1 - expect)) / np.max(np.abs(expect)))
    ok = state.out_of_zone_frac == 0.0 and rel <= 1e-8
    _verdict("04 stage1-closed-form", ok,
             f"out-of-zone {state.out_of_zone_frac}, relative dev {rel:.2e} "
             "(limit 1e-8)")


def test_criterion_05_ridge_oracle():
    d, m1, m2, n1, n2 = 8, 256, 512, 2048, 2048
    spec = ActivationSpec(d=d)
    F = make_sign_features(d)
    target = make_standard_target(d, 2, F, n_cal=1 << 16, seed=1)
    worst = 0.0
    for seed in (0, 1, 2):
        eps = default_epsilon(spec, n1, m1, m2)
        theta0 = init_network(d, m1, m2, eps, seed=seed, spec=spec)
        state = stage1_step(theta0, make_dataset(target, n1, seed=seed + 50))
        D2 = make_dataset(target, n2, seed=seed + 60)
        calibrate_eta(state, D2)
        b = reinit_bias(m1, seed=seed + 70)
        S = state.scores(D2.X)
        Phi = sigma1(state.eta * state.a0[:, None] * S + b[:, None]).T
        G, c, _ = _gram_system(Phi, D2.y, m1)
        lam_max = _power_lambda_max(G)
        for frac in (0.03, 0.1, 0.3):
            lam2 = frac * lam_max
            a, _ = _ridge_gd(Phi, D2.y, m1, lam2,
                             TrainConfig(T=4000, lambda2=lam2,
                                         grad_tol=0.0))
            resid = np.linalg.norm(G @ a + lam2 * a - c) / np.linalg.norm(c)
            worst = max(worst, float(resid))
    ok = worst <= 1e-8
    _verdict("05 ridge-oracle", ok,
             f"worst normal-equations residual {worst:.2e} over 3 seeds x 3 "
             "lambda2 (limit 1e-8)")


def test_criterion_06_kernel_concentration():
    d = 16
    spec = ActivationSpec(d=d)
    X = sample_sphere(d, 200, seed=6)
    pairs = [(X[2 * i], X[2 * i + 1]) for i in range(100)]
    V_full = sample_sphere(d, 1 << 14, seed=60)
    m2_grid = (1 << 10, 1 << 12, 1 << 14)
    devs = []
    for m2 in m2_grid:
        V = V_full[:m2]
        devs.append(max(kernel_pair(V, x, xp, spec).deviation
                        for x, xp in pairs))
    slope = loglog_slope(np.array(m2_grid, dtype=float), np.array(devs))
    ok = devs[0] > devs[1] > devs[2] and -0.65 <= slope <= -0.35
    _verdict("06 kernel-concentration", ok,
             f"max dev {devs[0]:.4f} -> {devs[1]:.4f} -> {devs[2]:.4f}, "
             f"log-log slope {slope:.3f} (window [-0.65, -0.35])")


def test_criterion_07_feature_reconstruction():
    d, m1, m2 = 16, 2, 8192
    spec = ActivationSpec(d=d)
    F = make_sign_features(d)
    target = make_standard_target(d, 2, F, seed=1)
    H = expected_hessian(target.standardized_link)
    X_test = sample_sphere(d, 512, seed=700)
    true = eval_features(F, X_test)
    mins = []
    for n1 in (d ** 2, d ** 3, d ** 4):
        eps = default_epsilon(spec, n1, m1, m2)
        theta0 = init_network(d, m1, m2, eps, seed=7, spec=spec)
        state = stage1_step(theta0, make_dataset(target, n1, seed=70))
        B = build_Bstar(F, H, theta0.V, spec)
        recon = variance_match(reconstruct_features(B, state, X_test), true)
        mins.append(float(np.min(feature_correlations(recon, true))))
    ok = mins[0] <= mins[1] + 1e-9 and mins[1] <= mins[2] + 1e-9 \
        and mins[2] >= 0.75
    _verdict("07 reconstruction", ok,
             f"min per-feature correlation {mins[0]:.3f} -> {mins[1]:.3f} -> "
             f"{mins[2]:.3f} over n1 = d^2, d^3, d^4 (floor 0.75 at d^4)")


def _mean_and_stderr(rows, method):
    vals = [float(r["test_mae"]) for r in rows if r["method"] == method]
    return (float(np.mean(vals)),
            float(np.std(vals, ddof=1) / math.sqrt(len(vals))))


def test_criterion_08_method_separation(tmp_path):
    cfg = ExperimentConfig(kind="compare", d=16, p=4, m1=2048, m2=4096,
                           n_grid=(1 << 14,), seeds=(0, 1, 2),
                           n_test=10_000, out=str(tmp_path / "compare"))
    rows = run_experiment(cfg)
    alg1, se_a = _mean_and_stderr(rows, "alg1")
    rf, se_r = _mean_and_stderr(rows, "rf")
    combined = math.hypot(se_a, se_r)
    ok = alg1 < rf - combined
    _verdict("08 separation", ok,
             f"alg1 MAE {alg1:.4f} +- {se_a:.4f} vs RF {rf:.4f} +- {se_r:.4f} "
             f"at n = 2^14 (need gap > {combined:.4f})")


def test_criterion_09_transfer(tmp_path):
    cfg = ExperimentConfig(kind="transfer", d=16, pretrain_p=2, p_grid=(4, 6),
                           n1=1 << 14, n2_grid=(1 << 10, 1 << 12, 1 << 14),
                           m1=2048, m2=4096, seeds=(0, 1, 2),
                           n_test=10_000, out=str(tmp_path / "transfer"))
    rows = run_experiment(cfg)
    ok = True
    parts = []
    for p in (4, 6):
        means = []
        for n2 in cfg.n2_grid:
            vals = [float(r["test_mae"]) for r in rows
                    if int(r["p"]) == p and int(r["n2"]) == n2]
            means.append(float(np.mean(vals)))
        ok = ok and means[0] > means[1] > means[2]
        parts.append(f"p={p}: " + " -> ".join(f"{m:.4f}" for m in means))
    _verdict("09 transfer", ok,
             "mean MAE strictly decreasing in n2; " + "; ".join(parts))


def test_criterion_10_universality_scaling():
    n, L = 200_000, 64
    d_grid = (8, 16, 32, 64)
    excess = []
    for d in d_grid:
        F = make_sign_features(d)
        s, _ = sliced_w1(F, n, L, seed=10)
        floor, _ = gaussian_floor(F.r, n, L, seed=100)
        excess.append(s - floor)
    slope = loglog_slope(np.array(d_grid, dtype=float), np.array(excess))
    decreasing = all(a > b for a, b in zip(excess, excess[1:]))
    ok = decreasing and -0.9 <= slope <= -0.2
    _verdict("10 universality", ok,
             "floor-subtracted sliced W1 " +
             " -> ".join(f"{e:.4f}" for e in excess) +
             f", slope {slope:.3f} (window [-0.9, -0.2])")


def test_criterion_11_stein_trend():
    n = 1 << 20
    gaps = []
    for d in (8, 16, 32):
        F = make_sign_features(d)
        target = make_standard_target(d, 2, F, n_cal=1 << 16, seed=1)
        H = expected_hessian(target.standardized_link)
        W = F.matrices[0].copy()
        est, stderr = t_operator_mc(target, W, n=n, seed=11)
        ideal = t_star(F, H, W)
        raw = float(np.linalg.norm(est - ideal))
        noise = float(np.linalg.norm(stderr))
        gaps.append(math.sqrt(max(raw * raw - noise * noise, 0.0)))
    ok = gaps[0] > gaps[1] > gaps[2]
    _verdict("11 stein-trend", ok,
             "MC-corrected ||T(A1) - T*(A1)||_F " +
             " -> ".join(f"{g:.4f}" for g in gaps) + " over d = 8, 16, 32")
