"""Two-stage layer-wise training: closed forms, calibration, ridge head."""

import math

import numpy as np
import pytest

from quadfeat.features import make_sign_features
from quadfeat.network import (ActivationSpec, default_epsilon, init_network,
                              sigma1, sigma2)
from quadfeat.sphere import sample_sphere
from quadfeat.targets import make_standard_target
from quadfeat.training import (Dataset, DegenerateScaleError, DivergenceError,
                               TrainConfig, calibrate_eta, compute_h1,
                               gram_scale, make_dataset, reinit_bias,
                               rf_baseline_train, rf_state, ridge_oracle,
                               stage1_step, stage2_train)
from quadfeat.training import test_error as eval_test_error

D = 8
SPEC = ActivationSpec(d=D)
F = make_sign_features(D)
TARGET = make_standard_target(D, 2, F, n_cal=1 << 16, seed=1)


def _setup(m1=32, m2=256, n1=512, seed=5):
    eps = default_epsilon(SPEC, n1, m1, m2)
    theta0 = init_network(D, m1, m2, eps, seed=seed, spec=SPEC)
    D1 = make_dataset(TARGET, n1, seed=seed + 100)
    return theta0, D1


class TestStageOne:
    def test_closed_form(self):
        theta0, D1 = _setup()
        state = stage1_step(theta0, D1)
        assert state.out_of_zone_frac == 0.0
        H = sigma2(D1.X @ theta0.V.T, SPEC)
        M = (H * D1.y[:, None]).T @ H / D1.n
        expect = theta0.a[:, None] * (state.Wnorm @ M) / theta0.m2
        rel = np.max(np.abs(state.W1 - expect)) / np.max(np.abs(expect))
        assert rel < 1e-10

    def test_h1_identity(self):
        theta0, D1 = _setup()
        state = stage1_step(theta0, D1)
        Xp = sample_sphere(D, 40, seed=9)
        h1 = compute_h1(state, Xp)
        h0 = sigma2(Xp @ theta0.V.T, SPEC)
        assert np.allclose(h1, h0 @ state.M / theta0.m2, atol=1e-12)

    def test_scores_match_h1(self):
        theta0, D1 = _setup()
        state = stage1_step(theta0, D1)
        Xp = sample_sphere(D, 25, seed=10)
        S = state.scores(Xp)
        expect = state.Wnorm @ compute_h1(state, Xp).T
        assert np.allclose(S, expect, atol=1e-10)

    def test_rf_scores_are_h0(self):
        theta0, _ = _setup()
        state = rf_state(theta0)
        Xp = sample_sphere(D, 25, seed=11)
        h0 = sigma2(Xp @ theta0.V.T, SPEC)
        assert np.allclose(state.scores(Xp), state.Wnorm @ h0.T, atol=1e-12)


class TestCalibration:
    def test_ceiling(self):
        theta0, D1 = _setup()
        state = stage1_step(theta0, D1)
        D2 = make_dataset(TARGET, 256, seed=21)
        eta = calibrate_eta(state, D2)
        peak = float(np.max(np.abs(eta * state.scores(D2.X))))
        assert peak == pytest.approx(0.9, abs=1e-6)

    def test_quantile(self):
        theta0, D1 = _setup()
        state = stage1_step(theta0, D1)
        D2 = make_dataset(TARGET, 256, seed=21)
        calibrate_eta(state, D2, quantile=0.99)
        mags = np.abs(state.eta * state.scores(D2.X))
        assert float(np.quantile(mags, 0.99)) == pytest.approx(0.9, rel=1e-6)

    def test_degenerate(self):
        theta0, _ = _setup()
        state = rf_state(theta0)
        state.Wnorm = np.zeros_like(state.Wnorm)
        D2 = make_dataset(TARGET, 64, seed=22)
        with pytest.raises(DegenerateScaleError):
            calibrate_eta(state, D2)


class TestRidgeHead:
    def _trained_state(self, n2=512):
        theta0, D1 = _setup()
        state = stage1_step(theta0, D1)
        D2 = make_dataset(TARGET, n2, seed=31)
        calibrate_eta(state, D2)
        b = reinit_bias(theta0.m1, seed=7)
        return state, b, D2

    def test_gd_reaches_fixed_point(self):
        # At moderate lambda2 the GD iterate matches the closed form.
        state, b, D2 = self._trained_state()
        S = state.scores(D2.X)
        Phi = sigma1(state.eta * state.a0[:, None] * S + b[:, None]).T
        lam = 0.1 * gram_scale(Phi, state.m1) * state.m1 * state.m1 \
            / (2.0 * 1.0)  # a solid ridge level, far from zero
        cfg = TrainConfig(lambda2=lam, T=20_000, solver="gd")
        model = stage2_train(state, b, D2, cfg)
        a_star = ridge_oracle(Phi, D2.y, state.m1, lam)
        num = np.linalg.norm(model.a - a_star)
        den = np.linalg.norm(a_star) + 1e-30
        assert num / den < 1e-6

    def test_auto_matches_gd_at_moderate_lambda(self):
        state, b, D2 = self._trained_state()
        S = state.scores(D2.X)
        Phi = sigma1(state.eta * state.a0[:, None] * S + b[:, None]).T
        lam = 1e-3 * float(np.mean(Phi * Phi))
        auto = stage2_train(state, b, D2, TrainConfig(lambda2=lam, T=50_000))
        gd = stage2_train(state, b, D2,
                          TrainConfig(lambda2=lam, T=50_000, solver="gd"))
        assert np.allclose(auto.a, gd.a, atol=1e-5 * np.linalg.norm(gd.a))

    def test_lambda_to_infinity(self):
        state, b, D2 = self._trained_state()
        model = stage2_train(state, b, D2, TrainConfig(lambda2=1e6))
        assert np.linalg.norm(model.a) < 1e-4

    def test_zero_target(self):
        state, b, D2 = self._trained_state()
        zero = Dataset(X=D2.X, y=np.zeros(D2.n))
        model = stage2_train(state, b, zero, TrainConfig(lambda2=1e-6))
        assert np.linalg.norm(model.a) < 1e-10

    def test_gd_loss_monotone(self):
        state, b, D2 = self._trained_state()
        S = state.scores(D2.X)
        Phi = sigma1(state.eta * state.a0[:, None] * S + b[:, None]).T
        lam = 1e-3 * float(np.mean(Phi * Phi))
        model = stage2_train(state, b, D2,
                             TrainConfig(lambda2=lam, T=500, solver="gd"))
        losses = [row[1] for row in model.trace]
        assert all(l2 <= l1 + 1e-15 for l1, l2 in zip(losses, losses[1:]))

    def test_divergence_detected(self):
        state, b, D2 = self._trained_state()
        cfg = TrainConfig(lambda2=1e-4, eta2=1e9, T=200, solver="gd",
                          divergence_patience=5)
        with pytest.raises(DivergenceError):
            stage2_train(state, b, D2, cfg)

    def test_trace_columns(self):
        state, b, D2 = self._trained_state()
        model = stage2_train(state, b, D2,
                             TrainConfig(lambda2=1e-2, T=50, solver="gd"))
        t, loss, gnorm, anorm = model.trace[0]
        assert t == 0 and loss > 0 and gnorm >= 0 and anorm == 0.0


class TestBaselineAndTransfer:
    def test_rf_path_identity(self):
        # The baseline is exactly the stage-2 code path on the raw features.
        theta0, _ = _setup()
        Dfull = make_dataset(TARGET, 512, seed=41)
        cfg = TrainConfig(lambda2=1e-6)
        direct = rf_baseline_train(theta0, Dfull, cfg, bias_seed=3)
        state = rf_state(theta0)
        calibrate_eta(state, Dfull)
        b = reinit_bias(theta0.m1, seed=3)
        manual = stage2_train(state, b, Dfull, cfg)
        assert direct.kind == "rf" and manual.kind == "rf"
        assert np.allclose(direct.a, manual.a)

    def test_transfer_switches_labels(self):
        theta0, D1 = _setup(n1=1024)
        state = stage1_step(theta0, D1)
        D2 = make_dataset(TARGET, 512, seed=51)
        calibrate_eta(state, D2)
        b = reinit_bias(theta0.m1, seed=7)
        target4 = make_standard_target(D, 4, F, n_cal=1 << 16, seed=1)
        cfg = TrainConfig(lambda2=1e-8)
        same = stage2_train(state, b, D2, cfg)
        moved = stage2_train(state, b, D2, cfg, target2=target4)
        assert not np.allclose(same.a, moved.a)
        # Transfer with the original target is the identity code path.
        boring = stage2_train(state, b, D2, cfg, target2=TARGET)
        assert np.allclose(same.a, boring.a)

    def test_test_error_fields(self):
        theta0, D1 = _setup()
        state = stage1_step(theta0, D1)
        D2 = make_dataset(TARGET, 256, seed=61)
        calibrate_eta(state, D2)
        b = reinit_bias(theta0.m1, seed=7)
        model = stage2_train(state, b, D2, TrainConfig(lambda2=1e-6))
        err = eval_test_error(model, TARGET, 2000, seed=71)
        assert err["mae"] ** 2 <= err["mse"] + 1e-12
        assert err["mae_stderr"] > 0 and err["n_test"] == 2000
