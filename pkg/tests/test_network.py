"""Three-layer architecture: activations, initialization, serialization."""

import math

import numpy as np
import pytest

import quadfeat.network as network
from quadfeat.network import (ActivationSpec, NetworkParams, default_epsilon,
                              forward, h0_matrix, init_network, iter_h0_blocks,
                              load_network, save_network, sigma1, sigma1_prime,
                              sigma2)
from quadfeat.sphere import gegenbauer, sample_sphere


class TestSigma1:
    def test_quadratic_zone(self):
        t = np.array([-0.9, -0.5, 0.0, 0.5, 0.9])
        assert np.allclose(sigma1(t), t * t)

    def test_linear_tails(self):
        t = np.array([-3.0, -1.5, 1.5, 3.0])
        assert np.allclose(sigma1(t), 2 * np.abs(t) - 1)

    def test_continuity_at_one(self):
        eps = 1e-9
        for s in (-1.0, 1.0):
            inside = sigma1(np.array([s * (1 - eps)]))[0]
            outside = sigma1(np.array([s * (1 + eps)]))[0]
            assert abs(inside - outside) < 1e-8

    def test_derivative(self):
        t = np.linspace(-3, 3, 601)
        num = (sigma1(t + 1e-7) - sigma1(t - 1e-7)) / 2e-7
        mask = np.abs(np.abs(t) - 1.0) > 1e-3  # skip the kink itself
        assert np.allclose(sigma1_prime(t)[mask], num[mask], atol=1e-5)


class TestSigma2:
    def test_default_is_q2(self):
        d = 8
        spec = ActivationSpec(d=d)
        t = np.linspace(-d, d, 33)
        assert np.allclose(sigma2(t, spec), gegenbauer(2, d, t), atol=1e-12)

    def test_c2(self):
        spec = ActivationSpec(d=8)
        assert spec.c2 == pytest.approx(1.0)

    def test_custom_coeffs(self):
        d = 8
        spec = ActivationSpec(d=d, coeffs=((2, 0.5), (4, 0.25)))
        t = np.linspace(-d, d, 17)
        expect = 0.5 * gegenbauer(2, d, t) + 0.25 * gegenbauer(4, d, t)
        assert np.allclose(sigma2(t, spec), expect, atol=1e-12)


class TestInit:
    def test_symmetric_zero_output(self):
        # 100 random inputs, 5 seeds: |f(x; theta0)| below 1e-12.
        d = 8
        spec = ActivationSpec(d=d)
        X = sample_sphere(d, 100, seed=0)
        for seed in range(5):
            theta = init_network(d, 64, 256, 1e-2, seed=seed, spec=spec)
            assert np.max(np.abs(forward(theta, X))) < 1e-12

    def test_pairing_structure(self):
        theta = init_network(8, 16, 64, 1e-2, seed=1, spec=ActivationSpec(d=8))
        m1 = 16
        for j in range(m1 // 2):
            assert theta.a[j] == -theta.a[m1 - 1 - j]
            assert np.array_equal(theta.W[j], theta.W[m1 - 1 - j])
        assert np.all(theta.b == 0.0)
        assert set(np.unique(theta.a)) == {-1.0, 1.0}

    def test_odd_m1_rejected(self):
        with pytest.raises(ValueError):
            init_network(8, 15, 64, 1e-2, seed=0, spec=ActivationSpec(d=8))

    def test_rows_on_sphere(self):
        theta = init_network(8, 8, 128, 1e-2, seed=2, spec=ActivationSpec(d=8))
        assert np.allclose(np.linalg.norm(theta.V, axis=1), math.sqrt(8),
                           atol=1e-12)

    def test_default_epsilon_decreasing_in_m2(self):
        spec = ActivationSpec(d=8)
        eps = [default_epsilon(spec, 1024, 64, m2) for m2 in (256, 1024, 4096)]
        assert eps[0] > eps[1] > eps[2] > 0


class TestTiling:
    def test_budget_invariance(self):
        d = 8
        spec = ActivationSpec(d=d)
        V = sample_sphere(d, 128, seed=4)
        X = sample_sphere(d, 500, seed=5)
        full = h0_matrix(V, X, spec)
        old = network.H0_TILE
        try:
            network.H0_TILE = 1 << 10  # force many small blocks
            tiled = np.vstack([h for _, h in iter_h0_blocks(V, X, spec)])
        finally:
            network.H0_TILE = old
        assert np.array_equal(full, tiled)

    def test_block_slices_cover(self):
        d = 8
        spec = ActivationSpec(d=d)
        V = sample_sphere(d, 32, seed=6)
        X = sample_sphere(d, 77, seed=7)
        seen = []
        for sl, h in iter_h0_blocks(V, X, spec, budget=1 << 8):
            assert h.shape[1] == 32
            seen.extend(range(sl.start, sl.stop))
        assert seen == list(range(77))


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        theta = init_network(8, 16, 64, 1e-2, seed=1, spec=ActivationSpec(d=8))
        path = tmp_path / "net.bin"
        save_network(theta, path)
        loaded = load_network(path)
        assert isinstance(loaded, NetworkParams)
        for name in ("V", "W", "a", "b"):
            assert np.array_equal(getattr(loaded, name), getattr(theta, name))
        assert loaded.epsilon == theta.epsilon
        assert loaded.spec.coeffs == theta.spec.coeffs

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a network container at all")
        with pytest.raises(ValueError):
            load_network(path)
