"""Quadratic feature sets: construction, orthonormality, evaluation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadfeat.features import (FeatureSet, RankDeficiencyError, eval_features,
                               feature_inner, make_sign_features,
                               orthonormalize)
from quadfeat.sphere import quadratic_moment, sample_sphere


class TestSignFeatures:
    @pytest.mark.parametrize("d", [4, 8, 16, 32])
    def test_traceless(self, d):
        F = make_sign_features(d)
        for A in F.matrices:
            assert np.trace(A) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("d", [4, 8, 16])
    def test_unit_second_moment(self, d):
        # E[(x'A_k x)^2] = 1 exactly by the choice c = sqrt((d+2)/(2 d^2)).
        F = make_sign_features(d)
        for A in F.matrices:
            assert quadratic_moment(A, A) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("d", [4, 8, 16])
    def test_gram_identity(self, d):
        F = make_sign_features(d)
        assert np.allclose(F.gram(), np.eye(3), atol=1e-12)

    def test_d_not_divisible(self):
        with pytest.raises(ValueError):
            make_sign_features(10)

    def test_diagonal_fast_path(self):
        F = make_sign_features(8)
        assert F.diagonals is not None
        X = sample_sphere(8, 100, seed=0)
        slow = np.stack([np.einsum("ni,ij,nj->n", X, A, X)
                         for A in F.matrices], axis=1)
        assert np.allclose(eval_features(F, X), slow, atol=1e-12)

    def test_empirical_moments(self):
        F = make_sign_features(16)
        X = sample_sphere(16, 200_000, seed=3)
        P = eval_features(F, X)
        assert np.max(np.abs(P.mean(axis=0))) < 0.02
        assert np.max(np.abs(np.cov(P, rowvar=False) - np.eye(3))) < 0.03


class TestOrthonormalize:
    def test_random_matrices(self):
        d = 8
        rng = np.random.default_rng(7)
        raw = [rng.standard_normal((d, d)) for _ in range(3)]
        raw = [(A + A.T) / 2 for A in raw]
        F = orthonormalize(raw)
        assert np.allclose(F.gram(), np.eye(3), atol=1e-9)
        for A in F.matrices:
            assert abs(np.trace(A)) < 1e-10

    def test_rank_deficiency(self):
        d = 8
        rng = np.random.default_rng(9)
        A = rng.standard_normal((d, d))
        A = (A + A.T) / 2
        with pytest.raises(RankDeficiencyError):
            orthonormalize([A, 2.0 * A])

    def test_identity_component_removed(self):
        # A pure multiple of I has no traceless part: rank deficient.
        with pytest.raises(RankDeficiencyError):
            orthonormalize([np.eye(8)])


class TestFeatureInner:
    @given(st.integers(0, 2), st.integers(0, 2))
    @settings(max_examples=9, deadline=None)
    def test_matches_quadratic_moment_for_traceless(self, i, j):
        # For traceless matrices the sphere moment reduces to the inner product.
        F = make_sign_features(8)
        assert feature_inner(F.matrices[i], F.matrices[j], 8) == \
            pytest.approx(quadratic_moment(F.matrices[i], F.matrices[j]),
                          abs=1e-12)


class TestSerialization:
    def test_roundtrip(self):
        F = make_sign_features(8)
        G = FeatureSet.from_json(F.to_json())
        assert G.d == F.d and G.r == F.r
        assert np.array_equal(G.matrices, F.matrices)
        assert G.kappa1 == pytest.approx(F.kappa1)

    def test_validate_rejects_asymmetric(self):
        F = make_sign_features(8)
        bad = np.array(F.matrices)
        bad[0, 0, 1] = 0.5  # break symmetry
        with pytest.raises(ValueError):
            FeatureSet(d=8, r=3, matrices=bad, kappa1=F.kappa1).validate()


class TestEquivariance:
    def test_feature_order_permutes_columns(self):
        F = make_sign_features(8)
        perm = [2, 0, 1]
        G = FeatureSet(d=8, r=3, matrices=F.matrices[perm], kappa1=F.kappa1)
        X = sample_sphere(8, 50, seed=1)
        assert np.allclose(eval_features(G, X), eval_features(F, X)[:, perm])
