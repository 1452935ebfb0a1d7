"""Kernels, the feature-reconstruction matrix, and Stein-pair diagnostics.

The learned representation h1 admits a linear read-out of the hidden quadratic
features: B = (B(d,2)^2 d(d-1) / c2^2) * (1/m2) H^{-1} P' with P the matrix of
feature values at the inner weights.  The T / T* operator pair quantifies how
close the population feature extractor is to its idealized projection onto the
feature span weighted by the expected Hessian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FeatureSet, eval_features
from .network import ActivationSpec, sigma2
from .sphere import gegenbauer, harmonic_dim, sample_sphere
from .targets import HessianMatrix, Target
from .training import StageOneState, compute_h1


class SingularHessianError(ValueError):
    """Expected Hessian is numerically singular; B* cannot be built."""


@dataclass(frozen=True)
class KernelEstimate:
    empirical: float
    analytic: float

    @property
    def deviation(self) -> float:
        return abs(self.empirical - self.analytic)


def kernel_analytic(t, d: int, spec: ActivationSpec):
    """Infinite-inner-width kernel sum_i c_i^2 Q_i(t) / B(d, i)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for deg, c in spec.coeffs:
        out = out + (c * c / harmonic_dim(d, deg)) * gegenbauer(deg, d, t)
    return out if out.shape else float(out)


def kernel_pair(V: np.ndarray, x: np.ndarray, xp: np.ndarray,
                spec: ActivationSpec) -> KernelEstimate:
    """Empirical m2-neuron kernel against its analytic Gegenbauer series."""
    m2, d = V.shape
    emp = float(sigma2(V @ x, spec) @ sigma2(V @ xp, spec)) / m2
    ana = kernel_analytic(float(x @ xp), d, spec)
    return KernelEstimate(empirical=emp, analytic=ana)


@dataclass(frozen=True)
class ReconMatrix:
    B: np.ndarray          # (r, m2)
    scale: float           # B(d,2)^2 d(d-1) / c2^2
    H: np.ndarray
    d: int
    r: int
    m2: int

    @property
    def op_norm(self) -> float:
        return float(np.linalg.norm(self.B, ord=2))


def build_Bstar(F: FeatureSet, H: HessianMatrix, V: np.ndarray,
                spec: ActivationSpec) -> ReconMatrix:
    """The reconstruction matrix B = scale * (1/m2) H^{-1} P'."""
    if spec.c2 == 0.0:
        raise ValueError("inner activation has no degree-2 component (c2 = 0)")
    if abs(H.lambda_min) <= 1e-8 or not np.isfinite(np.linalg.cond(H.matrix)):
        raise SingularHessianError(
            f"lambda_min(H) = {H.lambda_min:.3e} too small to invert"
        )
    d = F.d
    m2 = V.shape[0]
    P = eval_features(F, V)  # (m2, r), row j = p(v_j)
    scale = harmonic_dim(d, 2) ** 2 * d * (d - 1) / (spec.c2 ** 2)
    B = scale / m2 * np.linalg.solve(H.matrix, P.T)
    return ReconMatrix(B=B, scale=scale, H=H.matrix, d=d, r=F.r, m2=m2)


def reconstruct_features(B: ReconMatrix, state: StageOneState,
                         X_test: np.ndarray) -> np.ndarray:
    """Row i = B h1(x_i); returns (n, r)."""
    if state.m2 != B.m2:
        raise ValueError("reconstruction matrix and state disagree on m2")
    H1 = compute_h1(state, X_test)
    return H1 @ B.B.T


def variance_match(recon: np.ndarray, true: np.ndarray) -> np.ndarray:
    """Center and rescale each reconstructed column to the true column variance."""
    out = recon - recon.mean(axis=0)
    std = out.std(axis=0)
    std[std == 0.0] = 1.0
    return out * (true.std(axis=0) / std) + true.mean(axis=0)


def feature_correlations(recon: np.ndarray, true: np.ndarray) -> np.ndarray:
    """Per-feature Pearson correlation between reconstruction and truth."""
    r = recon.shape[1]
    out = np.empty(r)
    for k in range(r):
        out[k] = float(np.corrcoef(recon[:, k], true[:, k])[0, 1])
    return out


def t_operator_mc(f: Target, W: np.ndarray, n: int, seed: int,
                  chunk: int = 1 << 15) -> tuple[np.ndarray, np.ndarray]:
    """MC estimate of T(W) = E[f(x) <W, xx'-I> (xx'-I)] with stderr matrix."""
    W = np.asarray(W, dtype=float)
    d = W.shape[0]
    rng = np.random.default_rng(seed)
    trW = float(np.trace(W))
    S1 = np.zeros((d, d))       # sum g x x'
    S2 = np.zeros((d, d))       # sum g^2 (x^2)(x^2)'
    s1g = 0.0                   # sum g
    s2g = 0.0                   # sum g^2
    s2diag = np.zeros(d)        # sum g^2 x_a^2
    done = 0
    while done < n:
        m = min(chunk, n - done)
        X = rng.standard_normal((m, d))
        X *= (math.sqrt(d) / np.linalg.norm(X, axis=1))[:, None]
        g = f.eval(X) * (np.sum((X @ W) * X, axis=1) - trW)
        g2 = g * g
        S1 += (X * g[:, None]).T @ X
        Xsq = X * X
        S2 += (Xsq * g2[:, None]).T @ Xsq
        s1g += float(np.sum(g))
        s2g += float(np.sum(g2))
        s2diag += g2 @ Xsq
        done += m
    est = S1 / n - (s1g / n) * np.eye(d)
    # term_ab = g (x_a x_b - delta_ab); E[term^2] off-diag is E[g^2 x_a^2 x_b^2],
    # on-diag E[g^2 (x_a^2 - 1)^2]
    second = S2 / n
    second[np.diag_indices(d)] += (s2g - 2.0 * s2diag) / n
    stderr = np.sqrt(np.maximum(second - est * est, 0.0) / n)
    return est, stderr


def t_star(F: FeatureSet, H: HessianMatrix, W: np.ndarray) -> np.ndarray:
    """Idealized projection of the degree-4 extractor onto the feature span.

    T*(W) = sum_k <W, A_k>/||A_k||_F^2 * sum_j H_kj A_j / ||A_j||_F^2.

    Both sides carry a 1/||A||_F^2: the features are normalized to unit
    second moment on the sphere (||A_k||_F^2 = (d+2)/(2d), not 1), and the
    Hessian identity <T(A_i), A_j> ~= H_ij pins the output-side coefficient
    to H_ij / ||A_j||_F^2.  With this normalization ||T(W) - T*(W)||_F
    decays in d; dropping it leaves an O(1) gap.
    """
    W = np.asarray(W, dtype=float)
    out = np.zeros_like(W)
    norms = np.array([float(np.sum(A * A)) for A in F.matrices])
    for k in range(F.r):
        A_k = F.matrices[k]
        coef = float(np.sum(W * A_k)) / norms[k]
        out += coef * np.einsum("j,jab->ab", H.matrix[k] / norms, F.matrices)
    return out
