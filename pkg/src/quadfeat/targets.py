"""Polynomial link functions, hierarchical targets, and their diagnostics.

A link g is stored as symmetric coefficient tensors T_0..T_p with
g(z) = sum_k <T_k, z^(x)k>.  A target composes a link with a feature set and
standardization statistics so that f(x) = (g_raw(p(x)) - shift) / scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSet, eval_features
from .sphere import MCEstimate, gegenbauer, harmonic_dim, sample_sphere

ANALYTIC_HESSIAN_MAX_DEGREE = 6


class ScaleUnderflowError(ValueError):
    """Raised when the calibration variance is too small to standardize."""


def symmetrize(T: np.ndarray) -> np.ndarray:
    """Average a tensor over all permutations of its axes."""
    k = T.ndim
    if k <= 1:
        return np.asarray(T, dtype=float)
    out = np.zeros_like(T, dtype=float)
    for perm in itertools.permutations(range(k)):
        out += np.transpose(T, perm)
    return out / math.factorial(k)


@dataclass(frozen=True)
class LinkPolynomial:
    """g(z) = sum_k <T_k, z^(x)k>; tensors[k] has shape (r,)*k."""

    r: int
    tensors: tuple[np.ndarray, ...]

    def __post_init__(self):
        tensors = tuple(
            symmetrize(np.asarray(T, dtype=float)) for T in self.tensors
        )
        for k, T in enumerate(tensors):
            if T.shape != (self.r,) * k:
                raise ValueError(f"tensor {k} has shape {T.shape}")
        object.__setattr__(self, "tensors", tensors)

    @property
    def degree(self) -> int:
        for k in range(len(self.tensors) - 1, -1, -1):
            if np.any(self.tensors[k] != 0.0):
                return k
        return 0

    def scaled(self, shift: float, scale: float) -> "LinkPolynomial":
        """The link (g - shift) / scale."""
        tensors = [T / scale for T in self.tensors]
        tensors[0] = tensors[0] - shift / scale
        return LinkPolynomial(r=self.r, tensors=tuple(tensors))


def link_from_monomial_powers(r: int, p: int) -> LinkPolynomial:
    """The raw link g(z) = sum_k z_k^p used by the standard target family."""
    tensors: list[np.ndarray] = [np.zeros((r,) * k) for k in range(p + 1)]
    for k in range(r):
        tensors[p][(k,) * p] = 1.0
    return LinkPolynomial(r=r, tensors=tuple(tensors))


def _nonzero_terms(T: np.ndarray):
    flat = np.flatnonzero(T)
    for pos in flat:
        yield np.unravel_index(pos, T.shape), T.flat[pos]


def eval_link(g: LinkPolynomial, Z: np.ndarray) -> np.ndarray:
    """Evaluate g row-wise on Z of shape (n, r)."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.shape[1] != g.r:
        raise ValueError(f"Z has {Z.shape[1]} columns, link expects {g.r}")
    out = np.full(Z.shape[0], float(g.tensors[0]))
    for T in g.tensors[1:]:
        for idx, coeff in _nonzero_terms(T):
            term = np.full(Z.shape[0], coeff)
            for i in idx:
                term *= Z[:, i]
            out += term
    return out


def grad_link(g: LinkPolynomial, Z: np.ndarray) -> np.ndarray:
    """Gradient of g row-wise; returns (n, r)."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    out = np.zeros((n, g.r))
    for k, T in enumerate(g.tensors):
        if k == 0:
            continue
        # symmetric T: d/dz_a <T, z^k> = k * T[a, z, ..., z]
        for idx, coeff in _nonzero_terms(T):
            term = np.full(n, k * coeff)
            for i in idx[1:]:
                term *= Z[:, i]
            out[:, idx[0]] += term
    return out


def hessian_link(g: LinkPolynomial, Z: np.ndarray) -> np.ndarray:
    """Pointwise Hessian of g; returns (n, r, r)."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    out = np.zeros((n, g.r, g.r))
    for k, T in enumerate(g.tensors):
        if k < 2:
            continue
        for idx, coeff in _nonzero_terms(T):
            term = np.full(n, k * (k - 1) * coeff)
            for i in idx[2:]:
                term *= Z[:, i]
            out[:, idx[0], idx[1]] += term
    return out


@dataclass(frozen=True)
class HessianMatrix:
    """Expected Hessian H = E_{z~N(0,I)}[grad^2 g(z)] with its spectrum."""

    matrix: np.ndarray
    lambda_min: float
    stderr: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, H: np.ndarray, stderr=None) -> "HessianMatrix":
        H = 0.5 * (H + H.T)
        lam = float(np.linalg.eigvalsh(H)[0])
        return cls(matrix=H, lambda_min=lam, stderr=stderr)


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def expected_hessian(
    g: LinkPolynomial,
    mode: str = "analytic",
    n_mc: int = 1_000_000,
    seed: int = 0,
    chunk: int = 1 << 16,
) -> HessianMatrix:
    """E_{z~N(0,I_r)}[grad^2 g(z)] via Gaussian moments or Monte Carlo.

    The analytic route contracts each tensor against the exact even Gaussian
    moments (k-1)!! Sym(I^(x)k/2); only links of degree <= 6 are supported
    there.  The MC route averages the pointwise Hessian (with symmetrization)
    and attaches an entrywise standard-error matrix.
    """
    if mode == "analytic":
        if g.degree > ANALYTIC_HESSIAN_MAX_DEGREE:
            raise ValueError(
                f"analytic mode supports degree <= {ANALYTIC_HESSIAN_MAX_DEGREE}, "
                f"got {g.degree}"
            )
        H = np.zeros((g.r, g.r))
        for k, T in enumerate(g.tensors):
            if k < 2 or k % 2 != 0:
                continue  # odd Gaussian moments vanish
            traced = k * (k - 1) * _double_factorial(k - 3) * T
            for _ in range((k - 2) // 2):
                traced = np.trace(traced, axis1=-2, axis2=-1)
            H += traced
        return HessianMatrix.from_matrix(H)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    total = np.zeros((g.r, g.r))
    total_sq = np.zeros((g.r, g.r))
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        Z = rng.standard_normal((m, g.r))
        Hs = hessian_link(g, Z)
        Hs = 0.5 * (Hs + np.transpose(Hs, (0, 2, 1)))
        total += Hs.sum(axis=0)
        total_sq += (Hs * Hs).sum(axis=0)
        done += m
    mean = total / n_mc
    var = np.maximum(total_sq / n_mc - mean * mean, 0.0)
    return HessianMatrix.from_matrix(mean, stderr=np.sqrt(var / n_mc))


@dataclass(frozen=True)
class Target:
    """f(x) = (g_raw(p(x)) - shift) / scale over a feature set."""

    link: LinkPolynomial  # raw (unstandardized) link
    features: FeatureSet
    shift: float
    scale: float
    provenance: dict = field(default_factory=dict)
    degenerate_p2: bool = False  # linear links: P_2 dominates (Assumption 2.3 fails)

    @property
    def d(self) -> int:
        return self.features.d

    @property
    def standardized_link(self) -> LinkPolynomial:
        return self.link.scaled(self.shift, self.scale)

    def eval(self, X: np.ndarray) -> np.ndarray:
        Z = eval_features(self.features, X)
        return (eval_link(self.link, Z) - self.shift) / self.scale

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "link": [T.ravel().tolist() for T in self.link.tensors],
                "r": self.link.r,
                "features": self.features.to_json(),
                "shift": self.shift,
                "scale": self.scale,
                "provenance": self.provenance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Target":
        import json

        doc = json.loads(text)
        r = doc["r"]
        tensors = tuple(
            np.array(flat).reshape((r,) * k) for k, flat in enumerate(doc["link"])
        )
        return cls(
            link=LinkPolynomial(r=r, tensors=tensors),
            features=FeatureSet.from_json(doc["features"]),
            shift=doc["shift"],
            scale=doc["scale"],
            provenance=doc.get("provenance", {}),
            degenerate_p2=doc.get("provenance", {}).get("degenerate_p2", False),
        )


def make_standard_target(
    d: int,
    p: int,
    F: FeatureSet,
    n_cal: int = 1 << 20,
    seed: int = 0,
) -> Target:
    """The standardized power-sum target: raw f = sum_k (x'A_k x)^p.

    Shift and scale come from a fixed-seed calibration draw of n_cal sphere
    samples, so the construction is bit-reproducible.  p = 1 constructs but is
    flagged degenerate (the target is then a pure degree-2 harmonic).
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    link = link_from_monomial_powers(F.r, p)
    X = sample_sphere(d, n_cal, seed)
    vals = eval_link(link, eval_features(F, X))
    shift = float(np.mean(vals))
    var = float(np.var(vals))
    if var < 1e-12:
        raise ScaleUnderflowError(f"calibration variance {var:.3e} below 1e-12")
    return Target(
        link=link,
        features=F,
        shift=shift,
        scale=math.sqrt(var),
        provenance={"d": d, "p": p, "n_cal": n_cal, "seed": seed,
                    "degenerate_p2": p == 1},
        degenerate_p2=(p == 1),
    )


def projection_norm(
    f: Target, k: int, n_pairs: int, seed: int, chunk: int = 1 << 17
) -> MCEstimate:
    """Estimate ||P_k f||^2_{L2} via B(d,k) * E[f(x) f(x') Q_k(<x,x'>)].

    x, x' are i.i.d. pairs; the reproducing-kernel identity makes the average
    unbiased for the squared projection norm.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    d = f.d
    B = harmonic_dim(d, k)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_pairs:
        m = min(chunk, n_pairs - done)
        X = rng.standard_normal((m, d))
        X *= (math.sqrt(d) / np.linalg.norm(X, axis=1))[:, None]
        X2 = rng.standard_normal((m, d))
        X2 *= (math.sqrt(d) / np.linalg.norm(X2, axis=1))[:, None]
        vals = B * f.eval(X) * f.eval(X2) * gegenbauer(k, d, np.sum(X * X2, axis=1))
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        done += m
    mean = total / n_pairs
    var = max(total_sq / n_pairs - mean * mean, 0.0)
    return MCEstimate(mean, math.sqrt(var / n_pairs), n_pairs)


def hermite_target_check(
    f: Target, n_mc: int = 200_000, seed: int = 0
) -> dict:
    """One structured assumption report: mean, P2-norm estimate, lambda_min(H).

    Used by the experiment runner to warn when a target violates the
    preprocessing or well-conditioned-Hessian assumptions.
    """
    d = f.d
    X = sample_sphere(d, n_mc, seed)
    vals = f.eval(X)
    mean = float(np.mean(vals))
    p2 = projection_norm(f, 2, n_mc, seed + 1)
    g_std = f.standardized_link
    if g_std.degree <= ANALYTIC_HESSIAN_MAX_DEGREE:
        H = expected_hessian(g_std, mode="analytic")
    else:
        H = expected_hessian(g_std, mode="monte_carlo", n_mc=n_mc, seed=seed + 2)
    p2_bound = f.features.kappa1 / math.sqrt(d)  # scale reference, not a gate
    return {
        "mean": mean,
        "p2_norm_sq": p2.estimate,
        "p2_norm_sq_stderr": p2.stderr,
        "lambda_min_hessian": H.lambda_min,
        "sqrt_r_lambda_min": math.sqrt(f.link.r) * H.lambda_min,
        "degenerate_p2": bool(
            f.degenerate_p2 or p2.estimate > max(0.25, 5 * p2.stderr + p2_bound)
        ),
    }
