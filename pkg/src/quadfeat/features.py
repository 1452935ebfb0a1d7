"""Orthonormal quadratic feature sets and their evaluation.

A feature set is r symmetric traceless d x d matrices A_1..A_r whose quadratic
forms x'A_k x have unit second moment and vanishing cross-moments under the
uniform sphere distribution.  The natural inner product here is
<A, B>_feat = 2d/(d+2) * <A, B>_F, under which the set is orthonormal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .sphere import quadratic_moment

GRAM_TOL = 1e-9
PIVOT_TOL = 1e-10


class RankDeficiencyError(ValueError):
    """Raised when candidate features collapse after trace removal."""


def feature_inner(A: np.ndarray, B: np.ndarray, d: int) -> float:
    """The sphere second-moment inner product for traceless symmetric matrices."""
    return 2.0 * d / (d + 2) * float(np.sum(A * B))


@dataclass(frozen=True)
class FeatureSet:
    d: int
    r: int
    matrices: np.ndarray  # (r, d, d), symmetric traceless
    kappa1: float  # recorded sqrt(d) * max_k ||A_k||_op, diagnostic only

    @property
    def diagonals(self) -> np.ndarray | None:
        """(r, d) diagonals when every matrix is diagonal, else None."""
        diag = np.einsum("kii->ki", self.matrices)
        dense_part = self.matrices - diag[:, :, None] * np.eye(self.d)
        if np.all(dense_part == 0.0):
            return diag
        return None

    def validate(self) -> None:
        """Check the construction invariants; raises ValueError on failure."""
        for k in range(self.r):
            A = self.matrices[k]
            if not np.allclose(A, A.T):
                raise ValueError(f"feature matrix {k} is not symmetric")
            if abs(np.trace(A)) > 1e-12 * self.d:
                raise ValueError(f"feature matrix {k} is not traceless")
        G = self.gram()
        if np.max(np.abs(G - np.eye(self.r))) > GRAM_TOL:
            raise ValueError("feature Gram deviates from the identity")

    def gram(self) -> np.ndarray:
        G = np.empty((self.r, self.r))
        for a in range(self.r):
            for b in range(self.r):
                G[a, b] = quadratic_moment(self.matrices[a], self.matrices[b], self.d)
        return G

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "r": self.r,
                "matrices": [A.ravel().tolist() for A in self.matrices],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureSet":
        doc = json.loads(text)
        d, r = doc["d"], doc["r"]
        mats = np.array([np.array(m).reshape(d, d) for m in doc["matrices"]])
        return cls(d=d, r=r, matrices=mats, kappa1=_kappa1(mats, d))


def _kappa1(matrices: np.ndarray, d: int) -> float:
    op = max(float(np.linalg.norm(A, ord=2)) for A in matrices)
    return math.sqrt(d) * op


_SIGN_BLOCKS = (
    (1, 1, -1, -1),
    (1, -1, 1, -1),
    (1, -1, -1, 1),
)


def make_sign_features(d: int) -> FeatureSet:
    """The three +-1 block-pattern diagonal features, r = 3.

    A_k = diag(c * a_k) with four equal sign blocks of length d/4 and
    c = sqrt((d+2)/(2 d^2)), making the set exactly orthonormal.
    """
    if d % 4 != 0:
        raise ValueError(f"d must be divisible by 4, got {d}")
    c = math.sqrt((d + 2) / (2.0 * d * d))
    block = d // 4
    mats = np.zeros((3, d, d))
    for k, signs in enumerate(_SIGN_BLOCKS):
        diag = np.repeat(np.array(signs, dtype=float), block) * c
        np.fill_diagonal(mats[k], diag)
    return FeatureSet(d=d, r=3, matrices=mats, kappa1=_kappa1(mats, d))


def orthonormalize(raw: list[np.ndarray]) -> FeatureSet:
    """Trace-remove then Gram-Schmidt a list of symmetric matrices.

    Orthonormalization runs under the feature inner product, so the output
    satisfies the full feature-set contract.  Raises RankDeficiencyError when
    an input collapses (pivot below tolerance relative to the largest norm).
    """
    if not raw:
        raise ValueError("need at least one matrix")
    d = raw[0].shape[0]
    work = []
    for A in raw:
        A = np.asarray(A, dtype=float)
        if A.shape != (d, d):
            raise ValueError("all matrices must share one dimension")
        A = 0.5 * (A + A.T)
        work.append(A - (np.trace(A) / d) * np.eye(d))
    max_norm = max(math.sqrt(max(feature_inner(A, A, d), 0.0)) for A in work)
    if max_norm == 0.0:
        raise RankDeficiencyError("all inputs vanish after trace removal")
    out: list[np.ndarray] = []
    for A in work:
        for B in out:
            A = A - feature_inner(A, B, d) * B
        norm = math.sqrt(max(feature_inner(A, A, d), 0.0))
        if norm < PIVOT_TOL * max_norm:
            raise RankDeficiencyError(
                f"pivot {norm:.3e} below tolerance after trace removal"
            )
        out.append(A / norm)
    mats = np.array(out)
    return FeatureSet(d=d, r=len(out), matrices=mats, kappa1=_kappa1(mats, d))


def eval_features(F: FeatureSet, X: np.ndarray) -> np.ndarray:
    """Evaluate p(x) = [x'A_1 x, ..., x'A_r x] row-wise; returns (n, r).

    Diagonal feature sets use the weighted-sum-of-squares fast path.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != F.d:
        raise ValueError(f"X has dimension {X.shape[1]}, features have {F.d}")
    if X.shape[0] == 0:
        return np.zeros((0, F.r))
    diag = F.diagonals
    if diag is not None:
        return (X * X) @ diag.T
    out = np.empty((X.shape[0], F.r))
    for k in range(F.r):
        out[:, k] = np.sum((X @ F.matrices[k]) * X, axis=1)
    return out
