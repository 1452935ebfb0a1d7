"""Spherical sampling, Gegenbauer polynomials, and moment formulas.

Everything here works on the sphere of radius sqrt(d) in d dimensions.  The
Gegenbauer family Q_k is normalized so that Q_k(d) = 1, which makes it the
reproducing kernel of the degree-k spherical-harmonic subspace after dividing
by the subspace dimension B(d, k).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

MAX_DEGREE = 16

_DEBUG = bool(os.environ.get("QUADFEAT_DEBUG"))


class MCEstimate(NamedTuple):
    """A Monte-Carlo estimate together with its standard error.

    Callers decide what tolerance to apply; estimators never do.
    """

    estimate: float
    stderr: float
    n: int


def sample_sphere(d: int, n: int, seed: int) -> np.ndarray:
    """Draw n i.i.d. points uniformly on the sphere of radius sqrt(d).

    Gaussian vectors are normalized and rescaled; an exactly-zero draw is
    resampled.  Deterministic given (d, n, seed).
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    norms = np.linalg.norm(X, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        X[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(X, axis=1)
    return X * (math.sqrt(d) / norms)[:, None]


def gegenbauer(k: int, d: int, t):
    """Evaluate Q_k(t) for the d-dimensional Gegenbauer family.

    Degrees 0..2 use the explicit formulas; higher degrees use the upward
    three-term recursion, which is stable for |t| <= d at the small degrees
    used here.  Accepts scalars or arrays in t.
    """
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")
    if k > MAX_DEGREE:
        raise ValueError(f"degree capped at {MAX_DEGREE}, got {k}")
    if k >= 2 and d < 3:
        raise ValueError(f"d must be >= 3 for degree {k}, got d={d}")
    t = np.asarray(t, dtype=float)
    if _DEBUG and t.size and np.max(np.abs(t)) > d:
        import logging

        logging.getLogger(__name__).warning(
            "gegenbauer evaluated outside [-d, d]: max |t| = %g, d = %d",
            float(np.max(np.abs(t))), d,
        )
    if k == 0:
        out = np.ones_like(t)
        return out if out.shape else float(out)
    if k == 1:
        out = t / d
        return out if out.shape else float(out)
    q_prev = t / d
    q = (t * t - d) / (d * (d - 1))
    # (t/d) Q_j = j/(2j+d-2) Q_{j-1} + (j+d-2)/(2j+d-2) Q_{j+1}
    for j in range(2, k):
        q, q_prev = ((2 * j + d - 2) / (j + d - 2)) * (
            (t / d) * q - (j / (2 * j + d - 2)) * q_prev
        ), q
    return q if q.shape else float(q)


def harmonic_dim(d: int, k: int) -> int:
    """Dimension B(d, k) of the degree-k spherical-harmonic subspace.

    Exact integer arithmetic: ((2k+d-2)/k) * C(k+d-3, k-1) for k >= 1.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return 1
    num = (2 * k + d - 2) * math.comb(k + d - 3, k - 1)
    if num % k != 0:
        raise ArithmeticError(f"B({d},{k}) is not an integer")  # pragma: no cover
    return num // k


def _pochhammer(z: Fraction, k: int) -> Fraction:
    out = Fraction(1)
    for i in range(k):
        out *= z + i
    return out


def _linearization_parts(i: int, j: int, k: int, d: int) -> tuple[Fraction, Fraction]:
    """Exact (c, b) pair for the Q_i * Q_j product formula at index k.

    c is the Pochhammer ratio bounded by Lemma-style 1/(d-2)_k; b adds the
    (2(i+j-2k)+d-2)/(d-2) prefactor.
    """
    half = Fraction(d - 2, 2)
    num = (
        _pochhammer(half, k)
        * _pochhammer(half, i - k)
        * _pochhammer(half, j - k)
        * _pochhammer(Fraction(d - 2), i + j - k)
    )
    den = (
        _pochhammer(Fraction(d - 2), i)
        * _pochhammer(Fraction(d - 2), j)
        * _pochhammer(Fraction(d, 2), i + j - k)
    )
    c = num / den
    b = Fraction(2 * (i + j - 2 * k) + d - 2, d - 2) * c
    return c, b


@dataclass(frozen=True)
class LinearizationTable:
    """Coefficients of Q_i * Q_j = sum_k coeff[k] * Q_{i+j-2k}."""

    i: int
    j: int
    d: int
    coefficients: dict[int, float]
    c_parts: dict[int, float] = field(default_factory=dict)

    def degree(self, k: int) -> int:
        return self.i + self.j - 2 * k

    def evaluate(self, t):
        """Evaluate the right-hand side sum_k coeff[k] Q_{i+j-2k}(t)."""
        out = np.zeros_like(np.asarray(t, dtype=float))
        for k, coeff in self.coefficients.items():
            out = out + coeff * gegenbauer(self.degree(k), self.d, t)
        return out if out.shape else float(out)


def linearize_product(i: int, j: int, d: int) -> LinearizationTable:
    """Expand the product Q_i * Q_j in the Gegenbauer basis.

    Coefficients are computed with exact rational arithmetic and converted to
    float at the end; the raw Pochhammer-ratio parts are kept for bound checks.
    """
    if i < 0 or j < 0:
        raise ValueError("degrees must be nonnegative")
    if d < 4:
        raise ValueError(f"d must be >= 4, got {d}")
    coefficients: dict[int, float] = {}
    c_parts: dict[int, float] = {}
    for k in range(min(i, j) + 1):
        c, b = _linearization_parts(i, j, k, d)
        coeff = b * math.comb(i, k) * math.comb(j, k) * math.factorial(k)
        coefficients[k] = float(coeff)
        c_parts[k] = float(c)
    return LinearizationTable(i=i, j=j, d=d, coefficients=coefficients, c_parts=c_parts)


def quadratic_moment(A: np.ndarray, B: np.ndarray, d: int | None = None) -> float:
    """Exact E[(x'Ax)(x'Bx)] for x uniform on the sphere of radius sqrt(d).

    Equals d/(d+2) * (tr(A)tr(B) + 2<A,B>_F) for symmetric A, B.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if d is None:
        d = A.shape[0]
    if A.shape != (d, d) or B.shape != (d, d):
        raise ValueError("A and B must be d x d")
    return d / (d + 2) * (np.trace(A) * np.trace(B) + 2.0 * float(np.sum(A * B)))


def mc_gegenbauer_orthogonality(
    j: int, k: int, y: np.ndarray, y2: np.ndarray, n: int, seed: int,
    chunk: int = 1 << 17,
) -> MCEstimate:
    """Monte-Carlo estimate of E_x[Q_j(<x,y>) Q_k(<x,y2>)].

    The expectation equals delta_jk * Q_k(<y,y2>) / B(d,k).  Accumulation runs
    in fixed-size chunks so the result is deterministic given the seed.
    """
    y = np.asarray(y, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    d = y.shape[0]
    if j == 0 and k == 0:
        return MCEstimate(1.0, 0.0, n)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        X = rng.standard_normal((m, d))
        X *= (math.sqrt(d) / np.linalg.norm(X, axis=1))[:, None]
        vals = gegenbauer(j, d, X @ y) * gegenbauer(k, d, X @ y2)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        done += m
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return MCEstimate(mean, math.sqrt(var / n), n)
