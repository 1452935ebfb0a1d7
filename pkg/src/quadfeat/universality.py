"""How Gaussian is the feature vector p(x)?  Empirical diagnostics.

The headline quantity is the sliced Wasserstein-1 distance: project p(x) onto
random unit directions and compare each one-dimensional empirical distribution
to N(0, 1) by sorted-sample quantile matching.  Because the finite-sample W1
of true Gaussian draws does not vanish, every report is paired with a noise
floor computed by running the identical estimator on real Gaussian samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .features import FeatureSet, eval_features
from .sphere import sample_sphere


def w1_to_gaussian(sample: np.ndarray) -> float:
    """Exact W1 between the empirical distribution and N(0,1).

    Sorting is optimal transport in one dimension; the Gaussian side is
    discretized at the midpoint quantiles (i - 1/2)/n.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.shape[0]
    q = stats.norm.ppf((np.arange(n) + 0.5) / n)
    return float(np.mean(np.abs(x - q)))


def w1_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Exact W1 between two equal-size empirical distributions."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("samples must have equal size")
    return float(np.mean(np.abs(a - b)))


def _unit_directions(r: int, L: int, rng: np.random.Generator) -> np.ndarray:
    U = rng.standard_normal((L, r))
    return U / np.linalg.norm(U, axis=1)[:, None]


def _sliced(values: np.ndarray, L: int, seed: int) -> tuple[float, np.ndarray]:
    rng = np.random.default_rng(seed)
    U = _unit_directions(values.shape[1], L, rng)
    proj = values @ U.T
    per_dir = np.array([w1_to_gaussian(proj[:, i]) for i in range(L)])
    return float(np.mean(per_dir)), per_dir


def sliced_w1(F: FeatureSet, n: int, n_directions: int,
              seed: int) -> tuple[float, np.ndarray]:
    """Average 1-D W1 of random projections of p(x) against N(0,1)."""
    if n < 1000:
        raise ValueError("need at least 10^3 samples for a meaningful estimate")
    X = sample_sphere(F.d, n, seed)
    P = eval_features(F, X)
    return _sliced(P, n_directions, seed + 1)


def gaussian_floor(r: int, n: int, n_directions: int,
                   seed: int) -> tuple[float, np.ndarray]:
    """The same estimator run on true N(0, I_r) draws: the noise floor."""
    Z = np.random.default_rng(seed).standard_normal((n, r))
    return _sliced(Z, n_directions, seed + 1)


@dataclass(frozen=True)
class UniversalityReport:
    d: int
    r: int
    n: int
    n_directions: int
    mean: np.ndarray
    covariance: np.ndarray | None
    third_moments: np.ndarray
    fourth_moments: np.ndarray
    sliced: float | None = None
    per_direction: np.ndarray | None = None
    floor: float | None = None

    @property
    def mean_abs_mean(self) -> float:
        """Average absolute deviation of the empirical mean from zero."""
        return float(np.mean(np.abs(self.mean)))

    @property
    def max_cov_dev(self) -> float:
        """Largest entrywise deviation of the covariance from the identity."""
        if self.covariance is None:
            return math.nan
        return float(np.max(np.abs(self.covariance - np.eye(self.r))))


def moment_diagnostics(F: FeatureSet, n: int, seed: int) -> UniversalityReport:
    """Empirical mean, covariance, and marginal moments of p(x)."""
    X = sample_sphere(F.d, n, seed)
    P = eval_features(F, X)
    cov = np.cov(P, rowvar=False) if n > 1 else None  # undefined at n = 1
    return UniversalityReport(
        d=F.d, r=F.r, n=n, n_directions=0,
        mean=P.mean(axis=0),
        covariance=cov,
        third_moments=np.mean(P ** 3, axis=0),
        fourth_moments=np.mean(P ** 4, axis=0),
    )


def universality_report(F: FeatureSet, n: int, n_directions: int,
                        seed: int) -> UniversalityReport:
    """Full report: moments plus floor-subtracted sliced W1."""
    base = moment_diagnostics(F, n, seed)
    s, per_dir = sliced_w1(F, n, n_directions, seed)
    floor, _ = gaussian_floor(F.r, n, n_directions, seed + 100_003)
    return UniversalityReport(
        d=base.d, r=base.r, n=n, n_directions=n_directions,
        mean=base.mean, covariance=base.covariance,
        third_moments=base.third_moments, fourth_moments=base.fourth_moments,
        sliced=s, per_direction=per_dir, floor=floor,
    )


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
