"""Three-layer architecture: activations, symmetric init, forward pass.

The network is f(x) = (1/m1) sum_j a_j sigma1(<w_j, h0(x)> + b_j) with the
random inner embedding h0(x) = sigma2(V x).  V stays frozen; the symmetric
initialization makes the network identically zero at step 0.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .sphere import gegenbauer

H0_TILE = 1 << 22  # soft budget, in float64 elements, for resident h0 blocks


@dataclass(frozen=True)
class ActivationSpec:
    """Inner activation as a finite Gegenbauer series starting at degree 2."""

    d: int
    coeffs: tuple[tuple[int, float], ...] = ((2, 1.0),)

    def __post_init__(self):
        for deg, _ in self.coeffs:
            if deg < 2 or deg > 6:
                raise ValueError(f"series degrees must lie in [2, 6], got {deg}")

    @property
    def c2(self) -> float:
        return dict(self.coeffs).get(2, 0.0)

    @property
    def c_sigma(self) -> float:
        """max |sigma2| on [-d, d], from a dense grid (exact 1.0 for pure Q2)."""
        if self.coeffs == ((2, 1.0),):
            return 1.0
        t = np.linspace(-self.d, self.d, 4097)
        return float(np.max(np.abs(sigma2(t, self))))


def sigma1(t):
    """Smoothed absolute value: t^2 inside (-1, 1), 2|t| - 1 outside."""
    t = np.asarray(t, dtype=float)
    out = np.where(np.abs(t) < 1.0, t * t, 2.0 * np.abs(t) - 1.0)
    return out if out.shape else float(out)


def sigma1_prime(t):
    """Derivative of sigma1: 2t inside (-1, 1), 2 sign(t) outside."""
    t = np.asarray(t, dtype=float)
    out = np.where(np.abs(t) < 1.0, 2.0 * t, 2.0 * np.sign(t))
    return out if out.shape else float(out)


def sigma2(t, spec: ActivationSpec):
    """Inner activation: the finite Gegenbauer series of the spec."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for deg, c in spec.coeffs:
        out = out + c * gegenbauer(deg, spec.d, t)
    return out if out.shape else float(out)


@dataclass(frozen=True)
class NetworkParams:
    a: np.ndarray  # (m1,)
    W: np.ndarray  # (m1, m2)
    b: np.ndarray  # (m1,)
    V: np.ndarray  # (m2, d), rows on the sphere of radius sqrt(d)
    epsilon: float
    spec: ActivationSpec = field(repr=False, default=None)

    @property
    def d(self) -> int:
        return self.V.shape[1]

    @property
    def m1(self) -> int:
        return self.a.shape[0]

    @property
    def m2(self) -> int:
        return self.V.shape[0]


def default_epsilon(spec: ActivationSpec, n1: int, m1: int, m2: int) -> float:
    """Init scale keeping first-step preactivations inside sigma1's quadratic zone.

    epsilon = 1 / (C_sigma * sqrt(2 * ln(n1 m1) * m2)): a union bound over the
    n1 * m1 preactivations of sub-Gaussian width C_sigma sqrt(m2) per neuron.
    """
    return 1.0 / (spec.c_sigma * math.sqrt(2.0 * math.log(n1 * m1) * m2))


def init_network(
    d: int, m1: int, m2: int, epsilon: float, seed: int,
    spec: ActivationSpec | None = None,
) -> NetworkParams:
    """Symmetric initialization: paired neurons cancel so f(x; theta0) = 0.

    Pairs are (j, m1-1-j): a antisymmetric in {-1, +1}, W rows equal with
    N(0, epsilon^2 I) entries, b = 0.  V rows are uniform on the sphere.
    """
    if m1 % 2 != 0:
        raise ValueError(f"m1 must be even, got {m1}")
    if spec is None:
        spec = ActivationSpec(d=d)
    rng = np.random.default_rng(seed)
    half = m1 // 2
    a_half = rng.choice([-1.0, 1.0], size=half)
    a = np.concatenate([a_half, -a_half[::-1]])
    W_half = epsilon * rng.standard_normal((half, m2))
    W = np.concatenate([W_half, W_half[::-1]], axis=0)
    b = np.zeros(m1)
    V = rng.standard_normal((m2, d))
    norms = np.linalg.norm(V, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        V[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(V, axis=1)
    V *= (math.sqrt(d) / norms)[:, None]
    return NetworkParams(a=a, W=W, b=b, V=V, epsilon=epsilon, spec=spec)


def iter_h0_blocks(V: np.ndarray, X: np.ndarray, spec: ActivationSpec,
                   budget: int = H0_TILE):
    """Yield (row_slice, h0_block) with blocks sized to the element budget.

    Rows are processed in a fixed order, so any accumulation over blocks is
    deterministic regardless of the budget.
    """
    n = X.shape[0]
    m2 = V.shape[0]
    rows = max(1, budget // max(m2, 1))
    for start in range(0, n, rows):
        stop = min(start + rows, n)
        yield slice(start, stop), sigma2(X[start:stop] @ V.T, spec)


def h0_matrix(V: np.ndarray, X: np.ndarray, spec: ActivationSpec) -> np.ndarray:
    """The full (n, m2) inner embedding; prefer iter_h0_blocks at scale."""
    return sigma2(np.asarray(X, dtype=float) @ V.T, spec)


def forward(theta: NetworkParams, X: np.ndarray,
            spec: ActivationSpec | None = None) -> np.ndarray:
    """Evaluate the network on rows of X; returns an n-vector."""
    spec = spec or theta.spec
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != theta.d:
        raise ValueError(f"X has dimension {X.shape[1]}, network has {theta.d}")
    out = np.empty(X.shape[0])
    for sl, h0 in iter_h0_blocks(theta.V, X, spec):
        pre = h0 @ theta.W.T + theta.b
        out[sl] = sigma1(pre) @ theta.a / theta.m1
    return out


_MAGIC = b"QFNET1\n"


def save_network(theta: NetworkParams, path: str) -> None:
    """Binary container: JSON header then row-major float64 arrays."""
    header = {
        "d": theta.d, "m1": theta.m1, "m2": theta.m2,
        "epsilon": theta.epsilon,
        "spec": list(map(list, theta.spec.coeffs)),
        "arrays": ["a", "W", "b", "V"],
        "shapes": {"a": [theta.m1], "W": [theta.m1, theta.m2],
                   "b": [theta.m1], "V": [theta.m2, theta.d]},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in header["arrays"]:
            fh.write(np.ascontiguousarray(getattr(theta, name), dtype=np.float64).tobytes())


def load_network(path: str) -> NetworkParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not a network container")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        arrays = {}
        for name in header["arrays"]:
            shape = tuple(header["shapes"][name])
            count = int(np.prod(shape))
            arrays[name] = np.frombuffer(fh.read(8 * count), dtype=np.float64).reshape(shape).copy()
    spec = ActivationSpec(d=header["d"],
                          coeffs=tuple((int(k), float(v)) for k, v in header["spec"]))
    return NetworkParams(epsilon=header["epsilon"], spec=spec, **arrays)
