"""Layer-wise training: one-step GD on W, bias reinit, ridge GD on a.

Stage 1 takes a single exact full-batch gradient step on the middle weights
with weight decay lambda1 = 1/eta1, which (inside sigma1's quadratic zone)
collapses to the closed-form linear map w_j -> (eta a_j / m2) M w_j with
M = (1/n1) sum_i f*(x_i) h0(x_i) h0(x_i)'.  Stage 2 trains only the outer
weights on the frozen learned representation; the random-feature baseline is
the same stage-2 path run on the untrained representation h0.

The stage-1 loss uses the 1/(2 n1) convention so that the closed form carries
no stray factor of two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import (
    ActivationSpec,
    NetworkParams,
    iter_h0_blocks,
    sigma1,
    sigma1_prime,
)
from .sphere import sample_sphere
from .targets import Target

PREACT_CEILING = 0.9  # calibrated quantile of |eta <w, h1>| lands here
DEGENERATE_SCALE = 1e-30
DEFAULT_LAMBDA2_GRID = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2)


class DivergenceError(RuntimeError):
    """Stage-2 loss increased for too many consecutive steps."""


class DegenerateScaleError(ValueError):
    """Learned representation is numerically zero; eta cannot be calibrated."""


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]


def make_dataset(target: Target, n: int, seed: int, tag: str = "train") -> Dataset:
    X = sample_sphere(target.d, n, seed)
    return Dataset(X=X, y=target.eval(X), provenance={"seed": seed, "tag": tag})


@dataclass
class TrainConfig:
    eta1: float | None = None     # derived from eta_unit when None
    lambda1: float | None = None  # 1/eta1 when the closed form is asserted
    eta2: float | None = None     # derived from curvature when None
    lambda2: float | None = None  # swept over lambda2_grid when None
    T: int = 2000
    epsilon: float | None = None
    quantile: float = 1.0
    lambda2_grid: tuple[float, ...] = DEFAULT_LAMBDA2_GRID
    grad_tol: float = 1e-10
    divergence_patience: int = 10
    solver: str = "auto"          # "gd" | "exact" | "auto"


@dataclass
class StageOneState:
    """Everything needed to evaluate the learned representation h1 on demand.

    For the RF baseline, M is None and the representation is h0 itself.
    """

    V: np.ndarray
    spec: ActivationSpec
    Wnorm: np.ndarray          # epsilon^{-1} W^(0), rows ~ N(0, I)
    a0: np.ndarray
    epsilon: float
    M: np.ndarray | None       # (m2, m2) weighted gram, None for the baseline
    W1: np.ndarray | None = None
    out_of_zone_frac: float = 0.0
    eta: float | None = None
    _G: np.ndarray | None = None  # cached Wnorm @ M / m2

    @property
    def m1(self) -> int:
        return self.Wnorm.shape[0]

    @property
    def m2(self) -> int:
        return self.V.shape[0]

    @property
    def d(self) -> int:
        return self.V.shape[1]

    def score_map(self) -> np.ndarray:
        """(m1, m2) map S with <w_j, h1(x)> = (S h0(x))_j (or h0 for RF)."""
        if self.M is None:
            return self.Wnorm
        if self._G is None:
            self._G = (self.Wnorm @ self.M) / self.m2
        return self._G

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Raw representation inner products <w_j, h(x)>; returns (m1, n)."""
        G = self.score_map()
        out = np.empty((self.m1, X.shape[0]))
        for sl, h0 in iter_h0_blocks(self.V, X, self.spec):
            out[:, sl] = G @ h0.T
        return out


def stage1_step(theta0: NetworkParams, D1: Dataset,
                cfg: TrainConfig | None = None) -> StageOneState:
    """One exact full-batch GD step on W with weight decay.

    The learning rate is eta1 = m1/(2 epsilon m2) (unit effective scale; the
    final scale eta is calibrated afterwards and applied multiplicatively,
    which is exact because the step-0 gradient does not depend on eta1).
    Records the fraction of preactivations outside (-1, 1), where the closed
    form stops binding; this is a warning, not an error.
    """
    cfg = cfg or TrainConfig()
    m1, m2 = theta0.m1, theta0.m2
    eps = theta0.epsilon
    eta1 = cfg.eta1 if cfg.eta1 is not None else m1 / (2.0 * eps * m2)
    n1 = D1.n
    M = np.zeros((m2, m2))
    grad = np.zeros((m1, m2))
    out_of_zone = 0
    a_scaled = theta0.a / m1
    for sl, h0 in iter_h0_blocks(theta0.V, D1.X, theta0.spec):
        y = D1.y[sl]
        M += (h0 * y[:, None]).T @ h0
        pre = h0 @ theta0.W.T + theta0.b
        out_of_zone += int(np.count_nonzero(np.abs(pre) >= 1.0))
        resid = sigma1(pre) @ a_scaled - y
        C = (resid[:, None] / n1) * a_scaled[None, :] * sigma1_prime(pre)
        grad += C.T @ h0
    M /= n1
    W1 = -eta1 * grad  # weight decay lambda1 = 1/eta1 cancels W^(0) exactly
    return StageOneState(
        V=theta0.V,
        spec=theta0.spec,
        Wnorm=theta0.W / eps,
        a0=theta0.a,
        epsilon=eps,
        M=M,
        W1=W1,
        out_of_zone_frac=out_of_zone / (n1 * m1),
    )


def rf_state(theta0: NetworkParams) -> StageOneState:
    """The untrained representation h0 wrapped in the same state interface."""
    return StageOneState(
        V=theta0.V, spec=theta0.spec, Wnorm=theta0.W / theta0.epsilon,
        a0=theta0.a, epsilon=theta0.epsilon, M=None,
    )


def compute_h1(state: StageOneState, Xp: np.ndarray) -> np.ndarray:
    """The stage-1 learned representation h1(x') = (1/m2) M h0(x'); (n, m2)."""
    Xp = np.asarray(Xp, dtype=float)
    if Xp.ndim == 1:
        Xp = Xp[None, :]
    if Xp.shape[1] != state.d:
        raise ValueError(f"x' has dimension {Xp.shape[1]}, state has {state.d}")
    if state.M is None:
        raise ValueError("baseline state has no learned representation")
    out = np.empty((Xp.shape[0], state.m2))
    for sl, h0 in iter_h0_blocks(state.V, Xp, state.spec):
        out[sl] = (h0 @ state.M) / state.m2
    return out


def calibrate_eta(state: StageOneState, D2: Dataset, quantile: float = 1.0,
                  scores: np.ndarray | None = None) -> float:
    """Choose eta so the given quantile of |eta <w_j, h1(x')>| equals 0.9.

    quantile = 1 (the default) pins the maximum, keeping every stage-2
    preactivation inside sigma1's quadratic zone modulo the bias range.
    Sets state.eta and returns it.
    """
    if scores is None:
        scores = state.scores(D2.X)
    mags = np.abs(scores)
    s = float(np.max(mags)) if quantile >= 1.0 else float(
        np.quantile(mags, quantile)
    )
    if s < DEGENERATE_SCALE:
        raise DegenerateScaleError(f"max |<w, h>| = {s:.3e}")
    state.eta = PREACT_CEILING / s
    return state.eta


def reinit_bias(m1: int, seed: int) -> np.ndarray:
    """Stage-2 biases: i.i.d. Unif([-3, 3])."""
    return np.random.default_rng(seed).uniform(-3.0, 3.0, size=m1)


@dataclass
class TrainedModel:
    state: StageOneState
    b: np.ndarray
    a: np.ndarray
    eta: float
    lambda2: float
    kind: str  # "alg1" | "rf"
    trace: list[tuple[int, float, float, float]] = field(default_factory=list)

    def feature_matrix(self, X: np.ndarray) -> np.ndarray:
        S = self.state.scores(X)
        return sigma1(self.eta * self.state.a0[:, None] * S + self.b[:, None]).T

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.feature_matrix(X) @ self.a / self.state.m1


def _power_lambda_max(G: np.ndarray, iters: int = 60, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = G @ v
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return lam * 1.01  # small safety margin on the power-method estimate


def _gram_system(Phi: np.ndarray, y: np.ndarray,
                 m1: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Gram operator, right-hand side and label energy of the stage-2 problem.

    The fixed point of ridge GD solves G a + lam2 a = c with
    G = (2/(n m1^2)) Phi'Phi and c = (2/(n m1)) Phi'y.
    """
    n = Phi.shape[0]
    G = (Phi.T @ Phi) * (2.0 / (n * m1 * m1))
    c = (Phi.T @ y) * (2.0 / (n * m1))
    yy = float(y @ y) / n
    return G, c, yy


def _ridge_gd(Phi: np.ndarray, y: np.ndarray, m1: int, lam2: float,
              cfg: TrainConfig) -> tuple[np.ndarray, list]:
    """GD on a for J(a) = (1/n)||Phi a / m1 - y||^2 + lam2 ||a||^2 / ... .

    Fixed point: (2/(n m1^2)) Phi'Phi a + lam2 a = (2/(n m1)) Phi'y, i.e. the
    update direction is grad L-hat + lam2 a with L-hat the mean squared error.
    """
    G, c, yy = _gram_system(Phi, y, m1)
    lam_max = _power_lambda_max(G)
    eta2 = cfg.eta2 if cfg.eta2 is not None else 1.0 / (lam2 + lam_max)
    a = np.zeros(Phi.shape[1])
    trace = []
    prev_loss = math.inf
    bad_steps = 0
    for t in range(cfg.T):
        Ga = G @ a
        grad = Ga + lam2 * a - c
        loss = 0.5 * float(a @ Ga) - float(a @ c) + yy + 0.5 * lam2 * float(a @ a)
        gnorm = float(np.linalg.norm(grad))
        trace.append((t, loss, gnorm, float(np.linalg.norm(a))))
        if gnorm <= cfg.grad_tol:
            break
        if loss > prev_loss:
            bad_steps += 1
            if bad_steps >= cfg.divergence_patience:
                raise DivergenceError(
                    f"loss increased {bad_steps} consecutive steps at t={t}"
                )
        else:
            bad_steps = 0
        prev_loss = loss
        a = a - eta2 * grad
    return a, trace


def ridge_oracle(Phi: np.ndarray, y: np.ndarray, m1: int, lam2: float) -> np.ndarray:
    """Closed-form solution of the stage-2 normal equations (test oracle)."""
    G, c, _ = _gram_system(Phi, y, m1)
    G[np.diag_indices_from(G)] += lam2
    return np.linalg.solve(G, c)


def _ridge_solve(Phi: np.ndarray, y: np.ndarray, m1: int, lam2: float,
                 cfg: TrainConfig) -> tuple[np.ndarray, list]:
    """Dispatch between GD and the direct fixed-point solve.

    GD with step 1/(lam2 + lam_max) contracts the error by (1 - eta2*lam2) per
    step, so it reaches a given tolerance only when T >= ln(1/tol)/(eta2*lam2).
    Under "auto" we run GD whenever that holds for the configured T and
    otherwise solve the normal equations directly, which is the same fixed
    point GD converges to.
    """
    if cfg.solver not in ("gd", "exact", "auto"):
        raise ValueError(f"unknown solver {cfg.solver!r}")
    mode = cfg.solver
    if mode == "auto":
        G, c, yy = _gram_system(Phi, y, m1)
        lam_max = _power_lambda_max(G)
        eta2 = cfg.eta2 if cfg.eta2 is not None else 1.0 / (lam2 + lam_max)
        needed = math.inf if eta2 * lam2 <= 0 else (
            math.log(1e12) / (eta2 * lam2)
        )
        mode = "gd" if needed <= cfg.T else "exact"
    if mode == "gd":
        return _ridge_gd(Phi, y, m1, lam2, cfg)
    a = ridge_oracle(Phi, y, m1, lam2)
    n = Phi.shape[0]
    resid = Phi @ a / m1 - y
    loss = float(resid @ resid) / n + lam2 * float(a @ a)
    return a, [(0, loss, 0.0, float(np.linalg.norm(a)))]


def gram_scale(Phi: np.ndarray, m1: int) -> float:
    """Mean eigenvalue of the stage-2 Gram operator (2/(n m1^2)) Phi'Phi.

    This is the natural unit for lambda2: the model f = Phi a / m1 shrinks the
    Gram spectrum by m1^2, so any ridge level quoted relative to the raw
    feature second moment would over-regularize by that factor.
    """
    return 2.0 * float(np.mean(Phi * Phi)) / (m1 * m1)


def _select_lambda2(Phi: np.ndarray, y: np.ndarray, m1: int,
                    cfg: TrainConfig) -> float:
    """Sweep lambda2 over grid * gram_scale; pick by held-out validation.

    The held-out fifth is the tail of D2; selection solves the ridge system in
    closed form (cheap), the final model still trains by GD.
    """
    n = Phi.shape[0]
    n_tr = max(1, (4 * n) // 5)
    scale = gram_scale(Phi, m1)
    best_lam, best_err = None, math.inf
    for g in cfg.lambda2_grid:
        lam = g * scale
        a = ridge_oracle(Phi[:n_tr], y[:n_tr], m1, lam)
        pred = Phi[n_tr:] @ a / m1
        err = float(np.mean((pred - y[n_tr:]) ** 2)) if n_tr < n else 0.0
        if err < best_err:
            best_lam, best_err = lam, err
    return best_lam


def stage2_train(state: StageOneState, b: np.ndarray, D2: Dataset,
                 cfg: TrainConfig | None = None,
                 target2: Target | None = None,
                 scores: np.ndarray | None = None) -> TrainedModel:
    """Ridge-regularized GD on the outer weights over the frozen features.

    target2 switches the stage-2 labels (transfer learning); the learned
    representation, biases, and eta are untouched.
    """
    cfg = cfg or TrainConfig()
    if state.eta is None:
        raise ValueError("calibrate_eta must run before stage-2 training")
    y = target2.eval(D2.X) if target2 is not None else D2.y
    if scores is None:
        scores = state.scores(D2.X)
    Phi = sigma1(state.eta * state.a0[:, None] * scores + b[:, None]).T
    lam2 = cfg.lambda2 if cfg.lambda2 is not None else _select_lambda2(
        Phi, y, state.m1, cfg
    )
    a, trace = _ridge_solve(Phi, y, state.m1, lam2, cfg)
    kind = "rf" if state.M is None else "alg1"
    return TrainedModel(state=state, b=b, a=a, eta=state.eta, lambda2=lam2,
                        kind=kind, trace=trace)


def rf_baseline_train(theta0: NetworkParams, D: Dataset,
                      cfg: TrainConfig | None = None,
                      bias_seed: int = 0) -> TrainedModel:
    """The naive random-feature model: stage-2 training on h0 directly."""
    cfg = cfg or TrainConfig()
    state = rf_state(theta0)
    scores = state.scores(D.X)
    calibrate_eta(state, D, cfg.quantile, scores=scores)
    b = reinit_bias(theta0.m1, bias_seed)
    return stage2_train(state, b, D, cfg, scores=scores)


def test_error(model: TrainedModel, target: Target, n_test: int,
               seed: int) -> dict:
    """Fresh-sample MAE and MSE with standard errors."""
    X = sample_sphere(target.d, n_test, seed)
    err = model.predict(X) - target.eval(X)
    abs_err = np.abs(err)
    sq_err = err * err
    return {
        "mae": float(np.mean(abs_err)),
        "mae_stderr": float(np.std(abs_err) / math.sqrt(n_test)),
        "mse": float(np.mean(sq_err)),
        "mse_stderr": float(np.std(sq_err) / math.sqrt(n_test)),
        "n_test": n_test,
    }
