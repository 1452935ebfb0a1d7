"""Configuration-driven experiment runner.

Reproduces the numerical studies at desk scale: method comparison
(feature-learning network vs. random-feature baseline), transfer learning
across link polynomials, feature reconstruction scatters, and the Gaussian
universality sweep. Emits schema-stable CSVs plus a manifest capturing the
resolved configuration, so identical configs reproduce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import network
from .features import FeatureSet, make_sign_features
from .network import ActivationSpec, default_epsilon, init_network
from .reconstruction import build_Bstar, reconstruct_features, variance_match, \
    feature_correlations
from .sphere import sample_sphere
from .targets import Target, expected_hessian, make_standard_target
from .training import Dataset, TrainConfig, calibrate_eta, make_dataset, \
    reinit_bias, rf_baseline_train, stage1_step, stage2_train, test_error
from .universality import universality_report
from .features import eval_features

RESULT_COLUMNS = (
    "run_id", "experiment", "method", "d", "r", "p", "n1", "n2", "m1", "m2",
    "seed", "test_mae", "test_mse", "mae_stderr", "wall_seconds",
)
RECON_COLUMNS = ("feature_idx", "true_value", "recon_value", "n1", "m2", "seed")
UNIV_COLUMNS = ("d", "r", "n", "L", "seed", "mean_abs_mean", "max_cov_dev",
                "sliced_w1", "gaussian_floor")
TRACE_COLUMNS = ("step", "loss", "grad_norm", "a_norm")

KINDS = ("compare", "transfer", "reconstruct", "universality", "verify")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "compare"
    d: int = 16
    r: int = 3
    p: int = 4
    pretrain_p: int = 2
    n_grid: tuple[int, ...] = (1 << 10, 1 << 12, 1 << 14)
    n1: int = 1 << 14
    n2_grid: tuple[int, ...] = (1 << 10, 1 << 12, 1 << 14)
    n1_grid: tuple[int, ...] = ()        # reconstruct; default {d^2, d^3, d^4}
    p_grid: tuple[int, ...] = (4, 6)     # transfer targets
    d_grid: tuple[int, ...] = (8, 16, 32, 64)  # universality sweep
    m1: int = 2048
    m2: int = 4096
    seeds: tuple[int, ...] = (0, 1, 2)
    n_test: int = 10_000
    n_univ: int = 200_000
    n_scatter: int = 512
    L: int = 64
    quantile: float = 1.0
    solver: str = "auto"
    T: int = 2000
    out: str = "runs"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        for name in ("n_grid", "n2_grid", "d_grid", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        for name in ("d", "r", "p", "m1", "m2", "n1", "n_test"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.m1 % 2:
            raise ConfigError("m1 must be even (symmetric initialization)")

    @property
    def resolved_n1_grid(self) -> tuple[int, ...]:
        if self.n1_grid:
            return self.n1_grid
        return (self.d ** 2, self.d ** 3, self.d ** 4)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path: str | Path | None, overrides: dict | None = None,
                kind: str | None = None) -> ExperimentConfig:
    """Build a config from an optional YAML file plus override key-values."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must be a mapping")
        data.update(loaded)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    if kind is not None:
        data["kind"] = kind
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in data.items():
        if isinstance(value, list):
            data[key] = tuple(value)
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from a tuple of labels (master seed, role, ...)."""
    blob = json.dumps(parts, sort_keys=True).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:4], "big")


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict],
               resume: bool = False) -> None:
    existing: list[dict] = []
    if resume and path.exists():
        with open(path, newline="") as fh:
            existing = list(csv.DictReader(fh))
    seen = {row.get("run_id") for row in existing if "run_id" in row}
    merged = existing + [
        row for row in rows
        if "run_id" not in row or str(row["run_id"]) not in seen
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in merged:
            writer.writerow({k: row[k] for k in columns})


def _completed_run_ids(path: Path) -> set[str]:
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        return {row["run_id"] for row in csv.DictReader(fh) if "run_id" in row}


def _write_manifest(out: Path, cfg: ExperimentConfig,
                    extra: dict | None = None) -> None:
    from . import __version__
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        with open(manifest_path) as fh:
            previous = json.load(fh)
        if previous.get("config_hash") != cfg.config_hash():
            raise ConfigError(
                f"output directory {out} already holds results for a "
                f"different config (hash {previous.get('config_hash')} vs "
                f"{cfg.config_hash()})"
            )
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_trace(out: Path, run_id: str, trace: list) -> None:
    trace_dir = out / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    with open(trace_dir / f"{run_id}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(trace)


def _with_retry(fn):
    """Run fn(); on MemoryError shrink the activation tile budget and retry."""
    for attempt in range(3):
        try:
            return fn()
        except MemoryError:
            if attempt == 2:
                raise
            network.H0_TILE //= 4


def _make_target(d: int, p: int, seed: int = 1) -> tuple[FeatureSet, Target]:
    F = make_sign_features(d)
    return F, make_standard_target(d, p, F, seed=seed)


def _train_cfg(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(T=cfg.T, quantile=cfg.quantile, solver=cfg.solver)


def _result_row(run_id: str, experiment: str, method: str,
                cfg: ExperimentConfig, n1: int, n2: int, seed: int,
                err: dict, wall: float, p: int | None = None) -> dict:
    return {
        "run_id": run_id, "experiment": experiment, "method": method,
        "d": cfg.d, "r": cfg.r, "p": cfg.p if p is None else p,
        "n1": n1, "n2": n2, "m1": cfg.m1, "m2": cfg.m2, "seed": seed,
        "test_mae": f"{err['mae']:.10g}", "test_mse": f"{err['mse']:.10g}",
        "mae_stderr": f"{err['mae_stderr']:.10g}",
        "wall_seconds": f"{wall:.3f}",
    }


def _run_alg1(cfg: ExperimentConfig, target: Target, n1: int, n2: int,
              seed: int, target2: Target | None = None):
    """One end-to-end two-stage training; returns (model, wall_seconds)."""
    t0 = time.perf_counter()
    spec = ActivationSpec(d=cfg.d)
    eps = default_epsilon(spec, n1, cfg.m1, cfg.m2)
    theta0 = init_network(cfg.d, cfg.m1, cfg.m2, eps,
                          seed=derive_seed(seed, "init"), spec=spec)
    D1 = make_dataset(target, n1, derive_seed(seed, "d1"))
    state = _with_retry(lambda: stage1_step(theta0, D1))
    D2 = make_dataset(target, n2, derive_seed(seed, "d2"))
    calibrate_eta(state, D2, cfg.quantile)
    b = reinit_bias(cfg.m1, derive_seed(seed, "bias"))
    model = stage2_train(state, b, D2, _train_cfg(cfg), target2=target2)
    return model, time.perf_counter() - t0


def _run_tasks(tasks: list, jobs: int) -> list[dict]:
    """Execute run closures, optionally in a thread pool; order-stable."""
    if jobs <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda task: task(), tasks))


def run_compare(cfg: ExperimentConfig, out: Path, resume: bool = False,
                jobs: int = 1) -> list[dict]:
    """Feature-learning network (split data) vs. RF baseline (full data)."""
    _, target = _make_target(cfg.d, cfg.p)
    done = _completed_run_ids(out / "results.csv") if resume else set()

    def alg1_task(n, seed, run_id):
        def go():
            model, wall = _run_alg1(cfg, target, n // 2, n - n // 2, seed)
            err = test_error(model, target, cfg.n_test,
                             derive_seed(seed, "test", n))
            _write_trace(out, run_id, model.trace)
            return _result_row(run_id, "compare", "alg1", cfg,
                               n // 2, n - n // 2, seed, err, wall)
        return go

    def rf_task(n, seed, run_id):
        def go():
            t0 = time.perf_counter()
            spec = ActivationSpec(d=cfg.d)
            eps = default_epsilon(spec, n, cfg.m1, cfg.m2)
            theta0 = init_network(cfg.d, cfg.m1, cfg.m2, eps,
                                  seed=derive_seed(seed, "init"), spec=spec)
            D = make_dataset(target, n, derive_seed(seed, "d2"))
            model = _with_retry(lambda: rf_baseline_train(
                theta0, D, _train_cfg(cfg),
                bias_seed=derive_seed(seed, "bias")))
            err = test_error(model, target, cfg.n_test,
                             derive_seed(seed, "test", n))
            _write_trace(out, run_id, model.trace)
            return _result_row(run_id, "compare", "rf", cfg,
                               0, n, seed, err, time.perf_counter() - t0)
        return go

    tasks = []
    for n in cfg.n_grid:
        for seed in cfg.seeds:
            run_id = f"compare-alg1-d{cfg.d}-p{cfg.p}-n{n}-s{seed}"
            if run_id not in done:
                tasks.append(alg1_task(n, seed, run_id))
            run_id = f"compare-rf-d{cfg.d}-p{cfg.p}-n{n}-s{seed}"
            if run_id not in done:
                tasks.append(rf_task(n, seed, run_id))
    rows = _run_tasks(tasks, jobs)
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows, resume=resume)
    _write_manifest(out, cfg)
    return rows


def run_transfer(cfg: ExperimentConfig, out: Path, resume: bool = False,
                 jobs: int = 1) -> list[dict]:
    """Pretrain the representation once, retrain the head on new links."""
    F, pre_target = _make_target(cfg.d, cfg.pretrain_p)
    targets2 = {p: make_standard_target(cfg.d, p, F, seed=1)
                for p in cfg.p_grid}
    done = _completed_run_ids(out / "results.csv") if resume else set()
    rows = []
    for seed in cfg.seeds:
        spec = ActivationSpec(d=cfg.d)
        eps = default_epsilon(spec, cfg.n1, cfg.m1, cfg.m2)
        theta0 = init_network(cfg.d, cfg.m1, cfg.m2, eps,
                              seed=derive_seed(seed, "init"), spec=spec)
        D1 = make_dataset(pre_target, cfg.n1, derive_seed(seed, "d1"))
        state = None
        for p, target2 in targets2.items():
            for n2 in cfg.n2_grid:
                run_id = (f"transfer-p{p}-d{cfg.d}-n1_{cfg.n1}"
                          f"-n2_{n2}-s{seed}")
                if run_id in done:
                    continue
                t0 = time.perf_counter()
                if state is None:
                    state = _with_retry(lambda: stage1_step(theta0, D1))
                D2 = make_dataset(target2, n2, derive_seed(seed, "d2", p, n2))
                calibrate_eta(state, D2, cfg.quantile)
                b = reinit_bias(cfg.m1, derive_seed(seed, "bias"))
                model = stage2_train(state, b, D2, _train_cfg(cfg),
                                     target2=target2)
                err = test_error(model, target2, cfg.n_test,
                                 derive_seed(seed, "test", p, n2))
                rows.append(_result_row(run_id, "transfer", "transfer", cfg,
                                        cfg.n1, n2, seed, err,
                                        time.perf_counter() - t0, p=p))
                _write_trace(out, run_id, model.trace)
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows, resume=resume)
    _write_manifest(out, cfg)
    return rows


def run_reconstruct(cfg: ExperimentConfig, out: Path,
                    resume: bool = False, jobs: int = 1) -> list[dict]:
    """Scatter data: reconstructed quadratic features vs. ground truth."""
    F, target = _make_target(cfg.d, cfg.pretrain_p)
    H = expected_hessian(target.standardized_link)
    spec = ActivationSpec(d=cfg.d)
    rows, summary = [], {}
    for n1 in cfg.resolved_n1_grid:
        for seed in cfg.seeds:
            eps = default_epsilon(spec, n1, cfg.m1, cfg.m2)
            theta0 = init_network(cfg.d, cfg.m1, cfg.m2, eps,
                                  seed=derive_seed(seed, "init"), spec=spec)
            D1 = make_dataset(target, n1, derive_seed(seed, "d1"))
            state = _with_retry(lambda: stage1_step(theta0, D1))
            B = build_Bstar(F, H, theta0.V, spec)
            X = sample_sphere(cfg.d, cfg.n_scatter,
                              derive_seed(seed, "test", n1))
            true = eval_features(F, X)
            recon = variance_match(reconstruct_features(B, state, X), true)
            corr = feature_correlations(recon, true)
            summary[f"n1={n1},seed={seed}"] = [round(float(c), 6)
                                               for c in corr]
            for k in range(F.r):
                for i in range(cfg.n_scatter):
                    rows.append({
                        "feature_idx": k,
                        "true_value": f"{true[i, k]:.8g}",
                        "recon_value": f"{recon[i, k]:.8g}",
                        "n1": n1, "m2": cfg.m2, "seed": seed,
                    })
    _write_csv(out / "reconstruction.csv", RECON_COLUMNS, rows, resume=False)
    _write_manifest(out, cfg, extra={"correlations": summary})
    return rows


def run_universality(cfg: ExperimentConfig, out: Path,
                     resume: bool = False, jobs: int = 1) -> list[dict]:
    """Sliced-W1 Gaussianity sweep of the feature vector over dimensions."""
    rows = []
    for d in cfg.d_grid:
        F = make_sign_features(d)
        for seed in cfg.seeds:
            rep = universality_report(F, cfg.n_univ, cfg.L,
                                      derive_seed(seed, "univ", d))
            rows.append({
                "d": d, "r": F.r, "n": cfg.n_univ, "L": cfg.L, "seed": seed,
                "mean_abs_mean": f"{rep.mean_abs_mean:.8g}",
                "max_cov_dev": f"{rep.max_cov_dev:.8g}",
                "sliced_w1": f"{rep.sliced:.8g}",
                "gaussian_floor": f"{rep.floor:.8g}",
            })
    _write_csv(out / "universality.csv", UNIV_COLUMNS, rows, resume=False)
    _write_manifest(out, cfg)
    return rows


def run_verify(cfg: ExperimentConfig, out: Path,
               resume: bool = False, jobs: int = 1) -> list[dict]:
    """Machine-readable invariant suite across every module."""
    from .verify import run_all
    checks = run_all()
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verify.json", "w") as fh:
        json.dump([c.__dict__ for c in checks], fh, indent=2)
        fh.write("\n")
    _write_manifest(out, cfg)
    return [c.__dict__ for c in checks]


RUNNERS = {
    "compare": run_compare,
    "transfer": run_transfer,
    "reconstruct": run_reconstruct,
    "universality": run_universality,
    "verify": run_verify,
}


def run_experiment(cfg: ExperimentConfig, resume: bool = False,
                   jobs: int = 1) -> list[dict]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.kind](cfg, out, resume=resume, jobs=jobs)
