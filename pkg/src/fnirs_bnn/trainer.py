"""ELBO maximization loop with trace recording and exact-resume checkpoints.

Each iteration draws its noise from a substream keyed by (seed, iteration),
so a run restored from a checkpoint consumes exactly the same randomness as
an uninterrupted run and reproduces it bit for bit. Optimization is full
batch: the per-volunteer datasets are tens of vectors.
"""

from __future__ import annotations

import hashlib
import json
import warnings as _warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fileio
from .errors import ConfigError, TrainingDivergedError
from .features import FeatureLayout, FeatureSet, Scaling
from .network import Architecture
from .rng import KEY_TRAIN_INIT, KEY_TRAIN_ITER, substream
from .vi import ELBO_MODES, Prior, VariationalParams, elbo_value_and_gradients, init_params

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5000
    optimizer: str = "adam"
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    n_samples: int = 1
    mode: str = "mc"
    seed: int = 0
    early_stop: bool = False
    convergence_tol: float = 1e-4  # relative change of the 100-iteration ELBO moving average

    def validate(self) -> None:
        if self.iterations < 1:
            raise ConfigError(f"train.iterations must be >= 1, got {self.iterations}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"train.optimizer must be one of {OPTIMIZERS}, got '{self.optimizer}'")
        if self.learning_rate < 0:
            raise ConfigError(f"train.learning_rate must be >= 0, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError(f"adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.adam_epsilon <= 0:
            raise ConfigError(f"train.adam_epsilon must be positive, got {self.adam_epsilon}")
        if self.n_samples < 1:
            raise ConfigError(f"train.n_samples must be >= 1, got {self.n_samples}")
        if self.mode not in ELBO_MODES:
            raise ConfigError(f"train.mode must be one of {ELBO_MODES}, got '{self.mode}'")
        if self.convergence_tol <= 0:
            raise ConfigError(f"train.convergence_tol must be positive, got {self.convergence_tol}")


class Adam:
    """Adam on a flat parameter vector (maximization handled by the caller)."""

    def __init__(self, n: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """One minimization step on grad; returns the updated vector."""
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t}

    def load_state(self, state: dict) -> None:
        self.m = np.asarray(state["m"], dtype=float)
        self.v = np.asarray(state["v"], dtype=float)
        self.t = int(state["t"])


class Sgd:
    def __init__(self, n: int, lr: float):
        self.lr = lr
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        return theta - self.lr * grad

    def state_dict(self) -> dict:
        return {"t": self.t}

    def load_state(self, state: dict) -> None:
        self.t = int(state["t"])


def _make_optimizer(cfg: TrainConfig, n: int):
    if cfg.optimizer == "adam":
        return Adam(n, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon)
    return Sgd(n, cfg.learning_rate)


@dataclass
class TrainedModel:
    """Architecture + learned variational parameters + provenance."""

    architecture: Architecture
    params: VariationalParams
    prior: Prior
    scaling: Scaling | None
    seed: int
    train_config: TrainConfig
    iterations_completed: int
    optimizer_state: dict | None = None
    trace_summary: dict = field(default_factory=dict)
    config_hash: str = ""
    run_config: dict | None = None  # effective CLI config, when trained via the CLI


def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def train(
    train_set: FeatureSet,
    arch: Architecture,
    prior: Prior,
    cfg: TrainConfig,
    resume: TrainedModel | None = None,
) -> tuple[TrainedModel, np.ndarray]:
    """Gradient-ascend the ELBO estimate; returns the model and the full trace.

    The train set should already be standardized (its scaling travels into
    the model file) unless raw features are intended. Deterministic for a
    given (data, config, seed); aborts on a non-finite ELBO.
    """
    cfg.validate()
    arch.validate()
    prior.validate()
    train_set.validate()
    if len(train_set) == 0:
        raise ConfigError("training set is empty")
    if len(set(train_set.labels.tolist())) < 2:
        _warnings.warn("training set contains a single class; the model will learn the base rate")
    if train_set.n_features != arch.layer_sizes[0]:
        raise ConfigError(
            f"training set has {train_set.n_features} features, architecture expects "
            f"{arch.layer_sizes[0]}"
        )

    n = arch.n_params
    if resume is None:
        params = init_params(n, substream(cfg.seed, KEY_TRAIN_INIT))
        optimizer = _make_optimizer(cfg, 2 * n)
        start = 0
    else:
        params = resume.params.copy()
        optimizer = _make_optimizer(cfg, 2 * n)
        if resume.optimizer_state is not None:
            optimizer.load_state(resume.optimizer_state)
        start = resume.iterations_completed

    trace = []
    for it in range(start, cfg.iterations):
        rng = substream(cfg.seed, KEY_TRAIN_ITER, it)
        value, d_mu, d_rho = elbo_value_and_gradients(
            params, prior, arch, train_set, cfg.n_samples, cfg.mode, rng
        )
        if not np.isfinite(value) or not (np.all(np.isfinite(d_mu)) and np.all(np.isfinite(d_rho))):
            raise TrainingDivergedError(f"non-finite ELBO or gradient at iteration {it}")
        theta = optimizer.step(
            np.concatenate([params.mu, params.rho]), -np.concatenate([d_mu, d_rho])
        )
        params = VariationalParams(mu=theta[:n], rho=theta[n:])
        trace.append(value)
        if cfg.early_stop and len(trace) >= 200 and len(trace) % 100 == 0:
            ma_now = float(np.mean(trace[-100:]))
            ma_prev = float(np.mean(trace[-200:-100]))
            if abs(ma_now - ma_prev) <= cfg.convergence_tol * max(abs(ma_prev), 1e-8):
                break

    trace_arr = np.asarray(trace)
    iterations_done = start + len(trace)
    summary = {
        "iterations": iterations_done,
        "first": float(trace_arr[0]) if len(trace_arr) else None,
        "last": float(trace_arr[-1]) if len(trace_arr) else None,
        "best": float(trace_arr.max()) if len(trace_arr) else None,
    }
    model = TrainedModel(
        architecture=arch,
        params=params,
        prior=prior,
        scaling=train_set.scaling,
        seed=cfg.seed,
        train_config=cfg,
        iterations_completed=iterations_done,
        optimizer_state=optimizer.state_dict(),
        trace_summary=summary,
        config_hash=config_hash(
            {
                "architecture": asdict(arch),
                "prior": asdict(prior),
                "train": asdict(cfg),
            }
        ),
        run_config=resume.run_config if resume is not None else None,
    )
    return model, trace_arr


def checkpoint(model: TrainedModel, path) -> None:
    """Write the model (with optimizer state) for exact resume."""
    fileio.write_model_json(path, model)


def restore(path) -> TrainedModel:
    """Load a checkpointed model; validates format version and structure."""
    return fileio.read_model_json(path)
