"""Mean-field Gaussian variational layer over the network weights.

The posterior over the flat weight vector is a diagonal Gaussian
q(w | theta) with theta = (mu, rho) and sigma = softplus(rho), sampled via
the reparameterization w = mu + sigma * eps, eps ~ N(0, I). The prior is
an isotropic Gaussian. Two ELBO estimators are provided:

  mc          (1/S) sum_s [log p(w_s) + log p(D|w_s) - log q(w_s|theta)]
  analytic_kl (1/S) sum_s log p(D|w_s) - KL(q || prior)

with S = 1 by default (one weight sample per forward pass). Gradients are
pathwise: each draw's estimate is differentiated through w = mu + sigma*eps
with eps held fixed, so central finite differences on a frozen draw
reproduce them exactly. In mc mode the entropy term -log q contributes the
exact, draw-independent d/d_rho = sigmoid(rho)/sigma and nothing to d/d_mu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DimensionMismatchError
from .features import FeatureSet
from .network import Architecture, log_likelihood, log_likelihood_and_gradient

ELBO_MODES = ("mc", "analytic_kl")

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Prior:
    """Isotropic Gaussian prior over every weight and bias."""

    mean: float = 0.0
    std: float = 1.0

    def validate(self) -> None:
        if self.std <= 0:
            raise ConfigError(f"prior.std must be positive, got {self.std}")


@dataclass
class VariationalParams:
    mu: np.ndarray
    rho: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return softplus(self.rho)

    @property
    def n_params(self) -> int:
        return self.mu.shape[0]

    def copy(self) -> "VariationalParams":
        return VariationalParams(mu=self.mu.copy(), rho=self.rho.copy())


@dataclass(frozen=True)
class WeightDraw:
    w: np.ndarray
    eps: np.ndarray


def softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + exp(x)) without overflow; strictly positive for finite x
    return np.logaddexp(0.0, x)


def softplus_inv(y) -> np.ndarray:
    return np.log(np.expm1(y))


def init_params(
    n_params: int, rng: np.random.Generator, mu_scale: float = 0.1, sigma_init: float = 0.05
) -> VariationalParams:
    """Small random means, small fixed initial posterior scale."""
    return VariationalParams(
        mu=mu_scale * rng.standard_normal(n_params),
        rho=np.full(n_params, float(softplus_inv(sigma_init))),
    )


def sample_weights(params: VariationalParams, rng: np.random.Generator) -> WeightDraw:
    """One reparameterized draw; eps is retained for pathwise gradients."""
    eps = rng.standard_normal(params.n_params)
    return WeightDraw(w=params.mu + params.sigma * eps, eps=eps)


def log_q(params: VariationalParams, draw: WeightDraw) -> float:
    """log q(w | theta) for a concrete draw."""
    if draw.w.shape != params.mu.shape:
        raise DimensionMismatchError(
            f"draw has shape {draw.w.shape}, params have {params.mu.shape}"
        )
    sigma = params.sigma
    return float(
        np.sum(-np.log(sigma) - 0.5 * _LOG_2PI - 0.5 * ((draw.w - params.mu) / sigma) ** 2)
    )


def log_prior(prior: Prior, w: np.ndarray) -> float:
    """log p(w) under the isotropic Gaussian prior."""
    n = w.shape[0]
    return float(
        -0.5 * np.sum(((w - prior.mean) / prior.std) ** 2)
        - n * (0.5 * _LOG_2PI + np.log(prior.std))
    )


def kl_diag_gaussians(params: VariationalParams, prior: Prior) -> float:
    """Closed-form KL(q(w|theta) || p(w)) between diagonal Gaussians."""
    sigma = params.sigma
    return float(
        np.sum(
            np.log(prior.std / sigma)
            + (sigma**2 + (params.mu - prior.mean) ** 2) / (2.0 * prior.std**2)
            - 0.5
        )
    )


def _validate_estimator_args(n_samples: int, mode: str) -> None:
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if mode not in ELBO_MODES:
        raise ConfigError(f"mode must be one of {ELBO_MODES}, got '{mode}'")


def elbo_estimate(
    params: VariationalParams,
    prior: Prior,
    arch: Architecture,
    data: FeatureSet,
    n_samples: int = 1,
    mode: str = "mc",
    rng: np.random.Generator | None = None,
) -> float:
    """Monte-Carlo ELBO estimate averaged over n_samples draws."""
    _validate_estimator_args(n_samples, mode)
    if rng is None:
        rng = np.random.default_rng(0)
    total = 0.0
    kl = kl_diag_gaussians(params, prior) if mode == "analytic_kl" else 0.0
    for _ in range(n_samples):
        draw = sample_weights(params, rng)
        ll = log_likelihood(arch, draw.w, data)
        if mode == "mc":
            total += log_prior(prior, draw.w) + ll - log_q(params, draw)
        else:
            total += ll - kl
    return total / n_samples


def elbo_gradients(
    params: VariationalParams,
    prior: Prior,
    arch: Architecture,
    data: FeatureSet,
    n_samples: int = 1,
    mode: str = "mc",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pathwise ELBO gradients (d_mu, d_rho) averaged over draws."""
    _, d_mu, d_rho = elbo_value_and_gradients(params, prior, arch, data, n_samples, mode, rng)
    return d_mu, d_rho


def elbo_value_and_gradients(
    params: VariationalParams,
    prior: Prior,
    arch: Architecture,
    data: FeatureSet,
    n_samples: int = 1,
    mode: str = "mc",
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Fused estimate + gradients sharing the same draws (training hot path)."""
    _validate_estimator_args(n_samples, mode)
    if rng is None:
        rng = np.random.default_rng(0)
    sigma = params.sigma
    sig_rho = expit(params.rho)  # d sigma / d rho

    value = 0.0
    d_mu = np.zeros(params.n_params)
    d_rho = np.zeros(params.n_params)
    kl = kl_diag_gaussians(params, prior) if mode == "analytic_kl" else 0.0

    for _ in range(n_samples):
        draw = sample_weights(params, rng)
        ll, g_ll = log_likelihood_and_gradient(arch, draw.w, data)
        if mode == "mc":
            g_w = g_ll - (draw.w - prior.mean) / prior.std**2
            value += log_prior(prior, draw.w) + ll - log_q(params, draw)
            d_mu += g_w
            d_rho += g_w * draw.eps * sig_rho + sig_rho / sigma  # entropy term is exact
        else:
            value += ll - kl
            d_mu += g_ll
            d_rho += g_ll * draw.eps * sig_rho

    if mode == "analytic_kl":
        d_mu -= n_samples * (params.mu - prior.mean) / prior.std**2
        d_rho -= n_samples * (sigma / prior.std**2 - 1.0 / sigma) * sig_rho

    s = float(n_samples)
    return value / s, d_mu / s, d_rho / s
