"""Training objectives: per-sample IWAE/CUBO losses, trimming, the adaptive
threshold, and the polarization composite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .errors import ShapeError


@dataclass(frozen=True)
class LossConfig:
    """Objective hyperparameters; defaults follow the practical settings
    (n0, gamma, rho, xi, alpha, lambda1, lambda2) = (128, 1.03, 0.92, 0.4, 0.4, 2, 1)."""

    iwae_samples: int = 2
    cubo_power: int = 2
    lambda1: float = 2.0
    lambda2: float = 1.0
    rho: float = 0.92
    xi: float = 0.4
    # Geometric decay of (lambda1, lambda2) across polarization steps: at
    # step s the multiplier is lambda_decay_gamma**(-(s-1)). Letting the
    # labeled terms fade keeps the outlier-loss maximization from
    # destabilizing the shared decoder late in training; None disables it.
    lambda_decay_gamma: float | None = 1.05

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be non-negative")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must lie in [0, 1]")
        if self.cubo_power != 2:
            raise ValueError("only cubo_power=2 is supported")
        if self.lambda_decay_gamma is not None and self.lambda_decay_gamma < 1.0:
            raise ValueError("lambda_decay_gamma must be >= 1 (or None)")

    def lambdas_at(self, step_in_phase: int) -> tuple[float, float]:
        if self.lambda_decay_gamma is None:
            return self.lambda1, self.lambda2
        decay = self.lambda_decay_gamma ** (-(step_in_phase - 1))
        return self.lambda1 * decay, self.lambda2 * decay


@dataclass
class ThresholdState:
    tau: float
    q_rho: float
    r_hat_i: float | None = None


def iwae_loss(params, x, noise) -> float:
    """Negative K-sample importance-weighted log-likelihood bound for one sample.

    noise: (K, latent_dim) standard-normal draws.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 2:
        raise ShapeError(f"noise must be (K, latent_dim); got {noise.shape}")
    fwd = model.forward_losses(params, np.atleast_2d(x), noise[None, :, :])
    return float(fwd.iwae[0])


def cubo_loss(params, x, noise) -> float:
    """Negative chi-upper-bound (power 2) estimate for one sample."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 2:
        raise ShapeError(f"noise must be (K, latent_dim); got {noise.shape}")
    fwd = model.forward_losses(params, np.atleast_2d(x), noise[None, :, :])
    return float(fwd.cubo[0])


def quantile(values, rho: float) -> float:
    """Nearest-rank rho-quantile: ascending sort, element ceil(rho*n), 1-based."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("quantile of empty input")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    rank = math.ceil(rho * values.size)  # 1-based
    return float(np.sort(values)[rank - 1])


def adaptive_threshold(q_rho: float, r_hat_i: float | None, xi: float) -> float:
    """tau = (1 - xi) * q_rho + xi * mean labeled-inlier loss; falls back to
    q_rho while no inliers have been labeled."""
    if r_hat_i is None:
        return q_rho
    return (1.0 - xi) * q_rho + xi * r_hat_i


def trimmed_loss(per_sample_losses, tau: float) -> tuple[float, np.ndarray]:
    """Mean of the losses at or below tau. An empty kept set yields 0."""
    losses = np.asarray(per_sample_losses, dtype=np.float64)
    kept = losses <= tau
    if not kept.any():
        return 0.0, kept
    return float(losses[kept].mean()), kept


def polarization_loss(trimmed: float, r_hat_i: float | None, r_hat_o: float | None,
                      lambda1: float, lambda2: float) -> float:
    """Composite objective: trimmed + lambda1 * inlier term - lambda2 * outlier term.
    Absent labeled sets contribute nothing."""
    value = trimmed
    if r_hat_i is not None:
        value += lambda1 * r_hat_i
    if r_hat_o is not None:
        value -= lambda2 * r_hat_o
    return value
