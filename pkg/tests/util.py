"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from imboost import (ModelSpec, SyntheticSpec, TrainerConfig, init_params,
                     make_synthetic, split_and_normalize)


def linear_gaussian_params(slope: float = 0.01):
    """A plug-in model whose variational posterior is the exact posterior of
    the linear-Gaussian generative model p(z) = N(0,1), p(x|z) = N(z,1),
    so p(x) = N(0,2) and the importance weights are constant.

    A leaky-ReLU pair computes an exact linear map: routing (x, -x) through
    two hidden layers leaves (x, -s^2 x) for x > 0 and (s^2 x, -x) for x < 0,
    and the head combination c*h1 - c*h2 equals c(1+s^2)x in both regimes.
    """
    spec = ModelSpec(input_dim=1, latent_dim=1, hidden_dims=(2, 2),
                     leaky_slope=slope)
    params = init_params(spec, np.random.default_rng(0))
    c = 1.0 / (1.0 + slope**2)

    def set_linear(net, gain, lv_bias):
        params.set(f"{net}.h1.W", np.array([[1.0, -1.0]]))
        params.set(f"{net}.h1.b", np.zeros(2))
        params.set(f"{net}.h2.W", np.eye(2))
        params.set(f"{net}.h2.b", np.zeros(2))
        params.set(f"{net}.mu.W", np.array([[gain * c], [-gain * c]]))
        params.set(f"{net}.mu.b", np.zeros(1))
        params.set(f"{net}.lv.W", np.zeros((2, 1)))
        params.set(f"{net}.lv.b", np.array([lv_bias]))

    set_linear("enc", 0.5, math.log(0.5))   # q(z|x) = N(x/2, 1/2): the posterior
    set_linear("dec", 1.0, 0.0)             # p(x|z) = N(z, 1)
    return spec, params


def log_marginal(x: float) -> float:
    """log N(x; 0, 2) for the linear-Gaussian plug-in model."""
    return -0.5 * (math.log(2.0 * math.pi * 2.0) + x * x / 2.0)


def tiny_config(**overrides) -> TrainerConfig:
    base = dict(n0=16, gamma=1.03, T0=2, T1=6, T2=10, Ta=2, score_mc=4, seed=0)
    base.update(overrides)
    return TrainerConfig(**base)


def small_dataset(seed: int = 0, n: int = 240, overlap: float = 1.0 / 3.0):
    raw = make_synthetic(SyntheticSpec(n=n, overlap=overlap, seed=seed))
    return split_and_normalize(raw, seed=seed)


def random_model(rng, input_dim=3, latent_dim=2, hidden=(4, 4), scale=0.6):
    spec = ModelSpec(input_dim=input_dim, latent_dim=latent_dim, hidden_dims=hidden)
    params = init_params(spec, rng)
    params.values[...] = rng.normal(0.0, scale, size=params.size)
    return spec, params
