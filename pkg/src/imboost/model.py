"""Dense generative model: MLP encoder/decoder, reparameterized losses, and
their reverse-mode gradients.

The network is a fixed shape: a two-hidden-layer leaky-ReLU trunk followed by
two linear heads (mean and log-variance) for both the encoder and the decoder.
All parameters live in one flat float64 vector (`ParamStore`) so the optimizer
and checkpointing can treat the model as a single array.

Every loss evaluation is a deterministic function of (params, x, noise): the
standard-normal draws used by the reparameterization trick are supplied by the
caller, which makes finite-difference gradient checking exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

LOG_VAR_MIN = -8.0
LOG_VAR_MAX = 8.0
# The decoder's observation variance gets a tighter floor: maximizing the
# labeled-outlier loss otherwise drives it to collapse, which destroys the
# inlier likelihoods it shares parameters with.
DEC_LOG_VAR_MIN = -4.0
LOG_2PI = math.log(2.0 * math.pi)


def default_latent_dim(input_dim: int) -> int:
    return max(2, min(32, math.ceil(input_dim / 4)))


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description for the encoder/decoder pair."""

    input_dim: int
    latent_dim: int
    hidden_dims: tuple[int, int] = (64, 64)
    leaky_slope: float = 0.01
    iwae_samples: int = 2
    cubo_power: int = 2

    def __post_init__(self):
        if self.input_dim < 1 or self.latent_dim < 1:
            raise ValueError("input_dim and latent_dim must be positive")
        if len(self.hidden_dims) != 2 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden_dims must be two positive widths")
        if self.iwae_samples < 1:
            raise ValueError("iwae_samples must be >= 1")
        if self.cubo_power < 2:
            raise ValueError("cubo_power must be >= 2")

    @classmethod
    def for_data(cls, input_dim: int, **kwargs) -> "ModelSpec":
        kwargs.setdefault("latent_dim", default_latent_dim(input_dim))
        return cls(input_dim=input_dim, **kwargs)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "latent_dim": self.latent_dim,
            "hidden_dims": list(self.hidden_dims),
            "leaky_slope": self.leaky_slope,
            "iwae_samples": self.iwae_samples,
            "cubo_power": self.cubo_power,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        d["hidden_dims"] = tuple(d["hidden_dims"])
        return cls(**d)


def _layer_dims(spec: ModelSpec):
    h1, h2 = spec.hidden_dims
    p, d = spec.input_dim, spec.latent_dim
    return {
        "enc": [(p, h1), (h1, h2), (h2, d), (h2, d)],
        "dec": [(d, h1), (h1, h2), (h2, p), (h2, p)],
    }


_LAYER_NAMES = ("h1", "h2", "mu", "lv")


def build_layout(spec: ModelSpec) -> tuple[dict, int]:
    """Flat-vector layout: name -> (offset, shape), plus the total length."""
    layout = {}
    offset = 0
    for net, dims in _layer_dims(spec).items():
        for name, (fan_in, fan_out) in zip(_LAYER_NAMES, dims):
            layout[f"{net}.{name}.W"] = (offset, (fan_in, fan_out))
            offset += fan_in * fan_out
            layout[f"{net}.{name}.b"] = (offset, (fan_out,))
            offset += fan_out
    return layout, offset


@dataclass
class ParamStore:
    """All model parameters as one flat vector with named slices."""

    values: np.ndarray
    layout: dict = field(repr=False)
    spec: ModelSpec = None

    def get(self, name: str) -> np.ndarray:
        offset, shape = self.layout[name]
        return self.values[offset : offset + int(np.prod(shape))].reshape(shape)

    def set(self, name: str, arr) -> None:
        view = self.get(name)
        view[...] = np.asarray(arr, dtype=np.float64).reshape(view.shape)

    def copy(self) -> "ParamStore":
        return ParamStore(self.values.copy(), self.layout, self.spec)

    @property
    def size(self) -> int:
        return self.values.size


def init_params(spec: ModelSpec, rng: np.random.Generator) -> ParamStore:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
    layout, total = build_layout(spec)
    values = np.zeros(total, dtype=np.float64)
    params = ParamStore(values, layout, spec)
    for net, dims in _layer_dims(spec).items():
        for name, (fan_in, _) in zip(_LAYER_NAMES, dims):
            bound = 1.0 / math.sqrt(fan_in)
            for suffix in ("W", "b"):
                view = params.get(f"{net}.{name}.{suffix}")
                view[...] = rng.uniform(-bound, bound, size=view.shape)
    return params


def zero_params(spec: ModelSpec) -> ParamStore:
    layout, total = build_layout(spec)
    return ParamStore(np.zeros(total, dtype=np.float64), layout, spec)


def _leaky(a: np.ndarray, slope: float) -> np.ndarray:
    return np.where(a > 0.0, a, slope * a)


def _leaky_grad(a: np.ndarray, slope: float) -> np.ndarray:
    return np.where(a > 0.0, 1.0, slope)


def _mlp_forward(params: ParamStore, net: str, x: np.ndarray):
    """Trunk + two heads. Returns (mu, log_var clamped, cache)."""
    slope = params.spec.leaky_slope
    h = x
    trunk = []
    for name in ("h1", "h2"):
        a = h @ params.get(f"{net}.{name}.W") + params.get(f"{net}.{name}.b")
        trunk.append((h, a))
        h = _leaky(a, slope)
    mu = h @ params.get(f"{net}.mu.W") + params.get(f"{net}.mu.b")
    lv_raw = h @ params.get(f"{net}.lv.W") + params.get(f"{net}.lv.b")
    lv_min = DEC_LOG_VAR_MIN if net == "dec" else LOG_VAR_MIN
    lv = np.clip(lv_raw, lv_min, LOG_VAR_MAX)
    cache = (trunk, h, lv_raw)
    return mu, lv, cache


def _grad_view(grad: np.ndarray, layout: dict, name: str) -> np.ndarray:
    offset, shape = layout[name]
    return grad[offset : offset + int(np.prod(shape))].reshape(shape)


def _mlp_backward(params: ParamStore, net: str, cache, dmu, dlv, grad: np.ndarray):
    """Accumulate parameter gradients into `grad`; return gradient w.r.t. input."""
    slope = params.spec.leaky_slope
    trunk, h_last, lv_raw = cache
    layout = params.layout

    lv_min = DEC_LOG_VAR_MIN if net == "dec" else LOG_VAR_MIN
    dlv_raw = dlv * ((lv_raw > lv_min) & (lv_raw < LOG_VAR_MAX))
    _grad_view(grad, layout, f"{net}.mu.W")[...] += h_last.T @ dmu
    _grad_view(grad, layout, f"{net}.mu.b")[...] += dmu.sum(axis=0)
    _grad_view(grad, layout, f"{net}.lv.W")[...] += h_last.T @ dlv_raw
    _grad_view(grad, layout, f"{net}.lv.b")[...] += dlv_raw.sum(axis=0)
    dh = dmu @ params.get(f"{net}.mu.W").T + dlv_raw @ params.get(f"{net}.lv.W").T

    for name, (h_in, a) in zip(("h2", "h1"), reversed(trunk)):
        da = dh * _leaky_grad(a, slope)
        _grad_view(grad, layout, f"{net}.{name}.W")[...] += h_in.T @ da
        _grad_view(grad, layout, f"{net}.{name}.b")[...] += da.sum(axis=0)
        dh = da @ params.get(f"{net}.{name}.W").T
    return dh


def _check_input(params: ParamStore, x, dim_name: str, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != dim:
        raise ShapeError(f"expected trailing dimension {dim} ({dim_name}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite input", term=dim_name)
    return x


def encode(params: ParamStore, x) -> tuple[np.ndarray, np.ndarray]:
    """Variational posterior parameters q(z|x): diagonal Gaussian (mu, log_var)."""
    x = _check_input(params, x, "input_dim", params.spec.input_dim)
    single = x.ndim == 1
    mu, lv, _ = _mlp_forward(params, "enc", np.atleast_2d(x))
    return (mu[0], lv[0]) if single else (mu, lv)


def decode(params: ParamStore, z) -> tuple[np.ndarray, np.ndarray]:
    """Observation model parameters p(x|z): diagonal Gaussian (mu_x, log_var_x)."""
    z = _check_input(params, z, "latent_dim", params.spec.latent_dim)
    single = z.ndim == 1
    mu, lv, _ = _mlp_forward(params, "dec", np.atleast_2d(z))
    return (mu[0], lv[0]) if single else (mu, lv)


def _diag_gauss_logpdf(x, mu, log_var):
    return -0.5 * np.sum(LOG_2PI + log_var + (x - mu) ** 2 * np.exp(-log_var), axis=-1)


def log_joint_terms(params: ParamStore, x, z) -> tuple[float, float, float]:
    """(log p(x|z), log p(z), log q(z|x)) under the diagonal-Gaussian model
    with a standard-normal prior on z."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    mu_x, lv_x = decode(params, z)
    log_p_x_given_z = float(_diag_gauss_logpdf(x, mu_x, lv_x))
    log_p_z = float(-0.5 * np.sum(LOG_2PI + z**2))
    mu_q, lv_q = encode(params, x)
    log_q = float(_diag_gauss_logpdf(z, mu_q, lv_q))
    for name, value in (
        ("log_p_x_given_z", log_p_x_given_z),
        ("log_p_z", log_p_z),
        ("log_q_z_given_x", log_q),
    ):
        if not math.isfinite(value):
            raise NumericError(f"{name} is not finite", term=name)
    return log_p_x_given_z, log_p_z, log_q


def _logsumexp(a: np.ndarray, axis: int):
    m = np.max(a, axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.sum(np.exp(a - m), axis=axis))
    return out


def _softmax(a: np.ndarray, axis: int):
    m = np.max(a, axis=axis, keepdims=True)
    e = np.exp(a - m)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class LossForward:
    """Cached intermediates of one batched loss evaluation."""

    x: np.ndarray          # (n, p)
    noise: np.ndarray      # (n, K, d)
    mu: np.ndarray         # (n, d) encoder mean
    lv: np.ndarray         # (n, d) encoder log-variance (clamped)
    z: np.ndarray          # (n, K, d)
    mu_x: np.ndarray       # (n, K, p)
    lv_x: np.ndarray       # (n, K, p)
    log_w: np.ndarray      # (n, K) importance log-weights
    iwae: np.ndarray       # (n,)
    cubo: np.ndarray       # (n,)
    enc_cache: tuple
    dec_cache: tuple


def forward_losses(params: ParamStore, x, noise) -> LossForward:
    """Per-sample IWAE and CUBO losses with caches for the backward pass.

    `noise` has shape (n, K, d); K is taken from it, so callers may evaluate
    with any number of importance samples.
    """
    spec = params.spec
    x = _check_input(params, np.atleast_2d(x), "input_dim", spec.input_dim)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 3 or noise.shape[0] != x.shape[0] or noise.shape[2] != spec.latent_dim:
        raise ShapeError(f"noise must be (n, K, latent_dim); got {noise.shape}")
    n, K, d = noise.shape

    mu, lv, enc_cache = _mlp_forward(params, "enc", x)
    z = mu[:, None, :] + np.exp(0.5 * lv)[:, None, :] * noise
    mu_x_flat, lv_x_flat, dec_cache = _mlp_forward(params, "dec", z.reshape(n * K, d))
    mu_x = mu_x_flat.reshape(n, K, spec.input_dim)
    lv_x = lv_x_flat.reshape(n, K, spec.input_dim)

    log_px = _diag_gauss_logpdf(x[:, None, :], mu_x, lv_x)
    log_pz = -0.5 * np.sum(LOG_2PI + z**2, axis=-1)
    log_q = _diag_gauss_logpdf(z, mu[:, None, :], lv[:, None, :])
    log_w = log_px + log_pz - log_q

    if not np.all(np.isfinite(log_w)):
        raise NumericError("non-finite importance log-weight", term="log_w")

    log_k = math.log(K)
    iwae = -(_logsumexp(log_w, axis=1) - log_k)
    cubo = -0.5 * (_logsumexp(2.0 * log_w, axis=1) - log_k)
    return LossForward(x, noise, mu, lv, z, mu_x, lv_x, log_w, iwae, cubo,
                       enc_cache, dec_cache)


def backward_losses(params: ParamStore, fwd: LossForward,
                    iwae_weights, cubo_weights) -> np.ndarray:
    """Gradient of sum_i (iwae_w[i] * iwae_i + cubo_w[i] * cubo_i) w.r.t. the
    flat parameter vector, with the noise draws held fixed."""
    n, K, d = fwd.noise.shape
    p = fwd.x.shape[1]
    wi = np.asarray(iwae_weights, dtype=np.float64).reshape(n)
    wo = np.asarray(cubo_weights, dtype=np.float64).reshape(n)

    grad = np.zeros_like(params.values)
    if n == 0 or (not wi.any() and not wo.any()):
        return grad

    # d(objective)/d log_w: each per-sample loss is a negative logsumexp.
    g = -(wi[:, None] * _softmax(fwd.log_w, axis=1)
          + wo[:, None] * _softmax(2.0 * fwd.log_w, axis=1))

    xr = fwd.x[:, None, :]
    inv_var_x = np.exp(-fwd.lv_x)
    resid_x = xr - fwd.mu_x

    # log p(x|z) w.r.t. decoder heads
    dmu_x = g[:, :, None] * resid_x * inv_var_x
    dlv_x = g[:, :, None] * 0.5 * (resid_x**2 * inv_var_x - 1.0)
    dz = _mlp_backward(params, "dec", fwd.dec_cache,
                       dmu_x.reshape(n * K, p), dlv_x.reshape(n * K, p),
                       grad).reshape(n, K, d)

    # log p(z) term
    dz += g[:, :, None] * (-fwd.z)

    # -log q(z|x): contributions through z and directly through (mu, lv)
    inv_var_q = np.exp(-fwd.lv)[:, None, :]
    resid_q = fwd.z - fwd.mu[:, None, :]
    dz += g[:, :, None] * resid_q * inv_var_q
    dmu = np.sum(-g[:, :, None] * resid_q * inv_var_q, axis=1)
    dlv = np.sum(-g[:, :, None] * 0.5 * (resid_q**2 * inv_var_q - 1.0), axis=1)

    # reparameterization: z = mu + exp(lv/2) * eps
    dmu += dz.sum(axis=1)
    dlv += np.sum(dz * 0.5 * np.exp(0.5 * fwd.lv)[:, None, :] * fwd.noise, axis=1)

    _mlp_backward(params, "enc", fwd.enc_cache, dmu, dlv, grad)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient", term="grad")
    return grad


def loss_and_grad(params: ParamStore, x, noise, iwae_weights, cubo_weights):
    """Per-sample (iwae, cubo) losses plus the exact gradient of the weighted
    objective sum_i (iwae_w[i]*iwae_i + cubo_w[i]*cubo_i)."""
    fwd = forward_losses(params, x, noise)
    grad = backward_losses(params, fwd, iwae_weights, cubo_weights)
    return fwd.iwae, fwd.cubo, grad
