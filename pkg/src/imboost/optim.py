"""Adam optimizer over the flat parameter vector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params: int, lr: float = 1e-3, **kwargs) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), lr=lr, **kwargs)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.step_count,
                         self.lr, self.beta1, self.beta2, self.eps)


def adam_step(state: AdamState, params, grad) -> None:
    """One bias-corrected Adam update, in place.

    A non-finite gradient is rejected before any state is touched.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.values.shape:
        raise ShapeError(f"grad shape {grad.shape} != params shape {params.values.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to adam_step", term="grad")

    state.step_count += 1
    t = state.step_count
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad**2
    m_hat = state.m / (1.0 - state.beta1**t)
    v_hat = state.v / (1.0 - state.beta2**t)
    params.values -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
