"""Adam against a scripted scalar recursion, plus state-safety contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imboost import AdamState, adam_step
from imboost.errors import NumericError, ShapeError


class Vec:
    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)


def scripted_adam(x0, grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    x = list(x0)
    m = [0.0] * len(x0)
    v = [0.0] * len(x0)
    for t, g in enumerate(grads, start=1):
        for j in range(len(x)):
            m[j] = b1 * m[j] + (1 - b1) * g[j]
            v[j] = b2 * v[j] + (1 - b2) * g[j] ** 2
            m_hat = m[j] / (1 - b1**t)
            v_hat = v[j] / (1 - b2**t)
            x[j] -= lr * m_hat / (v_hat**0.5 + eps)
    return x


def test_matches_scripted_recursion():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=5)
    grads = [rng.normal(size=5) for _ in range(20)]

    params = Vec(x0.copy())
    state = AdamState.init(5, lr=1e-3)
    for g in grads:
        adam_step(state, params, g)

    expected = scripted_adam(x0, grads)
    np.testing.assert_allclose(params.values, expected, rtol=1e-13)
    assert state.step_count == 20


def test_first_step_magnitude():
    params = Vec(np.zeros(3))
    state = AdamState.init(3, lr=1e-3)
    adam_step(state, params, np.array([1.0, -2.0, 0.5]))
    # bias correction makes m_hat = g and v_hat = g^2 on step one, so the
    # update is -lr * g / (|g| + eps) regardless of gradient scale
    expected = -1e-3 * np.array([1.0, -2.0, 0.5]) / (np.array([1.0, 2.0, 0.5]) + 1e-8)
    np.testing.assert_allclose(params.values, expected, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**31 - 1))
def test_update_is_elementwise(n, seed):
    # running Adam on a concatenated vector equals running it per coordinate
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=n)
    grads = [rng.normal(size=n) for _ in range(5)]

    full = Vec(x0.copy())
    state = AdamState.init(n)
    for g in grads:
        adam_step(state, full, g)

    for j in range(n):
        single = Vec(x0[j : j + 1].copy())
        s = AdamState.init(1)
        for g in grads:
            adam_step(s, single, g[j : j + 1])
        np.testing.assert_allclose(single.values[0], full.values[j], rtol=1e-13)


def test_non_finite_gradient_leaves_state_untouched():
    params = Vec(np.ones(2))
    state = AdamState.init(2)
    adam_step(state, params, np.array([0.1, 0.2]))
    before = (params.values.copy(), state.m.copy(), state.v.copy(), state.step_count)
    with pytest.raises(NumericError):
        adam_step(state, params, np.array([np.nan, 0.0]))
    np.testing.assert_array_equal(params.values, before[0])
    np.testing.assert_array_equal(state.m, before[1])
    np.testing.assert_array_equal(state.v, before[2])
    assert state.step_count == before[3]


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        adam_step(AdamState.init(2), Vec(np.zeros(2)), np.zeros(3))
