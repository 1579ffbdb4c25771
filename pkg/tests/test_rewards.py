"""Reward oracles: frozen scalar evaluations and algebraic identities.

The three dense-reward scalars were evaluated by hand from the shaped
form r = -alpha*l1 - beta/(l2+eps) - phi_eff*f_z with the default
parameters and are asserted to 1e-12. Note the shaped reward is NOT
maximal at the estimate for these parameters (the beta term grows as
distance shrinks); the strict-maximum property only holds outside the
~2cm hump, so it is sampled at >= 2.5cm.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insertion_rl.env import EnvState
from insertion_rl.rewards import (
    DenseRewardParams,
    dense_reward,
    image_reward,
    sparse_reward,
)

GOAL = np.zeros(3)


def make_state(inserted):
    return EnvState(pos=np.zeros(3), f_z=0.0, inserted=inserted, step_index=0)


def test_sparse_binary():
    assert sparse_reward(make_state(True)) == 1.0
    assert sparse_reward(make_state(False)) == 0.0


def test_sparse_codomain_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(1_000_000):
        s = EnvState(pos=GOAL, f_z=0.0, inserted=bool(rng.integers(2)), step_index=0)
        assert sparse_reward(s) in (0.0, 1.0)


def test_dense_at_estimate_oracle():
    # l1 = l2 = 0: r = -beta/eps = -0.002/0.001 = -2.0
    r = dense_reward(GOAL, 0.0, False, GOAL)
    assert abs(r - (-2.0)) < 1e-12


def test_dense_at_1cm_oracle():
    # l1 = l2 = 0.01: r = -1 - 0.002/0.011
    r = dense_reward(np.array([0.01, 0.0, 0.0]), 0.0, False, GOAL)
    assert abs(r - (-1.0 - 0.002 / 0.011)) < 1e-12


def test_dense_inserted_force_flip_oracle():
    # seated with f_z = 5: r = -2.0 + 0.1*5 = -1.5
    r = dense_reward(GOAL, 5.0, True, GOAL)
    assert abs(r - (-1.5)) < 1e-12


def test_sign_flip_identity_exact():
    # at well-scaled values the identity is exact in float64
    r_in = dense_reward(GOAL, 5.0, True, GOAL)
    r_out = dense_reward(GOAL, 5.0, False, GOAL)
    assert r_in - r_out == 2.0 * 0.1 * 5.0


@given(
    f_z=st.floats(0.0, 50.0),
    dx=st.floats(-0.03, 0.03),
    dz=st.floats(-0.03, 0.03),
)
@settings(max_examples=200, deadline=None)
def test_sign_flip_identity_property(f_z, dx, dz):
    pos = np.array([dx, 0.0, dz])
    delta = dense_reward(pos, f_z, True, GOAL) - dense_reward(pos, f_z, False, GOAL)
    assert delta == pytest.approx(2.0 * 0.1 * f_z, rel=1e-12, abs=1e-12)


def test_dense_uses_the_estimate_not_truth():
    est = np.array([0.01, 0.0, 0.0])
    assert dense_reward(est, 0.0, False, est) == pytest.approx(-2.0, abs=1e-12)


@given(
    x=st.floats(-0.3, 0.3), y=st.floats(-0.3, 0.3), z=st.floats(-0.3, 0.3),
)
@settings(max_examples=300, deadline=None)
def test_dense_max_outside_hump(x, y, z):
    """Strict maximum at the estimate among free-space states at least
    2.5cm away (inside that radius the beta term dominates and the
    estimate is not the argmax)."""
    pos = np.array([x, y, z])
    if np.sum(np.abs(pos)) < 0.025:
        return
    assert dense_reward(GOAL, 0.0, False, GOAL) > dense_reward(pos, 0.0, False, GOAL)


def test_params_validation():
    with pytest.raises(ValueError):
        DenseRewardParams(alpha=0.0)
    with pytest.raises(ValueError):
        DenseRewardParams(beta=-1.0)
    with pytest.raises(ValueError):
        DenseRewardParams(phi=0.0)
    with pytest.raises(ValueError):
        DenseRewardParams(epsilon=0.02)
    with pytest.raises(ValueError):
        DenseRewardParams(epsilon=0.0)


def test_image_identity_zero():
    frame = np.linspace(0.0, 1.0, 1024)
    assert image_reward(frame, frame) == 0.0


def test_image_max_distance():
    assert image_reward(np.zeros(1024), np.ones(1024)) == -1.0


def test_image_symmetric():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(size=1024), rng.uniform(size=1024)
    assert image_reward(a, b) == image_reward(b, a)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=100, deadline=None)
def test_image_codomain(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=64), rng.uniform(size=64)
    r = image_reward(a, b)
    assert -1.0 <= r <= 0.0
    if r == 0.0:
        np.testing.assert_array_equal(a, b)


def test_image_shape_mismatch():
    with pytest.raises(ValueError):
        image_reward(np.zeros(1024), np.zeros(1023))
