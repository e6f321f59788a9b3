import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbrlbench import envs
from mbrlbench.envs import UnknownEnvironment, make, reward_fn


@pytest.mark.parametrize(
    "env_id,dims",
    [("pendulum", (3, 1, 200, 50)), ("inverted-pendulum", (4, 1, 100, 35)), ("reacher", (9, 2, 50, 50))],
)
def test_spec_dimensions(env_id, dims):
    env = make(env_id)
    spec = env.spec
    assert (spec.obs_dim, spec.act_dim, spec.horizon, spec.episodes) == dims
    obs = env.reset(0)
    assert obs.shape == (spec.obs_dim,)
    nxt, r = env.step(np.zeros(spec.act_dim))
    assert nxt.shape == (spec.obs_dim,) and np.isfinite(r)


@pytest.mark.parametrize("env_id", envs.ENV_IDS)
def test_reset_is_deterministic(env_id):
    a, b = make(env_id), make(env_id)
    np.testing.assert_array_equal(a.reset(42), b.reset(42))
    assert not np.array_equal(a.reset(1), b.reset(2))


def test_pendulum_obs_on_unit_circle():
    env = make("pendulum")
    for seed in range(20):
        obs = env.reset(seed)
        assert abs(obs[0] ** 2 + obs[1] ** 2 - 1.0) <= 1e-12
        assert abs(abs(math.atan2(obs[1], obs[0])) - math.pi) < 0.2


def test_reacher_target_reachable():
    env = make("reacher")
    for seed in range(50):
        obs = env.reset(seed)
        assert np.linalg.norm(obs[6:8]) <= env.reach


def test_pendulum_upright_equilibrium():
    env = make("pendulum")
    env.reset(0)
    env.set_state([0.0, 0.0])
    obs, r = env.step([0.0])
    assert env.state[0] == 0.0 and env.state[1] == 0.0
    assert r == 0.0
    np.testing.assert_array_equal(obs, [1.0, 0.0, 0.0])


def test_cartpole_upright_is_unstable():
    env = make("inverted-pendulum")
    env.reset(0)
    env.set_state([0.0, 0.0, 0.1, 0.0])
    thetas = [0.1]
    for _ in range(25):
        env.step([0.0])
        thetas.append(abs(env.state[2]))
    assert all(b > a for a, b in zip(thetas, thetas[1:]))


@pytest.mark.parametrize("env_id", envs.ENV_IDS)
def test_step_is_deterministic(env_id, rng):
    a, b = make(env_id), make(env_id)
    a.reset(3)
    b.reset(3)
    act = rng.uniform(-1, 1, size=a.spec.act_dim)
    oa, ra = a.step(act)
    ob, rb = b.step(act)
    np.testing.assert_array_equal(oa, ob)
    assert ra == rb


def test_step_rejects_nonfinite_action():
    env = make("pendulum")
    env.reset(0)
    with pytest.raises(ValueError):
        env.step([np.nan])


def test_step_clips_action():
    a, b = make("pendulum"), make("pendulum")
    a.reset(0)
    b.reset(0)
    oa, ra = a.step([50.0])
    ob, rb = b.step([2.0])
    np.testing.assert_array_equal(oa, ob)
    assert ra == rb


def test_reward_hand_values():
    assert reward_fn("pendulum", [1.0, 0.0, 0.0], [0.0]) == 0.0
    assert reward_fn("pendulum", [math.cos(math.pi), math.sin(math.pi), 0.0], [0.0]) == pytest.approx(
        -math.pi ** 2, abs=1e-9
    )
    assert envs.pendulum_reward(math.pi, 0.0, 0.0) == pytest.approx(-9.8696, abs=1e-4)
    obs = np.array([0.3, -0.2, 0.0, 0.0, 0.1, 0.05, 0.1, 0.05, 0.0])
    assert reward_fn("reacher", obs, [0.0, 0.0]) == 0.0
    assert reward_fn("inverted-pendulum", [0.0, 0.0, 0.3, 0.0], [1.0]) == pytest.approx(-0.09)


def test_reward_rejects_unknown_env():
    with pytest.raises(UnknownEnvironment):
        reward_fn("acrobot", [0.0], [0.0])
    with pytest.raises(UnknownEnvironment):
        make("hopper")


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(-8, 8), st.floats(-2, 2), st.integers(-5, 5))
def test_pendulum_reward_is_2pi_periodic(theta, thdot, a, k):
    base = envs.pendulum_reward(theta, thdot, a)
    shifted = envs.pendulum_reward(theta + 2 * math.pi * k, thdot, a)
    assert shifted == pytest.approx(base, abs=1e-9)


@pytest.mark.parametrize("env_id", envs.ENV_IDS)
def test_step_reward_matches_reward_fn(env_id, rng):
    env = make(env_id)
    obs = env.reset(7)
    lo, hi = env.spec.bounds
    for _ in range(30):
        a = rng.uniform(lo, hi)
        expected = reward_fn(env_id, obs, a)
        obs, r = env.step(a)
        assert r == expected


@pytest.mark.parametrize("env_id", envs.ENV_IDS)
def test_batched_transition_matches_step(env_id, rng):
    env = make(env_id)
    obs = env.reset(11)
    lo, hi = env.spec.bounds
    for _ in range(20):
        a = rng.uniform(lo, hi)
        predicted = env.transition(obs, a)[0]
        obs, _ = env.step(a)
        np.testing.assert_allclose(predicted, obs, atol=1e-12)


def test_pendulum_energy_drift_small():
    env = make("pendulum", max_speed=None)
    for seed in range(10):
        env.reset(seed)
        e0 = env.energy()
        worst = 0.0
        for _ in range(env.spec.horizon):
            env.step([0.0])
            worst = max(worst, abs(env.energy() - e0) / abs(e0))
        assert worst < 0.01


def test_pendulum_energy_has_no_secular_drift_at_large_amplitude():
    env = make("pendulum", max_speed=None)
    env.reset(0)
    env.set_state([math.pi - 2.0, 0.0])
    e = [env.energy()]
    for _ in range(env.spec.horizon):
        env.step([0.0])
        e.append(env.energy())
    e = np.array(e)
    assert abs(e[-50:].mean() - e[:50].mean()) / abs(e[0]) < 0.01


def test_formula_only_rewards():
    assert envs.inverted_double_pendulum_reward(0.0, 0.0, 0.0, 0.0) == 0.0
    assert envs.hopper_reward(1.0, np.zeros(3), 0.0) == 2.0
    assert envs.halfcheetah_reward(2.0, np.ones(6)) == pytest.approx(1.4)
