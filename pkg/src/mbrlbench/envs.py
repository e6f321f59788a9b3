"""Analytic continuous-control environments and their reward functions.

All dynamics are integrated with semi-implicit Euler (velocity first, then
position with the new velocity). Every environment exposes a vectorized
``transition(obs, act)`` working purely on observations, so the same code
drives ``step`` and any oracle model that plans through the true dynamics.

Rewards are always computed from the *pre-transition* observation and the
clipped action by :func:`reward_fn`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnknownEnvironment(ValueError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    id: str
    obs_dim: int
    act_dim: int
    horizon: int
    episodes: int
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.action_low), np.array(self.action_high)


# Table of (obs_dim, act_dim, horizon, episodes); dynamics exist only for the first three.
TASK_TABLE = {
    "pendulum": (3, 1, 200, 50),
    "inverted-pendulum": (4, 1, 100, 35),
    "reacher": (9, 2, 50, 50),
    "inverted-double-pendulum": (11, 1, 100, 100),
    "hopper": (11, 3, 500, 100),
    "halfcheetah": (17, 6, 500, 100),
}

ENV_IDS = ("pendulum", "inverted-pendulum", "reacher")


def _wrap(theta):
    # maps to [-pi, pi)
    return ((theta + np.pi) % (2 * np.pi)) - np.pi


# ---------------------------------------------------------------------------
# reward functions
# ---------------------------------------------------------------------------


def pendulum_reward(theta, theta_dot, a):
    return -(_wrap(theta) ** 2) - 0.1 * theta_dot ** 2 - 0.001 * a ** 2


def inverted_pendulum_reward(theta):
    return -(theta ** 2)


def reacher_reward(distance, a):
    return -distance - np.sum(np.square(a), axis=-1)


# Formula-only rewards for tasks whose dynamics need a rigid-body engine.
def inverted_double_pendulum_reward(theta, gamma, theta_dot, gamma_dot):
    return -(theta ** 2) - gamma ** 2 - 0.001 * theta_dot ** 2 - 0.005 * gamma_dot ** 2


def hopper_reward(x_dot, a, h):
    return x_dot - 0.1 * np.sum(np.square(a), axis=-1) - 3.0 * h ** 2 + 1.0


def halfcheetah_reward(x_dot, a):
    return x_dot - 0.1 * np.sum(np.square(a), axis=-1)


def reward_fn(env_id: str, s, a):
    """Reward of observation(s) ``s`` under action(s) ``a``; broadcasts over leading axes."""
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    if env_id == "pendulum":
        theta = np.arctan2(s[..., 1], s[..., 0])
        return pendulum_reward(theta, s[..., 2], a[..., 0])
    if env_id == "inverted-pendulum":
        return inverted_pendulum_reward(s[..., 2])
    if env_id == "reacher":
        dist = np.linalg.norm(s[..., 4:6] - s[..., 6:8], axis=-1)
        return reacher_reward(dist, a)
    raise UnknownEnvironment(f"no reward function for environment {env_id!r}")


# ---------------------------------------------------------------------------
# environments
# ---------------------------------------------------------------------------


class Environment:
    """Base class: subclasses define ``spec``, ``_physics`` and the obs mapping."""

    spec: EnvSpec

    def __init__(self):
        self._state: np.ndarray | None = None

    @property
    def id(self) -> str:
        return self.spec.id

    def clip_action(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape != (self.spec.act_dim,):
            raise ValueError(f"action has shape {a.shape}, expected ({self.spec.act_dim},)")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"non-finite action {a}")
        lo, hi = self.spec.bounds
        return np.clip(a, lo, hi)

    @property
    def state(self) -> np.ndarray:
        if self._state is None:
            raise RuntimeError("environment not reset")
        return self._state.copy()

    def set_state(self, state) -> np.ndarray:
        self._state = np.array(state, dtype=float)
        return self.observe()

    def observe(self) -> np.ndarray:
        return self.state_to_obs(self.state)

    def reset(self, seed=None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self._state = self._initial_state(rng)
        return self.observe()

    def step(self, a):
        a = self.clip_action(a)
        obs = self.observe()
        r = float(reward_fn(self.id, obs, a))
        self._state = self._physics(self._state[None, :], a[None, :])[0]
        return self.observe(), r

    def transition(self, obs, act) -> np.ndarray:
        """True next observation for batches of observations and (clipped) actions."""
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        lo, hi = self.spec.bounds
        act = np.clip(np.atleast_2d(np.asarray(act, dtype=float)), lo, hi)
        return self.state_to_obs(self._physics(self.obs_to_state(obs), act))

    # subclass hooks
    def _initial_state(self, rng) -> np.ndarray:
        raise NotImplementedError

    def _physics(self, state, act) -> np.ndarray:
        raise NotImplementedError

    def state_to_obs(self, state) -> np.ndarray:
        raise NotImplementedError

    def obs_to_state(self, obs) -> np.ndarray:
        raise NotImplementedError


def _spec(env_id, low, high):
    obs, act, horizon, episodes = TASK_TABLE[env_id]
    return EnvSpec(env_id, obs, act, horizon, episodes, tuple(low), tuple(high))


class Pendulum(Environment):
    """Swing-up pendulum; ``theta = 0`` is upright, internal state ``(theta, theta_dot)``.

    ``theta_ddot = 3g/(2l) sin(theta) + 3a/(m l^2) - damping * theta_dot``,
    observation ``(cos theta, sin theta, theta_dot)``.
    """

    spec = _spec("pendulum", [-2.0], [2.0])

    def __init__(self, g=10.0, m=1.0, l=1.0, dt=0.05, max_speed=8.0, damping=0.0, init_noise=0.1):
        super().__init__()
        self.g, self.m, self.l, self.dt = g, m, l, dt
        self.max_speed = max_speed
        self.damping = damping
        self.init_noise = init_noise

    def _initial_state(self, rng):
        # near hanging down
        th = np.pi + rng.uniform(-self.init_noise, self.init_noise)
        thdot = rng.uniform(-self.init_noise, self.init_noise)
        return np.array([th, thdot])

    def _physics(self, state, act):
        th, thdot = state[:, 0], state[:, 1]
        acc = 3 * self.g / (2 * self.l) * np.sin(th) + 3.0 / (self.m * self.l ** 2) * act[:, 0]
        acc = acc - self.damping * thdot
        new_thdot = thdot + acc * self.dt
        if self.max_speed is not None:
            new_thdot = np.clip(new_thdot, -self.max_speed, self.max_speed)
        new_th = th + new_thdot * self.dt
        return np.stack([new_th, new_thdot], axis=1)

    def state_to_obs(self, state):
        state = np.asarray(state)
        return np.stack([np.cos(state[..., 0]), np.sin(state[..., 0]), state[..., 1]], axis=-1)

    def obs_to_state(self, obs):
        return np.stack([np.arctan2(obs[:, 1], obs[:, 0]), obs[:, 2]], axis=1)

    def energy(self, state=None) -> float:
        """Mechanical energy of a uniform rod pivoting at one end (zero at the pivot height)."""
        th, thdot = self.state if state is None else state
        inertia = self.m * self.l ** 2 / 3.0
        return 0.5 * inertia * thdot ** 2 + self.m * self.g * (self.l / 2.0) * np.cos(th)


class CartPole(Environment):
    """Cart-pole with continuous force; state ``(x, x_dot, theta, theta_dot)``, ``theta = 0`` upright."""

    spec = _spec("inverted-pendulum", [-10.0], [10.0])

    def __init__(self, gravity=9.8, masscart=1.0, masspole=0.1, half_length=0.5, dt=0.02, init_noise=0.05):
        super().__init__()
        self.gravity = gravity
        self.masscart, self.masspole = masscart, masspole
        self.half_length = half_length
        self.dt = dt
        self.init_noise = init_noise

    def _initial_state(self, rng):
        return rng.uniform(-self.init_noise, self.init_noise, size=4)

    def _physics(self, state, act):
        x, x_dot, th, th_dot = state.T
        force = act[:, 0]
        total = self.masscart + self.masspole
        pml = self.masspole * self.half_length
        cos, sin = np.cos(th), np.sin(th)
        temp = (force + pml * th_dot ** 2 * sin) / total
        th_acc = (self.gravity * sin - cos * temp) / (
            self.half_length * (4.0 / 3.0 - self.masspole * cos ** 2 / total)
        )
        x_acc = temp - pml * th_acc * cos / total
        x_dot = x_dot + self.dt * x_acc
        x = x + self.dt * x_dot
        th_dot = th_dot + self.dt * th_acc
        th = th + self.dt * th_dot
        return np.stack([x, x_dot, th, th_dot], axis=1)

    def state_to_obs(self, state):
        return np.array(state, dtype=float)

    def obs_to_state(self, obs):
        return np.array(obs, dtype=float)


class Reacher(Environment):
    """Planar two-link arm with damped, directly actuated joints.

    State ``(q1, q2, q1_dot, q2_dot, target_x, target_y)``. Observation
    ``(q1, q2, q1_dot, q2_dot, tip_x, tip_y, target_x, target_y, distance)``.
    """

    spec = _spec("reacher", [-1.0, -1.0], [1.0, 1.0])

    def __init__(self, link1=0.1, link2=0.11, torque_gain=20.0, damping=2.0, dt=0.02, target_radius=0.2):
        super().__init__()
        self.link1, self.link2 = link1, link2
        self.torque_gain = torque_gain
        self.damping = damping
        self.dt = dt
        self.target_radius = target_radius

    @property
    def reach(self) -> float:
        return self.link1 + self.link2

    def _initial_state(self, rng):
        q = rng.uniform(-0.1, 0.1, size=2)
        qdot = rng.uniform(-0.005, 0.005, size=2)
        r = self.target_radius * np.sqrt(rng.uniform())
        ang = rng.uniform(-np.pi, np.pi)
        return np.concatenate([q, qdot, [r * np.cos(ang), r * np.sin(ang)]])

    def tip(self, q):
        q = np.asarray(q)
        q1, q2 = q[..., 0], q[..., 1]
        x = self.link1 * np.cos(q1) + self.link2 * np.cos(q1 + q2)
        y = self.link1 * np.sin(q1) + self.link2 * np.sin(q1 + q2)
        return np.stack([x, y], axis=-1)

    def _physics(self, state, act):
        q, qdot, target = state[:, 0:2], state[:, 2:4], state[:, 4:6]
        qdot = qdot + self.dt * (self.torque_gain * act - self.damping * qdot)
        q = q + self.dt * qdot
        return np.concatenate([q, qdot, target], axis=1)

    def state_to_obs(self, state):
        state = np.asarray(state, dtype=float)
        tip = self.tip(state[..., 0:2])
        target = state[..., 4:6]
        dist = np.linalg.norm(tip - target, axis=-1, keepdims=True)
        return np.concatenate([state[..., 0:4], tip, target, dist], axis=-1)

    def obs_to_state(self, obs):
        return np.concatenate([obs[:, 0:4], obs[:, 6:8]], axis=1)


_REGISTRY = {"pendulum": Pendulum, "inverted-pendulum": CartPole, "reacher": Reacher}


def make(env_id: str, **kwargs) -> Environment:
    try:
        cls = _REGISTRY[env_id]
    except KeyError:
        if env_id in TASK_TABLE:
            raise UnknownEnvironment(f"{env_id!r} needs a rigid-body simulator and has no dynamics here") from None
        raise UnknownEnvironment(f"unknown environment {env_id!r}; expected one of {ENV_IDS}") from None
    return cls(**kwargs)


def get_spec(env_id: str) -> EnvSpec:
    if env_id not in _REGISTRY:
        make(env_id)
    return _REGISTRY[env_id].spec
