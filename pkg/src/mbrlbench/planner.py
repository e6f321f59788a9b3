"""Model predictive control with random shooting, exploration and the replay buffer."""

from __future__ import annotations

import collections
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

RewardFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray


class ReplayBuffer:
    """Bounded FIFO store of transitions; the oldest entry is evicted at capacity."""

    def __init__(self, capacity: int = 2000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._items: collections.deque[Transition] = collections.deque(maxlen=self.capacity)

    def push(self, t: Transition) -> None:
        self._items.append(t)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self._items)

    def arrays(self):
        """Stacked ``(S, A, S_next, R)`` in insertion order."""
        if not self._items:
            raise ValueError("buffer is empty")
        S = np.stack([t.s for t in self._items])
        A = np.stack([np.atleast_1d(t.a) for t in self._items])
        S2 = np.stack([t.s_next for t in self._items])
        R = np.array([t.r for t in self._items], dtype=float)
        return S, A, S2, R


def buffer_push(buf: ReplayBuffer, t: Transition) -> None:
    buf.push(t)


@dataclass(frozen=True)
class ShootingConfig:
    """Random-shooting settings.

    ``chunk_size`` fixes how candidates are partitioned for evaluation and
    ``workers`` how many chunks run concurrently. Results depend on the
    partition but never on ``workers``.
    """

    num_trajectories: int = 500
    planning_horizon: int = 20
    seed: int = 0
    chunk_size: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.num_trajectories < 1 or self.planning_horizon < 1:
            raise ValueError("num_trajectories and planning_horizon must be >= 1")
        if self.chunk_size is not None and self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class ExplorationConfig:
    epsilon: float = 0.1
    num_candidate_actions: int = 100

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.num_candidate_actions < 1:
            raise ValueError("num_candidate_actions must be positive")


def _bounds(bounds, act_dim=None):
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in bounds)
    if lo.shape != hi.shape or np.any(hi < lo):
        raise ValueError("invalid action bounds")
    return lo, hi


def sample_action_sequences(rng: np.random.Generator, n_seq: int, horizon: int, bounds) -> np.ndarray:
    """I.i.d. uniform actions of shape (n_seq, horizon, act_dim).

    A single draw in C order, so a smaller set is a prefix of a larger one
    drawn from the same stream state.
    """
    lo, hi = _bounds(bounds)
    return rng.uniform(lo, hi, size=(n_seq, horizon, lo.size))


def _step_rng(plan_seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng([plan_seed, t])


def rollout_returns(model, reward: RewardFn, s0, actions: np.ndarray, plan_seed: int = 0) -> np.ndarray:
    """Sum of ``n`` rewards along each sequence under the model's mean prediction.

    Rewards are taken at ``(s_t, a_t)`` for ``t = 0..n-1``. A trajectory whose
    predicted state or reward becomes non-finite scores ``-inf``.
    """
    B, n, _ = actions.shape
    S = np.repeat(np.asarray(s0, dtype=float)[None, :], B, axis=0)
    score = np.zeros(B)
    alive = np.ones(B, dtype=bool)
    with np.errstate(all="ignore"):
        for t in range(n):
            A = actions[:, t, :]
            r = np.asarray(reward(S, A), dtype=float).reshape(B)
            alive &= np.isfinite(r)
            score = np.where(alive, score + np.where(alive, r, 0.0), -np.inf)
            if t + 1 < n:
                S = model.predict_mean(S, A, _step_rng(plan_seed, t))
                ok = np.all(np.isfinite(S), axis=1)
                alive &= ok
                S = np.where(ok[:, None], S, 0.0)
    score[~alive] = -np.inf
    return score


def _chunks(B, size):
    size = B if size is None else size
    return [slice(i, min(i + size, B)) for i in range(0, B, size)]


def evaluate_candidates(model, reward: RewardFn, s0, actions, plan_seed, cfg: ShootingConfig) -> np.ndarray:
    parts = _chunks(len(actions), cfg.chunk_size)
    run = lambda sl: rollout_returns(model, reward, s0, actions[sl], plan_seed)
    if cfg.workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.workers, len(parts))) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(sl) for sl in parts]
    return np.concatenate(results)


def random_shooting(model, reward: RewardFn, s0, cfg: ShootingConfig, bounds, rng=None):
    """Best of ``N`` uniformly sampled action sequences: ``(sequence, score)``.

    Ties resolve to the lowest index. ``rng`` defaults to a stream seeded by
    ``cfg.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    plan_seed = int(rng.integers(2**63))
    actions = sample_action_sequences(rng, cfg.num_trajectories, cfg.planning_horizon, bounds)
    scores = evaluate_candidates(model, reward, s0, actions, plan_seed, cfg)
    best = int(np.argmax(scores))  # first occurrence on ties; all -inf gives 0
    return actions[best], float(scores[best])


def mpc_step(model, reward: RewardFn, s, cfg: ShootingConfig, bounds, rng=None) -> np.ndarray:
    """First action of the best sequence; re-plans from scratch on every call."""
    seq, _ = random_shooting(model, reward, s, cfg, bounds, rng)
    return seq[0].copy()


def ig_explore(model, s, cfg: ExplorationConfig, bounds, rng: np.random.Generator) -> np.ndarray:
    """Candidate action with the largest epistemic uncertainty at ``s``."""
    lo, hi = _bounds(bounds)
    noise_seed = int(rng.integers(2**63))
    cands = rng.uniform(lo, hi, size=(cfg.num_candidate_actions, lo.size))
    S = np.repeat(np.asarray(s, dtype=float)[None, :], len(cands), axis=0)
    u = np.asarray(model.epistemic_batch(S, cands, np.random.default_rng(noise_seed)), dtype=float)
    u = np.where(np.isfinite(u), u, -np.inf)
    return cands[int(np.argmax(u))].copy()


def random_action(bounds, rng: np.random.Generator) -> np.ndarray:
    lo, hi = _bounds(bounds)
    return rng.uniform(lo, hi)


def choose_action(model, reward: RewardFn, s, shooting: ShootingConfig, explore: ExplorationConfig,
                  bounds, rng: np.random.Generator):
    """ε-greedy choice between exploration and MPC: ``(action, explored)``.

    Exploration maximizes epistemic uncertainty when the model provides it and
    is uniform random otherwise.
    """
    if rng.random() < explore.epsilon:
        if getattr(model, "has_epistemic", False):
            return ig_explore(model, s, explore, bounds, rng), True
        return random_action(bounds, rng), True
    return mpc_step(model, reward, s, shooting, bounds, rng), False
