"""The learn-plan-act loop for one seed, and multi-seed orchestration."""

from __future__ import annotations

import functools
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..envs import make, reward_fn
from ..models import GPModel, MODEL_CLASSES, NotFittedError
from ..nncore import TrainConfig
from ..planner import (
    ExplorationConfig,
    ReplayBuffer,
    ShootingConfig,
    Transition,
    choose_action,
    random_action,
)
from .config import RunConfig

log = logging.getLogger(__name__)

NUMERICAL_ERRORS = (FloatingPointError, np.linalg.LinAlgError)


class NumericalFailure(RuntimeError):
    """Every seed of a benchmark failed numerically."""


@dataclass(frozen=True)
class EpisodeRecord:
    env: str
    model: str
    seed: int
    episode: int
    ret: float
    wall_time_s: float
    diverged: bool = False


@dataclass
class BenchmarkResult:
    records: list
    summary: object
    failed_seeds: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failed_seeds)


def thread_cap() -> int:
    raw = os.environ.get("MBRLBENCH_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer MBRLBENCH_THREADS=%r", raw)
    return os.cpu_count() or 1


def make_model(cfg: RunConfig, seed: int):
    spec = make(cfg.env).spec
    cls = MODEL_CLASSES[cfg.model]
    if cls is GPModel:
        return GPModel(spec.obs_dim, spec.act_dim, max_points=cfg.gp_max_points,
                       hyper_points=cfg.gp_hyper_points, seed=seed)
    kw = dict(hidden_sizes=cfg.layers, seed=seed,
              train=TrainConfig(lr=cfg.lr, epochs=cfg.epochs, batch_size=cfg.batch_size))
    if cfg.model in ("deterministic-ensemble", "anchored-ensemble"):
        kw["ensemble_size"] = cfg.ensemble_size
    if cfg.model == "anchored-ensemble":
        kw["data_noise"] = cfg.data_noise
    if cfg.model == "concrete-dropout":
        kw["mc_samples"] = cfg.mc_samples
    return cls(spec.obs_dim, spec.act_dim, **kw)


def _streams(seed: int, n_resets: int):
    """Independent generators for resets, the controller and the warmup policy."""
    ss = np.random.SeedSequence([int(seed), 77])
    reset_ss, ctrl_ss, warm_ss = ss.spawn(3)
    reset_seeds = np.random.default_rng(reset_ss).integers(2**31, size=n_resets)
    return reset_seeds, np.random.default_rng(ctrl_ss), np.random.default_rng(warm_ss)


def run_seed(cfg: RunConfig, seed: int, buffer: ReplayBuffer | None = None) -> list:
    """One random warmup episode, then ``K`` episodes of refit-and-control.

    Returns one record per controlled episode. A failed refit keeps the
    previous model; if no model was ever fitted the episode falls back to
    random actions. Either way the episode is marked ``diverged``.
    """
    env = make(cfg.env)
    spec = env.spec
    bounds = spec.bounds
    reward = functools.partial(reward_fn, cfg.env)
    H, K = cfg.episode_length, cfg.num_episodes
    buf = buffer if buffer is not None else ReplayBuffer(cfg.buffer_capacity)
    model = make_model(cfg, seed)
    shooting = ShootingConfig(cfg.num_trajectories, cfg.planning_horizon, seed, cfg.chunk_size,
                              min(cfg.workers, thread_cap()))
    explore = ExplorationConfig(cfg.epsilon, cfg.num_candidate_actions)
    reset_seeds, ctrl, warm = _streams(seed, K + 1)

    obs = env.reset(int(reset_seeds[0]))
    for _ in range(H):
        a = random_action(bounds, warm)
        nxt, r = env.step(a)
        buf.push(Transition(obs, a, r, nxt))
        obs = nxt

    records = []
    for k in range(K):
        t0 = time.perf_counter()
        diverged = False
        try:
            model.fit(buf)
        except NUMERICAL_ERRORS as exc:
            log.warning("seed %d episode %d: refit failed (%s); keeping previous model", seed, k, exc)
            diverged = True
        obs = env.reset(int(reset_seeds[k + 1]))
        ret = 0.0
        for _ in range(H):
            if model.is_fitted:
                a, _ = choose_action(model, reward, obs, shooting, explore, bounds, ctrl)
            else:
                a = random_action(bounds, ctrl)
            nxt, r = env.step(a)
            buf.push(Transition(obs, a, r, nxt))
            ret += r
            obs = nxt
        wall = time.perf_counter() - t0 if cfg.record_wall_time else 0.0
        records.append(EpisodeRecord(cfg.env, cfg.model, int(seed), k, float(ret), wall, diverged))
        log.info("%s/%s seed %d episode %d return %.3f", cfg.env, cfg.model, seed, k, ret)
    return records


def _run_seed_safe(cfg, seed):
    try:
        return seed, run_seed(cfg, seed), None
    except NUMERICAL_ERRORS as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"


def run_benchmark(cfg: RunConfig, processes: int | None = None) -> BenchmarkResult:
    """Run every seed (in parallel processes when allowed) and aggregate."""
    from .report import summarize

    n_proc = min(len(cfg.seeds), processes or thread_cap())
    if n_proc > 1:
        with ProcessPoolExecutor(max_workers=n_proc) as pool:
            outcomes = list(pool.map(_run_seed_safe, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        outcomes = [_run_seed_safe(cfg, s) for s in cfg.seeds]
    records, failed = [], {}
    for seed, recs, err in sorted(outcomes, key=lambda o: cfg.seeds.index(o[0])):
        if err is not None:
            log.warning("seed %d failed: %s", seed, err)
            failed[seed] = err
        else:
            records.extend(recs)
    if not records:
        raise NumericalFailure(f"all seeds failed: {failed}")
    return BenchmarkResult(records, summarize(records, failed_seeds=failed), failed)
