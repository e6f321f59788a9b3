"""Aggregation into mean return and standard error, and CSV/JSON output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .runner import EpisodeRecord

HEADER = ["env", "model", "seed", "episode", "return", "wall_time_s"]
CURVE_HEADER = ["episode", "mean_return", "stderr", "n"]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _as_written(x: float) -> float:
    """The value a reader recovers from the CSV."""
    return float(_fmt(x))


def mean_stderr(values):
    """``(mean, stderr, degenerate)``; stderr uses the ddof=1 deviation."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values to summarize")
    if v.size == 1:
        return float(v[0]), 0.0, True
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), False


@dataclass
class Summary:
    env: str
    model: str
    mean: float
    stderr: float
    n: int
    final_mean: float
    final_stderr: float
    final_n: int
    final_window: int
    degenerate: bool
    seeds: list
    per_seed_final_mean: dict
    failed_seeds: dict = field(default_factory=dict)
    partial: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        d["per_seed_final_mean"] = {str(k): v for k, v in self.per_seed_final_mean.items()}
        d["failed_seeds"] = {str(k): v for k, v in self.failed_seeds.items()}
        return d


def summarize(records, final_window: int = 10, failed_seeds=None) -> Summary:
    """Statistics over all records and over each seed's last ``final_window`` episodes.

    Returns are rounded exactly as written to the CSV first, so the summary can
    be recomputed from the CSV alone.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    envs = {r.env for r in records}
    models = {r.model for r in records}
    if len(envs) != 1 or len(models) != 1:
        raise ValueError("records mix several env/model pairs")
    seeds = sorted({r.seed for r in records})
    mean, se, degenerate = mean_stderr([_as_written(r.ret) for r in records])
    final, per_seed = [], {}
    for s in seeds:
        recs = sorted((r for r in records if r.seed == s), key=lambda r: r.episode)
        tail = [_as_written(r.ret) for r in recs[-final_window:]]
        per_seed[s] = float(np.mean(tail))
        final.extend(tail)
    fmean, fse, _ = mean_stderr(final)
    failed = dict(failed_seeds or {})
    return Summary(envs.pop(), models.pop(), mean, se, len(records), fmean, fse, len(final), final_window,
                   degenerate, seeds, per_seed, failed, bool(failed))


def learning_curve(records):
    """Per-episode mean and standard error across seeds."""
    by_ep = {}
    for r in records:
        by_ep.setdefault(r.episode, []).append(_as_written(r.ret))
    rows = []
    for ep in sorted(by_ep):
        m, se, _ = mean_stderr(by_ep[ep])
        rows.append((ep, m, se, len(by_ep[ep])))
    return rows


def file_stem(env: str, model: str) -> str:
    return f"{env}_{model}"


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in sorted(records, key=lambda r: (r.seed, r.episode)):
            w.writerow([r.env, r.model, r.seed, r.episode, _fmt(r.ret), _fmt(r.wall_time_s)])


def read_records(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    return [EpisodeRecord(env, model, int(seed), int(ep), float(ret), float(wall))
            for env, model, seed, ep, ret, wall in rows[1:]]


def emit(records, summary: Summary, out_dir, write_episodes: bool = True) -> dict:
    """Write the episode CSV, the JSON summary and the learning curve; return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = file_stem(summary.env, summary.model)
    paths = {
        "episodes": out / f"episodes_{stem}.csv",
        "summary": out / f"summary_{stem}.json",
        "curve": out / f"curve_{stem}.csv",
    }
    if write_episodes:
        write_records(records, paths["episodes"])
    with open(paths["summary"], "w") as fh:
        json.dump(summary.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["curve"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for ep, m, se, n in learning_curve(records):
            w.writerow([ep, _fmt(m), _fmt(se), n])
    return paths


def summarize_dir(in_dir, final_window: int = 10) -> list:
    """Re-summarize every episode CSV in ``in_dir``, rewriting its JSON and curve."""
    results = []
    for path in sorted(Path(in_dir).glob("episodes_*.csv")):
        records = read_records(path)
        if not records:
            continue
        summary = summarize(records, final_window)
        prev = path.with_name(path.name.replace("episodes_", "summary_", 1).replace(".csv", ".json"))
        if prev.exists():
            old = json.loads(prev.read_text())
            summary.failed_seeds = old.get("failed_seeds", {})
            summary.partial = bool(summary.failed_seeds)
        emit(records, summary, path.parent, write_episodes=False)
        results.append(summary)
    return results
