"""Command line entry point: ``mbrlbench run`` and ``mbrlbench summarize``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, format_config, load_config
from .report import emit, summarize_dir
from .runner import NumericalFailure, run_benchmark, thread_cap

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mbrlbench", description="Model-based RL benchmark with MPC random shooting.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one env/model pair over several seeds")
    run.add_argument("--env")
    run.add_argument("--model")
    run.add_argument("--seeds", type=int, help="number of seeds, numbered from 0")
    run.add_argument("--episodes", type=int)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--out")
    run.add_argument("--config", help="key = value file; command line flags override it")
    smoke = run.add_argument_group("scale knobs")
    smoke.add_argument("--horizon", type=int, help="episode length")
    smoke.add_argument("--num-trajectories", type=int)
    smoke.add_argument("--planning-horizon", type=int)
    smoke.add_argument("--epochs", type=int)
    smoke.add_argument("--chunk-size", type=int)
    smoke.add_argument("--workers", type=int, help="threads evaluating candidate chunks")
    smoke.add_argument("--processes", type=int, help="seed worker processes")
    smoke.add_argument("--no-wall-time", action="store_true", help="write 0 for wall_time_s")

    summ = sub.add_parser("summarize", help="recompute summaries from episode CSVs")
    summ.add_argument("--in", dest="in_dir", required=True)
    return p


def _run(args) -> int:
    cfg = load_config(
        args.config,
        env=args.env,
        model=args.model,
        seeds=tuple(range(args.seeds)) if args.seeds is not None else None,
        episodes=args.episodes,
        epsilon=args.epsilon,
        out=args.out,
        horizon=args.horizon,
        num_trajectories=args.num_trajectories,
        planning_horizon=args.planning_horizon,
        epochs=args.epochs,
        chunk_size=args.chunk_size,
        workers=args.workers,
        record_wall_time=False if args.no_wall_time else None,
    )
    processes = min(args.processes, thread_cap()) if args.processes else None
    result = run_benchmark(cfg, processes)
    paths = emit(result.records, result.summary, cfg.out)
    paths["config"] = Path(cfg.out) / f"config_{cfg.env}_{cfg.model}.txt"
    paths["config"].write_text(format_config(cfg))
    s = result.summary
    print(f"{s.env} {s.model}: mean {s.mean:.3f} +/- {s.stderr:.3f} (n={s.n}), "
          f"final-{s.final_window} {s.final_mean:.3f} +/- {s.final_stderr:.3f}")
    if result.partial:
        print(f"warning: seeds failed: {sorted(result.failed_seeds)}", file=sys.stderr)
    for p in paths.values():
        print(p)
    return EXIT_OK


def _summarize(args) -> int:
    summaries = summarize_dir(args.in_dir)
    if not summaries:
        print(f"no episode CSVs in {args.in_dir}", file=sys.stderr)
        return EXIT_CONFIG
    for s in summaries:
        print(f"{s.env:20s} {s.model:24s} mean {s.mean:10.3f} +/- {s.stderr:7.3f}  "
              f"final {s.final_mean:10.3f} +/- {s.final_stderr:7.3f}  n={s.n}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return _run(args) if args.command == "run" else _summarize(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
