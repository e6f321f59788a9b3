import csv
import json

import numpy as np
import pytest

from mbrlbench.bench import (
    ConfigError,
    EpisodeRecord,
    NumericalFailure,
    RunConfig,
    emit,
    format_config,
    learning_curve,
    load_config,
    make_model,
    mean_stderr,
    parse_config_text,
    read_records,
    run_benchmark,
    run_seed,
    summarize,
)
from mbrlbench.bench import cli, runner
from mbrlbench.nncore import TrainingDivergence
from mbrlbench.planner import ReplayBuffer


def tiny(model="deterministic-nn", **kw):
    base = dict(env="pendulum", model=model, seeds=(0, 1), episodes=2, horizon=10, num_trajectories=20,
                planning_horizon=4, epochs=2, hidden_sizes=(8,), ensemble_size=2, mc_samples=3,
                gp_hyper_points=20, record_wall_time=False)
    base.update(kw)
    return RunConfig(**base)


def rec(ret, seed=0, episode=0):
    return EpisodeRecord("pendulum", "gp", seed, episode, ret, 0.0)


# configuration


def test_task_defaults():
    cfg = RunConfig("pendulum", "gp")
    assert (cfg.episode_length, cfg.num_episodes) == (200, 50)
    assert cfg.seeds == (0, 1, 2, 3, 4)
    assert RunConfig("reacher", "gp").episode_length == 50


@pytest.mark.parametrize(
    "env,model,sizes",
    [
        ("pendulum", "deterministic-nn", (32, 32)),
        ("pendulum", "deterministic-ensemble", (32, 32)),
        ("pendulum", "concrete-dropout", (100, 100)),
        ("pendulum", "anchored-ensemble", (40, 40)),
        ("inverted-pendulum", "deterministic-nn", (40, 40)),
        ("inverted-pendulum", "concrete-dropout", (100, 100)),
        ("reacher", "deterministic-nn", (200, 200)),
        ("reacher", "concrete-dropout", (500, 500)),
        ("reacher", "anchored-ensemble", (200, 200)),
    ],
)
def test_hidden_size_defaults(env, model, sizes):
    cfg = RunConfig(env, model)
    assert cfg.layers == sizes
    assert make_model(cfg, 0).hidden_sizes == sizes


def test_model_defaults():
    assert len(make_model(RunConfig("pendulum", "deterministic-ensemble"), 0).members) == 5
    assert len(make_model(RunConfig("pendulum", "anchored-ensemble"), 0).members) == 5
    assert make_model(RunConfig("pendulum", "concrete-dropout"), 0).mc_samples == 20
    assert make_model(RunConfig("pendulum", "gp"), 0).max_points == 1000


@pytest.mark.parametrize(
    "kw",
    [
        {"env": "acrobot"},
        {"model": "svm"},
        {"seeds": ()},
        {"seeds": (1, 1)},
        {"epsilon": 1.5},
        {"episodes": 0},
        {"num_trajectories": 0},
        {"lr": 0.0},
        {"hidden_sizes": (0,)},
    ],
)
def test_invalid_config_rejected(kw):
    base = dict(env="pendulum", model="gp")
    base.update(kw)
    with pytest.raises(ConfigError):
        RunConfig(**base)


def test_parse_config_text():
    text = """
    # a comment
    env = pendulum   # trailing comment
    model = concrete-dropout
    num_seeds = 3
    episodes = 7
    hidden_sizes = 10, 20
    record_wall_time = false
    chunk_size = none
    """
    values = parse_config_text(text)
    assert values == {"env": "pendulum", "model": "concrete-dropout", "seeds": (0, 1, 2), "episodes": 7,
                      "hidden_sizes": (10, 20), "record_wall_time": False, "chunk_size": None}
    cfg = load_config(None, **values)
    assert cfg.layers == (10, 20)


@pytest.mark.parametrize("text", ["envpendulum", "colour = red", "episodes = many", "record_wall_time = maybe",
                                  "num_seeds = x"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_config_file_round_trip(tmp_path):
    cfg = tiny(epsilon=0.25, chunk_size=None)
    path = tmp_path / "run.cfg"
    path.write_text(format_config(cfg))
    assert load_config(path) == cfg
    assert load_config(path, episodes=9).num_episodes == 9
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError):
        load_config(None, env="pendulum")


# statistics


def test_mean_stderr_hand_values():
    assert mean_stderr([-1.0, -3.0]) == (-2.0, 1.0, False)
    assert mean_stderr([4.0]) == (4.0, 0.0, True)
    with pytest.raises(ValueError):
        mean_stderr([])


def test_summary_windows():
    records = [rec(float(ep + 10 * s), seed=s, episode=ep) for s in range(2) for ep in range(15)]
    s = summarize(records, final_window=10)
    assert s.n == 30 and s.final_n == 20
    assert s.per_seed_final_mean == {0: 9.5, 1: 19.5}
    assert s.final_mean == pytest.approx(14.5)
    vals = np.array([r.ret for r in records])
    assert s.stderr == pytest.approx(vals.std(ddof=1) / np.sqrt(30), rel=1e-12)


def test_summary_single_record_is_degenerate():
    s = summarize([rec(-5.0)])
    assert s.stderr == 0.0 and s.degenerate and s.n == 1


def test_summary_rejects_mixed_pairs():
    with pytest.raises(ValueError):
        summarize([rec(1.0), EpisodeRecord("reacher", "gp", 0, 1, 1.0, 0.0)])


def test_learning_curve():
    records = [rec(-1.0, 0, 0), rec(-3.0, 1, 0), rec(2.0, 0, 1)]
    assert learning_curve(records) == [(0, -2.0, 1.0, 2), (1, 2.0, 0.0, 1)]


# the run loop


def test_run_seed_record_count_and_determinism():
    cfg = tiny()
    a, b = run_seed(cfg, 3), run_seed(cfg, 3)
    assert len(a) == cfg.num_episodes
    assert a == b
    assert [r.episode for r in a] == list(range(cfg.num_episodes))
    assert all(np.isfinite(r.ret) for r in a)
    assert run_seed(cfg, 4) != a


@pytest.mark.parametrize("model", ["deterministic-ensemble", "concrete-dropout", "anchored-ensemble", "gp"])
def test_run_seed_all_models(model):
    recs = run_seed(tiny(model, episodes=1), 0)
    assert len(recs) == 1 and np.isfinite(recs[0].ret)


def test_run_seed_buffer_contract():
    sizes = []

    class Recording(ReplayBuffer):
        def push(self, t):
            super().push(t)
            sizes.append(len(self))

    buf = Recording(15)
    run_seed(tiny(episodes=3), 0, buffer=buf)
    assert len(sizes) == 10 * 4  # warmup plus three episodes
    assert max(sizes) == 15


def test_run_seed_survives_failed_fit(monkeypatch):
    from mbrlbench.models import DeterministicNN

    def boom(self, data):
        raise TrainingDivergence("forced")

    monkeypatch.setattr(DeterministicNN, "fit", boom)
    recs = run_seed(tiny(), 0)
    assert len(recs) == 2 and all(r.diverged for r in recs)
    assert all(np.isfinite(r.ret) for r in recs)


def test_run_benchmark_counts_and_order():
    res = run_benchmark(tiny(seeds=(2, 0)), processes=1)
    assert len(res.records) == 4
    assert [r.seed for r in res.records] == [2, 2, 0, 0]
    assert not res.partial and res.summary.n == 4


def test_run_benchmark_processes_match_sequential():
    cfg = tiny(seeds=(0, 1))
    assert run_benchmark(cfg, processes=2).records == run_benchmark(cfg, processes=1).records


def test_run_benchmark_partial_failure(monkeypatch):
    real = runner.run_seed

    def flaky(cfg, seed, buffer=None):
        if seed == 1:
            raise FloatingPointError("exploded")
        return real(cfg, seed, buffer)

    monkeypatch.setattr(runner, "run_seed", flaky)
    res = run_benchmark(tiny(seeds=(0, 1)), processes=1)
    assert res.partial and set(res.failed_seeds) == {1}
    assert res.summary.partial and res.summary.n == 2

    def always(cfg, seed, buffer=None):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(runner, "run_seed", always)
    with pytest.raises(NumericalFailure):
        run_benchmark(tiny(), processes=1)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("MBRLBENCH_THREADS", "3")
    assert runner.thread_cap() == 3
    monkeypatch.setenv("MBRLBENCH_THREADS", "0")
    assert runner.thread_cap() == 1
    monkeypatch.setenv("MBRLBENCH_THREADS", "lots")
    assert runner.thread_cap() >= 1


# output files


def test_emit_files(tmp_path):
    records = [rec(-1.23456789, 0, 0), rec(-3.0, 0, 1), rec(2.5, 1, 0), rec(0.1, 1, 1)]
    s = summarize(records)
    paths = emit(records, s, tmp_path / "out")
    lines = paths["episodes"].read_text().splitlines()
    assert lines[0] == "env,model,seed,episode,return,wall_time_s"
    assert len(lines) == len(records) + 1
    assert lines[1] == "pendulum,gp,0,0,-1.234568,0.000000"
    data = json.loads(paths["summary"].read_text())
    assert {"env", "model", "mean", "stderr", "n"} <= set(data)
    with open(paths["episodes"]) as fh:
        rets = [float(row["return"]) for row in csv.DictReader(fh)]
    assert abs(data["mean"] - np.mean(rets)) < 1e-9
    assert abs(data["stderr"] - np.std(rets, ddof=1) / 2) < 1e-9
    curve = paths["curve"].read_text().splitlines()
    assert curve[0] == "episode,mean_return,stderr,n" and len(curve) == 3
    back = read_records(paths["episodes"])
    assert [r.ret for r in back] == rets


def test_emit_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit([rec(1.0)], summarize([rec(1.0)]), blocker / "sub")


def test_read_records_rejects_bad_header(tmp_path):
    p = tmp_path / "episodes_x_y.csv"
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        read_records(p)


# command line


def _run_args(out, *extra):
    return ["run", "--env", "pendulum", "--model", "deterministic-nn", "--seeds", "2", "--episodes", "2",
            "--horizon", "8", "--num-trajectories", "10", "--planning-horizon", "3", "--epochs", "1",
            "--processes", "1", "--out", str(out), *extra]


def test_cli_run_and_summarize(tmp_path, capsys):
    assert cli.main(_run_args(tmp_path / "a", "--no-wall-time")) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == ["config_pendulum_deterministic-nn.txt", "curve_pendulum_deterministic-nn.csv",
                     "episodes_pendulum_deterministic-nn.csv", "summary_pendulum_deterministic-nn.json"]
    before = (tmp_path / "a" / "summary_pendulum_deterministic-nn.json").read_text()
    capsys.readouterr()
    assert cli.main(["summarize", "--in", str(tmp_path / "a")]) == 0
    assert "deterministic-nn" in capsys.readouterr().out
    assert (tmp_path / "a" / "summary_pendulum_deterministic-nn.json").read_text() == before


def test_cli_byte_identical_outputs(tmp_path):
    cli.main(_run_args(tmp_path / "a", "--no-wall-time"))
    cli.main(_run_args(tmp_path / "b", "--no-wall-time", "--workers", "3", "--chunk-size", "4"))
    cli.main(_run_args(tmp_path / "c", "--no-wall-time", "--workers", "1", "--chunk-size", "4"))
    name = "episodes_pendulum_deterministic-nn.csv"
    assert (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()
    assert (tmp_path / "a" / name).read_bytes().startswith(b"env,model,seed,episode,return,wall_time_s\n")


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("env = pendulum\nmodel = deterministic-nn\nnum_seeds = 1\nepisodes = 1\nhorizon = 5\n"
                   "num_trajectories = 5\nplanning_horizon = 2\nepochs = 1\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "episodes_pendulum_deterministic-nn.csv").read_text().splitlines()
    assert len(rows) == 2


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert cli.main(["run", "--env", "acrobot", "--model", "gp"]) == 2
    assert cli.main(["run", "--env", "pendulum"]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert cli.main(["summarize", "--in", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["summarize"])
    assert exc.value.code == 2

    def fail(cfg, processes=None):
        raise NumericalFailure("all seeds failed")

    monkeypatch.setattr(cli, "run_benchmark", fail)
    assert cli.main(_run_args(tmp_path / "x")) == 3
