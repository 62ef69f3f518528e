"""CLI tests: config parsing strictness, command pipelines, determinism of
emitted metric files, and exit codes."""

import os

import numpy as np
import pytest

from rislab.cli import (
    ConfigError,
    ExperimentConfig,
    PROFILES,
    TOY_RATES,
    build_grid,
    build_scenario,
    builtin_toy_game,
    cmd_compare,
    cmd_evaluate,
    cmd_generate,
    cmd_train,
    dbm,
    load_config,
    main,
    profile_config,
)
from dataclasses import replace


def small_cfg(**kw):
    base = replace(profile_config("desk"), max_updates=10, offline_epochs=2,
                   seed_episodes=8, minibatch=8, eval_episodes=12,
                   eval_warmup=2, obstacle_counts=(0, 1),
                   n_trajectories=3, trajectory_len=4, history_len=8)
    return replace(base, **kw)


def toy_cfg(**kw):
    base = replace(profile_config("toy"), max_updates=60, offline_epochs=2,
                   seed_episodes=8, minibatch=8, polish_steps=150)
    return replace(base, **kw)


# ---------------------------------------------------------------------------
# config parsing


def test_dbm_conversion():
    assert dbm(30.0) == pytest.approx(1.0)
    assert dbm(46.0) == pytest.approx(39.81, rel=1e-3)


def test_profiles_exist():
    assert set(PROFILES) == {"desk", "paper", "toy"}
    paper = profile_config("paper")
    assert paper.n_ap == 128 and paper.n_ue == 64
    assert paper.ris_h == paper.ris_v == 8
    assert paper.noise_dbm_hz == -88.0


def test_load_config_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("version 1\n"
                    "profile desk\n"
                    "train.mu 0.4\n"
                    "channel.n_ap 16\n"
                    "seed 9\n"
                    "eval.obstacle_counts 0,2\n")
    cfg = load_config(path)
    assert cfg.mu == 0.4
    assert cfg.n_ap == 16
    assert cfg.seed == 9
    assert cfg.obstacle_counts == (0, 2)


def test_load_config_unknown_key_names_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("version 1\ntrain.mu 0.2\ntrain.lr 0.1\n")
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_load_config_bad_value_names_line(tmp_path):
    path = tmp_path / "bad2.cfg"
    path.write_text("version 1\nchannel.n_ap eight\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(path)


def test_load_config_requires_version(tmp_path):
    path = tmp_path / "nover.cfg"
    path.write_text("train.mu 0.2\n")
    with pytest.raises(ConfigError, match="version"):
        load_config(path)


def test_config_hash_changes_with_values():
    a = ExperimentConfig()
    b = replace(a, mu=0.31)
    assert a.config_hash() != b.config_hash()


def test_build_scenario_desk():
    scn = build_scenario(profile_config("desk"))
    assert scn.geometry.n_ap == 8
    assert scn.n_agents == 3
    assert scn.head_sizes == (8, 5, 5)


# ---------------------------------------------------------------------------
# commands


def test_generate_writes_csv_and_manifest(tmp_path):
    cfg = small_cfg(seed=3)
    out = tmp_path / "gen"
    assert cmd_generate(cfg, out) == 0
    lines = (out / "trajectories.csv").read_text().strip().splitlines()
    assert lines[0] == "traj_id,t,x,y"
    assert len(lines) == 1 + 3 * 4
    manifest = (out / "trajectories.manifest.json").read_text()
    assert cfg.config_hash() in manifest
    assert '"rows": 12' in manifest


def test_generate_deterministic(tmp_path):
    cfg = small_cfg(seed=4)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cmd_generate(cfg, out1)
    cmd_generate(cfg, out2)
    assert (out1 / "trajectories.csv").read_bytes() == (out2 / "trajectories.csv").read_bytes()
    assert (out1 / "trajectories.manifest.json").read_bytes() == \
        (out2 / "trajectories.manifest.json").read_bytes()


def test_train_emits_curves_and_checkpoints(tmp_path):
    cfg = small_cfg(seed=5)
    out = tmp_path / "run"
    assert cmd_train(cfg, out) == 0
    lines = (out / "curves.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest config_sha256=")
    assert lines[1] == "update,J_estimate,mean_rate,rate_variance,grad_norm,clamps"
    assert len(lines) == 2 + 12  # offline 2 + online 10
    for m in range(3):
        assert (out / f"checkpoint_agent{m}.bin").exists()
    assert (out / "curves.gp").exists()


def test_train_centralized_single_checkpoint(tmp_path):
    cfg = small_cfg(mode="centralized", seed=6)
    out = tmp_path / "cent"
    assert cmd_train(cfg, out) == 0
    assert (out / "checkpoint.bin").exists()


def test_train_curves_deterministic(tmp_path):
    cfg = small_cfg(seed=7)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    cmd_train(cfg, out1)
    cmd_train(cfg, out2)
    assert (out1 / "curves.csv").read_bytes() == (out2 / "curves.csv").read_bytes()
    assert (out1 / "checkpoint_agent0.bin").read_bytes() == \
        (out2 / "checkpoint_agent0.bin").read_bytes()


def test_evaluate_emits_tables(tmp_path):
    cfg = small_cfg(seed=8)
    run = tmp_path / "run"
    cmd_train(cfg, run)
    out = tmp_path / "eval"
    assert cmd_evaluate(cfg, out, run) == 0
    for name in ("episodes.csv", "summary.csv", "policy_hist.csv",
                 "robustness.csv", "episodes.gp", "robustness.gp"):
        assert (out / name).exists(), name
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[1] == "mu,T,mean_RT_norm,var_RT_norm,mean_RT_bits,var_RT_bits"
    assert len(summary) == 3
    episodes = (out / "episodes.csv").read_text().splitlines()
    assert len(episodes) == 2 + cfg.eval_episodes


def test_evaluate_zero_episodes_headers_only(tmp_path):
    cfg = small_cfg(seed=9, eval_episodes=0, obstacle_counts=())
    run = tmp_path / "run"
    cmd_train(cfg, run)
    out = tmp_path / "eval0"
    assert cmd_evaluate(cfg, out, run) == 0
    episodes = (out / "episodes.csv").read_text().splitlines()
    assert len(episodes) == 2  # manifest + header only
    summary = (out / "summary.csv").read_text().splitlines()
    assert len(summary) == 2


def test_evaluate_deterministic(tmp_path):
    cfg = small_cfg(seed=10)
    run = tmp_path / "run"
    cmd_train(cfg, run)
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    cmd_evaluate(cfg, out1, run)
    cmd_evaluate(cfg, out2, run)
    for name in ("episodes.csv", "summary.csv", "policy_hist.csv", "robustness.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_evaluate_architecture_mismatch_fails(tmp_path):
    cfg = small_cfg(seed=11)
    run = tmp_path / "run"
    cmd_train(cfg, run)
    bad = replace(cfg, history_len=16)
    with pytest.raises(ConfigError):
        cmd_evaluate(bad, tmp_path / "bad", run)


def test_compare_uniform_policy_is_50_percent(tmp_path):
    # untrained (zero-parameter-free) uniform policy vs the one-hot optimum
    # over 2 actions: RMSE 50%
    cfg = toy_cfg(seed=12)
    out = tmp_path / "cmp"
    assert cmd_compare(cfg, out, None) == 0
    row = (out / "compare.csv").read_text().splitlines()[2].split(",")
    rmse = float(row[0])
    assert rmse == pytest.approx(50.0, abs=1.0)


def test_compare_after_toy_training(tmp_path):
    cfg = toy_cfg(seed=13)
    run = tmp_path / "toyrun"
    assert cmd_train(cfg, run) == 0
    out = tmp_path / "cmp"
    assert cmd_compare(cfg, out, run) == 0
    row = (out / "compare.csv").read_text().splitlines()[2].split(",")
    rmse, gap, greedy_ok = float(row[0]), float(row[3]), row[4]
    assert rmse < 10.0
    assert gap < 5.0
    assert greedy_ok == "True"


def test_compare_round_trip_identical(tmp_path):
    cfg = toy_cfg(seed=14)
    run = tmp_path / "toyrun"
    cmd_train(cfg, run)
    out1, out2 = tmp_path / "c1", tmp_path / "c2"
    cmd_compare(cfg, out1, run)
    cmd_compare(cfg, out2, run)
    assert (out1 / "compare.csv").read_bytes() == (out2 / "compare.csv").read_bytes()


def test_toy_game_rates_fixture():
    game = builtin_toy_game(profile_config("toy"))
    assert game.rate("s0", (1, 1)) == TOY_RATES[(1, 1)]
    assert game.n_agents == 2


# ---------------------------------------------------------------------------
# entry point exit codes


def test_main_config_error_exit_2(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("version 1\nnope 3\n")
    code = main(["train", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2


def test_main_missing_checkpoint_exit_2(tmp_path):
    code = main(["evaluate", "--out", str(tmp_path / "o")])
    assert code == 2


def test_main_generate_runs(tmp_path):
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text("version 1\ndataset.trajectories 2\ndataset.length 3\n")
    code = main(["generate", "--config", str(cfgfile), "--seed", "1",
                 "--out", str(tmp_path / "gen")])
    assert code == 0
    assert (tmp_path / "gen" / "trajectories.csv").exists()
