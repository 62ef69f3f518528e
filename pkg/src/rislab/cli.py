"""Experiment runner: scenario/config loading, dataset generation and
ingestion, training, evaluation sweeps, oracle comparisons, and benchmark
tables, all emitted as CSV plus gnuplot scripts.

Config files are flat `key value` lines (see README for the schema); every
emitted metric CSV starts with a manifest comment carrying the config hash
and seed, and all writes go through a temp-file rename so reruns are atomic
and byte-identical under a fixed (config, seed).

Exit codes: 0 success, 2 config error, 3 training divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .channel import (
    ArrayGeometry,
    LinkBudget,
    build_beam_codebook,
    build_phase_codebook,
    default_phase_directions,
)
from .environment import (
    ActionProfile,
    EnvConfig,
    Environment,
    HistoryBuffer,
    MarkovBlockage,
    add_random_obstacles,
    desk_grid,
    generate_dataset,
    ingest_dataset,
    load_scenario,
    robustness_grid,
    save_scenario,
    Scenario,
)
from .oracle import (
    complexity_bench,
    enumerate_exact_J,
    frozen_toy_game,
    optimal_policy,
    own_history,
    policy_rmse_multi,
    uniform_policies,
)
from .policy import load_checkpoint, save_checkpoint
from .training import (
    CentralizedController,
    DistributedController,
    DivergenceError,
    ToyGameEnvironment,
    TrainConfig,
    collect_episode,
    exact_ascent,
    make_controller,
    train,
)


class ConfigError(ValueError):
    pass


def dbm(value: float) -> float:
    """dBm to watts."""
    return 10.0 ** (value / 10.0) / 1000.0


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    profile: str = "desk"
    seed: int = 0

    # channel
    fc_hz: float = 73e9
    bandwidth_hz: float = 1e9
    tx_power_dbm: float = 46.0
    noise_dbm_hz: float = -174.0
    n_ap: int = 8
    n_ue: int = 4
    ris_h: int = 4
    ris_v: int = 4
    n_rays: int = 3
    exponent_los: float = 2.0
    exponent_nlos: float = 9.5
    scatter_var: float = 0.01

    # codebooks
    n_beams: int = 8
    n_phases: int = 5
    quant_step: float = math.pi / 5
    phase_lo: float = -math.pi / 2
    phase_hi: float = math.pi / 2

    # environment
    scenario: str = "builtin:desk"
    p_block: float = 0.35
    p_unblock: float = 0.25
    rate_norm_max: float = 0.9
    orientation_jitter: float = math.pi / 12

    # training
    mode: str = "distributed"
    mu: float = 0.0
    horizon: int = 2
    history_len: int = 16
    learning_rate: float = 0.1
    minibatch: int = 64
    seed_episodes: int = 300
    offline_epochs: int = 300
    max_updates: int = 800
    convergence_window: int = 50
    convergence_tol: float = 1e-3
    eq14_literal: bool = False
    dropout_lstm: float = 0.2
    dropout_dense: float = 0.4
    grad_clip: float = 10.0
    polish_steps: int = 2000        # exact-ascent convergence phase, toy only

    # datasets / evaluation
    n_trajectories: int = 20
    trajectory_len: int = 56
    eval_episodes: int = 200
    eval_warmup: int = 20
    obstacle_counts: tuple = (0, 1, 2, 3)

    def config_hash(self) -> str:
        parts = []
        for f in sorted(fields(self), key=lambda f: f.name):
            parts.append(f"{f.name}={getattr(self, f.name)!r}")
        return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:12]


PROFILES = {
    "desk": {},
    "paper": {
        "profile": "paper",
        "n_ap": 128, "n_ue": 64, "ris_h": 8, "ris_v": 8,
        "noise_dbm_hz": -88.0, "exponent_nlos": 4.0, "rate_norm_max": 20.0,
        "p_block": 0.1, "p_unblock": 0.4, "scatter_var": 0.1,
        "learning_rate": 0.01, "n_phases": 11, "rate_norm_max": 20.0, "minibatch": 32,
        "seed_episodes": 32, "offline_epochs": 20,
    },
    "toy": {
        "profile": "toy",
        "n_beams": 2, "n_phases": 2, "history_len": 4, "horizon": 2,
        "mode": "distributed", "learning_rate": 0.3, "minibatch": 16,
        "seed_episodes": 16, "offline_epochs": 5, "max_updates": 1500,
        "convergence_window": 10 ** 9, "dropout_lstm": 0.0,
        "dropout_dense": 0.0,
    },
}

# synthetic frozen toy: one clearly-best joint action, the compare benchmark
TOY_RATES = {(0, 0): 0.3, (0, 1): 0.6, (1, 0): 0.2, (1, 1): 2.0}

_BOOL_KEYS = {"eq14_literal"}
_INT_KEYS = {"seed", "n_ap", "n_ue", "ris_h", "ris_v", "n_rays", "n_beams",
             "n_phases", "horizon", "history_len", "minibatch",
             "seed_episodes", "offline_epochs", "max_updates",
             "convergence_window", "polish_steps", "n_trajectories",
             "trajectory_len", "eval_episodes", "eval_warmup"}
_STR_KEYS = {"profile", "scenario", "mode"}

_KEY_ALIASES = {
    "channel.fc_hz": "fc_hz", "channel.bandwidth_hz": "bandwidth_hz",
    "channel.tx_power_dbm": "tx_power_dbm", "channel.noise_dbm_hz": "noise_dbm_hz",
    "channel.n_ap": "n_ap", "channel.n_ue": "n_ue",
    "channel.ris_h": "ris_h", "channel.ris_v": "ris_v",
    "channel.n_rays": "n_rays", "channel.exponent_los": "exponent_los",
    "channel.exponent_nlos": "exponent_nlos", "channel.scatter_var": "scatter_var",
    "codebook.n_beams": "n_beams", "codebook.n_phases": "n_phases",
    "codebook.quant_step": "quant_step", "codebook.phase_lo": "phase_lo",
    "codebook.phase_hi": "phase_hi",
    "env.scenario": "scenario", "env.p_block": "p_block",
    "env.p_unblock": "p_unblock", "env.rate_norm_max": "rate_norm_max",
    "env.orientation_jitter": "orientation_jitter",
    "train.mode": "mode", "train.mu": "mu", "train.horizon": "horizon",
    "train.history_len": "history_len", "train.learning_rate": "learning_rate",
    "train.minibatch": "minibatch", "train.seed_episodes": "seed_episodes",
    "train.offline_epochs": "offline_epochs", "train.max_updates": "max_updates",
    "train.convergence_window": "convergence_window",
    "train.convergence_tol": "convergence_tol",
    "train.eq14_literal": "eq14_literal", "train.dropout_lstm": "dropout_lstm",
    "train.dropout_dense": "dropout_dense", "train.grad_clip": "grad_clip",
    "train.polish_steps": "polish_steps",
    "dataset.trajectories": "n_trajectories", "dataset.length": "trajectory_len",
    "eval.episodes": "eval_episodes", "eval.warmup": "eval_warmup",
    "eval.obstacle_counts": "obstacle_counts",
    "seed": "seed",
}


def _parse_value(key: str, raw: str, lineno: int):
    try:
        if key == "obstacle_counts":
            return tuple(int(v) for v in raw.split(","))
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if key in _STR_KEYS:
            return raw
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from None


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Strict flat key/value config; unknown keys fail with their line."""
    cfg = base or ExperimentConfig()
    with open(path) as fh:
        lines = fh.read().splitlines()
    overrides = {}
    version_seen = False
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(f"config line {lineno}: expected 'key value'")
        key, raw = parts
        if key == "version":
            if raw.strip() != "1":
                raise ConfigError(f"config line {lineno}: unsupported version {raw!r}")
            version_seen = True
            continue
        if key == "profile":
            if raw not in PROFILES:
                raise ConfigError(f"config line {lineno}: unknown profile {raw!r}")
            cfg = replace(cfg, **PROFILES[raw])
            continue
        if key not in _KEY_ALIASES:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        field = _KEY_ALIASES[key]
        overrides[field] = _parse_value(field, raw, lineno)
    if not version_seen:
        raise ConfigError(f"{path}: missing 'version 1' line")
    return replace(cfg, **overrides)


def profile_config(name: str) -> ExperimentConfig:
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}")
    return replace(ExperimentConfig(), **PROFILES[name])


# ---------------------------------------------------------------------------
# builders


def build_grid(cfg: ExperimentConfig):
    if cfg.scenario == "builtin:desk":
        return desk_grid()
    if cfg.scenario == "builtin:robust":
        return robustness_grid()
    if cfg.scenario.startswith("builtin:"):
        raise ConfigError(f"unknown builtin scenario {cfg.scenario!r}")
    return load_scenario(cfg.scenario)


def build_scenario(cfg: ExperimentConfig, grid=None) -> Scenario:
    grid = grid if grid is not None else build_grid(cfg)
    n_ris = len(grid.ris_cells)
    geometry = ArrayGeometry(n_ap=cfg.n_ap, n_ue=cfg.n_ue,
                             ris_shapes=((cfg.ris_h, cfg.ris_v),) * n_ris)
    budget = LinkBudget(tx_power=dbm(cfg.tx_power_dbm),
                        bandwidth=cfg.bandwidth_hz,
                        noise_density=dbm(cfg.noise_dbm_hz))
    beams = build_beam_codebook(cfg.n_beams)
    phases = build_phase_codebook(geometry, cfg.quant_step,
                                  (cfg.phase_lo, cfg.phase_hi),
                                  default_phase_directions(cfg.n_phases))
    env_cfg = EnvConfig(n_rays=cfg.n_rays, scatter_gain_var=cfg.scatter_var,
                        exponent_los=cfg.exponent_los,
                        exponent_nlos=cfg.exponent_nlos,
                        carrier_freq=cfg.fc_hz,
                        markov=MarkovBlockage(cfg.p_block, cfg.p_unblock),
                        orientation_jitter=cfg.orientation_jitter,
                        rate_norm_max=cfg.rate_norm_max)
    return Scenario(grid=grid, geometry=geometry, budget=budget,
                    beams=beams, phases=phases, cfg=env_cfg)


def train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(mode=cfg.mode, mu=cfg.mu, horizon=cfg.horizon,
                       history_len=cfg.history_len,
                       learning_rate=cfg.learning_rate,
                       minibatch=cfg.minibatch, seed_episodes=cfg.seed_episodes,
                       offline_epochs=cfg.offline_epochs,
                       max_updates=cfg.max_updates,
                       convergence_window=cfg.convergence_window,
                       convergence_tol=cfg.convergence_tol,
                       eq14_literal=cfg.eq14_literal,
                       dropout_lstm=cfg.dropout_lstm,
                       dropout_dense=cfg.dropout_dense,
                       grad_clip=cfg.grad_clip, seed=cfg.seed)


def builtin_toy_game(cfg: ExperimentConfig):
    return frozen_toy_game(TOY_RATES, n_beams=2, n_phases=2, n_ris=1,
                           horizon=cfg.horizon)


def build_environment(cfg: ExperimentConfig, trajectories=None):
    if cfg.profile == "toy":
        return ToyGameEnvironment(builtin_toy_game(cfg), seed=cfg.seed), (2, 2)
    scn = build_scenario(cfg)
    env = Environment(scn, seed=cfg.seed, trajectories=trajectories)
    return env, scn.head_sizes


# ---------------------------------------------------------------------------
# output helpers


def atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def manifest_line(cfg: ExperimentConfig) -> str:
    return f"# manifest config_sha256={cfg.config_hash()} seed={cfg.seed}\n"


def write_metric_csv(path, cfg: ExperimentConfig, header: str, rows) -> None:
    lines = [manifest_line(cfg), header + "\n"]
    lines += [",".join(str(v) for v in row) + "\n" for row in rows]
    atomic_write(path, "".join(lines))


def write_gnuplot(path, title: str, data_file: str, using: str,
                  xlabel: str, ylabel: str) -> None:
    atomic_write(path, "\n".join([
        f'set title "{title}"',
        f'set xlabel "{xlabel}"',
        f'set ylabel "{ylabel}"',
        "set datafile separator comma",
        "set key off",
        f'plot "{data_file}" using {using} with linespoints',
        "pause -1",
    ]) + "\n")


def checkpoint_paths(out_dir, mode: str, n_agents: int):
    if mode == "centralized":
        return [os.path.join(out_dir, "checkpoint.bin")]
    return [os.path.join(out_dir, f"checkpoint_agent{m}.bin")
            for m in range(n_agents)]


def save_controller(controller, out_dir) -> list:
    if isinstance(controller, CentralizedController):
        paths = checkpoint_paths(out_dir, "centralized", controller.n_agents)
        save_checkpoint(paths[0], controller.params, controller.arch)
    else:
        paths = checkpoint_paths(out_dir, "distributed", controller.n_agents)
        for path, (arch, params) in zip(paths, controller.nets):
            save_checkpoint(path, params, arch)
    return paths


def load_controller(cfg: ExperimentConfig, checkpoint_dir, head_sizes):
    ctrl = make_controller(train_config(cfg), head_sizes,
                           np.random.default_rng(cfg.seed))
    paths = checkpoint_paths(checkpoint_dir, cfg.mode, len(head_sizes))
    if isinstance(ctrl, CentralizedController):
        params, arch = load_checkpoint(paths[0])
        if arch != ctrl.arch:
            raise ConfigError("checkpoint architecture does not match the config")
        ctrl.params = params
    else:
        for m, path in enumerate(paths):
            params, arch = load_checkpoint(path)
            if arch != ctrl.nets[m][0]:
                raise ConfigError("checkpoint architecture does not match the config")
            ctrl.nets[m] = (arch, params)
    return ctrl


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: ExperimentConfig, out_dir) -> int:
    os.makedirs(out_dir, exist_ok=True)
    grid = build_grid(cfg)
    path = os.path.join(out_dir, "trajectories.csv")
    generate_dataset(grid, cfg.n_trajectories, cfg.trajectory_len,
                     np.random.default_rng(cfg.seed), path)
    scn_path = os.path.join(out_dir, "scenario.scn")
    save_scenario(grid, scn_path)
    with open(scn_path, "rb") as fh:
        grid_hash = hashlib.sha256(fh.read()).hexdigest()[:12]
    manifest = {
        "config_sha256": cfg.config_hash(),
        "seed": cfg.seed,
        "grid_sha256": grid_hash,
        "trajectories": cfg.n_trajectories,
        "length": cfg.trajectory_len,
        "rows": cfg.n_trajectories * cfg.trajectory_len,
    }
    atomic_write(os.path.join(out_dir, "trajectories.manifest.json"),
                 json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {path} ({manifest['rows']} rows)")
    return 0


def _toy_policies(controller):
    return [controller.policy_fn(m) for m in range(controller.n_agents)]


def cmd_train(cfg: ExperimentConfig, out_dir, dataset=None) -> int:
    os.makedirs(out_dir, exist_ok=True)
    trajectories = None
    if dataset is not None and cfg.profile != "toy":
        trajectories = ingest_dataset(dataset, build_grid(cfg))
    env, head_sizes = build_environment(cfg, trajectories=trajectories)
    tc = train_config(cfg)
    controller = make_controller(tc, head_sizes, np.random.default_rng(cfg.seed))
    result = train(env, controller, tc)
    if cfg.profile == "toy" and cfg.polish_steps > 0:
        exact_ascent(builtin_toy_game(cfg), controller, cfg.mu,
                     steps=cfg.polish_steps, learning_rate=0.5,
                     trace_every=cfg.polish_steps)
    rows = [(r.update, f"{r.j_estimate:.10g}", f"{r.mean_rate:.10g}",
             f"{r.rate_variance:.10g}", f"{r.grad_norm:.10g}", r.clamps)
            for r in result.curves]
    curves = os.path.join(out_dir, "curves.csv")
    write_metric_csv(curves, cfg,
                     "update,J_estimate,mean_rate,rate_variance,grad_norm,clamps",
                     rows)
    write_gnuplot(os.path.join(out_dir, "curves.gp"), "surrogate return",
                  "curves.csv", "1:2", "update", "J estimate")
    paths = save_controller(controller, out_dir)
    print(f"wrote {curves} ({result.updates} updates, "
          f"converged={result.converged}) and {len(paths)} checkpoint file(s)")
    return 0


def _rollout_stats(env, controller, cfg: ExperimentConfig, episodes: int,
                   collect_seed: int):
    buffers = [HistoryBuffer(cfg.history_len) for _ in range(controller.n_agents)]
    rng = np.random.default_rng([collect_seed, 77])
    dist_sums = [np.zeros(n) for n in controller.head_sizes]
    n_obs = 0
    returns_norm, returns_bits = [], []
    for k in range(cfg.eval_warmup + episodes):
        record, _ = collect_episode(env, controller, buffers, cfg.horizon, rng)
        for m, d in enumerate(controller.distributions(buffers)):
            dist_sums[m] += d
        n_obs += 1
        if k >= cfg.eval_warmup:
            returns_norm.append(record.episodic_return_norm)
            returns_bits.append(record.episodic_return)
    hist = [s / n_obs for s in dist_sums]
    return np.asarray(returns_norm), np.asarray(returns_bits), hist


def cmd_evaluate(cfg: ExperimentConfig, out_dir, checkpoint_dir) -> int:
    os.makedirs(out_dir, exist_ok=True)
    env, head_sizes = build_environment(cfg)
    controller = load_controller(cfg, checkpoint_dir, head_sizes)

    returns_norm, returns_bits, hist = _rollout_stats(
        env, controller, cfg, cfg.eval_episodes, cfg.seed)

    ep_rows = [(k, f"{rn:.10g}", f"{rb:.10g}")
               for k, (rn, rb) in enumerate(zip(returns_norm, returns_bits))]
    write_metric_csv(os.path.join(out_dir, "episodes.csv"), cfg,
                     "episode,R_T_norm,R_T_bits", ep_rows)
    write_gnuplot(os.path.join(out_dir, "episodes.gp"), "episodic return",
                  "episodes.csv", "1:2", "episode", "R_T (normalized)")

    summary = [(f"{cfg.mu:.10g}", cfg.horizon,
                f"{returns_norm.mean() if returns_norm.size else 0.0:.10g}",
                f"{returns_norm.var() if returns_norm.size else 0.0:.10g}",
                f"{returns_bits.mean() if returns_bits.size else 0.0:.10g}",
                f"{returns_bits.var() if returns_bits.size else 0.0:.10g}")]
    write_metric_csv(os.path.join(out_dir, "summary.csv"), cfg,
                     "mu,T,mean_RT_norm,var_RT_norm,mean_RT_bits,var_RT_bits",
                     summary if returns_norm.size else [])

    hist_rows = [(m, a, f"{hist[m][a]:.10g}")
                 for m in range(len(hist)) for a in range(hist[m].size)]
    write_metric_csv(os.path.join(out_dir, "policy_hist.csv"), cfg,
                     "agent,action,mean_probability", hist_rows)
    write_gnuplot(os.path.join(out_dir, "policy_hist.gp"), "average policy",
                  "policy_hist.csv", "2:3", "action index", "mean probability")

    rob_rows = []
    if cfg.profile != "toy" and cfg.obstacle_counts:
        # common random numbers across obstacle counts: same env seed and
        # same rollout stream, so the deviation isolates the obstacle effect
        base_mean = None
        for k in cfg.obstacle_counts:
            grid = build_grid(cfg)
            if k > 0:
                grid = add_random_obstacles(grid, k, np.random.default_rng([cfg.seed, 5, k]))
            scn = build_scenario(cfg, grid=grid)
            env_k = Environment(scn, seed=cfg.seed + 1000)
            rn, _rb, _h = _rollout_stats(env_k, controller, cfg,
                                         max(cfg.eval_episodes // 2, 20),
                                         cfg.seed + 1000)
            mean_k = float(rn.mean()) if rn.size else 0.0
            if base_mean is None:
                base_mean = mean_k
            deviation = 0.0 if base_mean == 0 else 100.0 * abs(mean_k - base_mean) / base_mean
            rob_rows.append((k, f"{mean_k:.10g}", f"{deviation:.6g}"))
        write_metric_csv(os.path.join(out_dir, "robustness.csv"), cfg,
                         "n_obstacles,mean_RT_norm,rate_deviation_pct", rob_rows)
        write_gnuplot(os.path.join(out_dir, "robustness.gp"),
                      "rate deviation vs obstacles", "robustness.csv", "1:3",
                      "number of 3x3 obstacles", "deviation (%)")
    print(f"wrote evaluation tables to {out_dir}")
    return 0


def cmd_compare(cfg: ExperimentConfig, out_dir, checkpoint_dir) -> int:
    os.makedirs(out_dir, exist_ok=True)
    game = builtin_toy_game(cfg)
    if checkpoint_dir is None:
        tc = train_config(cfg)
        controller = make_controller(tc, (2, 2), np.random.default_rng(cfg.seed))
    else:
        controller = load_controller(cfg, checkpoint_dir, (2, 2))
    policies = _toy_policies(controller)
    best = optimal_policy(game, cfg.mu)

    # histories the policies are compared over: every reachable global
    # history under the trained profile plus the empty start
    from .oracle import enumerate_trajectories
    hists = set()
    for traj in enumerate_trajectories(game, uniform_policies(game)):
        for _s, _j, _r, h in traj.steps:
            hists.add(h)
    hists = sorted(hists, key=lambda h: (len(h), str(h)))

    def optimal_fn(agent):
        def fn(hist):
            slot = len(hist)
            out = np.zeros(len(game.action_sets[agent]))
            out[best.sequence[min(slot, game.horizon - 1)][agent]] = 1.0
            return out

        return fn

    opt_policies = [optimal_fn(m) for m in range(game.n_agents)]
    rmse = policy_rmse_multi(policies, opt_policies,
                             [hists] * game.n_agents)
    j_policy = enumerate_exact_J(game, policies, cfg.mu)
    gap = 0.0 if best.j_star == 0 else 100.0 * (best.j_star - j_policy) / abs(best.j_star)
    greedy = []
    hist = ()
    for t in range(game.horizon):
        joint = tuple(int(np.argmax(policies[m](hist))) for m in range(game.n_agents))
        greedy.append(joint)
        hist = hist + ((joint, game.rate("s0", joint)),)
    rows = [(f"{rmse:.6g}", f"{j_policy:.10g}", f"{best.j_star:.10g}",
             f"{gap:.6g}", repr(tuple(greedy)) == repr(best.sequence))]
    write_metric_csv(os.path.join(out_dir, "compare.csv"), cfg,
                     "rmse_pct,J_policy,J_optimal,gap_pct,greedy_matches_optimal",
                     rows)
    print(f"wrote {os.path.join(out_dir, 'compare.csv')} "
          f"(rmse {rmse:.3g}%, gap {gap:.3g}%)")
    return 0


def cmd_bench(cfg: ExperimentConfig, out_dir) -> int:
    os.makedirs(out_dir, exist_ok=True)
    report = complexity_bench(seed=cfg.seed)
    rows = [(r.kind, r.param, r.value, f"{r.seconds:.6e}") for r in report.rows]
    write_metric_csv(os.path.join(out_dir, "bench.csv"), cfg,
                     "kind,param,value,seconds", rows)
    exp_rows = [(kind, param, f"{slope:.4f}")
                for (kind, param), slope in sorted(report.exponents.items())]
    write_metric_csv(os.path.join(out_dir, "bench_exponents.csv"), cfg,
                     "kind,param,fitted_exponent", exp_rows)
    print(f"wrote benchmark tables to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rislab",
        description="indoor mmWave RIS control experiments")
    parser.add_argument("command",
                        choices=["generate", "train", "evaluate", "compare", "bench"])
    parser.add_argument("--profile", default="desk", choices=sorted(PROFILES))
    parser.add_argument("--config", default=None, help="key/value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--checkpoint", default=None,
                        help="checkpoint directory (evaluate/compare)")
    parser.add_argument("--dataset", default=None,
                        help="trajectory CSV to replay during training")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = profile_config(args.profile)
        if args.config:
            cfg = load_config(args.config, base=cfg)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.command == "generate":
            return cmd_generate(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.out, dataset=args.dataset)
        if args.command == "evaluate":
            if not args.checkpoint:
                raise ConfigError("evaluate needs --checkpoint")
            return cmd_evaluate(cfg, args.out, args.checkpoint)
        if args.command == "compare":
            return cmd_compare(cfg, args.out, args.checkpoint)
        if args.command == "bench":
            return cmd_bench(cfg, args.out)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
