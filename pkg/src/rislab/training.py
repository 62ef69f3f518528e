"""Training loop for the beam/phase controllers: offline pre-training on a
seed set of rollouts, then the online collect/replay/ascend loop, plus the
executable checks behind the two convergence theorems.

Returns used by the objective and the gradient weights are normalized rates
(rate / (bandwidth * rate_norm_max)) summed over the T-slot episode, which
keeps the risk sensitivity mu in [0, 1) meaningful regardless of the link
budget's absolute scale. Learning-curve columns report the same units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import policy as pol
from .environment import ActionProfile, EpisodeRecord, HistoryBuffer, encode_global
from .oracle import ToyGame
from .risk import gradient_weight, surrogate_return


class DivergenceError(RuntimeError):
    """Parameter magnitudes exploded; training aborted."""


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "distributed"              # "centralized" | "distributed"
    mu: float = 0.0
    horizon: int = 2                       # T
    history_len: int = 16                  # H
    learning_rate: float = 0.01
    minibatch: int = 32                    # S_b
    seed_episodes: int = 32                # initial replay content
    offline_epochs: int = 20
    max_updates: int = 500
    convergence_window: int = 50
    convergence_tol: float = 1e-3
    eq14_literal: bool = False
    dropout_lstm: float = 0.2
    dropout_dense: float = 0.4
    grad_clip: float = 10.0
    divergence_limit: float = 1e6
    seed: int = 0
    seed_sweep: bool = True   # seed replay by cycling the joint action space

    def __post_init__(self):
        if self.mode not in ("centralized", "distributed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")
        if not 1 <= self.minibatch:
            raise ValueError("minibatch must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError("mu must lie in [0, 1)")


# ---------------------------------------------------------------------------
# controllers


class Controller:
    """Maps per-agent history buffers to per-agent action distributions and
    owns the trainable parameter vectors."""

    head_sizes: tuple

    @property
    def n_agents(self) -> int:
        return len(self.head_sizes)

    def distributions(self, buffers):
        raise NotImplementedError

    def sample_input(self, sample, slot: int, agent: int) -> np.ndarray:
        raise NotImplementedError

    def parameter_vectors(self) -> list[np.ndarray]:
        raise NotImplementedError

    def buffers_from_history(self, history):
        buffers = [HistoryBuffer(self.history_len) for _ in range(self.n_agents)]
        for joint, rate in history:
            for m in range(self.n_agents):
                buffers[m].push(joint[m], rate)
        return buffers

    def encode_history(self, history, agent: int) -> np.ndarray:
        """Network input of one agent given the global (joint, rate) tuple."""
        raise NotImplementedError

    def policy_fn(self, agent: int):
        """Oracle-compatible callable: global (joint, rate) history tuple
        to this agent's distribution."""

        def fn(history):
            return self.distributions(self.buffers_from_history(history))[agent]

        return fn


class DistributedController(Controller):
    """One per-agent net (2 LSTM + 2 dense + head) fed by the agent's own
    action/rate window."""

    def __init__(self, head_sizes, history_len: int, rng: np.random.Generator,
                 dropout_lstm: float = 0.2, dropout_dense: float = 0.4):
        self.head_sizes = tuple(head_sizes)
        self.history_len = history_len
        self.nets = []
        for size in self.head_sizes:
            arch = pol.PolicyArchitecture(
                kind="distributed", history_len=history_len,
                input_size=size + 1, head_sizes=(size,),
                dropout_lstm=dropout_lstm, dropout_dense=dropout_dense)
            self.nets.append((arch, pol.init_params(arch, rng)))

    def distributions(self, buffers):
        out = []
        for m, (arch, params) in enumerate(self.nets):
            feats = buffers[m].encode(self.head_sizes[m])
            dists, _ = pol.forward(params, arch, feats, mode="eval")
            out.append(dists[0])
        return out

    def sample_input(self, sample, slot: int, agent: int) -> np.ndarray:
        def build():
            buf = HistoryBuffer(self.history_len)
            for action, rate in sample.entries_at(agent, slot)[-self.history_len:]:
                buf.push(action, rate)
            return buf.encode(self.head_sizes[agent])

        return sample.cached_input(("d", agent, slot, self.history_len), build)

    def encode_history(self, history, agent: int) -> np.ndarray:
        buf = HistoryBuffer(self.history_len)
        for joint, rate in history:
            buf.push(joint[agent], rate)
        return buf.encode(self.head_sizes[agent])

    def parameter_vectors(self):
        return [params.values for _, params in self.nets]


class CentralizedController(Controller):
    """A single joint net (3 LSTM + 3 dense + M heads) fed by the global
    history: every agent's one-hot action plus the shared rate."""

    def __init__(self, head_sizes, history_len: int, rng: np.random.Generator,
                 dropout_lstm: float = 0.2, dropout_dense: float = 0.4):
        self.head_sizes = tuple(head_sizes)
        self.history_len = history_len
        arch = pol.PolicyArchitecture(
            kind="centralized", history_len=history_len,
            input_size=sum(self.head_sizes) + 1, head_sizes=self.head_sizes,
            dropout_lstm=dropout_lstm, dropout_dense=dropout_dense)
        self.arch = arch
        self.params = pol.init_params(arch, rng)

    def distributions(self, buffers):
        feats = encode_global(buffers, self.head_sizes)
        dists, _ = pol.forward(self.params, self.arch, feats, mode="eval")
        return list(dists)

    def sample_input(self, sample, slot: int, agent: int = 0) -> np.ndarray:
        def build():
            buffers = []
            for m in range(self.n_agents):
                buf = HistoryBuffer(self.history_len)
                for action, rate in sample.entries_at(m, slot)[-self.history_len:]:
                    buf.push(action, rate)
                buffers.append(buf)
            return encode_global(buffers, self.head_sizes)

        return sample.cached_input(("c", slot, self.history_len), build)

    def encode_history(self, history, agent: int = 0) -> np.ndarray:
        return encode_global(self.buffers_from_history(history), self.head_sizes)

    def parameter_vectors(self):
        return [self.params.values]


def make_controller(config: TrainConfig, head_sizes, rng) -> Controller:
    cls = CentralizedController if config.mode == "centralized" else DistributedController
    return cls(head_sizes, config.history_len, rng,
               dropout_lstm=config.dropout_lstm, dropout_dense=config.dropout_dense)


class ToyGameEnvironment:
    """Environment facade over a ToyGame so the training loop and harnesses
    can drive tabulated games; rates are already normalized."""

    def __init__(self, game: ToyGame, seed: int = 0):
        self.game = game
        self.rng = np.random.default_rng(seed)
        self.reset(seed)

    def reset(self, seed: int | None = None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        states = [s for _, s in self.game.initial]
        probs = np.array([p for p, _ in self.game.initial])
        self.state = states[int(self.rng.choice(len(states), p=probs))]
        return self.state

    def step(self, profile: ActionProfile):
        joint = profile.as_tuple()
        reward = self.game.rate(self.state, joint)
        outcomes = self.game.step(self.state, joint)
        states = [s for _, s in outcomes]
        probs = np.array([p for p, _ in outcomes])
        self.state = states[int(self.rng.choice(len(states), p=probs))]
        return reward, self.state

    def rate_norm(self, reward: float) -> float:
        return reward


# ---------------------------------------------------------------------------
# episode collection and replay


@dataclass(frozen=True)
class TrainingSample:
    """Replay unit: per-agent history snapshots at the episode start plus the
    T subsequent joint actions and normalized rates. Encoded network inputs
    are immutable per sample, so they are memoized on first use."""

    start_entries: tuple     # per agent: tuple of (action, rate) pairs
    actions: tuple           # (T, M) nested tuples
    rates_norm: tuple        # length T
    _encoded: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def episodic_return(self) -> float:
        return float(sum(self.rates_norm))

    def entries_at(self, agent: int, slot: int):
        extra = tuple((self.actions[t][agent], self.rates_norm[t])
                      for t in range(slot))
        return self.start_entries[agent] + extra

    def cached_input(self, key, build):
        if key not in self._encoded:
            self._encoded[key] = build()
        return self._encoded[key]


class ReplayStore:
    """Growing set of immutable samples with uniform minibatch draws."""

    def __init__(self):
        self._samples: list[TrainingSample] = []

    def add(self, sample: TrainingSample) -> None:
        self._samples.append(sample)

    def __len__(self) -> int:
        return len(self._samples)

    def minibatch(self, size: int, rng: np.random.Generator) -> list[TrainingSample]:
        if not self._samples:
            raise ValueError("replay store is empty")
        if len(self._samples) <= size:
            return list(self._samples)
        idx = rng.choice(len(self._samples), size=size, replace=False)
        return [self._samples[int(i)] for i in idx]


def collect_episode(env, controller: Controller, buffers, horizon: int,
                    rng: np.random.Generator, forced_actions=None):
    """Roll the controller for T slots: sample actions from the current
    policy, step the environment, and append the shared reward to every
    agent's window. Returns the EpisodeRecord and the replay sample.

    `forced_actions` (one joint tuple per slot) overrides the policy draw;
    used to seed the replay with a systematic sweep of the action space.
    """
    start_entries = tuple(tuple(buf.entries()) for buf in buffers)
    actions_out, rates, rates_norm, log_probs = [], [], [], []
    for t in range(horizon):
        dists = controller.distributions(buffers)
        if forced_actions is None:
            acts = [pol.sample_action(d, rng) for d in dists]
        else:
            acts = list(forced_actions[t])
        lps = [pol.log_prob(d, a) for d, a in zip(dists, acts)]
        profile = ActionProfile(ap_beam=acts[0], ris_phases=tuple(acts[1:]))
        reward, _state = env.step(profile)
        norm = env.rate_norm(reward)
        for m, buf in enumerate(buffers):
            buf.push(acts[m], norm)
        actions_out.append(profile)
        rates.append(reward)
        rates_norm.append(norm)
        log_probs.append(lps)
    record = EpisodeRecord(actions=actions_out, rates=rates,
                           rates_norm=rates_norm, log_probs=log_probs)
    sample = TrainingSample(
        start_entries=start_entries,
        actions=tuple(tuple(a.as_tuple()) for a in actions_out),
        rates_norm=tuple(rates_norm))
    return record, sample


# ---------------------------------------------------------------------------
# gradient estimation


def estimate_gradient(controller: Controller, batch, mu: float,
                      eq14_literal: bool = False,
                      rng: np.random.Generator | None = None,
                      mode: str = "train") -> list[np.ndarray]:
    """Sample-mean score-function gradient: (1/S) sum_s grad log Pi^(s) *
    weight(R_s, batch mean, mu), one vector per parameter block."""
    if not batch:
        raise ValueError("batch must be nonempty")
    returns = np.array([s.episodic_return for s in batch])
    r_mean = float(returns.mean())
    weights = np.array([gradient_weight(r, r_mean, mu, eq14_literal)
                        for r in returns])
    horizon = len(batch[0].rates_norm)
    grads = []
    if isinstance(controller, CentralizedController):
        g = np.zeros(controller.params.n)
        for t in range(horizon):
            feats = np.stack([controller.sample_input(s, t) for s in batch])
            _, cache = pol.forward(controller.params, controller.arch, feats,
                                   mode=mode, rng=rng)
            acts = [np.array([s.actions[t][m] for s in batch])
                    for m in range(controller.n_agents)]
            g += pol.backward(controller.params, controller.arch, cache, acts, weights)
        grads.append(g / len(batch))
    else:
        for m, (arch, params) in enumerate(controller.nets):
            g = np.zeros(params.n)
            for t in range(horizon):
                feats = np.stack([controller.sample_input(s, t, m) for s in batch])
                _, cache = pol.forward(params, arch, feats, mode=mode, rng=rng)
                acts = [np.array([s.actions[t][m] for s in batch])]
                g += pol.backward(params, arch, cache, acts, weights)
            grads.append(g / len(batch))
    return grads


def exact_policy_gradient(game: ToyGame, controller: Controller, mu: float,
                          eq14_literal: bool = False) -> list[np.ndarray]:
    """Exact expectation of the score-function gradient on an enumerable
    game: sum over all trajectories of Pi(T) * grad log Pi * weight(R, E[R]).

    Trajectory/slot terms are grouped by (observed history, joint action), so
    each parameter block needs a single batched forward/backward pass.
    """
    from .oracle import enumerate_trajectories

    def memoized(fn):
        cache = {}

        def wrapped(hist):
            if hist not in cache:
                cache[hist] = fn(hist)
            return cache[hist]

        return wrapped

    policy_fns = [memoized(controller.policy_fn(m))
                  for m in range(controller.n_agents)]
    trajs = enumerate_trajectories(game, policy_fns)
    mean = sum(t.prob * t.ret for t in trajs)
    buckets: dict = {}
    for traj in trajs:
        w = traj.prob * gradient_weight(traj.ret, mean, mu, eq14_literal)
        for _state, joint, _rate, hist in traj.steps:
            key = (hist, joint)
            buckets[key] = buckets.get(key, 0.0) + w
    keys = list(buckets.keys())
    coefs = np.array([buckets[k] for k in keys])

    grads = []
    if isinstance(controller, CentralizedController):
        feats = np.stack([controller.encode_history(h, 0) for h, _ in keys])
        _, cache = pol.forward(controller.params, controller.arch, feats, mode="eval")
        acts = [np.array([joint[m] for _, joint in keys])
                for m in range(controller.n_agents)]
        grads.append(pol.backward(controller.params, controller.arch, cache,
                                  acts, coefs))
    else:
        for m, (arch, params) in enumerate(controller.nets):
            feats = np.stack([controller.encode_history(h, m) for h, _ in keys])
            _, cache = pol.forward(params, arch, feats, mode="eval")
            acts = [np.array([joint[m] for _, joint in keys])]
            grads.append(pol.backward(params, arch, cache, acts, coefs))
    return grads


def exact_ascent(game: ToyGame, controller: Controller, mu: float,
                 steps: int, learning_rate: float,
                 trace_every: int = 50) -> list[float]:
    """Gradient ascent driven by the exact enumerated gradient; returns the
    exact objective sampled every `trace_every` steps. This is the update
    rule itself with its expectation computed in closed form, used to reach
    convergence on toys."""
    from .oracle import enumerate_exact_J

    trace = []
    for k in range(steps):
        grads = exact_policy_gradient(game, controller, mu)
        for vec, g in zip(controller.parameter_vectors(), grads):
            vec += learning_rate * g
        if (k + 1) % trace_every == 0 or k + 1 == steps:
            trace.append(enumerate_exact_J(
                game, [controller.policy_fn(m) for m in range(controller.n_agents)], mu))
    return trace


# ---------------------------------------------------------------------------
# the training loop


@dataclass
class CurveRow:
    update: int
    j_estimate: float
    mean_rate: float
    rate_variance: float
    grad_norm: float
    clamps: int


@dataclass
class TrainResult:
    curves: list
    converged: bool
    updates: int
    clip_events: int
    replay_size: int


def _apply_update(controller: Controller, grads, config: TrainConfig):
    norm = math.sqrt(sum(float(g @ g) for g in grads))
    clipped = False
    scale = config.learning_rate
    if config.grad_clip > 0 and norm > config.grad_clip:
        scale *= config.grad_clip / norm
        clipped = True
    for vec, g in zip(controller.parameter_vectors(), grads):
        vec += scale * g
        if not np.all(np.isfinite(vec)) or np.max(np.abs(vec)) > config.divergence_limit:
            raise DivergenceError(
                f"parameter magnitude exceeded {config.divergence_limit:g} "
                f"(gradient norm {norm:.3g})")
    return norm, clipped


def train(env, controller: Controller, config: TrainConfig,
          buffers=None) -> TrainResult:
    """Algorithm phases: collect a seed replay set under the initial policy,
    pre-train offline over it, then run the online collect/update loop until
    t_end or until the windowed surrogate-return average stalls."""
    rng_collect = np.random.default_rng([config.seed, 1])
    rng_batch = np.random.default_rng([config.seed, 2])
    rng_dropout = np.random.default_rng([config.seed, 3])
    buffers = buffers or [HistoryBuffer(config.history_len)
                          for _ in range(controller.n_agents)]
    store = ReplayStore()
    curves: list[CurveRow] = []
    clip_events = 0
    update = 0
    j_history: list[float] = []

    def do_update():
        nonlocal update, clip_events
        batch = store.minibatch(config.minibatch, rng_batch)
        pol.clamp_events.reset()
        grads = estimate_gradient(controller, batch, config.mu,
                                  config.eq14_literal, rng=rng_dropout)
        norm, clipped = _apply_update(controller, grads, config)
        clip_events += clipped
        returns = np.array([s.episodic_return for s in batch])
        j_est = surrogate_return(returns, config.mu)
        j_history.append(j_est)
        update += 1
        curves.append(CurveRow(update=update, j_estimate=j_est,
                               mean_rate=float(returns.mean()),
                               rate_variance=float(returns.var()),
                               grad_norm=norm,
                               clamps=pol.clamp_events.value))

    # Phase II: seed replay + offline epochs. A systematic sweep of the
    # joint action space gives the offline phase balanced per-action return
    # evidence; otherwise the initial policy explores on its own.
    sweep = None
    if config.seed_sweep:
        from itertools import product
        sets = [range(n) for n in controller.head_sizes]
        sweep = list(product(*sets))
        rng_collect.shuffle(sweep)
    for k in range(config.seed_episodes):
        forced = None
        if sweep:
            forced = [sweep[(k * config.horizon + t) % len(sweep)]
                      for t in range(config.horizon)]
        _, sample = collect_episode(env, controller, buffers,
                                    config.horizon, rng_collect,
                                    forced_actions=forced)
        store.add(sample)
    for _ in range(config.offline_epochs):
        do_update()

    # Phase III: online loop
    converged = False
    while update < config.offline_epochs + config.max_updates:
        _, sample = collect_episode(env, controller, buffers,
                                    config.horizon, rng_collect)
        store.add(sample)
        do_update()
        w = config.convergence_window
        if len(j_history) >= 2 * w:
            recent = float(np.mean(j_history[-w:]))
            previous = float(np.mean(j_history[-2 * w:-w]))
            if abs(recent - previous) < config.convergence_tol * (abs(previous) + 1e-12):
                converged = True
                break
    return TrainResult(curves=curves, converged=converged, updates=update,
                       clip_events=clip_events, replay_size=len(store))


# ---------------------------------------------------------------------------
# Theorem 1 harness: central driver vs per-agent drivers


@dataclass
class Theorem1Report:
    updates: int
    max_param_divergence: float
    factorization_gap: float
    diverged_at: int | None


def _seeded(seed, *tags) -> np.random.Generator:
    return np.random.default_rng([seed, *tags])


def _collect_with_agent_rngs(env, nets, buffers, horizon, action_rngs):
    """One episode where each agent samples its action from its own rng
    stream (the distributed execution); the arithmetic per agent is identical
    to a central server iterating the same nets in the same order."""
    start_entries = tuple(tuple(buf.entries()) for buf in buffers)
    actions, rates_norm = [], []
    for _ in range(horizon):
        acts = []
        for m, (arch, params) in enumerate(nets):
            feats = buffers[m].encode(arch.head_sizes[0])
            dists, _ = pol.forward(params, arch, feats, mode="eval")
            acts.append(pol.sample_action(dists[0], action_rngs[m]))
        profile = ActionProfile(ap_beam=acts[0], ris_phases=tuple(acts[1:]))
        reward, _ = env.step(profile)
        norm = env.rate_norm(reward)
        for m, buf in enumerate(buffers):
            buf.push(acts[m], norm)
        actions.append(tuple(acts))
        rates_norm.append(norm)
    return TrainingSample(start_entries=start_entries, actions=tuple(actions),
                          rates_norm=tuple(rates_norm))


def _agent_gradient(net, sample_batch, agent, weights, horizon, head_size,
                    history_len):
    arch, params = net
    g = np.zeros(params.n)
    for t in range(horizon):
        rows = []
        for s in sample_batch:
            buf = HistoryBuffer(history_len)
            for action, rate in s.entries_at(agent, t)[-history_len:]:
                buf.push(action, rate)
            rows.append(buf.encode(head_size))
        _, cache = pol.forward(params, arch, np.stack(rows), mode="eval")
        acts = [np.array([s.actions[t][agent] for s in sample_batch])]
        g += pol.backward(params, arch, cache, acts, weights)
    return g / len(sample_batch)


def theorem1_harness(env_factory, head_sizes, config: TrainConfig,
                     n_updates: int = 100) -> Theorem1Report:
    """Run the same seeded history stream through (a) a central server that
    updates every agent inside one loop and (b) independent per-agent update
    loops, and compare parameter trajectories bitwise. Also checks that the
    one-pass joint gradient equals the per-agent gradients exactly."""
    if config.mode != "distributed":
        raise ValueError("the equivalence harness drives distributed controllers")

    def build():
        ctrl = DistributedController(head_sizes, config.history_len,
                                     _seeded(config.seed, 0),
                                     dropout_lstm=0.0, dropout_dense=0.0)
        return ctrl

    central = build()
    per_agent = build()
    env_c = env_factory()
    env_d = env_factory()
    bufs_c = [HistoryBuffer(config.history_len) for _ in head_sizes]
    bufs_d = [HistoryBuffer(config.history_len) for _ in head_sizes]
    store_c, store_d = ReplayStore(), ReplayStore()

    max_div = 0.0
    fact_gap = 0.0
    diverged_at = None
    for step in range(n_updates):
        rngs_c = [_seeded(config.seed, 10, step, m) for m in range(len(head_sizes))]
        rngs_d = [_seeded(config.seed, 10, step, m) for m in range(len(head_sizes))]
        store_c.add(_collect_with_agent_rngs(env_c, central.nets, bufs_c,
                                             config.horizon, rngs_c))
        store_d.add(_collect_with_agent_rngs(env_d, per_agent.nets, bufs_d,
                                             config.horizon, rngs_d))

        batch_idx_rng = _seeded(config.seed, 20, step)
        batch_c = store_c.minibatch(config.minibatch, batch_idx_rng)
        batch_idx_rng = _seeded(config.seed, 20, step)
        batch_d = store_d.minibatch(config.minibatch, batch_idx_rng)

        returns = np.array([s.episodic_return for s in batch_c])
        weights_c = np.array([gradient_weight(r, float(returns.mean()), config.mu,
                                              config.eq14_literal) for r in returns])
        returns_d = np.array([s.episodic_return for s in batch_d])
        weights_d = np.array([gradient_weight(r, float(returns_d.mean()), config.mu,
                                              config.eq14_literal) for r in returns_d])

        # central server: one pass over agents inside a single loop
        grads_central = [
            _agent_gradient(central.nets[m], batch_c, m, weights_c,
                            config.horizon, head_sizes[m], config.history_len)
            for m in range(len(head_sizes))]
        # per-agent drivers: each agent runs its own update routine
        grads_agents = []
        for m in range(len(head_sizes)):
            grads_agents.append(
                _agent_gradient(per_agent.nets[m], batch_d, m, weights_d,
                                config.horizon, head_sizes[m], config.history_len))

        # factorization identity on the central batch: joint one-pass slot-major
        # accumulation vs the agent-major vectors above
        joint = [np.zeros(central.nets[m][1].n) for m in range(len(head_sizes))]
        for t in range(config.horizon):
            for m in range(len(head_sizes)):
                arch, params = central.nets[m]
                rows = []
                for s in batch_c:
                    buf = HistoryBuffer(config.history_len)
                    for action, rate in s.entries_at(m, t)[-config.history_len:]:
                        buf.push(action, rate)
                    rows.append(buf.encode(head_sizes[m]))
                _, cache = pol.forward(params, arch, np.stack(rows), mode="eval")
                acts = [np.array([s.actions[t][m] for s in batch_c])]
                joint[m] += pol.backward(params, arch, cache, acts, weights_c)
        for m in range(len(head_sizes)):
            gap = float(np.max(np.abs(joint[m] / len(batch_c) - grads_central[m])))
            fact_gap = max(fact_gap, gap)

        for m, g in enumerate(grads_central):
            central.nets[m][1].values += config.learning_rate * g
        for m, g in enumerate(grads_agents):
            per_agent.nets[m][1].values += config.learning_rate * g

        step_div = max(float(np.max(np.abs(central.nets[m][1].values
                                           - per_agent.nets[m][1].values)))
                       for m in range(len(head_sizes)))
        max_div = max(max_div, step_div)
        if step_div > 0 and diverged_at is None:
            diverged_at = step + 1
    return Theorem1Report(updates=n_updates, max_param_divergence=max_div,
                          factorization_gap=fact_gap, diverged_at=diverged_at)


# ---------------------------------------------------------------------------
# Theorem 2 harness: unilateral-deviation sweep


@dataclass
class NashReport:
    j_current: float
    best_improvement: float
    per_agent: list


def nash_check(game: ToyGame, policy_fns, mu: float, eps: float = 1e-3) -> NashReport:
    """For each agent, sweep every deterministic policy over the agent's own
    observation nodes (its action/rate pairs) while the others keep playing
    their current policies, and report the largest exact-objective
    improvement. An equilibrium certificate is improvement <= eps * |J|."""
    from .oracle import enumerate_exact_J, own_history

    j_now = enumerate_exact_J(game, policy_fns, mu)
    per_agent = []
    for m in range(game.n_agents):
        n_actions = len(game.action_sets[m])
        best = -math.inf

        def evaluate(tree):
            def dev_policy(hist):
                out = np.zeros(n_actions)
                out[tree[own_history(hist, m)]] = 1.0
                return out

            pols = list(policy_fns)
            pols[m] = dev_policy
            return enumerate_exact_J(game, pols, mu)

        def frontier_node(tree):
            # first reachable own-observation node without an assigned action
            found = []

            def rec(t, state, hist, prob):
                if found or t == game.horizon:
                    return
                node = own_history(hist, m)
                if node not in tree:
                    found.append(node)
                    return
                dists = [np.asarray(policy_fns[mm](hist))
                         for mm in range(game.n_agents)]
                for joint in game.joint_actions:
                    if joint[m] != tree[node]:
                        continue
                    p = prob
                    for mm, a in enumerate(joint):
                        if mm != m:
                            p *= float(dists[mm][a])
                    if p == 0.0:
                        continue
                    r = game.rate(state, joint)
                    for p_s, nxt in game.step(state, joint):
                        if p_s > 0.0:
                            rec(t + 1, nxt, hist + ((joint, r),), p * p_s)

            for p0, s0 in game.initial:
                if p0 > 0.0:
                    rec(0, s0, (), p0)
            return found[0] if found else None

        def extend(tree):
            nonlocal best
            node = frontier_node(tree)
            if node is None:
                best = max(best, evaluate(tree))
                return
            for a in range(n_actions):
                tree[node] = a
                extend(tree)
                del tree[node]

        extend({})
        per_agent.append(best - j_now)
    best_improvement = max(per_agent)
    return NashReport(j_current=j_now, best_improvement=best_improvement,
                      per_agent=per_agent)
