"""Brute-force ground truth on desk-scale games: exhaustive trajectory
enumeration for the exact risk-sensitive objective, open- and closed-loop
optimal policies, finite-difference gradients, policy RMSE, and forward-cost
benchmarks.

Toy games carry explicit rate/transition tables, so every probability here
is computed by full enumeration, independent of the training stack. Policies
enter as plain callables mapping the global episode history, a tuple of
(joint-action tuple, rate) pairs, to the agent's probability vector; an
agent's own view is the projection own_history(hist, m).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import product

import numpy as np

ENUMERABILITY_BOUND = 10_000_000


class EnumerabilityError(ValueError):
    """Game too large for exhaustive enumeration."""


# ---------------------------------------------------------------------------
# toy games


@dataclass(frozen=True)
class ToyGame:
    """Explicitly tabulated identical-payoff game.

    rates[(state, joint)] is the shared reward; transitions[(state, joint)]
    lists (probability, next_state); initial lists (probability, state).
    Joint actions are tuples (beam, phase_1, ..., phase_G).
    """

    n_beams: int
    n_phases: int
    n_ris: int
    horizon: int
    rates: dict
    initial: tuple
    transitions: dict
    frozen: bool = True

    def __post_init__(self):
        if min(self.n_beams, self.horizon) < 1 or self.n_phases < 1 or self.n_ris < 0:
            raise ValueError("bad toy-game dimensions")
        total = sum(p for p, _ in self.initial)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("initial state probabilities must sum to 1")

    @property
    def n_agents(self) -> int:
        return 1 + self.n_ris

    @property
    def action_sets(self) -> tuple:
        return (tuple(range(self.n_beams)),) + \
            (tuple(range(self.n_phases)),) * self.n_ris

    @property
    def joint_actions(self) -> list:
        return list(product(*self.action_sets))

    def states(self) -> set:
        return {s for _, s in self.initial} | {s for s, _ in self.rates.keys()}

    def check_enumerable(self) -> None:
        size = (self.n_beams ** self.horizon
                * self.n_phases ** (self.n_ris * self.horizon)
                * max(len(self.states()), 1))
        if size > ENUMERABILITY_BOUND:
            raise EnumerabilityError(f"{size} trajectories exceed the bound")

    def rate(self, state, joint) -> float:
        return self.rates[(state, joint)]

    def step(self, state, joint):
        if self.frozen:
            return ((1.0, state),)
        return self.transitions[(state, joint)]


def frozen_toy_game(rate_of_joint: dict, n_beams: int, n_phases: int,
                    n_ris: int, horizon: int) -> ToyGame:
    """Single-state game whose reward depends on the joint action only."""
    rates = {("s0", joint): float(r) for joint, r in rate_of_joint.items()}
    return ToyGame(n_beams=n_beams, n_phases=n_phases, n_ris=n_ris,
                   horizon=horizon, rates=rates, initial=((1.0, "s0"),),
                   transitions={}, frozen=True)


def toy_game_from_scenario(scn, state, horizon: int) -> ToyGame:
    """Tabulate a frozen snapshot of the real environment: normalized rate of
    every joint action at the given EnvState."""
    from .channel import achievable_rate
    from .environment import ActionProfile, build_channel

    denom = scn.budget.bandwidth * scn.cfg.rate_norm_max
    table = {}
    beams = range(len(scn.beams))
    phase_sets = [range(len(scn.phases))] * scn.geometry.n_ris
    for joint in product(beams, *phase_sets):
        actions = ActionProfile(ap_beam=joint[0], ris_phases=tuple(joint[1:]))
        rate = achievable_rate(build_channel(scn, state, actions), scn.budget)
        table[joint] = rate / denom
    return frozen_toy_game(table, len(scn.beams), len(scn.phases),
                           scn.geometry.n_ris, horizon)


# ---------------------------------------------------------------------------
# trajectory enumeration


@dataclass
class Trajectory:
    prob: float
    ret: float
    steps: list          # per slot: (state, joint, rate, global history before)


def own_history(hist, agent: int) -> tuple:
    """Project the global (joint, rate) history onto one agent's view."""
    return tuple((joint[agent], rate) for joint, rate in hist)


def uniform_policies(game: ToyGame) -> list:
    sizes = [len(s) for s in game.action_sets]

    def make(n):
        return lambda hist: np.full(n, 1.0 / n)

    return [make(n) for n in sizes]


def enumerate_trajectories(game: ToyGame, policy_fns) -> list[Trajectory]:
    """Every trajectory with its exact probability under the given policies.

    Policies receive the global history: the episode's (joint action, rate)
    pairs so far, oldest first.
    """
    game.check_enumerable()
    out: list[Trajectory] = []
    joints = game.joint_actions

    def rec(t, state, hist, prob, ret, steps):
        if t == game.horizon:
            out.append(Trajectory(prob=prob, ret=ret, steps=steps))
            return
        dists = [np.asarray(policy_fns[m](hist), dtype=float)
                 for m in range(game.n_agents)]
        for joint in joints:
            p_joint = prob
            for m, a in enumerate(joint):
                p_joint *= float(dists[m][a])
            if p_joint == 0.0:
                continue
            r = game.rate(state, joint)
            new_hist = hist + ((joint, r),)
            new_steps = steps + [(state, joint, r, hist)]
            for p_s, nxt in game.step(state, joint):
                if p_s == 0.0:
                    continue
                rec(t + 1, nxt, new_hist, p_joint * p_s, ret + r, new_steps)

    for p0, s0 in game.initial:
        if p0 > 0.0:
            rec(0, s0, (), p0, 0.0, [])
    return out


def enumerate_exact_J(game: ToyGame, policy_fns, mu: float) -> float:
    """Exact surrogate objective E[R] - (mu/2) Var[R] by full enumeration."""
    trajs = enumerate_trajectories(game, policy_fns)
    mean = sum(t.prob * t.ret for t in trajs)
    second = sum(t.prob * t.ret ** 2 for t in trajs)
    return mean - 0.5 * mu * (second - mean ** 2)


# ---------------------------------------------------------------------------
# optimal policies


@dataclass
class OptimalPolicy:
    j_star: float
    sequence: tuple | None = None      # open-loop joint actions, one per slot
    tree: dict | None = None           # closed-loop: history node -> joint
    closed_loop: bool = False


def _sequence_moments(game: ToyGame, sequence) -> tuple[float, float]:
    """Mean and second moment of the return for a fixed action sequence,
    over state randomness."""
    outcomes = []

    def rec(t, state, prob, ret):
        if t == game.horizon:
            outcomes.append((prob, ret))
            return
        joint = sequence[t]
        r = game.rate(state, joint)
        for p_s, nxt in game.step(state, joint):
            if p_s > 0.0:
                rec(t + 1, nxt, prob * p_s, ret + r)

    for p0, s0 in game.initial:
        if p0 > 0.0:
            rec(0, s0, p0, 0.0)
    mean = sum(p * r for p, r in outcomes)
    second = sum(p * r * r for p, r in outcomes)
    return mean, second


def optimal_policy(game: ToyGame, mu: float, closed_loop: bool = False) -> OptimalPolicy:
    """Exhaustive argmax of the exact objective; ties break to the
    lexicographically smallest action sequence.

    Open-loop (default): all (A * B^G)^T joint-action sequences.
    Closed-loop (stochastic toys): all deterministic maps from the global
    (joint action, rate) history to the next joint action.
    """
    game.check_enumerable()
    if closed_loop and not game.frozen:
        return _optimal_closed_loop(game, mu)
    best = None
    for sequence in product(game.joint_actions, repeat=game.horizon):
        mean, second = _sequence_moments(game, sequence)
        j = mean - 0.5 * mu * (second - mean ** 2)
        if best is None or j > best[0] + 1e-15:
            best = (j, sequence)
    return OptimalPolicy(j_star=best[0], sequence=best[1], closed_loop=False)


def _optimal_closed_loop(game: ToyGame, mu: float) -> OptimalPolicy:
    """Enumerate deterministic global-history-conditioned policies by
    assigning a joint action to every reachable observation node."""
    joints = game.joint_actions

    def outcomes_under(tree):
        res = []

        def rec(t, state, node, prob, ret):
            if t == game.horizon:
                res.append((prob, ret))
                return
            joint = tree[node]
            r = game.rate(state, joint)
            for p_s, nxt in game.step(state, joint):
                if p_s > 0.0:
                    rec(t + 1, nxt, node + ((joint, r),), prob * p_s, ret + r)

        for p0, s0 in game.initial:
            if p0 > 0.0:
                rec(0, s0, (), p0, 0.0)
        return res

    best = None
    counter = [0]

    def extend(tree):
        # find an unassigned reachable node, or evaluate the complete tree
        frontier = []

        def walk(t, state, node, prob):
            if t == game.horizon:
                return
            if node not in tree:
                frontier.append(node)
                return
            joint = tree[node]
            r = game.rate(state, joint)
            for p_s, nxt in game.step(state, joint):
                if p_s > 0.0:
                    walk(t + 1, nxt, node + ((joint, r),), prob * p_s)

        for p0, s0 in game.initial:
            if p0 > 0.0:
                walk(0, s0, (), p0)
        nonlocal best
        if not frontier:
            res = outcomes_under(tree)
            mean = sum(p * r for p, r in res)
            second = sum(p * r * r for p, r in res)
            j = mean - 0.5 * mu * (second - mean ** 2)
            key = tuple(sorted(tree.items()))
            if best is None or j > best[0] + 1e-15:
                best = (j, dict(tree))
            return
        node = frontier[0]
        for joint in joints:
            counter[0] += 1
            if counter[0] > ENUMERABILITY_BOUND:
                raise EnumerabilityError("closed-loop policy space exceeds the bound")
            tree[node] = joint
            extend(tree)
            del tree[node]

    extend({})
    return OptimalPolicy(j_star=best[0], tree=best[1], closed_loop=True)


# ---------------------------------------------------------------------------
# finite differences and policy distance


def finite_difference_gradient(evaluator, params: np.ndarray, step: float) -> np.ndarray:
    """Central differences of a scalar evaluator per coordinate."""
    if step <= 0:
        raise ValueError("step must be positive")
    params = np.asarray(params, dtype=float)
    grad = np.zeros(params.size)
    for k in range(params.size):
        up = params.copy()
        up[k] += step
        down = params.copy()
        down[k] -= step
        grad[k] = (evaluator(up) - evaluator(down)) / (2.0 * step)
    return grad


def policy_rmse(policy_a, policy_b, histories) -> float:
    """Root-mean-square difference between two policies' probability vectors
    over the supplied histories, in percent."""
    deltas = []
    for hist in histories:
        pa = np.asarray(policy_a(hist), dtype=float)
        pb = np.asarray(policy_b(hist), dtype=float)
        if pa.shape != pb.shape:
            raise ValueError(f"action-space mismatch {pa.shape} vs {pb.shape}")
        deltas.append(pa - pb)
    if not deltas:
        raise ValueError("need at least one history")
    stacked = np.concatenate(deltas)
    return 100.0 * float(np.sqrt(np.mean(stacked ** 2)))


def policy_rmse_multi(policies_a, policies_b, histories_per_agent) -> float:
    """Pooled RMSE across agents (each agent contributes its own histories)."""
    deltas = []
    for pa, pb, hists in zip(policies_a, policies_b, histories_per_agent):
        for hist in hists:
            da = np.asarray(pa(hist), dtype=float)
            db = np.asarray(pb(hist), dtype=float)
            if da.shape != db.shape:
                raise ValueError("action-space mismatch")
            deltas.append(da - db)
    stacked = np.concatenate(deltas)
    return 100.0 * float(np.sqrt(np.mean(stacked ** 2)))


# ---------------------------------------------------------------------------
# complexity benchmarks


@dataclass
class BenchRow:
    kind: str
    param: str
    value: int
    seconds: float


@dataclass
class BenchReport:
    rows: list
    exponents: dict      # (kind, param) -> fitted log-log slope

    def exponent(self, kind: str, param: str) -> float:
        return self.exponents[(kind, param)]


def _episode_forward_seconds(kind: str, history_len: int, n_agents: int,
                             n_actions: int, horizon: int, repeats: int,
                             rng: np.random.Generator) -> float:
    from .policy import PolicyArchitecture, forward, init_params

    if kind == "centralized":
        arch = PolicyArchitecture(kind="centralized", history_len=history_len,
                                  input_size=n_agents * n_actions + 1,
                                  head_sizes=(n_actions,) * n_agents,
                                  dropout_lstm=0.0, dropout_dense=0.0)
        nets = [(arch, init_params(arch, rng))]
    else:
        arch = PolicyArchitecture(kind="distributed", history_len=history_len,
                                  input_size=n_actions + 1,
                                  head_sizes=(n_actions,),
                                  dropout_lstm=0.0, dropout_dense=0.0)
        nets = [(arch, init_params(arch, rng)) for _ in range(n_agents)]
    hists = [rng.normal(size=(a.history_len, a.input_size)) for a, _ in nets]
    best = math.inf
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(repeats):
            for _slot in range(horizon):
                for (a, p), h in zip(nets, hists):
                    forward(p, a, h, mode="eval")
        best = min(best, time.perf_counter() - start)
    return best / repeats


def complexity_bench(kinds=("centralized", "distributed"),
                     horizons=(1, 2, 4, 8), history_lens=(8, 16, 32),
                     action_counts=(4, 8, 16), agent_counts=(2, 3, 5),
                     repeats: int = 8, seed: int = 0) -> BenchReport:
    """Measure per-episode feedforward cost against each driver parameter and
    fit log-log growth exponents."""
    rng = np.random.default_rng(seed)
    base = dict(history_len=16, n_agents=3, n_actions=8, horizon=2)
    sweeps = [("T", "horizon", horizons), ("H", "history_len", history_lens),
              ("B", "n_actions", action_counts), ("M", "n_agents", agent_counts)]
    rows = []
    exponents = {}
    for kind in kinds:
        for label, key, values in sweeps:
            times = []
            for v in values:
                cfg = dict(base)
                cfg[key] = v
                secs = _episode_forward_seconds(kind=kind, repeats=repeats,
                                                rng=rng, **cfg)
                rows.append(BenchRow(kind=kind, param=label, value=v, seconds=secs))
                times.append(secs)
            if len(values) >= 2:
                slope = np.polyfit(np.log(np.asarray(values, dtype=float)),
                                   np.log(np.asarray(times)), 1)[0]
                exponents[(kind, label)] = float(slope)
    return BenchReport(rows=rows, exponents=exponents)
