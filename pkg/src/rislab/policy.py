"""Tiny recurrent policy networks, implemented from scratch on numpy.

Two layouts are supported: a joint controller (3 stacked LSTM layers sized
H, H/2, H/4, a 3-layer rectified dense trunk, and one softmax head per
agent) and a per-agent controller (2 LSTM layers sized H, H/4, a 2-layer
rectified dense trunk, and a single softmax head). The final-slot hidden
state of the LSTM stack feeds the trunk. Inverted dropout is applied after
the LSTM stack (p_lstm) and after each rectified dense layer (p_dense) in
train mode only.

Forward accepts a single history (H, F) or a batch (S, H, F). Backward
computes the exact gradient of weight * sum_heads log pi(selected action)
through the cached forward pass, including the dropout masks, so central
finite differences on a fixed-seed forward reproduce it.

Parameters live in one flat float64 vector with named slices, so the
optimizer, the checkpoint format, and finite-difference probes all see the
same layout.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12

CHECKPOINT_MAGIC = b"RLPC"
CHECKPOINT_VERSION = 1


class _ClampCounter:
    """Counts probability-floor events in log_prob; trainer reports them."""

    def __init__(self):
        self.value = 0

    def reset(self):
        self.value = 0


clamp_events = _ClampCounter()


# ---------------------------------------------------------------------------
# architecture and parameters


@dataclass(frozen=True)
class PolicyArchitecture:
    kind: str                      # "centralized" | "distributed"
    history_len: int               # H, divisible by 4
    input_size: int                # features per history slot
    head_sizes: tuple[int, ...]    # one action-space size per softmax head
    dropout_lstm: float = 0.2      # applied once, after the LSTM stack
    dropout_dense: float = 0.4     # applied after each rectified dense layer

    def __post_init__(self):
        if self.kind not in ("centralized", "distributed"):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.history_len < 4 or self.history_len % 4 != 0:
            raise ValueError("history length must be a positive multiple of 4")
        if self.input_size < 1:
            raise ValueError("input size must be >= 1")
        if not self.head_sizes or any(a < 1 for a in self.head_sizes):
            raise ValueError("every head needs at least one action")
        if self.kind == "distributed" and len(self.head_sizes) != 1:
            raise ValueError("a distributed controller has exactly one head")
        if not (0.0 <= self.dropout_lstm < 1.0 and 0.0 <= self.dropout_dense < 1.0):
            raise ValueError("dropout probabilities must lie in [0, 1)")

    @property
    def lstm_sizes(self) -> tuple[int, ...]:
        h = self.history_len
        if self.kind == "centralized":
            return (h, h // 2, h // 4)
        return (h, h // 4)

    @property
    def trunk_sizes(self) -> tuple[int, ...]:
        # rectified dense layers between the LSTM stack and the head
        # projections; the per-agent net's third dense layer is its head
        width = self.history_len // 4
        n = 3 if self.kind == "centralized" else 2
        return (width,) * n


def param_layout(arch: PolicyArchitecture) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) slices of the flat parameter vector."""
    layout = []
    fan = arch.input_size
    for j, h in enumerate(arch.lstm_sizes):
        layout.append((f"lstm{j}.W", (4 * h, fan)))
        layout.append((f"lstm{j}.U", (4 * h, h)))
        layout.append((f"lstm{j}.b", (4 * h,)))
        fan = h
    for j, width in enumerate(arch.trunk_sizes):
        layout.append((f"dense{j}.W", (width, fan)))
        layout.append((f"dense{j}.b", (width,)))
        fan = width
    for m, actions in enumerate(arch.head_sizes):
        layout.append((f"head{m}.W", (actions, fan)))
        layout.append((f"head{m}.b", (actions,)))
    return layout


@dataclass
class PolicyParams:
    """Flat float64 parameter vector with named views per layer slice."""

    values: np.ndarray
    layout: list = field(repr=False, default=None)
    seed: int | None = None
    _offsets: dict = field(repr=False, default=None)

    def __post_init__(self):
        if self._offsets is None:
            offsets, pos = {}, 0
            for name, shape in self.layout:
                size = int(np.prod(shape))
                offsets[name] = (pos, shape)
                pos += size
            if pos != self.values.size:
                raise ValueError(f"layout wants {pos} values, got {self.values.size}")
            object.__setattr__(self, "_offsets", offsets)

    @property
    def n(self) -> int:
        return self.values.size

    def view(self, name: str) -> np.ndarray:
        pos, shape = self._offsets[name]
        return self.values[pos:pos + int(np.prod(shape))].reshape(shape)

    def copy(self) -> "PolicyParams":
        return PolicyParams(values=self.values.copy(), layout=self.layout,
                            seed=self.seed, _offsets=self._offsets)


def n_params(arch: PolicyArchitecture) -> int:
    return sum(int(np.prod(shape)) for _, shape in param_layout(arch))


def init_params(arch: PolicyArchitecture, rng: np.random.Generator,
                seed: int | None = None) -> PolicyParams:
    """Uniform(-s, s) weights with s = sqrt(6/(fan_in+fan_out)) per matrix;
    LSTM forget-gate biases 1, all other biases 0."""
    layout = param_layout(arch)
    flat = np.zeros(n_params(arch))
    params = PolicyParams(values=flat, layout=layout, seed=seed)
    for name, shape in layout:
        v = params.view(name)
        if name.endswith(".b"):
            if name.startswith("lstm"):
                h = shape[0] // 4
                v[h:2 * h] = 1.0  # forget gate bias
        else:
            s = np.sqrt(6.0 / (shape[0] + shape[1]))
            v[...] = rng.uniform(-s, s, size=shape)
    return params


# ---------------------------------------------------------------------------
# forward


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class _LstmLayerCache:
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tc: np.ndarray
    h: np.ndarray


@dataclass
class ForwardCache:
    """Everything needed to rerun the pass bit-exactly and run BPTT."""

    mode: str
    batched: bool
    n_params: int
    inputs: np.ndarray                 # (H, S, F)
    lstm: list                         # per-layer _LstmLayerCache
    drop_lstm: np.ndarray | None       # inverted-dropout mask after the stack
    trunk: list                        # per-layer (input, pre, mask)
    trunk_out: np.ndarray              # (S, width)
    head_probs: list                   # per-head (S, actions)


def forward(params: PolicyParams, arch: PolicyArchitecture, history: np.ndarray,
            mode: str = "eval", rng: np.random.Generator | None = None):
    """Run the net over an (H, F) history or an (S, H, F) batch.

    Returns (distributions, cache); distributions is one probability vector
    per head (matrices for batched input). Train mode draws fresh inverted
    dropout masks from `rng`.
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    x = np.asarray(history, dtype=float)
    batched = x.ndim == 3
    if not batched:
        x = x[None, :, :]
    if x.shape[1] != arch.history_len or x.shape[2] != arch.input_size:
        raise ValueError(f"history shape {x.shape[1:]} does not match "
                         f"(H={arch.history_len}, F={arch.input_size})")
    dropping = mode == "train" and (arch.dropout_lstm > 0 or arch.dropout_dense > 0)
    if dropping and rng is None:
        raise ValueError("train mode with dropout needs an rng")

    batch = x.shape[0]
    steps = arch.history_len
    seq = np.ascontiguousarray(np.swapaxes(x, 0, 1))  # (H, S, F)

    layer_caches = []
    layer_in = seq
    for j, h in enumerate(arch.lstm_sizes):
        w = params.view(f"lstm{j}.W")
        u = params.view(f"lstm{j}.U")
        b = params.view(f"lstm{j}.b")
        cache = _LstmLayerCache(*[np.zeros((steps, batch, h)) for _ in range(7)])
        h_prev = np.zeros((batch, h))
        c_prev = np.zeros((batch, h))
        for t in range(steps):
            z = layer_in[t] @ w.T + h_prev @ u.T + b
            i = _sigmoid(z[:, :h])
            f = _sigmoid(z[:, h:2 * h])
            g = np.tanh(z[:, 2 * h:3 * h])
            o = _sigmoid(z[:, 3 * h:])
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h_prev = o * tc
            c_prev = c
            cache.i[t], cache.f[t], cache.g[t], cache.o[t] = i, f, g, o
            cache.c[t], cache.tc[t], cache.h[t] = c, tc, h_prev
        layer_caches.append(cache)
        layer_in = cache.h

    z = layer_caches[-1].h[-1]  # final-slot hidden state of the top layer
    drop_lstm = None
    if mode == "train" and arch.dropout_lstm > 0:
        drop_lstm = (rng.random(z.shape) >= arch.dropout_lstm) / (1 - arch.dropout_lstm)
        z = z * drop_lstm

    trunk = []
    for j in range(len(arch.trunk_sizes)):
        w = params.view(f"dense{j}.W")
        b = params.view(f"dense{j}.b")
        pre = z @ w.T + b
        out = np.maximum(pre, 0.0)
        mask = None
        if mode == "train" and arch.dropout_dense > 0:
            mask = (rng.random(out.shape) >= arch.dropout_dense) / (1 - arch.dropout_dense)
            out = out * mask
        trunk.append((z, pre, mask))
        z = out

    probs = []
    for m in range(len(arch.head_sizes)):
        w = params.view(f"head{m}.W")
        b = params.view(f"head{m}.b")
        probs.append(_softmax(z @ w.T + b))

    cache = ForwardCache(mode=mode, batched=batched, n_params=params.n,
                         inputs=seq, lstm=layer_caches, drop_lstm=drop_lstm,
                         trunk=trunk, trunk_out=z, head_probs=probs)
    if batched:
        return probs, cache
    return [p[0] for p in probs], cache


# ---------------------------------------------------------------------------
# sampling and log-probabilities


def sample_action(distribution: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw: first index whose cumulative strictly exceeds u."""
    cum = np.cumsum(np.asarray(distribution, dtype=float))
    u = rng.random()
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, cum.size - 1)


def log_prob(distribution: np.ndarray, action: int) -> float:
    """Natural log of the selected probability, floored at 1e-12."""
    p = float(distribution[action])
    if p <= 0.0:
        raise ValueError(f"action {action} has zero probability")
    if p < PROB_FLOOR:
        clamp_events.value += 1
        p = PROB_FLOOR
    return float(np.log(p))


def log_prob_batch(probs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Vectorized log_prob over a (S, actions) matrix of distributions."""
    p = probs[np.arange(probs.shape[0]), actions]
    if np.any(p <= 0.0):
        raise ValueError("zero-probability action in batch")
    low = p < PROB_FLOOR
    if np.any(low):
        clamp_events.value += int(np.count_nonzero(low))
        p = np.maximum(p, PROB_FLOOR)
    return np.log(p)


# ---------------------------------------------------------------------------
# backward (BPTT)


def backward(params: PolicyParams, arch: PolicyArchitecture, cache: ForwardCache,
             actions, weight) -> np.ndarray:
    """Exact gradient of weight * sum_heads log pi(selected) w.r.t. params.

    `actions` holds one selected index per head (scalars, or length-S arrays
    for a batched cache); `weight` is a scalar or per-sample vector. For a
    batched cache the returned flat vector is the sum over samples, which is
    what the score-function estimator accumulates.
    """
    if cache.n_params != params.n:
        raise ValueError("cache was produced under a different parameter layout")
    steps, batch, _ = cache.inputs.shape
    w_vec = np.broadcast_to(np.asarray(weight, dtype=float), (batch,))

    grad = PolicyParams(values=np.zeros(params.n), layout=params.layout)

    # heads -> trunk output
    dz = np.zeros_like(cache.trunk_out)
    for m, size in enumerate(arch.head_sizes):
        sel = np.broadcast_to(np.asarray(actions[m], dtype=int), (batch,))
        probs = cache.head_probs[m]
        dlogits = -probs * w_vec[:, None]
        dlogits[np.arange(batch), sel] += w_vec
        grad.view(f"head{m}.W")[...] += dlogits.T @ cache.trunk_out
        grad.view(f"head{m}.b")[...] += dlogits.sum(axis=0)
        dz += dlogits @ params.view(f"head{m}.W")

    # dense trunk, reversed
    for j in reversed(range(len(arch.trunk_sizes))):
        layer_in, pre, mask = cache.trunk[j]
        if mask is not None:
            dz = dz * mask
        dpre = dz * (pre > 0.0)
        grad.view(f"dense{j}.W")[...] += dpre.T @ layer_in
        grad.view(f"dense{j}.b")[...] += dpre.sum(axis=0)
        dz = dpre @ params.view(f"dense{j}.W")

    if cache.drop_lstm is not None:
        dz = dz * cache.drop_lstm

    # LSTM stack, top layer receives trunk gradient at the final slot only
    dh_seq = np.zeros((steps, batch, arch.lstm_sizes[-1]))
    dh_seq[-1] = dz
    for j in reversed(range(len(arch.lstm_sizes))):
        lc = cache.lstm[j]
        h = arch.lstm_sizes[j]
        w = params.view(f"lstm{j}.W")
        u = params.view(f"lstm{j}.U")
        layer_in = cache.inputs if j == 0 else cache.lstm[j - 1].h
        d_w, d_u, d_b = (grad.view(f"lstm{j}.W"), grad.view(f"lstm{j}.U"),
                         grad.view(f"lstm{j}.b"))
        dx_seq = np.zeros((steps, batch, layer_in.shape[2]))
        dh_next = np.zeros((batch, h))
        dc_next = np.zeros((batch, h))
        for t in reversed(range(steps)):
            dh = dh_seq[t] + dh_next
            do = dh * lc.tc[t]
            dc = dc_next + dh * lc.o[t] * (1.0 - lc.tc[t] ** 2)
            di = dc * lc.g[t]
            dg = dc * lc.i[t]
            c_prev = lc.c[t - 1] if t > 0 else 0.0
            df = dc * c_prev
            dc_next = dc * lc.f[t]
            dzi = di * lc.i[t] * (1.0 - lc.i[t])
            dzf = df * lc.f[t] * (1.0 - lc.f[t])
            dzg = dg * (1.0 - lc.g[t] ** 2)
            dzo = do * lc.o[t] * (1.0 - lc.o[t])
            dzcat = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
            h_prev = lc.h[t - 1] if t > 0 else np.zeros((batch, h))
            d_w += dzcat.T @ layer_in[t]
            d_u += dzcat.T @ h_prev
            d_b += dzcat.sum(axis=0)
            dx_seq[t] = dzcat @ w
            dh_next = dzcat @ u
        dh_seq = dx_seq

    return grad.values


# ---------------------------------------------------------------------------
# checkpoint io


def save_checkpoint(path, params: PolicyParams, arch: PolicyArchitecture) -> None:
    """Versioned binary: magic, version, JSON header, float64-LE parameters."""
    header = {
        "kind": arch.kind,
        "history_len": arch.history_len,
        "input_size": arch.input_size,
        "head_sizes": list(arch.head_sizes),
        "dropout_lstm": arch.dropout_lstm,
        "dropout_dense": arch.dropout_dense,
        "n_params": int(params.n),
        "seed": params.seed if params.seed is not None else -1,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(params.values.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[PolicyParams, PolicyArchitecture]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a policy checkpoint")
        version, blob_len = struct.unpack("<HI", fh.read(6))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(blob_len).decode())
        raw = fh.read()
    arch = PolicyArchitecture(
        kind=header["kind"], history_len=header["history_len"],
        input_size=header["input_size"], head_sizes=tuple(header["head_sizes"]),
        dropout_lstm=header["dropout_lstm"], dropout_dense=header["dropout_dense"])
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if values.size != header["n_params"] or values.size != n_params(arch):
        raise ValueError(f"{path}: parameter count mismatch")
    seed = header.get("seed", -1)
    return (PolicyParams(values=values, layout=param_layout(arch),
                         seed=None if seed == -1 else seed), arch)
