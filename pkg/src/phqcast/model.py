"""Single-layer LSTM regressor with a linear head and ReLU, trained with Adam on MSE.

Everything is plain numpy. The four gate blocks are stacked in the order
input, forget, cell candidate, output along the first axis of ``W``, ``U``
and ``b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

INPUT_DIM = 19
HIDDEN = 4
LEARNING_RATE = 0.001
BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8
MAX_SEQ_LEN = 7

PARAM_NAMES = ("W", "U", "b", "w_out", "b_out")
GATES = ("i", "f", "g", "o")


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class ModelParams:
    W: np.ndarray  # (4H, D)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)
    w_out: np.ndarray  # (H,)
    b_out: np.ndarray  # () scalar array

    def __post_init__(self) -> None:
        h = self.w_out.shape[0]
        if self.W.shape[0] != 4 * h or self.U.shape != (4 * h, h) or self.b.shape != (4 * h,) or self.b_out.shape != ():
            raise ValueError("inconsistent parameter shapes")

    @property
    def hidden(self) -> int:
        return self.w_out.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(W, U, b) slices of one gate."""
        k = GATES.index(name)
        s = slice(k * self.hidden, (k + 1) * self.hidden)
        return self.W[s], self.U[s], self.b[s]

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def copy(self) -> ModelParams:
        return ModelParams(**{n: a.copy() for n, a in self.arrays().items()})

    @classmethod
    def zeros(cls, input_dim: int = INPUT_DIM, hidden: int = HIDDEN) -> ModelParams:
        return cls(
            np.zeros((4 * hidden, input_dim)),
            np.zeros((4 * hidden, hidden)),
            np.zeros(4 * hidden),
            np.zeros(hidden),
            np.zeros(()),
        )

    @classmethod
    def init(cls, rng: np.random.Generator, input_dim: int = INPUT_DIM, hidden: int = HIDDEN) -> ModelParams:
        """Uniform in +-1/sqrt(hidden) for every array."""
        a = 1.0 / math.sqrt(hidden)
        return cls(
            rng.uniform(-a, a, (4 * hidden, input_dim)),
            rng.uniform(-a, a, (4 * hidden, hidden)),
            rng.uniform(-a, a, 4 * hidden),
            rng.uniform(-a, a, hidden),
            np.asarray(rng.uniform(-a, a)),
        )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class Cache:
    x: np.ndarray  # (B, T, D)
    hs: list[np.ndarray]  # h_0 .. h_T
    cs: list[np.ndarray]
    gates: list[np.ndarray]  # activated [i | f | g | o] per step
    z: np.ndarray  # head pre-activation, (B,) or (B, T) with every_step
    pred: np.ndarray
    relu: str
    params: ModelParams
    every_step: bool


def forward_batch(
    x: np.ndarray, params: ModelParams, relu: str = "output", every_step: bool = False
) -> tuple[np.ndarray, Cache]:
    """Predictions for a batch of equal-length sequences ``x`` of shape (B, T, D).

    With ``every_step`` the head is applied after every day and the result has
    shape (B, T); column ``d - 1`` is the prediction for the day-1..d prefix.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] != params.input_dim:
        raise ValueError(f"expected input of shape (B, T, {params.input_dim}), got {x.shape}")
    if not 1 <= x.shape[1] <= MAX_SEQ_LEN:
        raise ValueError(f"sequence length must be in [1, {MAX_SEQ_LEN}]")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    B, T, _ = x.shape
    H = params.hidden
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs, cs, gates = [h], [c], []
    xw = x @ params.W.T + params.b  # (B, T, 4H)
    for t in range(T):
        a = xw[:, t] + h @ params.U.T
        act = _sigmoid(a)
        act[:, 2 * H : 3 * H] = np.tanh(a[:, 2 * H : 3 * H])
        c = act[:, H : 2 * H] * c + act[:, :H] * act[:, 2 * H : 3 * H]
        h = act[:, 3 * H :] * np.tanh(c)
        hs.append(h)
        cs.append(c)
        gates.append(act)
    top = np.stack(hs[1:], axis=1) if every_step else h  # (B, T, H) or (B, H)
    if relu == "output":
        z = top @ params.w_out + params.b_out
        pred = np.maximum(z, 0.0)
    elif relu == "hidden":
        z = top
        pred = np.maximum(top, 0.0) @ params.w_out + params.b_out
    else:
        raise ValueError(f"unknown relu placement {relu!r}")
    return pred, Cache(x, hs, cs, gates, z, pred, relu, params, every_step)


def forward(seq: np.ndarray, params: ModelParams, relu: str = "output") -> tuple[float, Cache]:
    """Prediction for one (T, D) sequence."""
    pred, cache = forward_batch(np.asarray(seq, dtype=float)[None], params, relu)
    return float(pred[0]), cache


def loss(pred, target) -> float:
    """Mean squared error; a (B, T) prediction is scored against a (B,) target per step."""
    pred = np.atleast_1d(np.asarray(pred, dtype=float))
    target = np.atleast_1d(np.asarray(target, dtype=float))
    if pred.ndim == 2:
        target = target[:, None]
    return float(np.mean((pred - target) ** 2))


def backward(cache: Cache, target) -> dict[str, np.ndarray]:
    """Exact gradients of :func:`loss` w.r.t. every parameter (BPTT).

    The ReLU subgradient at exactly 0 is taken as 0.
    """
    params = cache.params
    y = np.atleast_1d(np.asarray(target, dtype=float))
    B, T, _ = cache.x.shape
    H = params.hidden
    if cache.every_step:
        dpred = 2.0 * (cache.pred - y[:, None]) / (B * T)
        top = np.stack(cache.hs[1:], axis=1)
    else:
        dpred = 2.0 * (cache.pred - y) / B
        top = cache.hs[-1]
    if cache.relu == "output":
        dz = dpred * (cache.z > 0)
        d_w_out = np.tensordot(top, dz, axes=(tuple(range(dz.ndim)), tuple(range(dz.ndim))))
        d_b_out = np.asarray(dz.sum())
        d_top = dz[..., None] * params.w_out
    else:
        r = np.maximum(cache.z, 0.0)
        d_w_out = np.tensordot(r, dpred, axes=(tuple(range(dpred.ndim)), tuple(range(dpred.ndim))))
        d_b_out = np.asarray(dpred.sum())
        d_top = dpred[..., None] * params.w_out * (cache.z > 0)
    dW = np.zeros_like(params.W)
    dU = np.zeros_like(params.U)
    db = np.zeros_like(params.b)
    dh = np.zeros((B, H)) if cache.every_step else d_top
    dc_next = np.zeros((B, H))
    da = np.empty((B, 4 * H))
    for t in range(T - 1, -1, -1):
        if cache.every_step:
            dh = dh + d_top[:, t]
        act = cache.gates[t]
        i, f, g, o = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
        tc = np.tanh(cache.cs[t + 1])
        dc = dc_next + dh * o * (1.0 - tc**2)
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H : 2 * H] = dc * cache.cs[t] * f * (1.0 - f)
        da[:, 2 * H : 3 * H] = dc * i * (1.0 - g**2)
        da[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dW += da.T @ cache.x[:, t]
        dU += da.T @ cache.hs[t]
        db += da.sum(axis=0)
        dh = da @ params.U
        dc_next = dc * f
    return {"W": dW, "U": dU, "b": db, "w_out": d_w_out, "b_out": d_b_out}


# -- optimiser ---------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: ModelParams, **kw) -> AdamState:
        arrays = params.arrays()
        return cls({n: np.zeros_like(a) for n, a in arrays.items()}, {n: np.zeros_like(a) for n, a in arrays.items()}, **kw)


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState) -> tuple[ModelParams, AdamState]:
    """Bias-corrected Adam update, applied in place and returned for convenience."""
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for name in PARAM_NAMES:
        g = grads[name]
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        p = getattr(params, name)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# -- training ------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    patience: int | None = None
    # score every day-1..d prefix against the weekly target (loss at every step)
    prefix_augment: bool = True
    relu: str = "output"
    output_bias_init: str = "mean"  # "mean" of training targets, or "uniform"
    hidden: int = HIDDEN
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.relu not in ("output", "hidden"):
            raise ValueError("relu must be 'output' or 'hidden'")
        if self.output_bias_init not in ("mean", "uniform"):
            raise ValueError("output_bias_init must be 'mean' or 'uniform'")


@dataclass
class TrainResult:
    params: ModelParams
    loss_trace: list[float] = field(default_factory=list)


def _batches(lengths: np.ndarray, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled mini-batches, each holding sequences of a single length."""
    order = rng.permutation(len(lengths))
    batches = []
    for length in np.unique(lengths):
        idx = order[lengths[order] == length]
        batches.extend(idx[i : i + batch_size] for i in range(0, len(idx), batch_size))
    return [batches[j] for j in rng.permutation(len(batches))]


def train(seqs: Sequence[np.ndarray], targets: Sequence[float], config: TrainConfig = TrainConfig()) -> TrainResult:
    """Fit on (T, D) sequences; deterministic for a fixed ``config.seed``."""
    if len(seqs) == 0:
        raise ValueError("need at least one training sample")
    y = np.asarray(targets, dtype=float)
    lengths = np.array([len(s) for s in seqs])
    by_len = {L: np.stack([seqs[i] for i in np.flatnonzero(lengths == L)]) for L in np.unique(lengths)}
    pos = np.empty(len(seqs), dtype=int)  # row of each sample within its length block
    for L in by_len:
        pos[lengths == L] = np.arange(int((lengths == L).sum()))
    init_rng, shuffle_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(2))
    params = ModelParams.init(init_rng, seqs[0].shape[1], config.hidden)
    if config.output_bias_init == "mean":
        params.b_out = np.asarray(float(y.mean()))
    state = AdamState.for_params(params, lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    trace: list[float] = []
    best, stale = math.inf, 0
    for epoch in range(config.epochs):
        total = 0.0
        for batch in _batches(lengths, config.batch_size, shuffle_rng):
            x = by_len[lengths[batch[0]]][pos[batch]]
            pred, cache = forward_batch(x, params, config.relu, every_step=config.prefix_augment)
            batch_loss = loss(pred, y[batch])
            if not math.isfinite(batch_loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}")
            total += batch_loss * len(batch)
            adam_step(params, backward(cache, y[batch]), state)
        epoch_loss = total / len(seqs)
        trace.append(epoch_loss)
        if config.patience is not None:
            if epoch_loss < best:
                best, stale = epoch_loss, 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    return TrainResult(params, trace)


def predict(params: ModelParams, seqs: Sequence[np.ndarray], relu: str = "output") -> np.ndarray:
    """Raw predictions, batched by sequence length, in input order."""
    out = np.empty(len(seqs))
    lengths = np.array([len(s) for s in seqs])
    for L in np.unique(lengths):
        idx = np.flatnonzero(lengths == L)
        out[idx], _ = forward_batch(np.stack([seqs[i] for i in idx]), params, relu)
    return out


# -- checkpoints --------------------------------------------------------------------


def save_checkpoint(path: Path | str, params: ModelParams, config: TrainConfig) -> None:
    doc = {
        "config": asdict(config),
        "params": {n: {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]} for n, a in params.arrays().items()},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path: Path | str) -> tuple[ModelParams, TrainConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    arrays = {n: np.array(rec["data"], dtype=float).reshape(rec["shape"]) for n, rec in doc["params"].items()}
    return ModelParams(**arrays), TrainConfig(**doc["config"])


def write_loss_trace(path: Path | str, trace: Sequence[float]) -> None:
    lines = ["epoch,train_loss"] + [f"{i},{v!r}" for i, v in enumerate(trace, start=1)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
