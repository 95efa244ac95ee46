"""Recurrent note-placement model.

A single-layer LSTM reads the 17-frame audio window around the target
frame (one 40-band feature row per step); its final hidden state is
concatenated with the flattened one-hot history of the preceding note
classes and projected to the five frame classes (rest + four kinds).
Small on purpose: a retraining event during an interactive session has
to finish in seconds on a CPU.

Everything is plain numpy in float64. Training is mini-batch gradient
descent on mean cross-entropy with backpropagation through time;
gradients are exact (checked against finite differences in the tests).

Model file layout (little-endian):

    magic    4 bytes  b"TDML"
    version  uint32   1
    config   uint32 x5 (hidden, layers, audio_context, history_len, classes)
             int64 (seed)
    tensors  float64 payload: W_x, W_h, b, W_out, b_out in that order
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .features import BAND_COUNT

_MAGIC = b"TDML"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIq")

TENSOR_ORDER = ("W_x", "W_h", "b", "W_out", "b_out")


class ModelError(ValueError):
    """Invalid model configuration or input dimensions."""


class ModelFormatError(ValueError):
    """Corrupt or mismatched model file."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss; reports epoch and batch."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class ModelConfig:
    hidden_size: int = 64
    layers: int = 1
    audio_context: int = 8
    history_len: int = 16
    class_count: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_size", "layers", "audio_context", "history_len"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if self.class_count != 5:
            raise ModelError("class_count is fixed at 5")
        if self.layers != 1:
            raise ModelError("only a single recurrent layer is supported")

    @property
    def window_frames(self) -> int:
        return 2 * self.audio_context + 1

    @property
    def input_size(self) -> int:
        return BAND_COUNT

    @property
    def history_size(self) -> int:
        return self.history_len * self.class_count


@dataclass(frozen=True)
class ModelParams:
    """All weight tensors plus the config that fixes their shapes."""

    config: ModelConfig
    W_x: np.ndarray  # (4H, input)   gate order i, f, g, o
    W_h: np.ndarray  # (4H, H)
    b: np.ndarray    # (4H,)
    W_out: np.ndarray  # (C, H + history_size)
    b_out: np.ndarray  # (C,)

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_ORDER}


@dataclass(frozen=True)
class TrainingInstance:
    """One (audio window, note history) -> frame class example.

    window is (2 * audio_context + 1, 40); history is (history_len, 5)
    one-hot rows, all-zero rows standing in for frames before the song.
    """

    window: np.ndarray
    history: np.ndarray
    target: int
    designer_id: str = ""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 5
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ModelError("learning_rate must be positive")
        if self.max_epochs <= 0 or self.batch_size <= 0:
            raise ModelError("max_epochs and batch_size must be positive")


def init_model(config: ModelConfig) -> ModelParams:
    """Seeded init: weights uniform in +-1/sqrt(fan_in), biases zero.

    Tensors are drawn in the documented order W_x, W_h, W_out so a seed
    pins every parameter.
    """
    rng = np.random.default_rng(config.seed)
    h, c = config.hidden_size, config.class_count

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return ModelParams(
        config=config,
        W_x=uniform((4 * h, config.input_size), config.input_size),
        W_h=uniform((4 * h, h), h),
        b=np.zeros(4 * h),
        W_out=uniform((c, h + config.history_size), h + config.history_size),
        b_out=np.zeros(c),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_batch(config: ModelConfig, windows: np.ndarray, histories: np.ndarray) -> None:
    t, n = config.window_frames, config.input_size
    if windows.ndim != 3 or windows.shape[1:] != (t, n):
        raise ModelError(f"audio windows must be (batch, {t}, {n}), got {windows.shape}")
    if histories.ndim != 3 or histories.shape[1:] != (config.history_len, config.class_count):
        raise ModelError(
            f"histories must be (batch, {config.history_len}, {config.class_count}), "
            f"got {histories.shape}"
        )


def _forward_batch(params: ModelParams, windows: np.ndarray, histories: np.ndarray):
    """Run the LSTM over the window frames; returns probs plus the BPTT cache."""
    cfg = params.config
    _check_batch(cfg, windows, histories)
    B, T, H = windows.shape[0], cfg.window_frames, cfg.hidden_size

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = []
    for t in range(T):
        x_t = windows[:, t, :]
        a = x_t @ params.W_x.T + h @ params.W_h.T + params.b
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H : 2 * H])
        g = np.tanh(a[:, 2 * H : 3 * H])
        o = _sigmoid(a[:, 3 * H :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        steps.append((x_t, h, c, i, f, g, o, tanh_c))
        h, c = h_new, c_new

    hist_flat = histories.reshape(B, -1)
    combined = np.concatenate([h, hist_flat], axis=1)
    z = combined @ params.W_out.T + params.b_out
    z_shift = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z_shift)
    probs = ez / ez.sum(axis=1, keepdims=True)
    cache = {"steps": steps, "combined": combined, "z_shift": z_shift, "probs": probs}
    return probs, cache


def forward(params: ModelParams, window: np.ndarray, history: np.ndarray) -> np.ndarray:
    """Class distribution for a single instance input, summing to 1."""
    probs, _ = _forward_batch(
        params,
        np.asarray(window, dtype=np.float64)[None, :, :],
        np.asarray(history, dtype=np.float64)[None, :, :],
    )
    return probs[0]


def loss_and_gradients(
    params: ModelParams,
    windows: np.ndarray,
    histories: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its exact gradients."""
    probs, cache = _forward_batch(params, windows, histories)
    B = windows.shape[0]
    H = params.config.hidden_size

    z_shift = cache["z_shift"]
    logsumexp = np.log(np.exp(z_shift).sum(axis=1))
    loss = float(np.mean(logsumexp - z_shift[np.arange(B), targets]))

    dz = cache["probs"].copy()
    dz[np.arange(B), targets] -= 1.0
    dz /= B

    grads = {
        "W_out": dz.T @ cache["combined"],
        "b_out": dz.sum(axis=0),
        "W_x": np.zeros_like(params.W_x),
        "W_h": np.zeros_like(params.W_h),
        "b": np.zeros_like(params.b),
    }

    dh = dz @ params.W_out[:, :H]
    dc = np.zeros_like(dh)
    for x_t, h_prev, c_prev, i, f, g, o, tanh_c in reversed(cache["steps"]):
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        da = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), dg * (1 - g**2), do * o * (1 - o)],
            axis=1,
        )
        grads["W_x"] += da.T @ x_t
        grads["W_h"] += da.T @ h_prev
        grads["b"] += da.sum(axis=0)
        dh = da @ params.W_h
        dc = dc * f
    return loss, grads


def _stack_instances(config: ModelConfig, data: list[TrainingInstance]):
    windows = np.stack([np.asarray(inst.window, dtype=np.float64) for inst in data])
    histories = np.stack([np.asarray(inst.history, dtype=np.float64) for inst in data])
    targets = np.array([inst.target for inst in data], dtype=np.int64)
    if targets.min() < 0 or targets.max() >= config.class_count:
        raise ModelError("instance target out of class range")
    _check_batch(config, windows, histories)
    return windows, histories, targets


def train(
    params: ModelParams,
    data: list[TrainingInstance],
    cfg: TrainConfig,
) -> tuple[ModelParams, list[float]]:
    """Mini-batch gradient descent on mean cross-entropy.

    Batches are drawn in seeded shuffled order, reshuffled each epoch;
    returns the new parameters and the per-epoch mean loss (measured on
    each batch's forward pass, before its update). Deterministic per
    cfg.seed.
    """
    if not data:
        raise ModelError("cannot train on empty data")
    windows, histories, targets = _stack_instances(params.config, data)
    n = len(data)

    tensors = {name: arr.copy() for name, arr in params.tensors().items()}
    work = ModelParams(config=params.config, **tensors)
    rng = np.random.default_rng(cfg.seed)
    losses = []
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start : start + cfg.batch_size]
            loss, grads = loss_and_gradients(
                work, windows[sel], histories[sel], targets[sel]
            )
            if not np.isfinite(loss):
                raise TrainingError(epoch, batch_no)
            total += loss * sel.size
            tensors = {
                name: getattr(work, name) - cfg.learning_rate * grads[name]
                for name in TENSOR_ORDER
            }
            work = ModelParams(config=params.config, **tensors)
        losses.append(total / n)
    return work, losses


def params_equal(a: ModelParams, b: ModelParams) -> bool:
    return a.config == b.config and all(
        np.array_equal(a.tensors()[name], b.tensors()[name]) for name in TENSOR_ORDER
    )


def save_model(params: ModelParams, path) -> None:
    cfg = params.config
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        cfg.hidden_size,
        cfg.layers,
        cfg.audio_context,
        cfg.history_len,
        cfg.class_count,
        cfg.seed,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for name in TENSOR_ORDER:
            fh.write(np.ascontiguousarray(params.tensors()[name], dtype="<f8").tobytes())


def _shapes_for(config: ModelConfig) -> list[tuple[int, ...]]:
    h, c = config.hidden_size, config.class_count
    return [
        (4 * h, config.input_size),
        (4 * h, h),
        (4 * h,),
        (c, h + config.history_size),
        (c,),
    ]


def load_model(path) -> ModelParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ModelFormatError("truncated header")
    magic, version, hidden, layers, ctx, hist, classes, seed = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    try:
        config = ModelConfig(
            hidden_size=hidden,
            layers=layers,
            audio_context=ctx,
            history_len=hist,
            class_count=classes,
            seed=seed,
        )
    except ModelError as exc:
        raise ModelFormatError(f"bad config in header: {exc}") from exc

    shapes = _shapes_for(config)
    expected = sum(int(np.prod(s)) for s in shapes) * 8
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise ModelFormatError(
            f"payload is {len(payload)} bytes but config implies {expected}"
        )
    tensors = {}
    offset = 0
    for name, shape in zip(TENSOR_ORDER, shapes):
        size = int(np.prod(shape)) * 8
        tensors[name] = (
            np.frombuffer(payload[offset : offset + size], dtype="<f8").reshape(shape).copy()
        )
        offset += size
    return ModelParams(config=config, **tensors)
