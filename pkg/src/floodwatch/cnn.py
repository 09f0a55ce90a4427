"""From-scratch 1D convolutional network for window classification.

Layer chain: valid 1D convolution (stride 1, no padding) -> ReLU ->
non-overlapping max pooling along time -> flatten (time-major) -> dense with
a single output unit -> output activation. The default head is a sigmoid
producing a maliciousness score in (0, 1); softmax, relu, and tanh heads
exist for the activation comparison. Note a softmax over one unit is
identically 1.0, so that variant degenerates to predicting every window
malicious; it is kept on purpose as a comparison point.

Everything is plain numpy in float64: forward pass, exact backpropagation of
the binary cross-entropy loss, mini-batch SGD, and a central finite-
difference gradient checker. Training is bitwise deterministic given the
seed and data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dataset import WindowedDataset
from .errors import ArtifactIOError, DataError, NumericError, ShapeError

ACTIVATIONS = ("sigmoid", "softmax", "relu", "tanh")

MODEL_MAGIC = b"HIOT1"

LOSS_CLAMP = 1e-7


@dataclass(frozen=True)
class Hyper:
    window: int
    in_features: int = 5
    filters: int = 32
    kernel: int = 3
    pool: int = 2
    output_activation: str = "sigmoid"

    @property
    def conv_steps(self) -> int:
        return self.window - self.kernel + 1

    @property
    def pooled_steps(self) -> int:
        return self.conv_steps // self.pool

    @property
    def flat_dim(self) -> int:
        return self.pooled_steps * self.filters


@dataclass
class CnnModel:
    conv_w: np.ndarray  # (filters, kernel, in_features)
    conv_b: np.ndarray  # (filters,)
    dense_w: np.ndarray  # (flat_dim, 1)
    dense_b: np.ndarray  # (1,)
    hyper: Hyper

    def copy(self) -> "CnnModel":
        return CnnModel(
            conv_w=self.conv_w.copy(),
            conv_b=self.conv_b.copy(),
            dense_w=self.dense_w.copy(),
            dense_b=self.dense_b.copy(),
            hyper=self.hyper,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.001
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise DataError(f"learning_rate must be > 0, got {self.learning_rate}")


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(
    window: int,
    in_features: int = 5,
    filters: int = 32,
    kernel: int = 3,
    pool: int = 2,
    output_activation: str = "sigmoid",
    seed: int = 0,
) -> CnnModel:
    """Glorot-uniform weights, zero biases, drawn from the given seed."""
    if output_activation not in ACTIVATIONS:
        raise DataError(f"unknown output activation {output_activation!r}; expected one of {ACTIVATIONS}")
    hyper = Hyper(window, in_features, filters, kernel, pool, output_activation)
    if hyper.conv_steps < 1:
        raise ShapeError(f"window {window} is shorter than the kernel {kernel}")
    if hyper.pooled_steps < 1:
        raise ShapeError(f"window {window} leaves nothing after pooling by {pool}")
    rng = np.random.default_rng(seed)
    conv_w = _glorot(rng, (filters, kernel, in_features), kernel * in_features, kernel * filters)
    dense_w = _glorot(rng, (hyper.flat_dim, 1), hyper.flat_dim, 1)
    return CnnModel(
        conv_w=conv_w,
        conv_b=np.zeros(filters),
        dense_w=dense_w,
        dense_b=np.zeros(1),
        hyper=hyper,
    )


def conv1d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid convolution: out[n,t,f] = bias[f] + sum_{k,c} x[n,t+k,c] w[f,k,c]."""
    filters, kernel, in_features = weights.shape
    if x.ndim != 3 or x.shape[2] != in_features:
        raise ShapeError(f"expected input (N, W, {in_features}), got {x.shape}")
    if x.shape[1] < kernel:
        raise ShapeError(f"window {x.shape[1]} is shorter than the kernel {kernel}")
    windows = np.lib.stride_tricks.sliding_window_view(x, kernel, axis=1)  # (N, T, C, K)
    return np.einsum("ntck,fkc->ntf", windows, weights) + bias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def maxpool1d(x: np.ndarray, pool: int = 2) -> np.ndarray:
    """Non-overlapping max windows along time; a ragged tail is dropped."""
    n, t, f = x.shape
    steps = t // pool
    if steps < 1:
        raise ShapeError(f"cannot pool {t} timesteps by {pool}")
    return x[:, : steps * pool, :].reshape(n, steps, pool, f).max(axis=2)


def flatten(x: np.ndarray) -> np.ndarray:
    """Row-major flatten: timestep-major, then filter."""
    return x.reshape(x.shape[0], -1)


def output_activation(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "sigmoid":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if kind == "softmax":
        # normalizing a single unit always yields 1
        return np.ones_like(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    raise DataError(f"unknown output activation {kind!r}; expected one of {ACTIVATIONS}")


def _check_input(model: CnnModel, x: np.ndarray) -> None:
    h = model.hyper
    if x.ndim != 3 or x.shape[1] != h.window or x.shape[2] != h.in_features:
        raise ShapeError(f"expected input (N, {h.window}, {h.in_features}), got {tuple(x.shape)}")


def _forward_cache(model: CnnModel, x: np.ndarray) -> dict:
    h = model.hyper
    _check_input(model, x)
    z1 = conv1d_forward(x, model.conv_w, model.conv_b)  # (N, T, F)
    a1 = relu(z1)
    n, t, f = a1.shape
    steps = h.pooled_steps
    trimmed = a1[:, : steps * h.pool, :].reshape(n, steps, h.pool, f)
    pool_idx = trimmed.argmax(axis=2)  # first max wins ties
    pooled = np.take_along_axis(trimmed, pool_idx[:, :, None, :], axis=2)[:, :, 0, :]
    flat = flatten(pooled)
    z2 = flat @ model.dense_w + model.dense_b  # (N, 1)
    scores = output_activation(z2, h.output_activation)
    return {"x": x, "z1": z1, "a1": a1, "pool_idx": pool_idx, "flat": flat, "z2": z2, "scores": scores}


def forward(model: CnnModel, x: np.ndarray) -> np.ndarray:
    """Per-sample scores, shape (N,)."""
    return _forward_cache(model, x)["scores"][:, 0]


def bce_loss(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with scores clamped away from 0 and 1."""
    p = np.clip(scores, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


@dataclass
class Gradients:
    conv_w: np.ndarray
    conv_b: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray


def backward(model: CnnModel, x: np.ndarray, y: np.ndarray) -> Gradients:
    """Exact gradients of bce_loss(forward(model, x), y) w.r.t. parameters.

    Max pooling routes each gradient to the first maximal index; ReLU takes
    gradient 0 at exactly 0; samples whose score sits in the clamped region
    of the loss contribute zero gradient, matching what a finite difference
    of the clamped loss measures.
    """
    return _backward_from_cache(model, _forward_cache(model, x), y)


def _backward_from_cache(model: CnnModel, cache: dict, y: np.ndarray) -> Gradients:
    h = model.hyper
    x = cache["x"]
    for name in ("z1", "z2"):
        if not np.all(np.isfinite(cache[name])):
            layer = "conv" if name == "z1" else "dense"
            raise NumericError(f"{layer} layer produced non-finite values")
    n = x.shape[0]
    y = np.asarray(y, dtype=np.float64).reshape(n, 1)
    raw = cache["scores"]
    p = np.clip(raw, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    # d loss / d clamped score, zeroed where the clamp saturates
    live = (raw > LOSS_CLAMP) & (raw < 1.0 - LOSS_CLAMP)
    dp = np.where(live, (p - y) / (p * (1.0 - p)) / n, 0.0)

    z2 = cache["z2"]
    if h.output_activation == "sigmoid":
        dz2 = dp * raw * (1.0 - raw)
    elif h.output_activation == "softmax":
        dz2 = np.zeros_like(z2)
    elif h.output_activation == "relu":
        dz2 = dp * (z2 > 0)
    else:  # tanh
        dz2 = dp * (1.0 - raw**2)

    flat = cache["flat"]
    d_dense_w = flat.T @ dz2
    d_dense_b = dz2.sum(axis=0)
    dflat = dz2 @ model.dense_w.T
    dpooled = dflat.reshape(n, h.pooled_steps, h.filters)

    da1 = np.zeros_like(cache["a1"])
    trimmed = da1[:, : h.pooled_steps * h.pool, :].reshape(n, h.pooled_steps, h.pool, h.filters)
    np.put_along_axis(trimmed, cache["pool_idx"][:, :, None, :], dpooled[:, :, None, :], axis=2)
    dz1 = da1 * (cache["z1"] > 0)

    windows = np.lib.stride_tricks.sliding_window_view(x, h.kernel, axis=1)  # (N, T, C, K)
    d_conv_w = np.einsum("ntf,ntck->fkc", dz1, windows)
    d_conv_b = dz1.sum(axis=(0, 1))
    grads = Gradients(conv_w=d_conv_w, conv_b=d_conv_b, dense_w=d_dense_w, dense_b=d_dense_b)
    for name, g in (("conv", d_conv_w), ("dense", d_dense_w)):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"{name} layer gradients are non-finite")
    return grads


def _param_arrays(model: CnnModel):
    return (("conv_w", model.conv_w), ("conv_b", model.conv_b), ("dense_w", model.dense_w), ("dense_b", model.dense_b))


def grad_check(model: CnnModel, x: np.ndarray, y: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences."""
    grads = backward(model, x, y)
    grad_map = {"conv_w": grads.conv_w, "conv_b": grads.conv_b, "dense_w": grads.dense_w, "dense_b": grads.dense_b}
    probe = model.copy()
    worst = 0.0
    for name, arr in _param_arrays(probe):
        flat_param = arr.reshape(-1)
        flat_grad = grad_map[name].reshape(-1)
        for i in range(flat_param.size):
            original = flat_param[i]
            flat_param[i] = original + eps
            loss_hi = bce_loss(forward(probe, x), y)
            flat_param[i] = original - eps
            loss_lo = bce_loss(forward(probe, x), y)
            flat_param[i] = original
            g_fd = (loss_hi - loss_lo) / (2.0 * eps)
            g_bp = flat_grad[i]
            rel = abs(g_fd - g_bp) / max(1e-8, abs(g_fd) + abs(g_bp))
            worst = max(worst, rel)
    return worst


def train(model: CnnModel, train_ds: WindowedDataset, cfg: TrainConfig) -> tuple[CnnModel, list[float]]:
    """Mini-batch SGD with a seeded shuffle; returns (trained copy, per-epoch loss)."""
    cfg.validate()
    if train_ds.n_samples == 0:
        raise DataError("cannot train on an empty dataset")
    _check_input(model, train_ds.x)
    out = model.copy()
    rng = np.random.default_rng(cfg.seed)
    n = train_ds.n_samples
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            xb, yb = train_ds.x[batch], train_ds.y[batch]
            cache = _forward_cache(out, xb)
            loss = bce_loss(cache["scores"][:, 0], yb)
            grads = _backward_from_cache(out, cache, yb)
            out.conv_w -= cfg.learning_rate * grads.conv_w
            out.conv_b -= cfg.learning_rate * grads.conv_b
            out.dense_w -= cfg.learning_rate * grads.dense_w
            out.dense_b -= cfg.learning_rate * grads.dense_b
            total += loss * len(batch)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise NumericError(f"training diverged at epoch {epoch + 1}: loss is not finite")
        history.append(epoch_loss)
    return out, history


def predict(model: CnnModel, x: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """1 iff score strictly exceeds the threshold, for every head kind."""
    return (forward(model, x) > threshold).astype(np.int64)


_ACT_CODES = {name: i for i, name in enumerate(ACTIVATIONS)}
_HEADER = struct.Struct("<6Q")


def save_model(model: CnnModel, path) -> None:
    """Versioned binary dump; parameters in declared field order, bit-exact."""
    h = model.hyper
    try:
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(_HEADER.pack(h.window, h.in_features, h.filters, h.kernel, h.pool, _ACT_CODES[h.output_activation]))
            for _, arr in _param_arrays(model):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    except OSError as exc:
        raise ArtifactIOError(f"cannot write model {path}: {exc}") from exc


def load_model(path) -> CnnModel:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read model {path}: {exc}") from exc
    if blob[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise DataError(f"{path}: not a {MODEL_MAGIC.decode()} model file")
    offset = len(MODEL_MAGIC)
    window, in_features, filters, kernel, pool, act_code = _HEADER.unpack_from(blob, offset)
    offset += _HEADER.size
    if act_code >= len(ACTIVATIONS):
        raise DataError(f"{path}: unknown activation code {act_code}")
    hyper = Hyper(window, in_features, filters, kernel, pool, ACTIVATIONS[act_code])
    shapes = {
        "conv_w": (filters, kernel, in_features),
        "conv_b": (filters,),
        "dense_w": (hyper.flat_dim, 1),
        "dense_b": (1,),
    }
    arrays = {}
    for name, shape in shapes.items():
        count = int(np.prod(shape))
        end = offset + count * 8
        if end > len(blob):
            raise DataError(f"{path}: truncated parameter block {name}")
        arrays[name] = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes after parameters")
    return CnnModel(hyper=hyper, **arrays)
