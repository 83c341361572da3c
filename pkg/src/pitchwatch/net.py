"""The trainable classifier: a small 3-d CNN over flow stacks.

Architecture: a stack of conv3d + ReLU blocks with spatial max pooling
between them, global average pooling, dropout, and a linear head. The
head is zero-initialized, so an untrained binary model outputs p = 0.5
for every input.

Training is plain SGD on the cross-entropy of each minibatch (stepping
on the batch-mean gradient; epoch losses are recorded as plain sums),
with the learning rate divided by 10 every 25 epochs by default. Given
the same seed, data, and config, training is bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    InvalidLabelError,
    InvalidStateError,
    ShapeError,
)
from .layers import Conv3D, Dropout, GlobalAvgPool, Layer, Linear, MaxPool3D, ReLU

PROB_EPS = 1e-7
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Tiny3DConfig:
    """Network shape. ``head`` is "sigmoid" (binary) or "softmax" (n-way)."""

    in_channels: int = 2
    in_frames: int = 15
    in_height: int = 23
    in_width: int = 30
    conv_channels: tuple[int, ...] = (8, 16, 32)
    kernel: tuple[int, int, int] = (3, 3, 3)
    pool: tuple[int, int, int] = (1, 2, 2)
    dropout_rate: float = 0.5
    head: str = "sigmoid"
    n_classes: int = 1
    input_scale: float = 1.0
    seed: int = 0
    dtype: str = "f32"

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.head not in ("sigmoid", "softmax"):
            raise InvalidInputError(f"head must be sigmoid or softmax, got {self.head!r}")
        if self.head == "sigmoid" and self.n_classes != 1:
            raise InvalidInputError("sigmoid head implies n_classes == 1")
        if self.head == "softmax" and self.n_classes < 2:
            raise InvalidInputError(f"softmax head needs >= 2 classes, got {self.n_classes}")
        if self.dtype not in ("f32", "f64"):
            raise InvalidInputError(f"dtype must be f32 or f64, got {self.dtype!r}")
        if not self.input_scale > 0:
            raise InvalidInputError("input_scale must be positive")

    @property
    def in_shape(self) -> tuple[int, int, int, int]:
        return (self.in_channels, self.in_frames, self.in_height, self.in_width)

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "f32" else np.float64

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "in_frames": self.in_frames,
            "in_height": self.in_height,
            "in_width": self.in_width,
            "conv_channels": list(self.conv_channels),
            "kernel": list(self.kernel),
            "pool": list(self.pool),
            "dropout_rate": self.dropout_rate,
            "head": self.head,
            "n_classes": self.n_classes,
            "input_scale": self.input_scale,
            "seed": self.seed,
            "dtype": self.dtype,
        }

    @staticmethod
    def from_dict(d: dict) -> "Tiny3DConfig":
        d = dict(d)
        for key in ("conv_channels", "kernel", "pool"):
            if key in d:
                d[key] = tuple(d[key])
        return Tiny3DConfig(**d)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 0.1
    decay: float = 0.1
    decay_every: int = 25
    batch: int = 8
    momentum: float = 0.0
    loss: str = "bce"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise InvalidInputError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise InvalidInputError(f"lr must be positive, got {self.lr}")
        if self.batch < 1:
            raise InvalidInputError(f"batch must be >= 1, got {self.batch}")
        if self.loss not in ("bce", "ce"):
            raise InvalidInputError(f"loss must be bce or ce, got {self.loss!r}")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.decay ** (epoch // self.decay_every)


@dataclass(frozen=True)
class Prediction:
    pitch_id: str
    p: float
    label_hat: str

    @property
    def is_injured(self) -> bool:
        return self.label_hat == "injured"


class Tiny3DNet:
    """Conv trunk + pooled linear head with explicit backprop."""

    def __init__(self, config: Tiny3DConfig) -> None:
        self.config = config
        dtype = config.np_dtype
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
        layers: list[Layer] = []
        cin = config.in_channels
        for i, cout in enumerate(config.conv_channels):
            layers.append(Conv3D(f"conv{i + 1}", cin, cout, kernel=config.kernel,
                                 rng=rng, dtype=dtype))
            layers.append(ReLU())
            if i < len(config.conv_channels) - 1:
                layers.append(MaxPool3D(f"pool{i + 1}", config.pool))
            cin = cout
        layers.append(GlobalAvgPool())
        layers.append(Dropout("dropout", config.dropout_rate))
        layers.append(Linear("head", cin, config.n_classes, init="zeros", dtype=dtype))
        self.layers = layers
        # Fail fast if the spatial dims collapse before the trunk ends.
        shape = (1, *config.in_shape)
        for layer in layers:
            shape = layer.out_shape(shape)
        self._forward_token = 0

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    def set_params(self, arrays: Sequence[np.ndarray]) -> None:
        arrays = list(arrays)
        own = self.params
        if len(arrays) != len(own):
            raise InvalidInputError(f"expected {len(own)} parameter arrays, got {len(arrays)}")
        i = 0
        for layer in self.layers:
            for j in range(len(layer.params)):
                a = np.asarray(arrays[i], dtype=layer.params[j].dtype)
                if a.shape != layer.params[j].shape:
                    raise ShapeError(
                        f"{layer.name}: parameter {j} shape {a.shape} != {layer.params[j].shape}"
                    )
                layer.params[j] = a
                i += 1

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.config.np_dtype)
        if x.ndim == 4:
            x = x[None]
        if x.ndim != 5 or x.shape[1:] != self.config.in_shape:
            raise ShapeError(
                f"input: expected (N, {', '.join(map(str, self.config.in_shape))}), got {x.shape}"
            )
        if self.config.input_scale != 1.0:
            x = x / self.config.np_dtype(self.config.input_scale)
        return x

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None):
        """Logits of shape (N, n_classes) plus the cache for backward."""
        x = self._check_input(x)
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, train=train, rng=rng)
            caches.append(c)
        self._forward_token += 1
        return x, {"token": self._forward_token, "net": id(self), "entries": caches}

    def backward(self, cache, dlogits: np.ndarray) -> list[np.ndarray]:
        """Gradient for every parameter, in `params` order."""
        if not isinstance(cache, dict) or cache.get("net") != id(self):
            raise InvalidStateError("backward called with a cache from a different network")
        if cache.get("token") != self._forward_token:
            raise InvalidStateError("backward called with a stale forward cache")
        grads_rev = []
        dy = np.asarray(dlogits, dtype=self.config.np_dtype)
        for layer, c in zip(reversed(self.layers), reversed(cache["entries"])):
            dy, gs = layer.backward(dy, c)
            grads_rev.extend(reversed(gs))
        return list(reversed(grads_rev))

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode class probabilities; binary nets return (N,) injured-probability."""
        logits, _ = self.forward(x, train=False)
        if self.config.head == "sigmoid":
            return sigmoid(logits[:, 0])
        return softmax(logits)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, PROB_EPS, 1.0 - PROB_EPS)


def softmax(z: np.ndarray) -> np.ndarray:
    zs = z - z.max(axis=1, keepdims=True)
    e = np.exp(zs)
    return e / e.sum(axis=1, keepdims=True)


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Summed binary cross-entropy; probabilities are clamped to [eps, 1-eps]."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise InvalidInputError(f"p and y shapes differ: {p.shape} vs {y.shape}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise InvalidLabelError("labels must be 0 or 1")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())


def cross_entropy_loss(probs: np.ndarray, y: np.ndarray) -> float:
    """Summed multiclass cross-entropy over integer labels."""
    probs = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0)
    y = np.asarray(y)
    if y.ndim != 1 or probs.ndim != 2 or len(y) != len(probs):
        raise InvalidInputError("probs must be (N, K) with labels (N,)")
    if y.min() < 0 or y.max() >= probs.shape[1]:
        raise InvalidLabelError(f"labels must be in [0, {probs.shape[1]}), got {y.min()}..{y.max()}")
    return float(-np.log(probs[np.arange(len(y)), y]).sum())


def _loss_and_dlogits(net: Tiny3DNet, logits: np.ndarray, y: np.ndarray,
                      loss: str) -> tuple[float, np.ndarray]:
    if loss == "bce":
        p = sigmoid(logits[:, 0])
        value = bce_loss(p, y)
        dlogits = (p - y)[:, None]
    else:
        probs = softmax(logits)
        value = cross_entropy_loss(probs, y.astype(np.int64))
        dlogits = probs.copy()
        dlogits[np.arange(len(y)), y.astype(np.int64)] -= 1.0
    return value, dlogits


@dataclass
class TrainHistory:
    rows: list[tuple[int, float, float]] = field(default_factory=list)  # epoch, lr, loss

    def to_csv(self) -> str:
        lines = ["epoch,lr,loss"]
        lines += [f"{e},{lr:.10g},{loss:.10g}" for e, lr, loss in self.rows]
        return "\n".join(lines) + "\n"


def train_model(
    net: Tiny3DNet,
    ids: Sequence[str],
    labels: dict[str, int],
    load_input: Callable[[str], np.ndarray],
    cfg: TrainConfig,
) -> TrainHistory:
    """SGD training over the given sample ids; labels are ints (0/1 or class)."""
    ids = list(ids)
    if not ids:
        raise InsufficientDataError("empty training set")
    y_all = np.array([labels[i] for i in ids])
    if cfg.loss == "bce" and len(np.unique(y_all)) < 2:
        raise InsufficientDataError("training set contains a single class")
    if cfg.loss == "ce":
        present = np.unique(y_all)
        if len(present) < net.config.n_classes:
            missing = sorted(set(range(net.config.n_classes)) - set(present.tolist()))
            raise InsufficientDataError(f"classes absent from training data: {missing}")

    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    dropout_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    velocity = [np.zeros_like(p) for p in net.params] if cfg.momentum else None

    history = TrainHistory()
    order = np.arange(len(ids))
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        shuffle_rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(ids), cfg.batch):
            sel = order[start: start + cfg.batch]
            x = np.stack([load_input(ids[i]) for i in sel])
            y = y_all[sel]
            logits, cache = net.forward(x, train=True, rng=dropout_rng)
            value, dlogits = _loss_and_dlogits(net, logits, y, cfg.loss)
            epoch_loss += value
            # Step on the batch-mean gradient so the step size does not
            # depend on batch size; the recorded loss stays the plain sum.
            grads = net.backward(cache, dlogits / len(sel))
            params = net.params
            if velocity is None:
                new = [p - lr * g for p, g in zip(params, grads)]
            else:
                velocity = [cfg.momentum * v + g for v, g in zip(velocity, grads)]
                new = [p - lr * v for p, v in zip(params, velocity)]
            net.set_params(new)
        history.rows.append((epoch, lr, epoch_loss))
    return history


def predict(
    net: Tiny3DNet,
    ids: Sequence[str],
    load_input: Callable[[str], np.ndarray],
    threshold: float = DEFAULT_THRESHOLD,
    batch: int = 16,
) -> list[Prediction]:
    """Eval-mode injured-probability per clip; label is injured when p >= threshold."""
    if net.config.head != "sigmoid":
        raise InvalidInputError("predict needs a binary (sigmoid) head")
    out = []
    ids = list(ids)
    for start in range(0, len(ids), batch):
        chunk = ids[start: start + batch]
        x = np.stack([load_input(i) for i in chunk])
        p = net.probabilities(x)
        for pid, pi in zip(chunk, p):
            label = "injured" if pi >= threshold else "healthy"
            out.append(Prediction(pid, float(pi), label))
    return out


def classify(
    net: Tiny3DNet,
    ids: Sequence[str],
    load_input: Callable[[str], np.ndarray],
    batch: int = 16,
) -> dict[str, int]:
    """Eval-mode argmax class per sample for softmax heads."""
    if net.config.head != "softmax":
        raise InvalidInputError("classify needs a softmax head")
    out: dict[str, int] = {}
    ids = list(ids)
    for start in range(0, len(ids), batch):
        chunk = ids[start: start + batch]
        x = np.stack([load_input(i) for i in chunk])
        probs = net.probabilities(x)
        for pid, row in zip(chunk, probs):
            out[pid] = int(row.argmax())
    return out


def train_softmax_head(
    config: Tiny3DConfig,
    train_ids: Sequence[str],
    test_ids: Sequence[str],
    labels: dict[str, int],
    load_input: Callable[[str], np.ndarray],
    cfg: TrainConfig,
) -> tuple[Tiny3DNet, float]:
    """Train an n-way classifier and return it with held-out accuracy."""
    if config.head != "softmax":
        raise InvalidInputError("probe training needs a softmax-head config")
    net = Tiny3DNet(config)
    train_model(net, train_ids, labels, load_input, cfg)
    if not test_ids:
        raise InsufficientDataError("empty held-out set")
    pred = classify(net, test_ids, load_input)
    correct = sum(1 for i in test_ids if pred[i] == labels[i])
    return net, correct / len(test_ids)
