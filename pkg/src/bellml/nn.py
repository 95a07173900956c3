"""Feedforward classifier with at most one ReLU hidden layer, trained by mini-batch SGD.

Losses are minimised in natural-log units (so the output-layer error is
simply ``p_hat - y``) and reported in bits. Class 1 of a sigmoid model is
the "separable" side: the output neuron is the probability of class 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import MetricsReport, build_report
from .states import make_rng

SIGMOID = "sigmoid"
SOFTMAX = "softmax"
PROB_FLOOR = 1e-12
LN2 = math.log(2.0)


@dataclass
class MlpModel:
    """Weights of ``out(W2 · relu(W1 x + w01) + w02)``.

    With ``n_hidden == 0`` the hidden layer is absent, ``W1`` has shape
    ``(0, n_in)`` and ``W2`` acts on the input directly.
    """

    W1: np.ndarray
    w01: np.ndarray
    W2: np.ndarray
    w02: np.ndarray
    output: str = SIGMOID

    def __post_init__(self):
        self.w01 = np.asarray(self.w01, dtype=float).reshape(-1)
        self.W2 = np.atleast_2d(np.asarray(self.W2, dtype=float))
        self.w02 = np.asarray(self.w02, dtype=float).reshape(-1)
        self.W1 = np.asarray(self.W1, dtype=float)
        if self.W1.ndim != 2:
            self.W1 = self.W1.reshape(len(self.w01), -1) if len(self.w01) else np.zeros((0, self.W2.shape[1]))
        if self.output not in (SIGMOID, SOFTMAX):
            raise ValueError(f"unknown output kind {self.output!r}")
        if self.output == SIGMOID and self.n_out != 1:
            raise ValueError("a sigmoid output needs exactly one output neuron")
        if self.output == SOFTMAX and self.n_out < 2:
            raise ValueError("a softmax output needs at least two output neurons")
        fan = self.n_hidden if self.n_hidden else self.n_in
        if self.W2.shape != (self.n_out, fan) or self.w02.shape != (self.n_out,):
            raise ValueError("inconsistent layer shapes")

    @property
    def n_in(self) -> int:
        return self.W1.shape[1] if self.n_hidden else self.W2.shape[1]

    @property
    def n_hidden(self) -> int:
        return len(self.w01)

    @property
    def n_out(self) -> int:
        return self.W2.shape[0]

    @property
    def n_classes(self) -> int:
        return 2 if self.output == SIGMOID else self.n_out

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.w01, self.W2, self.w02]

    def copy(self) -> "MlpModel":
        return replace(self, W1=self.W1.copy(), w01=self.w01.copy(), W2=self.W2.copy(), w02=self.w02.copy())


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 200
    learning_rate: float = 0.05
    seed: int = 0
    #: None means a per-layer fan-in scale 1/sqrt(fan_in)
    init_scale: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class LabeledDataset:
    """Feature rows, integer class labels and per-row provenance columns."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int = 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (N, F) with one label per row")
        if np.any((self.labels < 0) | (self.labels >= self.n_classes)):
            raise ValueError("label out of range")
        for k, v in self.meta.items():
            if len(v) != len(self.labels):
                raise ValueError(f"meta column {k!r} has the wrong length")

    def __len__(self) -> int:
        return len(self.labels)

    def one_hot(self) -> np.ndarray:
        return np.eye(self.n_classes)[self.labels]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(
            self.features[idx], self.labels[idx], self.n_classes, {k: np.asarray(v)[idx] for k, v in self.meta.items()}
        )


def init_model(
    n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator, init_scale: float | None = None
) -> MlpModel:
    """Uniform initialisation on ``[-s, s]`` for weights and biases alike."""

    def uni(shape, fan):
        s = init_scale if init_scale is not None else 1.0 / math.sqrt(fan)
        return rng.uniform(-s, s, size=shape)

    if n_hidden:
        W1, w01 = uni((n_hidden, n_in), n_in), uni(n_hidden, n_in)
        fan2 = n_hidden
    else:
        W1, w01 = np.zeros((0, n_in)), np.zeros(0)
        fan2 = n_in
    W2, w02 = uni((n_out, fan2), fan2), uni(n_out, fan2)
    return MlpModel(W1, w01, W2, w02, SIGMOID if n_out == 1 else SOFTMAX)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _logits(model: MlpModel, x: np.ndarray):
    if model.n_hidden:
        pre = x @ model.W1.T + model.w01
        h = relu(pre)
    else:
        pre = h = x
    return pre, h, h @ model.W2.T + model.w02


def _output(model: MlpModel, z: np.ndarray) -> np.ndarray:
    return sigmoid(z) if model.output == SIGMOID else softmax(z)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Output probabilities for one feature vector or a stack of them.

    Sigmoid models return a length-1 vector per input: the probability of
    class 1.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n_in:
        raise ValueError(f"expected {model.n_in} features, got {x.shape[-1]}")
    return _output(model, _logits(model, x)[2])


def _targets(model: MlpModel, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if model.output == SIGMOID:
        return labels.astype(float)[:, None]
    return np.eye(model.n_out)[labels]


def cross_entropy(pred, label) -> float | np.ndarray:
    """Categorical cross-entropy in bits, ``-sum_j y_j log2(max(p_j, 1e-12))``.

    ``pred``/``label`` are probability and one-hot vectors (or stacks). A
    single-neuron ``pred`` is a sigmoid output and ``label`` is then the
    scalar class, scored against ``(1 - p, p)``.
    """
    pred = np.asarray(pred, dtype=float)
    label = np.asarray(label, dtype=float)
    if pred.shape[-1] == 1:
        p1 = pred[..., 0]
        y = label[..., 0] if label.ndim == pred.ndim else label
        pred = np.stack([1.0 - p1, p1], axis=-1)
        label = np.stack([1.0 - y, y], axis=-1)
    h = -np.sum(label * np.log2(np.maximum(pred, PROB_FLOOR)), axis=-1)
    return float(h) if np.ndim(h) == 0 else h


def batch_loss(model: MlpModel, x: np.ndarray, labels: np.ndarray, bits: bool = False) -> float:
    """Mean loss over a batch (natural-log units unless ``bits``)."""
    probs = forward(model, x)
    y = _targets(model, labels)
    if model.output == SIGMOID:
        p1 = probs[:, 0]
        yy = y[:, 0]
        nll = -(yy * np.log(np.maximum(p1, PROB_FLOOR)) + (1 - yy) * np.log(np.maximum(1 - p1, PROB_FLOOR)))
    else:
        nll = -np.sum(y * np.log(np.maximum(probs, PROB_FLOOR)), axis=1)
    loss = float(nll.mean())
    return loss / LN2 if bits else loss


def gradients(model: MlpModel, x: np.ndarray, labels: np.ndarray) -> list[np.ndarray]:
    """Backprop gradients of the mean natural-log loss, ordered like ``model.params()``.

    The ReLU derivative at exactly zero is taken as 0.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if len(x) == 0:
        raise ValueError("empty batch")
    pre, h, z = _logits(model, x)
    delta = (_output(model, z) - _targets(model, labels)) / len(x)
    gW2 = delta.T @ h
    gw02 = delta.sum(axis=0)
    if model.n_hidden:
        dh = (delta @ model.W2) * (pre > 0)
        gW1 = dh.T @ x
        gw01 = dh.sum(axis=0)
    else:
        gW1 = np.zeros_like(model.W1)
        gw01 = np.zeros_like(model.w01)
    return [gW1, gw01, gW2, gw02]


def train(model: MlpModel, data: LabeledDataset, cfg: TrainConfig) -> tuple[MlpModel, list[float]]:
    """Plain mini-batch SGD. Returns a new model and per-epoch mean loss (bits).

    Each epoch reshuffles the rows with a generator seeded from
    ``cfg.seed``; the last batch of an epoch may be short. The epoch loss is
    the sample-weighted mean of the batch losses seen before each update.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    m = model.copy()
    rng = make_rng(cfg.seed)
    x_all = data.features
    y_all = _targets(m, data.labels)
    n = len(x_all)
    lr = cfg.learning_rate
    bs = cfg.batch_size
    sig = m.output == SIGMOID
    hidden = m.n_hidden > 0
    W1, w01, W2, w02 = m.W1, m.w01, m.W2, m.w02
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        xs = x_all[order]
        ys = y_all[order]
        total = 0.0
        for start in range(0, n, bs):
            x = xs[start : start + bs]
            y = ys[start : start + bs]
            k = len(x)
            if hidden:
                pre = x @ W1.T
                pre += w01
                h = np.maximum(pre, 0.0)
            else:
                h = x
            z = h @ W2.T
            z += w02
            if sig:
                p = sigmoid(z)
                total -= float(
                    np.sum(y * np.log(np.maximum(p, PROB_FLOOR)) + (1 - y) * np.log(np.maximum(1 - p, PROB_FLOOR)))
                )
            else:
                p = softmax(z)
                total -= float(np.sum(y * np.log(np.maximum(p, PROB_FLOOR))))
            if lr == 0:
                continue
            delta = (p - y) * (1.0 / k)
            if hidden:
                dh = delta @ W2
                dh *= pre > 0
                W2 -= lr * (delta.T @ h)
                w02 -= lr * delta.sum(axis=0)
                W1 -= lr * (dh.T @ x)
                w01 -= lr * dh.sum(axis=0)
            else:
                W2 -= lr * (delta.T @ h)
                w02 -= lr * delta.sum(axis=0)
        history.append(total / n / LN2)
    return m, history


def predict_label(model: MlpModel, x: np.ndarray) -> np.ndarray | int:
    """Sigmoid: class 1 iff output >= 0.5. Softmax: argmax, lowest index on ties."""
    probs = forward(model, x)
    if model.output == SIGMOID:
        lab = (probs[..., 0] >= 0.5).astype(int)
    else:
        lab = np.argmax(probs, axis=-1)
    return int(lab) if np.ndim(lab) == 0 else lab


def evaluate(model: MlpModel, data: LabeledDataset, grid_resolution: int | None = None) -> MetricsReport:
    """Match rate, confusion matrix and, where the metadata allows, the
    binned mismatch grid over ``(p, theta)`` and per-group match rates."""
    pred = predict_label(model, data.features)
    return build_report(data.labels, pred, data.n_classes, data.meta, grid_resolution)
