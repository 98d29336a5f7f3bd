"""Classical baseline: real-valued MLP with a ReLU hidden layer, trained by backprop.

The output units are group-summed into class logits exactly like the Ising
network decodes its output spins; the loss is softmax cross-entropy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .trainers import EpochRecord, TrainRun


class DivergenceError(RuntimeError):
    pass


@dataclass
class MLPParams:
    W1: np.ndarray  # (n_hidden, n_input)
    b1: np.ndarray
    W2: np.ndarray  # (n_output, n_hidden)
    b2: np.ndarray
    n_classes: int
    redundancy: int

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in (self.W1, self.b1, self.W2, self.b2)])

    def unflat(self, v) -> "MLPParams":
        out, k = [], 0
        for a in (self.W1, self.b1, self.W2, self.b2):
            out.append(np.asarray(v[k:k + a.size]).reshape(a.shape))
            k += a.size
        return MLPParams(*out, self.n_classes, self.redundancy)


@dataclass(frozen=True)
class BackpropHyper:
    learning_rate: float = 0.1
    batch_size: int = 16


def init_mlp(seed: int, n_input: int, n_hidden: int, n_classes: int = 10,
             redundancy: int = 4) -> MLPParams:
    rng = np.random.default_rng(seed)
    n_output = n_classes * redundancy
    W1 = rng.uniform(-1, 1, (n_hidden, n_input)) * np.sqrt(6.0 / n_input)
    W2 = rng.uniform(-1, 1, (n_output, n_hidden)) * np.sqrt(6.0 / (n_hidden + n_output))
    return MLPParams(W1, np.zeros(n_hidden), W2, np.zeros(n_output), n_classes, redundancy)


def _forward(p: MLPParams, X):
    a1 = X @ p.W1.T + p.b1
    h = np.maximum(a1, 0.0)
    out = h @ p.W2.T + p.b2
    logits = out.reshape(X.shape[0], p.n_classes, p.redundancy).sum(axis=2)
    return a1, h, logits


def predict(p: MLPParams, X) -> np.ndarray:
    return _forward(p, np.atleast_2d(X))[2].argmax(axis=1)


def loss_and_grad(p: MLPParams, X, y):
    """Mean cross-entropy over the batch and its gradient as an MLPParams."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    n = X.shape[0]
    a1, h, logits = _forward(p, X)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean()
    d_logits = np.exp(logp)
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    d_out = np.repeat(d_logits, p.redundancy, axis=1)
    gW2 = d_out.T @ h
    gb2 = d_out.sum(axis=0)
    d_h = d_out @ p.W2
    d_a1 = d_h * (a1 > 0)
    gW1 = d_a1.T @ X
    gb1 = d_a1.sum(axis=0)
    return float(loss), MLPParams(gW1, gb1, gW2, gb2, p.n_classes, p.redundancy)


def error_rate(p: MLPParams, dataset) -> float:
    return float(np.mean(predict(p, dataset.X) != dataset.y))


def backprop_train(dataset, epochs: int, seed: int, *, n_hidden: int = 120,
                   redundancy: int = 4, hyper: BackpropHyper = BackpropHyper(),
                   test=None, record_wall_time: bool = False, params: MLPParams | None = None,
                   config_hash: str = "", dataset_hash: str = "") -> TrainRun:
    """Mini-batch SGD; the train error recorded per epoch is measured after the epoch."""
    n_classes = dataset.n_classes
    p = params or init_mlp(seed, dataset.X.shape[1], n_hidden, n_classes, redundancy)
    rng = np.random.default_rng(seed + 1)
    run = TrainRun("backprop", 1, epochs, seed, config_hash=config_hash,
                   dataset_hash=dataset_hash)
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(dataset.y))
        for start in range(0, len(order), hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            loss, g = loss_and_grad(p, dataset.X[idx], dataset.y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch start {start}")
            p = MLPParams(p.W1 - hyper.learning_rate * g.W1, p.b1 - hyper.learning_rate * g.b1,
                          p.W2 - hyper.learning_rate * g.W2, p.b2 - hyper.learning_rate * g.b2,
                          p.n_classes, p.redundancy)
        wall = time.perf_counter() - t0
        run.records.append(EpochRecord(epoch, error_rate(p, dataset),
                                       error_rate(p, test) if test is not None else None,
                                       wall if record_wall_time else None))
    run.params = p
    return run
