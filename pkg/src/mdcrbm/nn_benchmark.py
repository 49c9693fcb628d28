"""Supervised baseline: one sigmoid hidden layer, softmax output over the choice.

Trained by cross-entropy SGD with the same mini-batches, split and step-size
schedule as the RBM trainer so both likelihood curves are comparable.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteGradient, ShapeMismatch
from .generator import target_block
from .rbm import sigmoid, softmax
from .rng import stream
from .schema import NormStats, Schema, as_table, encode, fit_norm
from .trainer import TrainConfig, TrainReport, split


@dataclass(frozen=True)
class NnParams:
    W1: np.ndarray  # inputs x hidden
    c1: np.ndarray
    W2: np.ndarray  # hidden x levels
    b2: np.ndarray

    def __post_init__(self):
        K, J = np.shape(self.W1)
        if np.shape(self.c1) != (J,) or np.shape(self.W2)[0] != J or \
                np.shape(self.b2) != (np.shape(self.W2)[1],):
            raise ShapeMismatch("inconsistent NN parameter shapes")

    def __iter__(self):
        return iter((self.W1, self.c1, self.W2, self.b2))


def nn_forward(x, params: NnParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.W1.shape[0]:
        raise ShapeMismatch(f"input width {x.shape[-1]} != {params.W1.shape[0]}")
    h = sigmoid(x @ params.W1 + params.c1)
    return softmax(h @ params.W2 + params.b2)


def nn_loss(x, y, params: NnParams) -> float:
    """Mean negative log-likelihood of integer labels ``y``."""
    p = nn_forward(x, params)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], 1e-300))))


def nn_gradient(x, y, params: NnParams) -> NnParams:
    """Gradient of :func:`nn_loss` by backpropagation."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    h = sigmoid(x @ params.W1 + params.c1)
    p = softmax(h @ params.W2 + params.b2)
    d_out = p.copy()
    d_out[np.arange(n), y] -= 1.0
    d_out /= n
    d_hid = (d_out @ params.W2.T) * h * (1.0 - h)
    return NnParams(x.T @ d_hid, d_hid.sum(axis=0), h.T @ d_out, d_out.sum(axis=0))


def nn_init(K: int, J: int, k: int, rng: np.random.Generator) -> NnParams:
    """Hidden weights ~ N(0, 1/K); zero output layer, so the initial prediction is uniform."""
    return NnParams(rng.normal(0.0, 1.0 / np.sqrt(K), (K, J)), np.zeros(J),
                    np.zeros((J, k)), np.zeros(k))


def inputs_and_labels(table, schema: Schema, target: str, norm: NormStats):
    """Encoded inputs with the target block removed, and integer target labels."""
    target_block(schema, target)
    table = as_table(table, schema)
    t = schema.index(target)
    x = encode(table, schema, norm)
    keep = ~schema.slot_mask([target])
    return x[:, keep], table[:, t].astype(int)


def _loglik(x, y, params):
    return -nn_loss(x, y, params) if len(y) else float("nan")


def nn_train(dataset, schema: Schema, target: str, J: int, config: TrainConfig,
             norm: NormStats | None = None) -> tuple[NnParams, TrainReport]:
    """Train the baseline; the curve has an epoch-0 row for the initial model."""
    table = as_table(dataset, schema)
    rng = stream(config.seed, "train")
    train_idx, val_idx = split(table.shape[0], config.val_fraction, rng)
    if norm is None:
        norm = fit_norm(table[train_idx], schema)
    x_tr, y_tr = inputs_and_labels(table[train_idx], schema, target, norm)
    x_va, y_va = inputs_and_labels(table[val_idx], schema, target, norm)
    params = nn_init(x_tr.shape[1], J, schema[target].k, rng)
    curve = TrainReport()
    nan = float("nan")
    curve.append(epoch=0, free_energy_train=nan, free_energy_val=nan,
                 loglik_train=_loglik(x_tr, y_tr, params), loglik_val=_loglik(x_va, y_va, params),
                 lr=config.lr, seconds=0.0)
    n = x_tr.shape[0]
    batches = 0
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            grad = nn_gradient(x_tr[idx], y_tr[idx], params)
            if not all(np.isfinite(g).all() for g in grad):
                curve.aborted = str(NonFiniteGradient("gradient has non-finite entries"))
                return params, curve
            lr = config.learning_rate(batches)
            params = NnParams(*(p - lr * g for p, g in zip(params, grad)))
            batches += 1
        curve.append(epoch=epoch, free_energy_train=nan, free_energy_val=nan,
                     loglik_train=_loglik(x_tr, y_tr, params),
                     loglik_val=_loglik(x_va, y_va, params),
                     lr=config.learning_rate(batches), seconds=time.perf_counter() - start)
    return params, curve
