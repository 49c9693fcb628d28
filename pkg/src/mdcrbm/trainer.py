"""Contrastive-divergence training with mini-batch SGD and a decaying step size."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .errors import NonFiniteGradient, UnknownBlock
from .generator import choice_prob
from .rbm import RbmParams, free_energy, gibbs_chain, hidden_conditional
from .rng import stream
from .schema import CATEGORICAL, NormStats, Schema, as_table, encode, fit_norm


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    cd_steps: int = 1
    lr: float = 0.01
    decay: float = 0.001
    epochs: int = 10
    seed: int = 0
    val_fraction: float = 0.3
    init_scale: float = 0.01
    choice: str | None = None
    max_abs: float = 1e6

    def __post_init__(self):
        if not 0 < self.lr < 1:
            raise ValueError("lr must be in (0, 1)")
        if not 0 <= self.decay < 1:
            raise ValueError("decay must be in [0, 1)")
        if self.batch_size < 1 or self.cd_steps < 1 or self.epochs < 0:
            raise ValueError("batch_size and cd_steps must be >= 1, epochs >= 0")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")

    def learning_rate(self, batches_done: int) -> float:
        return self.lr * (1.0 - self.decay) ** batches_done


class Grad(NamedTuple):
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray


REPORT_COLUMNS = ("epoch", "free_energy_train", "free_energy_val",
                  "loglik_train", "loglik_val", "lr", "seconds")


@dataclass
class TrainReport:
    """Per-epoch diagnostics; every list has one entry per completed epoch.

    ``seconds`` is wall-clock time and the only non-deterministic field.
    """
    epoch: list = field(default_factory=list)
    free_energy_train: list = field(default_factory=list)
    free_energy_val: list = field(default_factory=list)
    loglik_train: list = field(default_factory=list)
    loglik_val: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    aborted: str | None = None

    def __len__(self):
        return len(self.epoch)

    def append(self, **row):
        for name in REPORT_COLUMNS:
            getattr(self, name).append(row[name])

    def to_tsv(self) -> str:
        lines = ["\t".join(REPORT_COLUMNS)]
        for i in range(len(self)):
            lines.append("\t".join(_fmt(getattr(self, name)[i]) for name in REPORT_COLUMNS))
        if self.aborted:
            lines.append(f"# aborted: {self.aborted}")
        return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def init_params(schema: Schema, J: int, config: TrainConfig, rng: np.random.Generator,
                data=None, norm: NormStats | None = None) -> RbmParams:
    """Small random weights, zero hidden offsets.

    With encoded ``data``, categorical offsets are the log empirical level
    frequencies and continuous offsets the slot means; otherwise zero.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    K = schema.width
    W = rng.normal(0.0, config.init_scale, (K, J)) if config.init_scale > 0 else np.zeros((K, J))
    b = np.zeros(K)
    if data is not None and len(data):
        mean = np.asarray(data, dtype=float).mean(axis=0)
        b = mean.copy()
        for sl in schema.categorical_blocks:
            b[sl] = np.log(np.maximum(mean[sl], 1e-6))
    return RbmParams(W, b, np.zeros(J), schema, norm)


def cd_gradient(batch, params: RbmParams, N: int, rng: np.random.Generator) -> Grad:
    """CD-N estimate of the batch-mean gradient of -F, as <xs>_chain - <xs>_data.

    The data phase uses hidden probabilities; the chain phase uses sampled
    hidden states after ``N`` Gibbs sweeps started at the data.
    """
    x0 = np.atleast_2d(np.asarray(batch, dtype=float))
    if x0.shape[0] == 0:
        raise ValueError("empty batch")
    if N < 1:
        raise ValueError("N must be >= 1")
    n = x0.shape[0]
    p0 = hidden_conditional(x0, params)
    xt, st = gibbs_chain(x0, params, N, rng)
    return Grad((xt.T @ st - x0.T @ p0) / n,
                xt.mean(axis=0) - x0.mean(axis=0),
                st.mean(axis=0) - p0.mean(axis=0))


def sgd_step(params: RbmParams, grad: Grad, lr: float) -> RbmParams:
    if not all(np.isfinite(g).all() for g in grad):
        raise NonFiniteGradient("gradient has non-finite entries")
    return params.replace(W=params.W - lr * grad.W, b=params.b - lr * grad.b,
                          c=params.c - lr * grad.c)


def default_choice(schema: Schema) -> str | None:
    for v in schema:
        if v.kind == CATEGORICAL:
            return v.name
    return None


def choice_loglik(x, target: str | None, params: RbmParams) -> float:
    """Mean per-observation log p(target | rest) on encoded rows."""
    if target is None or len(x) == 0:
        return float("nan")
    sl = params.schema.block(target)
    probs = choice_prob(x, target, params)
    chosen = np.sum(probs * x[:, sl], axis=1)
    return float(np.mean(np.log(np.maximum(chosen, 1e-300))))


def split(n: int, val_fraction: float, rng: np.random.Generator):
    order = rng.permutation(n)
    n_val = int(round(val_fraction * n))
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def train(dataset, schema: Schema, J: int, config: TrainConfig,
          norm: NormStats | None = None) -> tuple[RbmParams, TrainReport]:
    """Fit an RBM to a raw table.

    The validation split is carved once up front; normalization is fitted on
    the training split unless ``norm`` is given. The step size is multiplied
    by ``1 - decay`` after every batch. Training stops early, keeping the last
    finite parameters, if a gradient is non-finite or a parameter exceeds
    ``config.max_abs``; the reason is recorded in ``report.aborted``.
    """
    table = as_table(dataset, schema)
    rng = stream(config.seed, "train")
    train_idx, val_idx = split(table.shape[0], config.val_fraction, rng)
    if norm is None:
        norm = fit_norm(table[train_idx], schema)
    x_train = encode(table[train_idx], schema, norm)
    x_val = encode(table[val_idx], schema, norm)
    params = init_params(schema, J, config, rng, data=x_train, norm=norm)
    report = TrainReport()
    choice = config.choice or default_choice(schema)
    n = x_train.shape[0]
    batches = 0
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            batch = x_train[order[lo:lo + config.batch_size]]
            grad = cd_gradient(batch, params, config.cd_steps, rng)
            try:
                candidate = sgd_step(params, grad, config.learning_rate(batches))
            except NonFiniteGradient as exc:
                report.aborted = str(exc)
                break
            if max(np.abs(candidate.W).max(), np.abs(candidate.b).max(),
                   np.abs(candidate.c).max()) > config.max_abs:
                report.aborted = f"parameter magnitude exceeded {config.max_abs:g}"
                break
            params = candidate
            batches += 1
        if report.aborted:
            break
        report.append(
            epoch=epoch,
            free_energy_train=float(np.mean(free_energy(x_train, params))),
            free_energy_val=float(np.mean(free_energy(x_val, params))) if len(x_val) else float("nan"),
            loglik_train=choice_loglik(x_train, choice, params),
            loglik_val=choice_loglik(x_val, choice, params),
            lr=config.learning_rate(batches),
            seconds=time.perf_counter() - start,
        )
    return params, report


@dataclass(frozen=True)
class ParamDistribution:
    """Weights between one visible block and all hidden units.

    ``variance`` is the population (divide-by-n) variance.
    """
    mean: float
    variance: float
    counts: np.ndarray
    edges: np.ndarray


def param_distribution(params: RbmParams, block: str, bins: int = 20) -> ParamDistribution:
    if block not in params.schema.names:
        raise UnknownBlock(block)
    w = params.W[params.schema.block(block)].ravel()
    counts, edges = np.histogram(w, bins=bins)
    return ParamDistribution(float(w.mean()), float(w.var()), counts, edges)


def config_from_mapping(mapping, base: TrainConfig | None = None) -> TrainConfig:
    """Build a config from string-valued key/value pairs (config file, env)."""
    base = base or TrainConfig()
    kwargs = {}
    types = {f.name: f.type for f in fields(TrainConfig)}
    for key, value in mapping.items():
        key = key.strip().lower().replace("-", "_")
        if key not in types:
            raise ValueError(f"unknown training option {key!r}")
        current = getattr(base, key)
        if key == "choice":
            kwargs[key] = value or None
        elif isinstance(current, int) and not isinstance(current, bool) and key != "max_abs":
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return TrainConfig(**{**base.__dict__, **kwargs})
