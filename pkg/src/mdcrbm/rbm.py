"""Energy model over mixed visible blocks and binary hidden units.

Energy of a joint configuration::

    E(x, s) = -x.W.s - sum_cat b_i x_i + sum_quad (x_i - b_i)^2 / 2 - c.s

where "cat" are the one-hot categorical slots and "quad" every continuous
slot (gaussian, positive, cyclic) with unit variance. Summing out the hidden
units gives the free energy::

    F(x) = -sum_cat b_i x_i + sum_quad (x_i - b_i)^2 / 2 - sum_j softplus((x.W + c)_j)

All evaluation functions broadcast over leading axes: ``x`` may be a single
design vector ``(K,)`` or a batch ``(n, K)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatch, TooLarge, UnsupportedKind
from .schema import CATEGORICAL, NormStats, Schema

ENUMERATION_LIMIT = 2 ** 22


def softplus(a):
    """ln(1 + e^a), computed without overflow."""
    return np.logaddexp(0.0, a)


def sigmoid(a):
    return np.exp(-np.logaddexp(0.0, -np.asarray(a, dtype=float)))


def logsumexp(a, axis=None):
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


def softmax(a, axis=-1):
    a = np.asarray(a, dtype=float)
    e = np.exp(a - np.max(a, axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class RbmParams:
    """Weights ``W`` (K x J), visible offsets ``b`` (K), hidden offsets ``c`` (J).

    ``norm`` carries the normalization used to encode training data so that a
    persisted model can encode and decode raw rows on its own.
    """
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    schema: Schema
    norm: NormStats | None = None

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        c = np.array(self.c, dtype=float).reshape(-1)
        if W.ndim != 2 or W.shape != (self.schema.width, c.size) or b.size != self.schema.width:
            raise ShapeMismatch(
                f"W {W.shape}, b {b.shape}, c {c.shape} inconsistent with K={self.schema.width}")
        if not (np.isfinite(W).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise ValueError("parameters must be finite")
        for arr in (W, b, c):
            arr.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def K(self) -> int:
        return self.W.shape[0]

    @property
    def J(self) -> int:
        return self.W.shape[1]

    def replace(self, **changes) -> "RbmParams":
        return replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, RbmParams):
            return NotImplemented
        return (self.schema == other.schema and self.norm == other.norm
                and np.array_equal(self.W, other.W) and np.array_equal(self.b, other.b)
                and np.array_equal(self.c, other.c))

    __hash__ = None


def _check_x(x, params: RbmParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (params.K,):
        raise ShapeMismatch(f"x has trailing dimension {x.shape[-1:]}, expected ({params.K},)")
    return x


def _check_s(s, params: RbmParams) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape[-1:] != (params.J,):
        raise ShapeMismatch(f"s has trailing dimension {s.shape[-1:]}, expected ({params.J},)")
    return s


def visible_term(x, params: RbmParams) -> np.ndarray:
    """The hidden-independent part of -E: b.x on categorical slots,
    -(x - b)^2 / 2 on continuous ones."""
    quad = params.schema.quadratic_mask
    lin = x[..., ~quad] @ params.b[~quad]
    d = x[..., quad] - params.b[quad]
    return lin - 0.5 * np.sum(d * d, axis=-1)


def hidden_input(x, params: RbmParams) -> np.ndarray:
    return x @ params.W + params.c


def energy(x, s, params: RbmParams) -> np.ndarray:
    x = _check_x(x, params)
    s = _check_s(s, params)
    return -np.sum((x @ params.W) * s, axis=-1) - visible_term(x, params) - s @ params.c


def free_energy(x, params: RbmParams) -> np.ndarray:
    x = _check_x(x, params)
    return -visible_term(x, params) - softplus(hidden_input(x, params)).sum(axis=-1)


def free_energy_grad(x, params: RbmParams):
    """Gradient of F(x) w.r.t. ``(W, b, c)``; averaged over the batch axis if 2-D."""
    x = np.atleast_2d(_check_x(x, params))
    p = sigmoid(hidden_input(x, params))
    n = x.shape[0]
    quad = params.schema.quadratic_mask
    db = np.where(quad, -(x - params.b), -x).mean(axis=0)
    return -(x.T @ p) / n, db, -p.mean(axis=0)


def free_energy_grad_x(x, params: RbmParams) -> np.ndarray:
    """dF/dx, same shape as ``x``."""
    x = _check_x(x, params)
    quad = params.schema.quadratic_mask
    dlin = np.where(quad, -(x - params.b), params.b)
    return -dlin - sigmoid(hidden_input(x, params)) @ params.W.T


def hidden_conditional(x, params: RbmParams) -> np.ndarray:
    """p(s_j = 1 | x) for each hidden unit."""
    return sigmoid(hidden_input(_check_x(x, params), params))


@dataclass(frozen=True)
class VisibleConditional:
    """Parameters of p(x | s), one array entry per visible slot.

    ``mu`` is the pre-activation ``W.s + b``. ``mean`` holds the block-wise
    expectation: softmax probabilities for categorical blocks, ``mu`` for
    gaussian and cyclic slots, ``softplus(mu)`` for positive slots.
    """
    mu: np.ndarray
    mean: np.ndarray


def visible_conditional(s, params: RbmParams) -> VisibleConditional:
    s = _check_s(s, params)
    mu = s @ params.W.T + params.b
    mean = mu.copy()
    for sl in params.schema.categorical_blocks:
        mean[..., sl] = softmax(mu[..., sl])
    pos = params.schema.positive_mask
    mean[..., pos] = softplus(mu[..., pos])
    return VisibleConditional(mu, mean)


def sample_hidden(x, params: RbmParams, rng: np.random.Generator) -> np.ndarray:
    p = hidden_conditional(x, params)
    return (rng.random(p.shape) < p).astype(float)


def sample_visible(s, params: RbmParams, rng: np.random.Generator) -> np.ndarray:
    """Draw x ~ p(x | s).

    Categorical blocks get one multinomial draw each; gaussian and cyclic slots
    add unit normal noise to ``mu``; positive slots use the noisy rectified
    draw ``max(0, mu + eps * sqrt(sigmoid(mu)))``.
    """
    cond = visible_conditional(s, params)
    mu = cond.mu
    x = mu + rng.standard_normal(mu.shape)
    pos = params.schema.positive_mask
    if pos.any():
        m = mu[..., pos]
        x[..., pos] = np.maximum(0.0, m + (x[..., pos] - m) * np.sqrt(sigmoid(m)))
    lead = mu.shape[:-1]
    for sl in params.schema.categorical_blocks:
        probs = cond.mean[..., sl]
        u = rng.random(lead + (1,))
        idx = np.minimum((np.cumsum(probs, axis=-1) <= u).sum(axis=-1), probs.shape[-1] - 1)
        block = np.zeros_like(probs)
        np.put_along_axis(block, idx[..., None], 1.0, axis=-1)
        x[..., sl] = block
    return x


def gibbs_chain(x0, params: RbmParams, steps: int, rng: np.random.Generator, clamp=None):
    """Run ``steps`` sweeps of block Gibbs sampling starting from ``x0``.

    Returns ``(x, s)`` after the last sweep. One sweep draws s ~ p(s|x) and then
    x ~ p(x|s); a final hidden draw pairs the last visible state with its
    hidden state. Slots where ``clamp`` is true are reset to their ``x0``
    values after every visible draw.
    """
    x = np.array(_check_x(x0, params), dtype=float)
    if clamp is not None:
        clamp = np.broadcast_to(np.asarray(clamp, dtype=bool), x.shape)
        fixed = x[clamp]
    s = sample_hidden(x, params, rng)
    for _ in range(steps):
        x = sample_visible(s, params, rng)
        if clamp is not None:
            x[clamp] = fixed
        s = sample_hidden(x, params, rng)
    return x, s


# Exact enumeration ------------------------------------------------------------

@dataclass(frozen=True)
class ExactDistribution:
    """Exact Boltzmann distribution of a small, all-categorical model.

    ``states`` lists every joint visible configuration as design vectors,
    ``hidden`` every binary hidden vector; ``joint[a, h]`` is p(states[a], hidden[h]).
    """
    states: np.ndarray
    hidden: np.ndarray
    log_z: float
    joint: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    def index_of(self, x) -> np.ndarray:
        """Row index into ``states`` for each one-hot design vector in ``x``."""
        x = np.atleast_2d(x)
        match = np.all(x[:, None, :] == self.states[None, :, :], axis=-1)
        return np.argmax(match, axis=1)


def all_binary(J: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=J))).reshape(2 ** J, J)


def enumerate_exact(params: RbmParams) -> ExactDistribution:
    """Brute-force the partition function by summing e^-E over every (x, s).

    Independent of :func:`free_energy`; used as the reference oracle.
    """
    schema = params.schema
    if any(v.kind != CATEGORICAL for v in schema):
        raise UnsupportedKind("exact enumeration supports categorical blocks only")
    n_states = int(np.prod([v.k for v in schema]))
    if n_states * 2 ** params.J > ENUMERATION_LIMIT:
        raise TooLarge(f"{n_states} visible x {2 ** params.J} hidden states exceeds 2^22")
    states = np.zeros((n_states, params.K))
    for a, levels in enumerate(itertools.product(*[range(v.k) for v in schema])):
        for (v, sl), level in zip(schema.blocks(), levels):
            states[a, sl.start + level] = 1.0
    hidden = all_binary(params.J)
    neg_e = states @ params.W @ hidden.T + (states @ params.b)[:, None] + (hidden @ params.c)[None, :]
    log_z = logsumexp(neg_e)
    return ExactDistribution(states, hidden, log_z, np.exp(neg_e - log_z))


def exact_loglik_grad(data, params: RbmParams, exact: ExactDistribution | None = None):
    """Gradient of the mean log-likelihood of ``data`` w.r.t. ``(W, b, c)``.

    The data term sums over hidden states by brute force, the model term uses
    the enumerated joint; this is the ascent direction that CD approximates.
    """
    exact = exact if exact is not None else enumerate_exact(params)
    x = np.atleast_2d(np.asarray(data, dtype=float))
    h = exact.hidden
    neg_e = x @ params.W @ h.T + (h @ params.c)[None, :]
    post = np.exp(neg_e - logsumexp(neg_e, axis=1)[:, None])
    es = post @ h
    n = x.shape[0]
    data_w, data_b, data_c = x.T @ es / n, x.mean(axis=0), es.mean(axis=0)
    js = exact.joint
    model_w = exact.states.T @ js @ h
    model_b = exact.states.T @ js.sum(axis=1)
    model_c = js.sum(axis=0) @ h
    return data_w - model_w, data_b - model_b, data_c - model_c
