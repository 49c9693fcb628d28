"""Conditional choice probabilities, clamped-Gibbs imputation and synthesis."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    MissingKnown,
    NotConditionable,
    NothingUnknown,
    TargetNotCategorical,
    UnknownLevel,
)
from .rbm import RbmParams, gibbs_chain, hidden_input, softmax, softplus
from .schema import CATEGORICAL, Schema, VariableSpec, as_table, decode, encode

DEFAULT_SWEEPS = 50
DEFAULT_BURN_IN = 200
DEFAULT_THIN = 10


def target_block(schema: Schema, target: str) -> tuple[VariableSpec, slice]:
    spec = schema[target]
    if spec.kind != CATEGORICAL:
        raise TargetNotCategorical(f"{target} is {spec.kind}")
    return spec, schema.block(target)


def _base_input(x, sl: slice, params: RbmParams) -> np.ndarray:
    """Hidden pre-activation with the target block zeroed out."""
    x0 = np.array(x, dtype=float)
    x0[..., sl] = 0.0
    return hidden_input(x0, params)


def choice_logits(x, target: str, params: RbmParams) -> np.ndarray:
    """-F(x with target = level l) up to a level-independent constant.

    ``x`` is an encoded design vector or batch; the contents of the target
    block are ignored. Returns shape ``(..., k)``.
    """
    spec, sl = target_block(params.schema, target)
    a0 = _base_input(x, sl, params)
    a = a0[..., None, :] + params.W[sl]
    return params.b[sl] + softplus(a).sum(axis=-1)


def choice_prob(x, target: str, params: RbmParams) -> np.ndarray:
    """p(target | rest) with every hidden unit summed out exactly."""
    return softmax(choice_logits(x, target, params))


def conditional_choice_prob(known, target: str, params: RbmParams) -> np.ndarray:
    """Conditional choice probabilities for raw rows.

    ``known`` is a raw row or table (or mapping of columns); the target column
    may be missing, every other column must be present.
    """
    schema = params.schema
    table = as_table(known, schema)
    target_block(schema, target)
    t = schema.index(target)
    others = np.delete(table, t, axis=1)
    if np.isnan(others).any():
        bad = [n for i, n in enumerate(schema.names) if i != t and np.isnan(table[:, i]).any()]
        raise MissingKnown(", ".join(bad))
    filled = table.copy()
    filled[:, t] = 0.0
    x = encode(filled, schema, params.norm)
    probs = choice_prob(x, target, params)
    return probs[0] if np.ndim(known) == 1 and not hasattr(known, "keys") else probs


def joint_choice_prob(x, targets: Sequence[str], params: RbmParams) -> np.ndarray:
    """Exact joint p(y_1..y_m | rest) over several categorical targets.

    Enumerates every level combination; returns shape ``(..., k_1, ..., k_m)``.
    """
    schema = params.schema
    blocks = [target_block(schema, t) for t in targets]
    x0 = np.array(x, dtype=float)
    for _, sl in blocks:
        x0[..., sl] = 0.0
    a0 = hidden_input(x0, params)
    shape = tuple(spec.k for spec, _ in blocks)
    logits = np.empty(a0.shape[:-1] + shape)
    for combo in itertools.product(*[range(k) for k in shape]):
        rows = [sl.start + lvl for (_, sl), lvl in zip(blocks, combo)]
        a = a0 + params.W[rows].sum(axis=0)
        logits[(...,) + combo] = params.b[rows].sum() + softplus(a).sum(axis=-1)
    flat = logits.reshape(a0.shape[:-1] + (-1,))
    return softmax(flat).reshape(logits.shape)


# Imputation --------------------------------------------------------------------

@dataclass(frozen=True)
class ConditioningMask:
    """Per-variable ``Known(value)`` or ``Unknown`` override.

    Variables not mentioned keep whatever the input rows hold (a missing value
    is unknown).
    """
    known: dict
    unknown: tuple[str, ...]

    @classmethod
    def parse(cls, text: str, schema: Schema) -> "ConditioningMask":
        """Parse ``"mode=?,purpose=work,distance=3.5"``."""
        known, unknown = {}, []
        for item in filter(None, (p.strip() for p in text.split(","))):
            name, _, value = item.partition("=")
            name, value = name.strip(), value.strip()
            spec = schema[name]
            if value in ("?", ""):
                unknown.append(name)
            elif spec.kind == CATEGORICAL:
                if value in spec.levels:
                    known[name] = float(spec.levels.index(value))
                else:
                    try:
                        idx = int(value)
                    except ValueError:
                        raise UnknownLevel(f"{name}: {value!r}") from None
                    if not 0 <= idx < spec.k:
                        raise UnknownLevel(f"{name}: {value!r}")
                    known[name] = float(idx)
            else:
                known[name] = float(value)
        return cls(known, tuple(unknown))

    def apply(self, rows, schema: Schema) -> np.ndarray:
        table = as_table(rows, schema).copy()
        for name, value in self.known.items():
            table[:, schema.index(name)] = value
        for name in self.unknown:
            table[:, schema.index(name)] = np.nan
        return table


def initial_fill(params: RbmParams) -> np.ndarray:
    """Visible means at s = 0: softmax of categorical offsets, b elsewhere."""
    fill = params.b.copy()
    for sl in params.schema.categorical_blocks:
        fill[sl] = softmax(params.b[sl])
    return fill


def impute_encoded(x, clamp, params: RbmParams, rng: np.random.Generator,
                   sweeps: int = DEFAULT_SWEEPS) -> np.ndarray:
    """Clamped Gibbs sampling in design space.

    Slots where ``clamp`` is true keep their values bit-exactly; the others
    start at :func:`initial_fill` and are resampled ``sweeps`` times.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    x = np.array(np.atleast_2d(x), dtype=float)
    clamp = np.broadcast_to(np.asarray(clamp, dtype=bool), x.shape)
    if clamp.all():
        raise NothingUnknown("every variable is known")
    x = np.where(clamp, x, initial_fill(params))
    out, _ = gibbs_chain(x, params, sweeps, rng, clamp=clamp)
    return out


def impute(rows, params: RbmParams, rng: np.random.Generator, sweeps: int = DEFAULT_SWEEPS,
           mask: ConditioningMask | None = None) -> np.ndarray:
    """Fill every missing value of a raw table by clamped Gibbs sampling.

    Returns the completed raw table; known entries are copied from the input
    unchanged. Each call yields one draw from the model conditional.
    """
    schema = params.schema
    table = mask.apply(rows, schema) if mask is not None else as_table(rows, schema).copy()
    missing = np.isnan(table)
    if not missing.any():
        raise NothingUnknown("every variable is known")
    for i, v in enumerate(schema):
        if missing[:, i].any() and not v.conditionable:
            raise NotConditionable(v.name)
    x = encode(table, schema, params.norm, allow_missing=True)
    clamp = ~np.isnan(x)
    x = impute_encoded(np.nan_to_num(x), clamp, params, rng, sweeps)
    out = decode(x, schema, params.norm)
    return np.where(missing, out, table)


def synthesize(params: RbmParams, n: int, rng: np.random.Generator,
               burn_in: int = DEFAULT_BURN_IN, thin: int = DEFAULT_THIN, chains: int = 100,
               init=None, raw: bool = True) -> np.ndarray:
    """Draw ``n`` rows from the unclamped model.

    ``chains`` independent chains run in parallel; each discards ``burn_in``
    sweeps and then emits every ``thin``-th state. Chains start from random
    rows of ``init`` (encoded data) when given, otherwise from noise around
    the visible offsets. Returns a raw table, or design vectors with
    ``raw=False``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if thin < 1 or burn_in < 0:
        raise ValueError("need thin >= 1 and burn_in >= 0")
    m = min(chains, n)
    if init is not None:
        init = np.atleast_2d(np.asarray(init, dtype=float))
        x = init[rng.integers(0, init.shape[0], size=m)]
    else:
        x = initial_fill(params) + rng.standard_normal((m, params.K))
        for sl in params.schema.categorical_blocks:
            probs = softmax(params.b[sl])
            x[:, sl] = np.eye(sl.stop - sl.start)[rng.choice(len(probs), size=m, p=probs)]
    rounds = -(-n // m)
    if burn_in:
        x, _ = gibbs_chain(x, params, burn_in, rng)
    out = []
    for _ in range(rounds):
        x, _ = gibbs_chain(x, params, thin, rng)
        out.append(x)
    samples = np.concatenate(out)[:n]
    return decode(samples, params.schema, params.norm) if raw else samples


@dataclass(frozen=True)
class MdcDraws:
    """Joint draws over several targets for one known row.

    ``draws`` has one column per target (raw values). ``marginals`` holds the
    exact per-target conditional for categorical targets (None otherwise);
    ``joint`` is the exact joint when every target is categorical.
    """
    targets: tuple[str, ...]
    draws: np.ndarray
    marginals: tuple
    joint: np.ndarray | None

    def empirical_joint(self, schema: Schema) -> np.ndarray:
        shape = tuple(schema[t].k for t in self.targets)
        counts = np.zeros(shape)
        np.add.at(counts, tuple(self.draws.astype(int).T), 1.0)
        return counts / counts.sum()

    def product_of_marginals(self) -> np.ndarray:
        out = self.marginals[0]
        for m in self.marginals[1:]:
            out = np.multiply.outer(out, m)
        return out


def mdc_conditional_product(known, targets: Sequence[str], params: RbmParams,
                            rng: np.random.Generator, draws: int = 1000,
                            sweeps: int = DEFAULT_SWEEPS) -> MdcDraws:
    """Jointly draw ``targets`` given the rest of ``known`` (a single raw row).

    Draws come from the clamped chain, so correlation between targets mediated
    by shared hidden units is preserved. Exact closed-form marginals and joint
    are attached for categorical targets for comparison.
    """
    schema = params.schema
    targets = tuple(targets)
    if len(set(targets)) != len(targets):
        raise ValueError("targets must be distinct")
    row = as_table(known, schema)[0].copy()
    idx = [schema.index(t) for t in targets]
    row[idx] = np.nan
    table = np.repeat(row[None, :], draws, axis=0)
    completed = impute(table, params, rng, sweeps)
    cat = [t for t in targets if schema[t].kind == CATEGORICAL]
    joint = marginals = None
    if cat:
        filled = row.copy()
        filled[idx] = 0.0
        if not np.isnan(filled).any():
            x = encode(filled, schema, params.norm)[0]
            joint_cat = joint_choice_prob(x, cat, params)
            per = []
            for t in targets:
                if t in cat:
                    axis = cat.index(t)
                    other = tuple(a for a in range(len(cat)) if a != axis)
                    per.append(joint_cat.sum(axis=other) if other else joint_cat)
                else:
                    per.append(None)
            marginals = tuple(per)
            joint = joint_cat if len(cat) == len(targets) else None
    return MdcDraws(targets, completed[:, idx], marginals if marginals is not None else (), joint)
