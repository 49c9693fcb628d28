"""Point elasticities of conditional choice probabilities.

The conditional p(y = l | x) is a softmax over ``b_l + sum_j softplus(a_j(x) + W_lj)``
so its Jacobian w.r.t. any non-target input slot ``i`` is::

    dp_l/dx_i = p_l * (g_li - sum_m p_m g_mi),   g_li = sum_j sigmoid(a_j + W_lj) W_ij

Elasticities are reported in raw data units by chaining through the encoding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonContinuousVariable, ZeroProbability
from .generator import target_block
from .rbm import RbmParams, hidden_input, sigmoid, softmax, softplus
from .schema import CATEGORICAL, CYCLIC, TWO_PI, as_table, encode

MIN_PROBABILITY = 1e-12


def continuous_slots(params: RbmParams) -> np.ndarray:
    return np.flatnonzero(params.schema.quadratic_mask)


def _prob_and_slot_grad(x, target: str, params: RbmParams):
    """Probabilities ``(..., k)`` and ``dp/dx`` for every slot ``(..., k, K)``."""
    _, sl = target_block(params.schema, target)
    x0 = np.array(x, dtype=float)
    x0[..., sl] = 0.0
    a = hidden_input(x0, params)[..., None, :] + params.W[sl]
    p = softmax(params.b[sl] + softplus(a).sum(axis=-1))
    g = sigmoid(a) @ params.W.T
    g[..., sl] = 0.0
    centred = g - np.einsum("...l,...li->...i", p, g)[..., None, :]
    return p, p[..., :, None] * centred


def choice_jacobian(x, target: str, params: RbmParams) -> np.ndarray:
    """dp_l / dx_i for encoded input ``x``, over continuous slots only.

    Shape ``(..., k, C)`` with columns ordered as :func:`continuous_slots`.
    """
    _, grad = _prob_and_slot_grad(x, target, params)
    return grad[..., continuous_slots(params)]


def _raw_derivative(table: np.ndarray, target: str, variable: str, params: RbmParams):
    """Probabilities and dp/d(raw variable), both ``(n, k)``, plus the raw values."""
    schema = params.schema
    spec = schema[variable]
    if spec.kind == CATEGORICAL:
        raise NonContinuousVariable(variable)
    t = schema.index(target)
    filled = table.copy()
    filled[:, t] = 0.0
    x = encode(filled, schema, params.norm)
    p, grad = _prob_and_slot_grad(x, target, params)
    sl = schema.block(variable)
    v = table[:, schema.index(variable)]
    if spec.kind == CYCLIC:
        angle = TWO_PI * v / spec.period
        k = spec.scale * TWO_PI / spec.period
        dz = np.column_stack([k * np.cos(angle), -k * np.sin(angle)])
        dp = np.einsum("nks,ns->nk", grad[:, :, sl], dz)
    else:
        dp = grad[:, :, sl.start] * spec.scale / params.norm.sd[variable]
    return p, dp, v


def elasticity(x, target: str, variable: str, params: RbmParams) -> np.ndarray:
    """Point elasticity ``(dp_l/dx_v) * x_v / p_l`` for each target level.

    ``x`` is a raw row (the target column is ignored).
    """
    table = as_table(np.asarray(x, dtype=float) if not hasattr(x, "keys") else x, params.schema)
    p, dp, v = _raw_derivative(table[:1], target, variable, params)
    if np.any(p[0] <= 0):
        raise ZeroProbability(f"p({target}) underflows to 0 for some level")
    return dp[0] * v[0] / p[0]


@dataclass
class ElasticityReport:
    """Per-observation elasticities and per-level aggregates.

    ``values[n, l]`` is NaN where ``p_l < 1e-12``; ``excluded[l]`` counts those.
    """
    target: str
    variable: str
    levels: tuple
    values: np.ndarray
    excluded: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    histograms: list

    def to_tsv(self) -> str:
        lines = ["observation\tlevel\telasticity"]
        for n in range(self.values.shape[0]):
            for l, label in enumerate(self.levels):
                if not np.isnan(self.values[n, l]):
                    lines.append(f"{n}\t{label}\t{float(self.values[n, l])!r}")
        lines.append("")
        lines.append(f"# summary: d p({self.target}) / d {self.variable}")
        lines.append("level\tmean\tsd\tn\texcluded")
        for l, label in enumerate(self.levels):
            count = int(np.sum(~np.isnan(self.values[:, l])))
            lines.append(f"{label}\t{float(self.mean[l])!r}\t{float(self.sd[l])!r}\t{count}\t{int(self.excluded[l])}")
        return "\n".join(lines) + "\n"


def elasticity_density(dataset, target: str, variable: str, params: RbmParams,
                       bins: int = 30) -> ElasticityReport:
    """Elasticities over every row of a raw table, with mean/sd/histogram per level.

    The standard deviation is the population (divide-by-n) value.
    """
    spec, _ = target_block(params.schema, target)
    table = as_table(dataset, params.schema)
    p, dp, v = _raw_derivative(table, target, variable, params)
    ok = p >= MIN_PROBABILITY
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(ok, dp * v[:, None] / p, np.nan)
    mean = np.array([np.mean(col[~np.isnan(col)]) if (~np.isnan(col)).any() else np.nan
                     for col in values.T])
    sd = np.array([np.std(col[~np.isnan(col)]) if (~np.isnan(col)).any() else np.nan
                   for col in values.T])
    hists = []
    for col in values.T:
        finite = col[~np.isnan(col)]
        hists.append(np.histogram(finite, bins=bins) if finite.size else (np.zeros(bins), np.zeros(bins + 1)))
    return ElasticityReport(target, variable, spec.levels, values, (~ok).sum(axis=0),
                            mean, sd, hists)
