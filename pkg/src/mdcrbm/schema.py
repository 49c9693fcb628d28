"""Variable layout and the raw-table <-> design-vector encoding.

A raw table is a float array of shape ``(n, V)`` with one column per variable,
in schema order. Categorical values are stored as level indices, cyclic values
in ``[0, period)``, continuous values in data units. ``NaN`` marks a missing
value.

The design vector concatenates one block per variable:

* categorical with ``k`` levels -> ``k`` one-hot slots
* gaussian -> 1 slot ``scale * (x - mean) / sd``
* positive -> 1 slot ``scale * x / sd`` (not shifted, so that zero in encoded
  space is zero in data units)
* cyclic -> 2 slots ``scale * (sin, cos)`` of ``2 pi t / period``

``scale`` defaults to 1 (unit variance, unit circle). The model's continuous
visible units have unit noise variance, so a larger ``scale`` is equivalent to
a visible noise standard deviation of ``1 / scale`` in normalized units.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    ConstantColumn,
    LengthMismatch,
    MissingColumn,
    OutOfDomain,
    SchemaError,
    UnknownLevel,
)

CATEGORICAL = "categorical"
GAUSSIAN = "gaussian"
POSITIVE = "positive"
CYCLIC = "cyclic"
KINDS = (CATEGORICAL, GAUSSIAN, POSITIVE, CYCLIC)
CONTINUOUS_KINDS = (GAUSSIAN, POSITIVE, CYCLIC)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    levels: tuple[str, ...] = ()
    period: float = 0.0
    conditionable: bool = True
    scale: float = 1.0

    def __post_init__(self):
        if not self.name or any(ch in self.name for ch in ",=[]\n"):
            raise SchemaError(f"invalid variable name {self.name!r}")
        if self.kind not in KINDS:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(self.levels) < 2:
                raise SchemaError(f"{self.name}: categorical needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"{self.name}: duplicate level labels")
        if self.kind == CYCLIC and not self.period > 0:
            raise SchemaError(f"{self.name}: cyclic period must be > 0")
        if not self.scale > 0:
            raise SchemaError(f"{self.name}: scale must be > 0")

    @classmethod
    def categorical(cls, name, levels, conditionable=True):
        """``levels`` is either a level count or a sequence of labels."""
        if isinstance(levels, (int, np.integer)):
            levels = tuple(str(i) for i in range(int(levels)))
        return cls(name, CATEGORICAL, levels=tuple(str(x) for x in levels),
                   conditionable=conditionable)

    @classmethod
    def gaussian(cls, name, conditionable=True, scale=1.0):
        return cls(name, GAUSSIAN, conditionable=conditionable, scale=float(scale))

    @classmethod
    def positive(cls, name, conditionable=True, scale=1.0):
        return cls(name, POSITIVE, conditionable=conditionable, scale=float(scale))

    @classmethod
    def cyclic(cls, name, period, conditionable=True, scale=1.0):
        return cls(name, CYCLIC, period=float(period), conditionable=conditionable,
                   scale=float(scale))

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def width(self) -> int:
        if self.kind == CATEGORICAL:
            return self.k
        return 2 if self.kind == CYCLIC else 1

    @property
    def is_continuous(self) -> bool:
        return self.kind in CONTINUOUS_KINDS


@dataclass(frozen=True)
class Schema:
    variables: tuple[VariableSpec, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if not names:
            raise SchemaError("schema has no variables")
        if len(set(names)) != len(names):
            raise SchemaError("variable names must be unique")
        offsets = np.concatenate([[0], np.cumsum([v.width for v in self.variables])])
        object.__setattr__(self, "offsets", tuple(int(o) for o in offsets))

    def __len__(self):
        return len(self.variables)

    def __iter__(self):
        return iter(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def width(self) -> int:
        """Total encoded width K."""
        return self.offsets[-1]

    def index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise MissingColumn(name)

    def __getitem__(self, name: str) -> VariableSpec:
        return self.variables[self.index(name)]

    def block(self, name: str) -> slice:
        i = self.index(name)
        return slice(self.offsets[i], self.offsets[i + 1])

    def blocks(self):
        """Yield ``(spec, slice)`` pairs in design-vector order."""
        for i, v in enumerate(self.variables):
            yield v, slice(self.offsets[i], self.offsets[i + 1])

    @cached_property
    def slot_kinds(self) -> np.ndarray:
        return np.array([v.kind for v in self.variables for _ in range(v.width)])

    @cached_property
    def quadratic_mask(self) -> np.ndarray:
        """Slots whose energy term is quadratic (every non-categorical slot)."""
        return self.slot_kinds != CATEGORICAL

    @cached_property
    def categorical_blocks(self) -> list[slice]:
        return [sl for v, sl in self.blocks() if v.kind == CATEGORICAL]

    @cached_property
    def positive_mask(self) -> np.ndarray:
        return self.slot_kinds == POSITIVE

    def slot_mask(self, names) -> np.ndarray:
        mask = np.zeros(self.width, dtype=bool)
        for name in names:
            mask[self.block(name)] = True
        return mask


@dataclass(frozen=True)
class NormStats:
    """Per continuous variable mean and (n-1) standard deviation, in data units."""
    mean: Mapping[str, float]
    sd: Mapping[str, float]


def as_table(data, schema: Schema) -> np.ndarray:
    """Coerce ``data`` to a raw float table in schema column order.

    Accepts a 2-D array already in schema order, or any mapping from column
    name to values (dict, DataFrame). Categorical columns given as labels are
    mapped to level indices.
    """
    if not hasattr(data, "keys"):
        table = np.asarray(data, dtype=float)
        if table.ndim == 1:
            table = table[None, :]
        if table.ndim != 2 or table.shape[1] != len(schema):
            raise LengthMismatch(f"expected {len(schema)} columns, got shape {table.shape}")
        return table
    cols = []
    for v in schema:
        if v.name not in data:
            raise MissingColumn(v.name)
        values = data[v.name]
        if v.kind == CATEGORICAL:
            cols.append(_levels_to_index(v, values))
        else:
            cols.append(np.asarray(values, dtype=float))
    return np.column_stack(cols) if cols[0].size else np.empty((0, len(schema)))


def _levels_to_index(spec: VariableSpec, values) -> np.ndarray:
    lookup = {label: i for i, label in enumerate(spec.levels)}
    out = np.empty(len(values))
    for n, value in enumerate(values):
        if value is None or (isinstance(value, float) and np.isnan(value)) or value == "":
            out[n] = np.nan
        elif isinstance(value, str):
            if value not in lookup:
                raise UnknownLevel(f"{spec.name}: {value!r}")
            out[n] = lookup[value]
        else:
            out[n] = float(value)
    return out


def fit_norm(rows, schema: Schema) -> NormStats:
    table = as_table(rows, schema)
    if table.shape[0] < 2:
        raise ConstantColumn("need at least 2 rows to fit normalization")
    mean, sd = {}, {}
    for i, v in enumerate(schema):
        if v.kind not in (GAUSSIAN, POSITIVE):
            continue
        col = table[:, i]
        col = col[~np.isnan(col)]
        if col.size < 2:
            raise ConstantColumn(v.name)
        s = float(np.std(col, ddof=1))
        if not s > 0:
            raise ConstantColumn(v.name)
        mean[v.name] = float(np.mean(col))
        sd[v.name] = s
    return NormStats(mean, sd)


def encode(rows, schema: Schema, norm: NormStats, allow_missing: bool = False) -> np.ndarray:
    """Encode a raw table into design vectors, shape ``(n, K)``.

    With ``allow_missing`` a missing value leaves its whole block as ``NaN``;
    otherwise it raises :class:`OutOfDomain`.
    """
    table = as_table(rows, schema)
    n = table.shape[0]
    x = np.zeros((n, schema.width))
    for i, (v, sl) in enumerate(schema.blocks()):
        col = table[:, i]
        missing = np.isnan(col)
        if missing.any() and not allow_missing:
            raise OutOfDomain(f"{v.name}: missing value")
        ok = ~missing
        if v.kind == CATEGORICAL:
            idx = col[ok]
            bad = (idx != np.round(idx)) | (idx < 0) | (idx >= v.k)
            if bad.any():
                raise UnknownLevel(f"{v.name}: {idx[bad][0]!r} not in 0..{v.k - 1}")
            block = np.zeros((n, v.k))
            block[np.flatnonzero(ok), idx.astype(int)] = 1.0
        elif v.kind == CYCLIC:
            angle = TWO_PI * col / v.period
            block = v.scale * np.column_stack([np.sin(angle), np.cos(angle)])
        else:
            if v.name not in norm.sd:
                raise MissingColumn(f"no normalization for {v.name}")
            if v.kind == POSITIVE:
                if (col[ok] < 0).any():
                    raise OutOfDomain(f"{v.name}: negative value")
                block = (v.scale * col / norm.sd[v.name])[:, None]
            else:
                block = (v.scale * (col - norm.mean[v.name]) / norm.sd[v.name])[:, None]
        block[missing] = np.nan
        x[:, sl] = block
    return x


def encode_row(row, schema: Schema, norm: NormStats) -> np.ndarray:
    row = np.asarray(row, dtype=float) if not isinstance(row, Mapping) else row
    if isinstance(row, np.ndarray) and row.shape != (len(schema),):
        raise LengthMismatch(f"row has {row.size} values, schema has {len(schema)}")
    return encode(row, schema, norm)[0]


def decode(x, schema: Schema, norm: NormStats) -> np.ndarray:
    """Inverse of :func:`encode`. Categorical ties go to the lowest level."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != schema.width:
        raise LengthMismatch(f"vector length {x.shape[1]} != K={schema.width}")
    out = np.empty((x.shape[0], len(schema)))
    for i, (v, sl) in enumerate(schema.blocks()):
        block = x[:, sl]
        if v.kind == CATEGORICAL:
            out[:, i] = np.argmax(block, axis=1)
        elif v.kind == CYCLIC:
            frac = np.mod(np.arctan2(block[:, 0], block[:, 1]) / TWO_PI, 1.0)
            t = frac * v.period
            out[:, i] = np.where(t >= v.period, 0.0, t)
        elif v.kind == POSITIVE:
            out[:, i] = np.maximum(block[:, 0] / v.scale * norm.sd[v.name], 0.0)
        else:
            out[:, i] = block[:, 0] / v.scale * norm.sd[v.name] + norm.mean[v.name]
    return out[0] if squeeze else out


def decode_vector(x, schema: Schema, norm: NormStats) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != schema.width:
        raise LengthMismatch(f"vector length {x.size} != K={schema.width}")
    return decode(x, schema, norm)


# Row filters -----------------------------------------------------------------

@dataclass(frozen=True)
class MinValue:
    """Keep rows whose ``column`` is >= ``threshold`` (e.g. minimum trip duration)."""
    column: str
    threshold: float

    def __call__(self, table: np.ndarray, schema: Schema) -> np.ndarray:
        col = table[:, schema.index(self.column)]
        with np.errstate(invalid="ignore"):
            return col >= self.threshold


@dataclass(frozen=True)
class Complete:
    """Keep rows with no missing value in ``columns``.

    ``columns=None`` means every non-conditionable variable, which is the rule
    applied to ingested data before training.
    """
    columns: Sequence[str] | None = None

    def __call__(self, table: np.ndarray, schema: Schema) -> np.ndarray:
        names = self.columns
        if names is None:
            names = [v.name for v in schema if not v.conditionable]
        idx = [schema.index(name) for name in names]
        return ~np.isnan(table[:, idx]).any(axis=1)


Rule = Callable[[np.ndarray, Schema], np.ndarray]


def filter_rows(rows, schema: Schema, rules: Sequence[Rule]) -> np.ndarray:
    table = as_table(rows, schema)
    keep = np.ones(table.shape[0], dtype=bool)
    for rule in rules:
        keep &= rule(table, schema)
    return table[keep]


# Schema text format ----------------------------------------------------------

def schema_to_text(schema: Schema, norm: NormStats | None = None) -> str:
    """Serialize as INI text, one section per variable, in order.

    Normalization statistics are written as ``mean``/``sd`` keys when given.
    Floats use ``repr`` so a text round trip is exact.
    """
    parser = configparser.ConfigParser(interpolation=None)
    for v in schema:
        sec = {"kind": v.kind, "conditionable": "true" if v.conditionable else "false"}
        if v.kind == CATEGORICAL:
            sec["levels"] = ", ".join(v.levels)
        if v.kind == CYCLIC:
            sec["period"] = repr(v.period)
        if v.kind != CATEGORICAL and v.scale != 1.0:
            sec["scale"] = repr(v.scale)
        if norm is not None and v.name in norm.sd:
            sec["mean"] = repr(norm.mean[v.name])
            sec["sd"] = repr(norm.sd[v.name])
        parser[v.name] = sec
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def schema_from_text(text: str) -> tuple[Schema, NormStats | None]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise SchemaError(str(exc)) from exc
    variables, mean, sd = [], {}, {}
    for name in parser.sections():
        sec = parser[name]
        kind = sec.get("kind", "").strip().lower()
        try:
            cond = sec.getboolean("conditionable", fallback=True)
        except ValueError as exc:
            raise SchemaError(f"{name}: {exc}") from exc
        if kind == CATEGORICAL:
            raw = sec.get("levels", "")
            levels = [s.strip() for s in raw.split(",") if s.strip()]
            if len(levels) == 1 and levels[0].isdigit():
                variables.append(VariableSpec.categorical(name, int(levels[0]), cond))
            else:
                variables.append(VariableSpec.categorical(name, levels, cond))
        elif kind == CYCLIC:
            variables.append(VariableSpec.cyclic(name, sec.getfloat("period", 0.0), cond,
                                                 scale=sec.getfloat("scale", 1.0)))
        else:
            variables.append(VariableSpec(name, kind, conditionable=cond,
                                          scale=sec.getfloat("scale", 1.0)))
        if "sd" in sec:
            mean[name] = float(sec["mean"])
            sd[name] = float(sec["sd"])
    schema = Schema(tuple(variables))
    return schema, (NormStats(mean, sd) if sd else None)
