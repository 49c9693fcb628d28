"""Plain-text tables, schema files and the binary model format.

Model file layout (all integers unsigned 32-bit, everything little-endian)::

    magic     8 bytes  b"MDCRBM\\x00\\x01"
    version   u32      FORMAT_VERSION
    text_len  u32      length of the schema text in bytes
    text      UTF-8    schema text including normalization statistics
    J         u32      hidden units
    K         u32      visible slots (checked against the schema)
    W         K*J f64  row-major
    b         K   f64
    c         J   f64
"""
from __future__ import annotations

import csv
import io
import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, LengthMismatch, MissingColumn, SchemaError, VersionMismatch
from .rbm import RbmParams
from .schema import CATEGORICAL, NormStats, Schema, as_table, schema_from_text, schema_to_text

MAGIC = b"MDCRBM\x00\x01"
FORMAT_VERSION = 1
DELIMITER = ","


def format_value(value: float) -> str:
    """Shortest round-trip text for a float; integral values without a fraction."""
    if np.isnan(value):
        return ""
    value = float(value)
    if value.is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return repr(value)


def table_to_text(table, schema: Schema) -> str:
    table = as_table(table, schema)
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=DELIMITER, lineterminator="\n")
    writer.writerow(schema.names)
    for row in table:
        out = []
        for v, value in zip(schema, row):
            if v.kind == CATEGORICAL and not np.isnan(value):
                out.append(v.levels[int(value)])
            else:
                out.append(format_value(value))
        writer.writerow(out)
    return buf.getvalue()


def table_from_text(text: str, schema: Schema) -> np.ndarray:
    """Parse delimited text with a header row; columns are matched by name.

    Extra columns are ignored. An empty field is a missing value (``NaN``).
    """
    reader = csv.reader(io.StringIO(text), delimiter=DELIMITER)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty data file (no header row)") from None
    positions = {}
    for name in schema.names:
        if name not in header:
            raise MissingColumn(name)
        positions[name] = header.index(name)
    columns = {name: [] for name in schema.names}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise LengthMismatch(f"line {line_no}: {len(row)} fields, header has {len(header)}")
        for v in schema:
            field = row[positions[v.name]].strip()
            if v.kind == CATEGORICAL:
                columns[v.name].append(field)
            elif field == "":
                columns[v.name].append(np.nan)
            else:
                try:
                    columns[v.name].append(float(field))
                except ValueError:
                    raise DataError(f"line {line_no}, column {v.name!r}: not a number: {field!r}") from None
    return as_table(columns, schema)


def read_table(path, schema: Schema) -> np.ndarray:
    return table_from_text(Path(path).read_text(encoding="utf-8"), schema)


def write_table(path, table, schema: Schema) -> None:
    _atomic_write(path, table_to_text(table, schema).encode("utf-8"))


def read_schema(path) -> tuple[Schema, NormStats | None]:
    return schema_from_text(Path(path).read_text(encoding="utf-8"))


def write_schema(path, schema: Schema, norm: NormStats | None = None) -> None:
    _atomic_write(path, schema_to_text(schema, norm).encode("utf-8"))


def model_to_bytes(params: RbmParams) -> bytes:
    text = schema_to_text(params.schema, params.norm).encode("utf-8")
    K, J = params.W.shape
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(text)), text, struct.pack("<II", J, K)]
    for arr in (params.W, params.b, params.c):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> RbmParams:
    if data[:len(MAGIC)] != MAGIC:
        raise SchemaError("not a model file (bad magic bytes)")
    pos = len(MAGIC)
    try:
        version, text_len = struct.unpack_from("<II", data, pos)
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"model format version {version}, expected {FORMAT_VERSION}")
        pos += 8
        text = data[pos:pos + text_len].decode("utf-8")
        pos += text_len
        J, K = struct.unpack_from("<II", data, pos)
        pos += 8
    except struct.error as exc:
        raise SchemaError(f"truncated model file: {exc}") from exc
    schema, norm = schema_from_text(text)
    if K != schema.width:
        raise SchemaError(f"model has K={K} but its schema has width {schema.width}")
    expected = pos + 8 * (K * J + K + J)
    if len(data) != expected:
        raise SchemaError(f"model file is {len(data)} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=pos).astype(float)
    W = flat[:K * J].reshape(K, J)
    b = flat[K * J:K * J + K]
    c = flat[K * J + K:]
    return RbmParams(W, b, c, schema, norm)


def save_model(path, params: RbmParams) -> None:
    _atomic_write(path, model_to_bytes(params))


def load_model(path) -> RbmParams:
    return model_from_bytes(Path(path).read_bytes())


def _atomic_write(path, payload: bytes) -> None:
    """Write to a sibling temp file, then rename, so a failure leaves no partial file."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        tmp.write_bytes(payload)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
