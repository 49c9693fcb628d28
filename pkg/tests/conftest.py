import numpy as np
import pytest
from hypothesis import strategies as st

from mdcrbm.rbm import RbmParams
from mdcrbm.schema import Schema, VariableSpec

ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail=""):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
                            + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


def mixed_schema():
    return Schema((
        VariableSpec.categorical("mode", ("walk", "bike", "car")),
        VariableSpec.gaussian("income"),
        VariableSpec.positive("distance"),
        VariableSpec.cyclic("time", 24.0),
        VariableSpec.categorical("purpose", 2),
    ))


def random_params(schema, J, rng, scale=0.5):
    return RbmParams(rng.normal(0, scale, (schema.width, J)), rng.normal(0, scale, schema.width),
                     rng.normal(0, scale, J), schema)


def random_design(schema, n, rng):
    """Valid design vectors: one-hot categorical blocks, gaussian noise elsewhere."""
    x = rng.normal(0, 1, (n, schema.width))
    for v, sl in schema.blocks():
        if v.kind == "categorical":
            x[:, sl] = np.eye(v.k)[rng.integers(0, v.k, n)]
        elif v.kind == "positive":
            x[:, sl] = np.abs(x[:, sl])
    return x


@st.composite
def categorical_schemas(draw, max_vars=3, max_levels=4):
    ks = draw(st.lists(st.integers(2, max_levels), min_size=1, max_size=max_vars))
    return Schema(tuple(VariableSpec.categorical(f"v{i}", k) for i, k in enumerate(ks)))


seeds = st.integers(0, 2 ** 32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
