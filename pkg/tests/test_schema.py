import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mdcrbm.errors import (ConstantColumn, LengthMismatch, MissingColumn, OutOfDomain,
                           SchemaError, UnknownLevel)
from mdcrbm.schema import (Complete, MinValue, NormStats, Schema, VariableSpec, decode,
                           decode_vector, encode, encode_row, filter_rows, fit_norm,
                           schema_from_text, schema_to_text)

from conftest import mixed_schema


def test_layout_offsets_are_contiguous():
    s = mixed_schema()
    assert s.width == 3 + 1 + 1 + 2 + 2
    assert s.offsets == (0, 3, 4, 5, 7, 9)
    assert s.block("time") == slice(5, 7)
    assert list(s.quadratic_mask) == [False] * 3 + [True] * 4 + [False] * 2


@pytest.mark.parametrize("bad", [
    lambda: VariableSpec.categorical("a", 1),
    lambda: VariableSpec.cyclic("t", 0.0),
    lambda: VariableSpec("x", "ordinal"),
    lambda: Schema((VariableSpec.gaussian("a"), VariableSpec.gaussian("a"))),
])
def test_invalid_specs(bad):
    with pytest.raises(SchemaError):
        bad()


def test_fit_norm_hand_values():
    s = Schema((VariableSpec.gaussian("g"), VariableSpec.gaussian("u")))
    norm = fit_norm(np.array([[2.0, -1.0], [4.0, 1.0], [6.0, np.nan]]), s)
    assert norm.mean["g"] == 4.0 and norm.sd["g"] == 2.0
    assert norm.mean["u"] == 0.0 and norm.sd["u"] == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_fit_norm_errors():
    s = Schema((VariableSpec.gaussian("g"),))
    with pytest.raises(ConstantColumn):
        fit_norm(np.array([[0.0], [0.0]]), s)
    with pytest.raises(MissingColumn):
        fit_norm({"h": [1.0, 2.0]}, s)


def test_encode_examples():
    s = Schema((VariableSpec.categorical("mode", 4), VariableSpec.cyclic("time", 24.0),
                VariableSpec.gaussian("g")))
    norm = NormStats({"g": 4.0}, {"g": 2.0})
    x = encode_row([2, 6.0, 4.0], s, norm)
    assert list(x[:4]) == [0, 0, 1, 0]
    assert x[4] == pytest.approx(1.0, abs=1e-15) and x[5] == pytest.approx(0.0, abs=1e-15)
    assert x[6] == 0.0


def test_encode_errors():
    s = Schema((VariableSpec.categorical("mode", 3), VariableSpec.positive("d")))
    norm = NormStats({"d": 1.0}, {"d": 1.0})
    with pytest.raises(UnknownLevel):
        encode([[3, 1.0]], s, norm)
    with pytest.raises(OutOfDomain):
        encode([[0, -0.5]], s, norm)
    with pytest.raises(UnknownLevel):
        encode({"mode": ["bus"], "d": [1.0]}, s, norm)


def test_missing_values_are_nan_blocks_when_allowed():
    s = mixed_schema()
    norm = NormStats({"income": 0.0, "distance": 1.0}, {"income": 1.0, "distance": 1.0})
    row = np.array([[np.nan, 0.5, 1.0, 3.0, 1]])
    with pytest.raises(OutOfDomain):
        encode(row, s, norm)
    x = encode(row, s, norm, allow_missing=True)[0]
    assert np.isnan(x[:3]).all() and not np.isnan(x[3:]).any()


def test_decode_examples():
    s = Schema((VariableSpec.categorical("mode", 4), VariableSpec.cyclic("time", 24.0),
                VariableSpec.gaussian("g"), VariableSpec.positive("p")))
    norm = NormStats({"g": 4.0, "p": 3.0}, {"g": 2.0, "p": 2.0})
    out = decode_vector(np.array([0, 0, 1, 0, 0.0, 1.0, 1.5, -0.3]), s, norm)
    assert list(out) == [2.0, 0.0, 7.0, 0.0]
    with pytest.raises(LengthMismatch):
        decode_vector(np.zeros(7), s, norm)


def test_decode_ties_go_to_lowest_level():
    s = Schema((VariableSpec.categorical("m", 3),))
    assert decode_vector(np.array([0.2, 0.4, 0.4]), s, NormStats({}, {}))[0] == 1.0


def test_positive_is_scaled_not_shifted():
    s = Schema((VariableSpec.positive("d", scale=2.0),))
    norm = NormStats({"d": 10.0}, {"d": 4.0})
    assert encode([[0.0], [8.0]], s, norm)[:, 0].tolist() == [0.0, 4.0]


def test_cyclic_scale_sets_amplitude():
    s = Schema((VariableSpec.cyclic("t", 24.0, scale=3.0),))
    x = encode([[6.0]], s, NormStats({}, {}))[0]
    assert np.allclose(x, [3.0, 0.0], atol=1e-15)
    assert decode_vector(x, s, NormStats({}, {}))[0] == pytest.approx(6.0, abs=1e-12)


rows = st.tuples(st.integers(0, 2), st.floats(-1e3, 1e3), st.floats(0, 1e3),
                 st.floats(0, 24, exclude_max=True), st.integers(0, 1))


@given(st.lists(rows, min_size=1, max_size=20))
@settings(max_examples=200, deadline=None)
def test_round_trip(rows):
    s = mixed_schema()
    table = np.array(rows, dtype=float)
    norm = NormStats({"income": 3.0, "distance": 7.0}, {"income": 2.5, "distance": 4.0})
    x = encode(table, s, norm)
    back = decode(x, s, norm)
    assert np.array_equal(back[:, [0, 4]], table[:, [0, 4]])
    for col in (1, 2):
        assert np.allclose(back[:, col], table[:, col], rtol=1e-12, atol=1e-12)
    d = np.abs(back[:, 3] - table[:, 3])
    assert np.all(np.minimum(d, 24.0 - d) <= 1e-9)


@given(arrays(float, (12, 5), elements=st.floats(0, 1)), st.permutations(range(12)))
@settings(max_examples=50, deadline=None)
def test_one_hot_mass_cyclic_norm_and_order_stability(u, perm):
    s = mixed_schema()
    table = np.column_stack([np.floor(u[:, 0] * 3) % 3, u[:, 1] * 10 - 5, u[:, 2] * 50,
                             u[:, 3] * 24, np.floor(u[:, 4] * 2) % 2])
    norm = NormStats({"income": 0.0, "distance": 1.0}, {"income": 1.0, "distance": 2.0})
    x = encode(table, s, norm)
    for sl in s.categorical_blocks:
        assert np.all(x[:, sl].sum(axis=1) == 1.0)
    tb = x[:, s.block("time")]
    assert np.allclose((tb ** 2).sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert np.array_equal(encode(table[list(perm)], s, norm), x[list(perm)])


def test_filter_rows_examples():
    s = Schema((VariableSpec.gaussian("duration", conditionable=False), VariableSpec.gaussian("g")))
    table = np.array([[5.0, 1.0], [12.0, 2.0], [30.0, 3.0]])
    assert filter_rows(table, s, [MinValue("duration", 10)])[:, 0].tolist() == [12.0, 30.0]
    assert filter_rows(np.empty((0, 2)), s, [MinValue("duration", 10)]).shape == (0, 2)
    assert np.array_equal(filter_rows(table, s, [MinValue("duration", 0)]), table)
    gappy = np.array([[np.nan, 1.0], [1.0, np.nan]])
    # only non-conditionable columns must be complete by default
    assert np.array_equal(filter_rows(gappy, s, [Complete()]), gappy[1:], equal_nan=True)
    assert filter_rows(gappy, s, [Complete(["duration", "g"])]).shape == (0, 2)


def test_labels_are_accepted_in_mappings():
    s = Schema((VariableSpec.categorical("mode", ("walk", "car")),))
    norm = NormStats({}, {})
    assert encode({"mode": ["car", "walk"]}, s, norm).tolist() == [[0, 1], [1, 0]]


def test_schema_text_round_trip_with_norm():
    s = Schema((VariableSpec.categorical("mode", ("walk", "car"), conditionable=False),
                VariableSpec.categorical("n", 3), VariableSpec.positive("d", scale=2.5),
                VariableSpec.cyclic("t", 24.0, scale=3.0), VariableSpec.gaussian("g")))
    norm = NormStats({"d": 0.1 + 0.2, "g": -1e-17}, {"d": 1 / 3, "g": 7.0})
    back, nb = schema_from_text(schema_to_text(s, norm))
    assert back == s and nb == norm
    assert schema_from_text(schema_to_text(s))[1] is None


def test_schema_text_rejects_garbage():
    with pytest.raises(SchemaError):
        schema_from_text("not an ini file")
    with pytest.raises(SchemaError):
        schema_from_text("[x]\nkind = spline\n")
