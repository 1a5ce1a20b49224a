import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metadist import expr as ex
from metadist.valuesets import (
    EXC,
    CatSet,
    DescriptorError,
    ExcOnly,
    Interval,
    IntRange,
    IntSet,
    parse_descriptor,
    to_descriptor,
    union,
)


def test_exc_is_singleton_and_pickles():
    import pickle

    assert pickle.loads(pickle.dumps(EXC)) is EXC
    assert repr(EXC) == "EXC"


def test_interval_open_ends():
    s = Interval(0.0, 1.0, True, True)
    assert 0.5 in s
    assert 0.0 not in s and 1.0 not in s
    assert EXC not in s
    assert s.hull() == (0.0, 1.0)


def test_union_with_exc():
    s = parse_descriptor([{"range": [10, 300]}, "EXC"])
    assert s.has_exc
    assert EXC in s and 10 in s and 300 in s and 301 not in s
    assert s.without_exc() == IntRange(10, 300)


def test_exc_only():
    s = parse_descriptor("EXC")
    assert isinstance(s, ExcOnly) and s.is_exc_only()
    assert EXC in s and 0 not in s


def test_int_and_cat_sets():
    assert IntSet((0, 1, 2)).values() == [0, 1, 2]
    assert 1.0 in IntSet((0, 1)) and 1.5 not in IntSet((0, 1))
    c = CatSet(("ASGD", "ADAM"))
    assert "ADAM" in c and "SGD" not in c


@pytest.mark.parametrize(
    "desc",
    [
        {"interval": [0, 1], "open": [True, False]},
        {"range": [2, 9]},
        {"ints": [0, 3, 5]},
        {"cats": ["a", "b"]},
        "EXC",
        {"interval_expr": ["0", "sum(u, 1, l) / 2"]},
    ],
)
def test_descriptor_round_trip(desc):
    assert parse_descriptor(to_descriptor(parse_descriptor(desc))) == parse_descriptor(desc)


@pytest.mark.parametrize("bad", [[], {}, {"cats": ["EXC"]}, {"range": [0.5, 2]}, {"ints": [True]}, {"foo": 1}])
def test_bad_descriptors(bad):
    with pytest.raises(DescriptorError):
        parse_descriptor(bad)


@given(st.lists(st.integers(-20, 20), min_size=1, max_size=6))
def test_union_membership_is_disjunction(vals):
    parts = [IntRange(v, v + 2) for v in vals]
    u = union(*parts)
    for x in range(-25, 25):
        assert (x in u) == any(x in p for p in parts)


def test_expr_family_sum_and_minmax():
    e = ex.parse("sum(u, 1, l) / (2 * tau_max)")
    env = {"u1": 100.0, "u2": 50.0, "l": 2.0, "tau_max": 600.0}
    assert ex.evaluate_mapping(e, env) == pytest.approx(150 / 1200)
    assert ex.evaluate_mapping(ex.parse("min(a, b) - max(a, 3)"), {"a": 1.0, "b": 2.0}) == -2.0
    names, prefixes = ex.references(e)
    assert names == {"l", "tau_max"} and prefixes == {"u"}


@pytest.mark.parametrize("text", ["__import__('os')", "a ** 2", "a if b else c", "f(1)", "a[0]"])
def test_expr_whitelist(text):
    with pytest.raises(ex.ExprError):
        ex.parse(text)


def test_expr_division_by_zero():
    with pytest.raises(ex.ExprError):
        ex.evaluate_mapping(ex.parse("1 / a"), {"a": 0.0})


@given(
    st.floats(-5, 5), st.floats(0, 3), st.floats(-5, 5), st.floats(0, 3),
    st.floats(0, 1), st.floats(0, 1),
)
def test_interval_arithmetic_encloses(a0, da, b0, db, ta, tb):
    e = ex.parse("a * b - a + min(a, b)")
    box = {"a": (a0, a0 + da), "b": (b0, b0 + db)}
    lo, hi = ex.evaluate_interval(e, lambda n: box[n])
    a, b = a0 + ta * da, b0 + tb * db
    val = ex.evaluate_mapping(e, {"a": a, "b": b})
    assert lo - 1e-9 <= val <= hi + 1e-9
    assert not math.isnan(lo)
