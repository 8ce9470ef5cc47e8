from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoweyl import golden as G
from geoweyl.synge_engine import (
    CoincidenceTable, LimitKey, OrderError, coincidence_limit, table_entry, trace_limit,
    unprimed_limit,
)
from geoweyl.tensor_expr import count_label, is_zero, parse


def test_low_order_unprimed_limits():
    assert not unprimed_limit(())
    assert not unprimed_limit(("a",))
    assert unprimed_limit(("a", "b")) == parse("g[a,b]", free=("a", "b"))
    assert not unprimed_limit(("a", "b", "c"))
    expected = parse("-1/3*R[a,c,b,d] - 1/3*R[a,d,b,c]", free=("a", "b", "c", "d"))
    assert is_zero(unprimed_limit(("a", "b", "c", "d")) - expected)


def test_trace_of_fourth_derivative():
    assert is_zero(trace_limit(("x", "y")) - parse("-2/3*Ric[x,y]", vectors=("x", "y")))


def test_single_primed_derivative_is_minus_identity():
    assert table_entry(1, 0) == parse("-g[mu,u]", free=("mu",))
    assert table_entry(0, 1) == parse("-g[mu,v]", free=("mu",))


@pytest.mark.parametrize("key", [k for k in G.TABLE if sum(k) <= 4])
def test_table_low_orders(key):
    assert is_zero(table_entry(*key) - parse(G.TABLE[key], free=("mu",)))


@given(st.integers(2, 5), st.booleans())
@settings(max_examples=10, deadline=None)
def test_pure_primed_entries_vanish(m, first):
    assert not (table_entry(m, 0) if first else table_entry(0, m))


@given(st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=12, deadline=None)
def test_entries_are_homogeneous(m, n):
    if m + n > 5:
        return
    e = table_entry(m, n)
    assert e.free == ("mu",)
    for (_, fs) in e.terms:
        assert count_label(fs, "u") == m
        assert count_label(fs, "v") == n


def test_table_object_populates_by_order():
    t = CoincidenceTable()
    entries = t.populate(3)
    assert set(entries) == {(a, n - a) for n in range(4) for a in range(n + 1)}


def test_order_cap():
    with pytest.raises(OrderError):
        coincidence_limit(LimitKey.primed_pattern(4, 4), cap=6)
