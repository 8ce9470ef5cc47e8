from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoweyl import golden as G
from geoweyl.cov_expansion import (
    InconsistentInitialData, TransportSpec, geodesic_defect, solve_transport, zeta,
    zeta_shifted, zeta_shifted_symmetric, zeta_symmetric,
)
from geoweyl.tensor_expr import Poly, count_label, is_zero, parse


def P(src):
    return parse(src, vectors=("u", "v"))


def shifted_coeff(series, du, dv):
    return series.coefficient({"u": du, "v": dv})


@pytest.mark.parametrize("n", sorted(G.ZETA))
def test_zeta_reference(n):
    assert is_zero(zeta(4).degree(n) - P(G.ZETA[n]))


def test_zeta_low_orders_vanish():
    z = zeta(4)
    assert not z.degree(0) and not z.degree(1)


@pytest.mark.parametrize("key", sorted(G.ZETA_SHIFTED_CORRECTED))
def test_zeta_shifted_reference(key):
    assert is_zero(shifted_coeff(zeta_shifted(4), *key) - P(G.ZETA_SHIFTED_CORRECTED[key]))


@pytest.mark.xfail(strict=True, reason="literal reference 1/12 at u^2 v^2; the Taylor factor 1/2! gives 1/24")
def test_zeta_shifted_literal_uuvv():
    assert is_zero(shifted_coeff(zeta_shifted(4), 2, 2) - P(G.ZETA_SHIFTED[(2, 2)]))


@pytest.mark.parametrize("n", sorted(G.ZETA_SYMMETRIC))
def test_zeta_symmetric_reference(n):
    assert is_zero(zeta_symmetric(4).degree(n) - P(G.ZETA_SYMMETRIC[n]))


@pytest.mark.parametrize("key", sorted(G.ZETA_SHIFTED_SYMMETRIC))
def test_zeta_shifted_symmetric_reference(key):
    s = zeta_shifted_symmetric(4)
    assert is_zero(shifted_coeff(s, *key) - P(G.ZETA_SHIFTED_SYMMETRIC[key]))


@given(st.sampled_from([1, 3, 5]))
@settings(max_examples=3, deadline=None)
def test_symmetric_zeta_odd_orders_vanish(n):
    assert is_zero(zeta_symmetric(6).degree(n))


def test_shifted_reduces_to_zeta_at_zero_shift():
    s = zeta_shifted(4)
    for n in range(5):
        assert is_zero(shifted_coeff(s, n, 0) - zeta(4).degree(n))


def test_defect_lowest_order():
    d = geodesic_defect(3).poly
    expected = parse("1/3*R[mu,u,u,v] + 1/6*R[mu,v,u,v]", free=("mu",))
    assert is_zero(d - expected)


@given(st.integers(2, 5))
@settings(max_examples=4, deadline=None)
def test_defect_has_no_pure_monomials(order):
    for (_, fs) in geodesic_defect(order).poly.terms:
        assert count_label(fs, "u") >= 1 and count_label(fs, "v") >= 1


def test_transport_rejects_inconsistent_initial_data():
    tspec = TransportSpec("bad", lambda n, lower: P("Ric[u,u]") if n == 0 else Poly({}), Poly.scalar(1))
    with pytest.raises(InconsistentInitialData):
        solve_transport(tspec, 2)


def test_series_json_shape():
    doc = zeta(3).to_json_obj()
    assert doc["variables"] == ["u"] and doc["order"] == 3
    assert [c["degree"] for c in doc["coefficients"]] == [[2], [3]]
