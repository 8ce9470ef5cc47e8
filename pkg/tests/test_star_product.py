from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoweyl import golden as G
from geoweyl.star_product import (
    StarExpansion, atom, check_adjoint, check_associativity, check_moyal, check_structure,
    check_unit_law, drop_curvature, expansion_from_json_obj, expansion_to_json_obj, laplace_expected,
    metric_symbol, moyal_term, quantize_polynomial, star_expansion, structure_violations, tau_translate,
    xi_coefficients,
)
from geoweyl.tensor_expr import Ff, Poly, is_zero, parse


@pytest.fixture(scope="module")
def expansion() -> StarExpansion:
    return star_expansion(4)


@pytest.mark.parametrize("n", [0, 1, 2, 4])
def test_star_reference_symmetrized(expansion, n):
    assert is_zero(expansion[n] - parse(G.STAR_SYMMETRIZED[n]))


@pytest.mark.parametrize("n", [0, 1, 2])
def test_star_low_orders_literal(expansion, n):
    assert is_zero(expansion[n] - parse(G.STAR[n]))


def test_star_order_three_sign_corrected(expansion):
    assert is_zero(expansion[3] - parse(G.STAR_3_SIGN_CORRECTED))


@pytest.mark.xfail(strict=True, reason="literal sign of the hbar^3 R^b p_b group with one horizontal derivative")
def test_star_order_three_literal(expansion):
    assert is_zero(expansion[3] - parse(G.STAR_SYMMETRIZED[3]))


@pytest.mark.xfail(strict=True, reason="ordered reading of horizontal multi-indices differs by R*R commutator terms")
def test_star_order_four_ordered_reading(expansion):
    assert is_zero(expansion[4] - parse(G.STAR[4]))


def test_star_first_order_is_poisson_bracket(expansion):
    expected = parse("(1/2)*i*(a(k|)*b(|k) - a(|k)*b(k|))")
    assert is_zero(expansion[1] - expected)


def test_moyal_reduction():
    assert check_moyal(4) == [True] * 5


def test_moyal_oracle_is_independent(expansion):
    # the flat oracle is the plain bidifferential expansion, not a filtered copy
    assert not is_zero(moyal_term(1) - moyal_term(1, "b", "a"))
    assert is_zero(moyal_term(2) - moyal_term(2, "b", "a"))
    assert is_zero(drop_curvature(expansion[2]) - moyal_term(2))


def test_unit_law():
    assert check_unit_law(4)


def test_adjoint_symmetry():
    assert check_adjoint(4)


def test_associativity_through_order_three():
    assert check_associativity(3) == [True] * 4


def test_every_term_has_the_expected_structure(expansion):
    assert check_structure(expansion) == []


def test_structure_check_flags_wrong_counts():
    # one vertical derivative too many on a at hbar^1
    fs = (Ff("a", V=("k", "m")), Ff("b", H=("k",)), ("g", None, ("m", "m")))
    assert structure_violations((0, fs), ("a", "b"), 1)


def test_json_round_trip(expansion):
    doc = expansion_to_json_obj(expansion)
    back = expansion_from_json_obj(json.loads(json.dumps(doc)))
    assert back.atoms == expansion.atoms
    assert all(back[n] == expansion[n] for n in range(5))


@given(st.fractions(0, 1, max_denominator=4), st.fractions(0, 1, max_denominator=4))
@settings(max_examples=8, deadline=None)
def test_tau_translation_round_trip(t1, t2):
    b = atom("b")
    there = tau_translate(b, t1, t2, 3)
    back = tau_translate(there, t2, t1, 3)
    assert is_zero(back.truncate_hbar(3) - b)


def test_tau_translation_example():
    got = tau_translate(atom("b"), 0, 1, 2)
    expected = parse("b(|) - i*hbar*b(d|d) - 1/2*hbar^2*b(d,e|d,e)")
    assert is_zero(got - expected)


def test_xi_low_values():
    t = xi_coefficients(2)
    assert t.raw[(0, 0)] == Poly.scalar(1)
    assert not t.raw[(1, 0)] and not t.raw[(0, 1)]
    assert is_zero(t.raw[(2, 0)] - parse("-1/6*Ric[x,x]", vectors=("x",)))
    assert is_zero(t.raw[(0, 2)] - parse("-1/6*Ric[y,y]", vectors=("y",)))


@given(st.sampled_from([1, 3, 5]))
@settings(max_examples=3, deadline=None)
def test_weyl_xi_odd_orders_vanish(n):
    assert is_zero(xi_coefficients(5).weyl(n))


def test_quadratic_symbol_gives_conformal_laplacian():
    q = quantize_polynomial(metric_symbol())
    assert is_zero(q.expression - laplace_expected())


@given(st.fractions(0, 1, max_denominator=6))
@settings(max_examples=6, deadline=None)
def test_quadratic_symbol_tau_independent(t):
    q = quantize_polynomial(metric_symbol(), t)
    assert is_zero(q.expression - laplace_expected())


def test_quantization_of_functions_is_multiplication():
    f = Poly.factor(Ff("f", pdep=False))
    q = quantize_polynomial(f)
    assert is_zero(q.expression - f * Poly.factor(Ff("h", pdep=False)))
