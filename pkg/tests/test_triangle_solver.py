from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoweyl import golden as G
from geoweyl.tensor_expr import homogeneous_part, is_zero, to_text, truncate_degree
from geoweyl.triangle_solver import (
    defect_on_solution, exchange, is_exchange_symmetric, jacobian_det_expansion, lambda_components,
    lambda_factor, scale_u, solve_triangle_system, triangle_residuals,
)


def test_triangle_iteration_converges_quickly():
    sol = solve_triangle_system(5)
    assert sol.iterations <= 6


@pytest.mark.parametrize("name,entries,linear", [
    ("v1", G.V1, [(1, "u1")]),
    ("v2", G.V2, [(1, "u2")]),
    ("w", G.W, [(-1, "u1"), (1, "u2")]),
    ("w_tilde", G.W_TILDE, [(1, "u1"), (1, "u2")]),
])
def test_triangle_series_reference(name, entries, linear):
    got = getattr(solve_triangle_system(5), name)
    assert is_zero(got - G.vector(entries, linear))


def test_defect_parts_on_solution_reference():
    d = defect_on_solution(5)
    assert is_zero(d["plus_12"] - G.vector(G.DELTA_PLUS_12))
    assert is_zero(d["minus_12"] - G.vector(G.DELTA_MINUS_12))


def test_residuals_vanish():
    for r in triangle_residuals(5):
        assert not r or is_zero(r), to_text(r)


def test_v1_v2_are_exchanged():
    sol = solve_triangle_system(5)
    assert is_zero(exchange(sol.v1) - sol.v2)


def test_w_tilde_symmetric_and_w_antisymmetric():
    sol = solve_triangle_system(5)
    assert is_exchange_symmetric(sol.w_tilde, 1)
    assert is_exchange_symmetric(sol.w, -1)


def test_log_jacobian_reference():
    assert is_zero(jacobian_det_expansion(4).poly - G.build(G.LOG_JACOBIAN))


def test_lambda_reference():
    assert is_zero(lambda_factor(4).poly - G.build(G.LOG_LAMBDA))
    c = lambda_components(4)
    assert is_zero(c["minus_w_to_w_tilde"] - G.build(G.LOG_DELTA_MINUS_W_TO_W_TILDE))


def test_lambda_rejects_perturbed_reference():
    bad = list(G.LOG_LAMBDA)
    c, pat, word = bad[-1]
    bad[-1] = (c + G.F(1, 1000), pat, word)
    assert not is_zero(lambda_factor(4).poly - G.build(bad))


@given(st.sampled_from([1, 2, 3, 4, 5]))
@settings(max_examples=5, deadline=None)
def test_lowest_triangle_terms_are_stable_under_truncation(order):
    lo, hi = solve_triangle_system(order), solve_triangle_system(5)
    assert is_zero(truncate_degree(hi.w, ("u1", "u2"), order) - lo.w)


@given(st.integers(-3, 3).filter(bool), st.integers(-3, 3).filter(bool))
@settings(max_examples=10, deadline=None)
def test_lambda_degree_scaling(a, b):
    # homogeneous parts scale with the total degree under u1 -> a u1, u2 -> b u2
    L = lambda_factor(3).poly
    scaled = scale_u(L, a, b)
    for d1 in range(4):
        for d2 in range(4 - d1):
            part = homogeneous_part(L, {"u1": d1, "u2": d2})
            assert is_zero(homogeneous_part(scaled, {"u1": d1, "u2": d2}) - part.scale(a ** d1 * b ** d2))
