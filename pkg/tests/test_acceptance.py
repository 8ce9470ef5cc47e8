from __future__ import annotations

import subprocess
import sys
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoweyl import golden as G
from geoweyl.cov_expansion import zeta, zeta_shifted, zeta_shifted_symmetric, zeta_symmetric
from geoweyl.star_product import (
    check_adjoint, check_associativity, check_moyal, check_structure, check_unit_law, expansion_from_json_obj,
    laplace_expected, metric_symbol, quantize_polynomial, star_expansion, xi_coefficients,
)
from geoweyl.synge_engine import table_entry
from geoweyl.tensor_expr import Poly, is_zero, parse
from geoweyl.triangle_solver import (
    defect_on_solution, jacobian_det_expansion, lambda_components, lambda_factor, solve_triangle_system,
    triangle_residuals,
)


def fresh(code: str) -> tuple[str, float]:
    """Run ``code`` in a new interpreter so no cache from other tests is reused."""
    t = time.perf_counter()
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    return r.stdout, time.perf_counter() - t


def P(src):
    return parse(src, vectors=("u", "v"))


# 1 ---------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_coincidence_table_cold_under_one_minute():
    out, secs = fresh(
        "from geoweyl import golden as G\n"
        "from geoweyl.synge_engine import table_entry\n"
        "from geoweyl.tensor_expr import is_zero, parse\n"
        "print(all(is_zero(table_entry(*k) - parse(s, free=('mu',))) for k, s in G.TABLE.items()))\n")
    assert out.strip() == "True"
    assert secs < 60


@pytest.mark.criterion(1)
@pytest.mark.parametrize("key", sorted(G.TABLE))
def test_coincidence_table_entry(key):
    assert is_zero(table_entry(*key) - parse(G.TABLE[key], free=("mu",)))


# 2 ---------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_zeta_series():
    z = zeta(4)
    assert all(is_zero(z.degree(n) - P(s)) for n, s in G.ZETA.items())
    zs = zeta_symmetric(4)
    assert all(is_zero(zs.degree(n) - P(s)) for n, s in G.ZETA_SYMMETRIC.items())
    ss = zeta_shifted_symmetric(4)
    assert all(is_zero(ss.coefficient({"u": a, "v": b}) - P(s)) for (a, b), s in G.ZETA_SHIFTED_SYMMETRIC.items())


@pytest.mark.criterion(2)
def test_zeta_shifted_series_corrected():
    s = zeta_shifted(4)
    for (a, b), src in G.ZETA_SHIFTED_CORRECTED.items():
        assert is_zero(s.coefficient({"u": a, "v": b}) - P(src))


@pytest.mark.criterion(2)
@pytest.mark.xfail(strict=True, reason="printed u^2 v^2 coefficient 1/12 Ric[u,u;v,v]; computed 1/24 (see ledger)")
def test_zeta_shifted_series_literal():
    s = zeta_shifted(4)
    for (a, b), src in G.ZETA_SHIFTED.items():
        assert is_zero(s.coefficient({"u": a, "v": b}) - P(src))


@pytest.mark.criterion(2)
@given(st.sampled_from([1, 3, 5]))
@settings(max_examples=3, deadline=None)
def test_symmetric_zeta_odd_orders_vanish_through_six(n):
    assert is_zero(zeta_symmetric(6).degree(n))


# 3 ---------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_triangle_series_through_order_five():
    sol = solve_triangle_system(5)
    for name, entries, lin in (("v1", G.V1, [(1, "u1")]), ("v2", G.V2, [(1, "u2")]),
                               ("w", G.W, [(-1, "u1"), (1, "u2")]), ("w_tilde", G.W_TILDE, [(1, "u1"), (1, "u2")])):
        assert is_zero(getattr(sol, name) - G.vector(entries, lin)), name
    d = defect_on_solution(5)
    assert is_zero(d["plus_12"] - G.vector(G.DELTA_PLUS_12))
    assert is_zero(d["minus_12"] - G.vector(G.DELTA_MINUS_12))


@pytest.mark.criterion(3)
def test_triangle_residual_identically_zero():
    assert all(not r or is_zero(r) for r in triangle_residuals(5))


# 4 ---------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_jacobian_and_lambda_through_order_four():
    assert is_zero(jacobian_det_expansion(4).poly - G.build(G.LOG_JACOBIAN))
    assert is_zero(lambda_factor(4).poly - G.build(G.LOG_LAMBDA))
    assert is_zero(lambda_components(4)["minus_w_to_w_tilde"] - G.build(G.LOG_DELTA_MINUS_W_TO_W_TILDE))


# 5 ---------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_star_product_cold_under_ten_minutes():
    out, secs = fresh(
        "import json\n"
        "from geoweyl.star_product import expansion_to_json_obj, star_expansion\n"
        "print(json.dumps(expansion_to_json_obj(star_expansion(4))))\n")
    e = expansion_from_json_obj(__import__("json").loads(out))
    assert e.order == 4
    assert secs < 600


@pytest.mark.criterion(5)
@pytest.mark.parametrize("n", range(5))
def test_star_product_checked_reference(n):
    assert is_zero(star_expansion(4)[n] - parse(G.STAR_CHECKED[n]))


@pytest.mark.criterion(5)
@pytest.mark.xfail(strict=True, reason="printed sign of the hbar^3 R^b p_b group with one horizontal derivative (see ledger)")
def test_star_product_literal_order_three():
    assert is_zero(star_expansion(3)[3] - parse(G.STAR_SYMMETRIZED[3]))


# 6 ---------------------------------------------------------------------------


@pytest.mark.criterion(6)
def test_moyal_reduction_through_four():
    assert check_moyal(4) == [True] * 5


@pytest.mark.criterion(6)
def test_unit_law_and_adjoint():
    assert check_unit_law(4)
    assert check_adjoint(4)


@pytest.mark.criterion(6)
def test_associativity_through_three():
    assert check_associativity(3) == [True] * 4


@pytest.mark.criterion(6)
def test_structure_identities_on_every_term():
    assert check_structure(star_expansion(4)) == []


# 7 ---------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_quadratic_symbol_symbolic_tau():
    q = quantize_polynomial(metric_symbol())
    explicit = parse("-hbar^2*h!(d0,d0|) + 1/6*hbar^2*Rs[]*h!(|)")
    assert is_zero(laplace_expected() - explicit)
    assert is_zero(q.expression - explicit)
    # the individual pieces depend on tau; only their sum is tau independent
    assert any(f[0] == "tau" for _, piece in q.pieces for _, fs in piece.terms for f in fs)
    for t in (0, "1/2", 1):
        assert is_zero(q.at_tau(t) - explicit)


@pytest.mark.criterion(7)
def test_xi_values():
    t = xi_coefficients(2)
    assert t.raw[(0, 0)] == Poly.scalar(1)
    assert not t.raw[(1, 0)]
    assert is_zero(t.raw[(2, 0)] - parse("-1/6*Ric[x,x]", vectors=("x",)))


# 8 ---------------------------------------------------------------------------

NUMERIC = [
    ("trace-flat-torus", 1e-6), ("trace-sphere-2", 1e-4), ("round-trip-flat-torus", 1e-6),
    ("round-trip-sphere-2", 1e-6), ("laplace-sphere-2", 1e-4), ("jacobian-sphere-2", 1e-5),
    ("vvm-sphere", 1e-6),
]


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name,tol", NUMERIC)
def test_numeric_experiment(numeric_reports, name, tol):
    r = numeric_reports[name]
    assert r.tolerance == tol
    assert r.rel_error < tol
    assert r.seconds < 300


@pytest.mark.criterion(8)
def test_trace_resolution_doubling(numeric_reports):
    for name in ("trace-flat-torus", "trace-sphere-2"):
        n, m = numeric_reports[name].resolution_pair
        assert m == 2 * n


# 9 ---------------------------------------------------------------------------


@pytest.mark.criterion(9)
@pytest.mark.parametrize("name", ["scaling-zeta-1", "scaling-zeta-3", "scaling-zeta-5", "scaling-defect-2",
                                  "scaling-defect-4"])
def test_order_scaling_on_sphere(numeric_reports, name):
    r = numeric_reports[name]
    lo, hi = r.resolution_pair
    assert hi / lo >= 10 * (1 - 1e-9)
    assert abs(r.lhs - r.rhs) < 0.3
