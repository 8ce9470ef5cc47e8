from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoweyl.numeric_manifolds import (
    CutoffSpec, GaussianSymbol, GeodesicError, LogMapError, Report, curvature_tensors, evaluate_poly,
    exp_map, experiments_for, geodesic_distance, hs_trace_check, load_config, log_map, make_chart,
    measure_jacobian, measure_jacobian_expected, midpoint_vvm, parallel_transport, reports_to_json,
    synge_sigma, vvm_det,
)
from geoweyl.star_product import xi_coefficients

CURVED = ("sphere-2", "hyperbolic-2")
coord = st.floats(-0.4, 0.4)
point = st.tuples(coord, coord).map(np.array)


@pytest.mark.parametrize("model", CURVED)
def test_closed_form_matches_ode(model):
    c = make_chart(model)
    x, u, T = np.array([0.1, -0.2]), np.array([0.3, 0.25]), np.array([0.4, -0.1])
    assert np.allclose(exp_map(c, x, u), exp_map(c, x, u, method="ode"), atol=1e-10)
    y = exp_map(c, x, u)
    assert np.allclose(log_map(c, x, y, method="ode"), u, atol=1e-9)
    assert np.allclose(parallel_transport(c, x, u, T), parallel_transport(c, x, u, T, method="ode"), atol=1e-9)


@pytest.mark.parametrize("model", CURVED)
def test_christoffel_matches_finite_differences(model):
    c = make_chart(model)
    x = np.array([0.2, -0.35])
    assert np.allclose(c.christoffel(x), c.christoffel_fd(x), atol=1e-8)


@given(point, point)
@settings(max_examples=15, deadline=None)
def test_exp_log_inverse(x, y):
    c = make_chart("sphere-2")
    assert np.allclose(exp_map(c, x, log_map(c, x, y)), y, atol=1e-10)


@given(point, point, st.sampled_from(CURVED))
@settings(max_examples=15, deadline=None)
def test_sigma_and_vvm_symmetric(x, y, model):
    c = make_chart(model)
    assert math.isclose(synge_sigma(c, x, y), synge_sigma(c, y, x), rel_tol=1e-9, abs_tol=1e-14)
    if np.linalg.norm(x - y) > 1e-2:
        assert math.isclose(vvm_det(c, x, y), vvm_det(c, y, x), rel_tol=1e-7)


@given(point, point, st.floats(0, 1))
@settings(max_examples=10, deadline=None)
def test_midpoint_vvm_is_tau_independent(x, y, tau):
    c = make_chart("sphere-2")
    if np.linalg.norm(x - y) < 1e-2:
        return
    assert math.isclose(midpoint_vvm(c, x, y, tau), vvm_det(c, x, y), rel_tol=1e-7)


@given(st.floats(0.1, 2.0), st.floats(0.05, 1.0), st.floats(0, 5))
def test_cutoff_bounds(r1, gap, d):
    cut = CutoffSpec(r1, r1 + gap)
    val = float(cut(d))
    assert 0.0 <= val <= 1.0
    if d <= r1:
        assert val == 1.0
    if d >= r1 + gap:
        assert val == 0.0


def test_cutoff_validation():
    with pytest.raises(ValueError):
        CutoffSpec(1.0, 0.5)
    with pytest.raises(ValueError):
        make_chart("flat-torus", cutoff=CutoffSpec(2.5, 3.0))
    with pytest.raises(ValueError):
        make_chart("klein-bottle")


def test_log_map_guard_near_antipode():
    c = make_chart("sphere-2")
    with pytest.raises(LogMapError):
        log_map(c, np.array([0.0, 0.0]), np.array([20.0, 0.0]))


def test_exp_map_leaving_domain():
    with pytest.raises(GeodesicError):
        exp_map(make_chart("hyperbolic-2", domain=0.5), np.zeros(2), np.array([3.0, 0.0]))


def test_sphere_distance_is_angle():
    c = make_chart("sphere-2", radius=2.0)
    # stereographic radius tan(theta/2) sits at polar angle theta from the origin
    th = 1.1
    assert math.isclose(geodesic_distance(c, np.zeros(2), np.array([math.tan(th / 2), 0.0])), 2.0 * th, rel_tol=1e-12)


@pytest.mark.parametrize("method", ["closed", "ode"])
def test_octant_holonomy(method):
    # the triangle pole, (1,0), (0,1) bounds an eighth of the unit sphere, area pi/2
    c = make_chart("sphere-2")
    verts = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    T = np.array([0.3, 0.0])
    for a, b in zip(verts, verts[1:] + verts[:1]):
        T = parallel_transport(c, a, log_map(c, a, b), T, method=method)
    ang = math.atan2(T[1], T[0])
    assert math.isclose(abs(ang), math.pi / 2, abs_tol=1e-8)
    assert math.isclose(np.linalg.norm(T), 0.3, rel_tol=1e-9)


@pytest.mark.parametrize("model", ["euclidean", "sphere-2", "hyperbolic-2"])
def test_measure_jacobian_single_pair(model):
    c = make_chart(model)
    x, y = np.array([0.1, -0.2]), np.array([0.35, 0.3])
    lhs = measure_jacobian(c, x, y, 0.25)
    assert math.isclose(lhs, measure_jacobian_expected(c, x, y, 0.25), rel_tol=1e-7)


def test_half_density_series_against_numerics():
    # truncation 2 leaves a t^4 error; truncation 4 leaves t^6 because the odd term vanishes
    c = make_chart("sphere-2")
    table = xi_coefficients(4)
    z = np.array([0.1, -0.05])
    f = math.sqrt(float(c.conformal(z)))
    ten = curvature_tensors(c)
    dx = np.array([0.6, 0.8]) / f
    dy = np.array([-0.3, 0.9]) / np.linalg.norm([-0.3, 0.9]) / f
    ts = np.geomspace(0.05, 0.5, 6)
    for upto, nominal in ((2, 4), (4, 6)):
        errs = []
        for t in ts:
            x, y = t * dx, t * dy
            ser = sum(np.real(evaluate_poly(p, ten, {"x": f * x, "y": f * y})) / math.factorial(m) / math.factorial(n)
                      for (m, n), p in table.raw.items() if m + n <= upto)
            exact = vvm_det(c, exp_map(c, z, x), exp_map(c, z, y)) ** -0.5
            errs.append(abs(exact - ser))
        k = np.polyfit(np.log(ts), np.log(errs), 1)[0]
        assert abs(k - nominal) < 0.3


def test_gaussian_fourier_transform_against_quadrature():
    c = make_chart("sphere-2")
    b = GaussianSymbol(lambda z: 1.3, 0.8, lambda z: np.array([0.2, -0.1]))
    z, u, hbar = np.array([0.2, 0.1]), np.array([0.05, -0.02]), 0.5
    g = np.linspace(-30, 30, 601)
    P = np.stack(np.meshgrid(g, g, indexing="ij"), -1)
    vals = b(c, z, P) * np.exp(-1j * (P @ u) / hbar)
    num = vals.sum() * (g[1] - g[0]) ** 2 / (2 * math.pi * hbar) ** 2
    assert abs(num - b.fourier(c, z, u, hbar)) < 1e-10


def test_trace_identity_small_grid_on_plane():
    c = make_chart("euclidean")
    a = GaussianSymbol(lambda z: np.exp(-np.sum(z * z, -1)), 1.0)
    b = GaussianSymbol(lambda z: np.exp(-np.sum((z - 0.1) ** 2, -1)), 1.3)
    lhs, rhs = hs_trace_check(c, a, b, 0.5, 0.4, 24, 2.5)
    assert abs(lhs - rhs) < 1e-3 * abs(rhs)


def test_config_loading(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("hbar = 0.25\ngrid = 12\nlabel = demo\n")
    cfg = load_config(str(f))
    assert cfg["hbar"] == 0.25 and cfg["grid"] == 12 and cfg["label"] == "demo"
    assert cfg["tau"] == 0.5
    assert len(experiments_for("flat-torus", cfg)) == 2


def test_report_json_round_trip():
    r = Report("x", 1 + 2j, 0.5, 1e-7, [8, 16], 1e-6, True, 3.2, {"k": [1.0]})
    doc = json.loads(reports_to_json([r]))
    assert doc == [{"experiment": "x", "lhs": [1.0, 2.0], "rhs": 0.5, "rel_error": 1e-7,
                    "resolution_pair": [8, 16], "tolerance": 1e-6, "passed": True, "extra": {"k": [1.0]}}]


def test_default_suite_passes(numeric_reports):
    failed = {k: r.rel_error for k, r in numeric_reports.items() if not r.passed}
    assert not failed
