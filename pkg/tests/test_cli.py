from __future__ import annotations

import io
import json
import os
import subprocess
import sys

import pytest

from geoweyl import golden as G
from geoweyl.cli import run
from geoweyl.star_product import expansion_from_json_obj, star_expansion
from geoweyl.synge_engine import table_entry
from geoweyl.tensor_expr import from_json, is_zero


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_limits_latex():
    code, out, err = call("limits", "--max", "5", "--format", "latex")
    assert code == 0
    assert out.count("\\\\\n") == sum(n + 1 for n in range(2, 6))
    assert "limits: order 5" in err and "limits" not in out


def test_star_first_order_text():
    code, out, _ = call("star", "--order", "1", "--format", "text")
    assert code == 0
    assert "(a*b)_1 = -1/2i*a(|d0)*b(d0|) + 1/2i*a(d0|)*b(|d0)" in out


def test_verify_golden_order_four():
    code, out, err = call("verify", "--check", "golden", "--order", "4")
    assert code == 0, out
    assert out.rstrip().endswith("PASS golden")
    assert "FAIL" not in out and "star: order" in err


def test_failed_check_exits_one_with_diff(monkeypatch):
    wrong = dict(G.STAR_CHECKED)
    wrong[1] = "1/2*i*a(k|)*b(|k)"
    monkeypatch.setattr(G, "STAR_CHECKED", wrong)
    code, out, _ = call("verify", "--check", "golden", "--order", "1")
    assert code == 1
    assert "FAIL star order 1" in out and "- expected:" in out and "+ computed:" in out


@pytest.mark.parametrize("argv", [
    ["frobnicate"], [], ["star", "--order", "x"], ["verify"], ["numeric", "--model", "klein"],
    ["numeric", "--experiment", "nope"], ["quantize", "--tau", "1/0"], ["limits", "--max", "-1"],
])
def test_usage_errors_exit_two_with_help(argv):
    code, out, err = call(*argv)
    assert code == 2 and out == ""
    assert "error:" in err and "usage: geoweyl" in err


@pytest.mark.parametrize("value", ["zero", "0", "-3"])
def test_bad_thread_setting_is_usage_error(monkeypatch, value):
    monkeypatch.setenv("GEOWEYL_THREADS", value)
    code, _, err = call("limits", "--max", "2")
    assert code == 2 and "GEOWEYL_THREADS" in err


def test_star_json_round_trip():
    code, out, _ = call("star", "--order", "2", "--format", "json")
    assert code == 0
    e = expansion_from_json_obj(json.loads(out))
    ref = star_expansion(2)
    assert all(e[n] == ref[n] for n in range(3))


def test_limits_json_round_trip():
    _, out, _ = call("limits", "--max", "3", "--format", "json")
    doc = json.loads(out)
    assert set(doc) == {f"[sigma^mu_({m})({t - m})]" for t in (2, 3) for m in range(t + 1)}
    assert is_zero(from_json(doc["[sigma^mu_(2)(1)]"]) - table_entry(2, 1))


def test_quantize_symbolic_tau():
    code, out, _ = call("quantize", "--format", "json")
    assert code == 0 and json.loads(out)["matches_laplace"] is True
    _, text, _ = call("quantize", "--tau", "1/3")
    assert text.startswith("Op(g pp) h = -hbar^2*h!(d0,d0|) + 1/6*hbar^2*Rs[]*h!(|)")


def test_expand_json():
    code, out, _ = call("expand", "zeta", "--order", "3", "--format", "json")
    assert code == 0 and json.loads(out)["zeta"]["order"] == 3


def test_output_is_byte_deterministic_across_hash_seeds():
    outs = []
    for seed in ("1", "777"):
        env = dict(os.environ, PYTHONHASHSEED=seed)
        r = subprocess.run([sys.executable, "-m", "geoweyl.cli", "star", "--order", "2", "--format", "json"],
                           capture_output=True, env=env, check=True)
        outs.append(r.stdout)
    assert outs[0] == outs[1]


def test_numeric_subset_text_and_threads(monkeypatch):
    monkeypatch.setenv("GEOWEYL_THREADS", "2")
    code, out, err = call("numeric", "--model", "sphere-2", "--experiment", "jacobian", "--experiment", "vvm",
                          "--format", "text")
    assert code == 0
    assert out.splitlines()[0].startswith("PASS jacobian-sphere-2")
    assert "numeric: sphere-2 vvm" in err and "numeric:" not in out


def test_numeric_json_is_deterministic():
    a = call("numeric", "--model", "euclidean", "--experiment", "jacobian")[1]
    b = call("numeric", "--model", "euclidean", "--experiment", "jacobian")[1]
    assert a == b and json.loads(a)[0]["experiment"] == "jacobian-euclidean"
