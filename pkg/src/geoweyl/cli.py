"""Command line front end: ``geoweyl <command> [options]``.

Data goes to stdout, progress lines to stderr.  Exit codes: 0 success, 1 failed check,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import TextIO

FORMATS = ("text", "latex", "json")
CHECKS = ("structure", "moyal", "assoc", "adjoint", "golden")
SERIES = ("zeta", "zeta-shifted", "zeta-symmetric", "zeta-shifted-symmetric", "defect",
          "triangle", "jacobian", "lambda")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geoweyl", description="Geodesic Weyl calculus: symbolic expansions and numeric checks.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, order_default=None):
        sp.add_argument("--order", type=int, default=order_default, help="truncation order")
        sp.add_argument("--format", choices=FORMATS, default="text")

    sp = sub.add_parser("limits", help="coincidence limits of sigma derivatives")
    sp.add_argument("--max", type=int, default=5, help="largest total number of primed derivatives")
    sp.add_argument("--format", choices=FORMATS, default="text")

    sp = sub.add_parser("expand", help="covariant expansions and triangle series")
    sp.add_argument("series", choices=SERIES)
    common(sp, 4)

    sp = sub.add_parser("star", help="star product (a * b)_n")
    common(sp, 2)
    sp.add_argument("--check", action="append", choices=CHECKS, default=[])

    sp = sub.add_parser("quantize", help="quantization of g^{mu nu} p_mu p_nu and the xi table")
    common(sp, 2)
    sp.add_argument("--tau", default=None, help="numeric tau; symbolic when omitted")

    sp = sub.add_parser("verify", help="run property and reference checks")
    sp.add_argument("--check", action="append", choices=CHECKS, required=True)
    sp.add_argument("--order", type=int, default=3)

    sp = sub.add_parser("numeric", help="numeric experiments on a model manifold")
    sp.add_argument("--model", default="sphere-2")
    sp.add_argument("--config", default=None, help="key = value file")
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--hbar", type=float, default=None)
    sp.add_argument("--experiment", action="append", default=[], help="restrict to named experiments")
    sp.add_argument("--format", choices=FORMATS, default="json")
    return p


def threads() -> int:
    raw = os.environ.get("GEOWEYL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"GEOWEYL_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("GEOWEYL_THREADS must be a positive integer")
    return n


def _frac(s: str):
    from fractions import Fraction
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot read {s!r} as a rational number") from None


# ---------------------------------------------------------------- emitters


def _emit_poly_map(items: list[tuple[str, object]], fmt: str, out: TextIO) -> None:
    from .tensor_expr import to_json_obj, to_latex, to_text
    if fmt == "json":
        json.dump({k: to_json_obj(p) for k, p in items}, out, indent=1, sort_keys=True)
        out.write("\n")
        return
    for k, p in items:
        if fmt == "latex":
            out.write(f"{k} &= {to_latex(p)} \\\\\n")
        else:
            out.write(f"{k} = {to_text(p)}\n")


def cmd_limits(a, out, err) -> int:
    from .synge_engine import table_entry
    if a.max < 0:
        raise UsageError("--max must be >= 0")
    items = []
    for tot in range(2, a.max + 1):
        err.write(f"limits: order {tot}\n")
        for m in range(tot, -1, -1):
            key = f"[sigma^mu_({m})({tot - m})]"
            items.append((key, table_entry(m, tot - m)))
    _emit_poly_map(items, a.format, out)
    return 0


def _series(name: str, order: int):
    from . import cov_expansion as ce
    from . import triangle_solver as ts
    if name == "zeta":
        return [("zeta", ce.zeta(order))]
    if name == "zeta-shifted":
        return [("zeta_shifted", ce.zeta_shifted(order))]
    if name == "zeta-symmetric":
        return [("zeta_symmetric", ce.zeta_symmetric(order))]
    if name == "zeta-shifted-symmetric":
        return [("zeta_shifted_symmetric", ce.zeta_shifted_symmetric(order))]
    if name == "defect":
        return [("delta", ce.geodesic_defect(order))]
    if name == "triangle":
        sol = ts.solve_triangle_system(order)
        return [(n, sol.series(n)) for n in ("v1", "v2", "w", "w_tilde")]
    if name == "jacobian":
        return [("log_jacobian", ts.jacobian_det_expansion(order))]
    return [("log_lambda", ts.lambda_factor(order))]


def cmd_expand(a, out, err) -> int:
    if a.order < 0:
        raise UsageError("--order must be >= 0")
    err.write(f"expand: {a.series} through order {a.order}\n")
    items = _series(a.series, a.order)
    if a.format == "json":
        json.dump({k: s.to_json_obj() for k, s in items}, out, indent=1, sort_keys=True)
        out.write("\n")
    for k, s in items if a.format != "json" else ():
        out.write(f"% {k}\n{s.to_latex()}\n" if a.format == "latex" else f"{k} = {s.to_text()}\n")
    return 0


def _star(order: int, err):
    from .star_product import star_expansion
    for n in range(order + 1):
        e = star_expansion(n)
        err.write(f"star: order {n} done\n")
    return e


def cmd_star(a, out, err) -> int:
    from .star_product import expansion_to_json_obj, expansion_to_latex, expansion_to_text
    if a.order < 0:
        raise UsageError("--order must be >= 0")
    e = _star(a.order, err)
    if a.format == "json":
        json.dump(expansion_to_json_obj(e), out, indent=1, sort_keys=True)
        out.write("\n")
    else:
        out.write((expansion_to_latex(e) if a.format == "latex" else expansion_to_text(e)) + "\n")
    return _run_checks(a.check, a.order, out, err) if a.check else 0


def cmd_quantize(a, out, err) -> int:
    from .star_product import laplace_expected, metric_symbol, quantize_polynomial, xi_coefficients
    from .tensor_expr import is_zero, to_json_obj, to_latex, to_text
    if a.order < 0:
        raise UsageError("--order must be >= 0")
    tau = None if a.tau is None else _frac(a.tau)
    q = quantize_polynomial(metric_symbol(), tau)
    op = q.expression
    xi = xi_coefficients(max(a.order, 2))
    items = [("Op(g pp) h", op)] + [(f"xi_{n}", xi.weyl(n)) for n in range(a.order + 1)]
    if a.format == "json":
        doc = {k: to_json_obj(p) for k, p in items}
        doc["matches_laplace"] = bool(is_zero(op - laplace_expected()))
        json.dump(doc, out, indent=1, sort_keys=True)
        out.write("\n")
    else:
        for k, p in items:
            out.write(f"{k} = {to_latex(p) if a.format == 'latex' else to_text(p)}\n")
    return 0


# ---------------------------------------------------------------- checks


def _diff(out, title: str, expected, computed) -> None:
    from .tensor_expr import normal_form, to_text
    out.write(f"FAIL {title}\n")
    out.write(f"- expected: {to_text(expected)}\n")
    out.write(f"+ computed: {to_text(computed)}\n")
    out.write(f"  computed - expected: {to_text(normal_form(computed - expected))}\n")


def _golden(order: int, out, err) -> bool:
    from . import golden as G
    from .cov_expansion import zeta
    from .synge_engine import table_entry
    from .tensor_expr import is_zero, parse
    ok = True

    def check(title, computed, expected):
        nonlocal ok
        if is_zero(computed - expected):
            out.write(f"ok   {title}\n")
        else:
            ok = False
            _diff(out, title, expected, computed)
    for (m, n), src in sorted(G.TABLE.items()):
        if m + n <= min(order + 1, 5):
            check(f"limit ({m},{n})", table_entry(m, n), parse(src, free=("mu",)))
    z = zeta(min(order, 4))
    for n, src in sorted(G.ZETA.items()):
        if n <= order:
            check(f"zeta order {n}", z.degree(n), parse(src))
    e = _star(min(order, 4), err)
    for n in range(e.order + 1):
        check(f"star order {n}", e[n], parse(G.STAR_CHECKED[n]))
    return ok


def _run_checks(checks, order: int, out, err) -> int:
    from . import star_product as sp
    from .tensor_expr import normal_form, to_text
    failed = False
    for c in checks:
        err.write(f"verify: {c} through order {order}\n")
        if c == "golden":
            good = _golden(order, out, err)
        elif c == "structure":
            bad = sp.check_structure(_star(order, err))
            for item in bad:
                out.write(f"FAIL structure {item}\n")
            good = not bad
        elif c == "moyal":
            res = sp.check_moyal(order)
            e = _star(order, err)
            for n, r in enumerate(res):
                if not r:
                    _diff(out, f"moyal order {n}", sp.moyal_term(n), sp.drop_curvature(e[n]))
            good = all(res)
        elif c == "assoc":
            res = sp.check_associativity(order)
            for n, r in enumerate(res):
                if not r:
                    out.write(f"FAIL associativity order {n}\n")
            good = all(res)
        else:
            good = sp.check_adjoint(order)
            if not good:
                e = _star(order, err)
                for n in range(order + 1):
                    d = sp.conjugate(sp.swap_atoms(e[n])) - e[n]
                    out.write(f"FAIL adjoint order {n}: {to_text(normal_form(d))}\n")
        out.write(f"{'PASS' if good else 'FAIL'} {c}\n")
        failed |= not good
    return 1 if failed else 0


def cmd_verify(a, out, err) -> int:
    if a.order < 0:
        raise UsageError("--order must be >= 0")
    return _run_checks(a.check, a.order, out, err)


def cmd_numeric(a, out, err) -> int:
    from . import numeric_manifolds as nm
    if a.model not in nm.MODELS:
        raise UsageError(f"unknown model {a.model!r}; choose from {', '.join(nm.MODELS)}")
    try:
        cfg = nm.load_config(a.config)
    except (OSError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from None
    if a.tau is not None:
        cfg["tau"] = a.tau
    if a.hbar is not None:
        if a.hbar <= 0:
            raise UsageError("--hbar must be positive")
        cfg["hbar"] = cfg["torus_hbar"] = a.hbar
    exps = nm.experiments_for(a.model, cfg)
    if a.experiment:
        names = {n for n, _ in exps}
        unknown = set(a.experiment) - names
        if unknown:
            raise UsageError(f"unknown experiment(s) {sorted(unknown)}; available: {sorted(names)}")
        exps = [(n, f) for n, f in exps if n in a.experiment]

    def run_one(item):
        name, fn = item
        err.write(f"numeric: {a.model} {name}\n")
        return fn()
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        reports = list(pool.map(run_one, exps))
    if a.format == "json":
        out.write(nm.reports_to_json(reports) + "\n")
    else:
        for r in reports:
            out.write(f"{'PASS' if r.passed else 'FAIL'} {r.experiment} rel_error={r.rel_error:.3e} "
                      f"tol={r.tolerance:g}\n")
    failed = [r for r in reports if not r.passed]
    for r in failed:
        err.write(f"FAIL {r.experiment}: lhs={r.lhs!r} rhs={r.rhs!r} rel_error={r.rel_error:.3e}\n")
    return 1 if failed else 0


COMMANDS = {"limits": cmd_limits, "expand": cmd_expand, "star": cmd_star, "quantize": cmd_quantize,
            "verify": cmd_verify, "numeric": cmd_numeric}


def run(argv=None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        try:
            a = parser.parse_args(argv)
        except SystemExit as exc:  # --help
            return int(exc.code or 0)
        if a.command is None:
            raise UsageError("a command is required")
        threads()
        return COMMANDS[a.command](a, out, err)
    except UsageError as exc:
        err.write(f"error: {exc}\n\n")
        err.write(parser.format_help())
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
