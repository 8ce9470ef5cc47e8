"""Covariant Taylor expansions, transport equations and the log density series.

A series is a :class:`Poly` in formal vector labels together with the list of variables and
a truncation order (total degree in those variables).  ``zeta`` denotes the logarithm of the
square root of the Van Vleck-Morette determinant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from .synge_engine import DEFAULT_CAP, OrderError, table_entry, trace_limit
from .tensor_expr import (
    Poly, count_label, covd, degree_in, homogeneous_part, is_zero, rename_labels,
    scale_labels, to_json_obj, to_latex, to_text, truncate_degree,
)


class InconsistentInitialData(ValueError):
    pass


@dataclass
class Series:
    """Truncated formal series; ``free`` is ``("mu",)`` for vector valued series."""

    poly: Poly
    variables: tuple
    order: int
    base: str = "z"

    @property
    def free(self) -> tuple:
        return self.poly.free

    def coefficient(self, degrees: dict) -> Poly:
        """Homogeneous part with the given degree in each variable (missing ones are 0)."""
        full = {v: degrees.get(v, 0) for v in self.variables}
        return homogeneous_part(self.poly, full)

    def degree(self, n: int) -> Poly:
        return self.poly.filter(lambda h, fs: degree_in(fs, self.variables) == n)

    def truncate(self, order: int) -> "Series":
        order = min(order, self.order)
        return Series(truncate_degree(self.poly, self.variables, order), self.variables, order, self.base)

    def __add__(self, o: "Series") -> "Series":
        order = min(self.order, o.order)
        vs = tuple(dict.fromkeys(self.variables + o.variables))
        p = truncate_degree(self.poly + o.poly, vs, order)
        return Series(p, vs, order, self.base)

    def __neg__(self) -> "Series":
        return Series(-self.poly, self.variables, self.order, self.base)

    def __sub__(self, o: "Series") -> "Series":
        return self + (-o)

    def scale(self, c) -> "Series":
        return Series(self.poly.scale(c), self.variables, self.order, self.base)

    def multidegrees(self) -> list:
        seen = set()
        for (_, fs) in self.poly.terms:
            seen.add(tuple(count_label(fs, v) for v in self.variables))
        return sorted(seen, key=lambda d: (sum(d), tuple(-x for x in d)))

    def to_json_obj(self) -> dict:
        return {
            "base": self.base,
            "variables": list(self.variables),
            "order": self.order,
            "free": list(self.free),
            "coefficients": [
                {"degree": list(d), "poly": to_json_obj(self.coefficient(dict(zip(self.variables, d))))}
                for d in self.multidegrees()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=1)

    def to_latex(self) -> str:
        lines = []
        for d in self.multidegrees():
            tag = ",".join(str(x) for x in d)
            lines.append(f"% degree ({tag})\n{to_latex(self.coefficient(dict(zip(self.variables, d))))}")
        return "\n".join(lines)

    def to_text(self) -> str:
        return to_text(self.poly)


ScalarSeries = Series
VectorSeries = Series


@dataclass
class TransportSpec:
    """Transport equation along the geodesic leaving the base point.

    On functions of ``z + u`` the transport operator reduces to the Euler operator in ``u``,
    so the equation reads ``n F_n = rhs(n, [F_0, ..., F_{n-1}])`` degree by degree."""

    name: str
    rhs: Callable[[int, list], Poly]
    initial: Poly
    operator: str = "D'"
    variable: str = "u"
    semi_recursive: bool = False
    meta: dict = field(default_factory=dict)


def sigma_trace_coefficient(n: int, u: str = "u") -> Poly:
    """Degree ``n`` coefficient of the trace of the second σ derivative along ``z + u``."""
    return rename_labels(trace_limit(("u",) * n), {"u": u}).scale(Fraction(1, math.factorial(n)))


def zeta_transport_spec(u: str = "u") -> TransportSpec:
    """``sigma^a zeta_a = (d - sigma^a_a) / 2`` written degree by degree."""
    from .tensor_expr import DIM

    def rhs(n: int, lower: list) -> Poly:
        r = sigma_trace_coefficient(n, u).scale(Fraction(-1, 2))
        if n == 0:
            r = r + Poly.factor(DIM, Fraction(1, 2))
        return r
    return TransportSpec("zeta", rhs, Poly({}), variable=u)


def half_density_transport_spec(u: str = "u") -> TransportSpec:
    """Square root of the Van Vleck-Morette determinant, semi-recursive form.

    ``n A_n = -1/2 sum_{k>=2} T_k A_{n-k}`` where ``T_k`` is the degree ``k`` part of the σ trace;
    the ``k = 0`` part cancels against the dimension and ``T_1`` vanishes."""
    from .tensor_expr import DIM

    def rhs(n: int, lower: list) -> Poly:
        if n == 0:
            return (Poly.factor(DIM) - sigma_trace_coefficient(0, u)).scale(Fraction(1, 2)) * lower[0]
        out = Poly({})
        for k in range(2, n + 1):
            out = out + sigma_trace_coefficient(k, u) * lower[n - k]
        return out.scale(Fraction(-1, 2))
    return TransportSpec("vvm_sqrt", rhs, Poly.scalar(1), variable=u, semi_recursive=True)


def solve_transport(tspec: TransportSpec, order: int, cap: int = DEFAULT_CAP) -> Series:
    if order > cap:
        raise OrderError(f"order {order} above cap {cap}")
    res0 = tspec.rhs(0, [tspec.initial])
    if res0 and not is_zero(res0):
        raise InconsistentInitialData(f"{tspec.name}: nonzero residual at order 0")
    coeffs = [tspec.initial]
    for n in range(1, order + 1):
        coeffs.append(tspec.rhs(n, coeffs).scale(Fraction(1, n)))
    total = Poly({})
    for c in coeffs:
        total = total + c
    return Series(total, (tspec.variable,), order)


@lru_cache(maxsize=None)
def _zeta_poly(order: int) -> Poly:
    return solve_transport(zeta_transport_spec(), order).poly


def zeta(order: int, u: str = "u") -> Series:
    """``zeta(z, z + u)``."""
    p = _zeta_poly(order)
    return Series(rename_labels(p, {"u": u}) if u != "u" else p, (u,), order)


def covariant_taylor(field_: Poly | Series, shift: str, order: int, variables: Sequence[str] = (),
                     cap: int = DEFAULT_CAP) -> Series:
    """``exp(shift . nabla)`` applied to a field, truncated at total degree ``order``.

    Formal vectors of the field are parallel; on symbol atoms the derivative is horizontal."""
    if order > cap:
        raise OrderError(f"order {order} above cap {cap}")
    if isinstance(field_, Series):
        p = field_.poly
        variables = tuple(dict.fromkeys(field_.variables + tuple(variables)))
    else:
        p = field_
    vs = tuple(dict.fromkeys(tuple(variables) + (shift,)))
    p = truncate_degree(p, vs, order)
    out = p
    cur = p
    k = 0
    while True:
        k += 1
        cur = truncate_degree(covd(cur, shift), vs, order)
        if not cur:
            break
        out = out + cur.scale(Fraction(1, math.factorial(k)))
    return Series(out, vs, order)


def zeta_shifted(order: int, u: str = "u", v: str = "v") -> Series:
    """``zeta(z + v, z + v + [[u]]^v)``: covariant Taylor series along ``v`` of ``zeta(z, z+u)``."""
    return covariant_taylor(zeta(order, u), v, order)


def zeta_symmetric(order: int, u: str = "u") -> Series:
    """``zeta(z - u, z + u)`` from the shifted series with ``v -> -u`` and ``u -> 2u``."""
    sh = zeta_shifted(order, "u", "v")
    p = scale_labels(sh.poly, {"u": 2, "v": -1})
    p = rename_labels(p, {"v": u, "u": u} if u != "u" else {"v": "u"})
    return Series(p, (u,), order)


def zeta_shifted_symmetric(order: int, u: str = "u", v: str = "v") -> Series:
    """``zeta(z + v - [[u]]^v, z + v + [[u]]^v)``."""
    return covariant_taylor(zeta_symmetric(order, u), v, order)


def geodesic_defect(order: int, u: str = "u", v: str = "v", head: str = "mu",
                    cap: int = DEFAULT_CAP) -> Series:
    """``delta(u, v)^mu = -sum_{m,n>=1} [sigma^mu_{(alpha' m)(beta' n)}] u^m v^n / (m! n!)``."""
    if order > cap:
        raise OrderError(f"order {order} above cap {cap}")
    out = Poly({}, ("mu",))
    for tot in range(2, order + 1):
        for m in range(1, tot):
            n = tot - m
            c = Fraction(-1, math.factorial(m) * math.factorial(n))
            out = out + table_entry(m, n).scale(c)
    mp = {}
    if u != "u" or v != "v":
        mp = {"u": "__u", "v": "__v"}
        out = rename_labels(out, mp)
        out = rename_labels(out, {"__u": u, "__v": v})
    if head != "mu":
        out = rename_labels(out, {"mu": head})
    out.free = (head,)
    return Series(out, (u, v), order)
