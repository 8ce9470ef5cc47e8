"""Perturbative solution of the four geodesic triangles and the geometric factor Lambda.

All series are in the formal vectors ``u1`` and ``u2`` and are truncated by total degree.
Vector valued series carry the free index ``mu``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .cov_expansion import (
    Series, geodesic_defect, zeta, zeta_shifted_symmetric, zeta_symmetric,
)
from .tensor_expr import (
    Poly, contract_labels, count_label, gf, is_zero, rename_labels, scale_labels,
    substitute, truncate_degree, vector_deriv,
)

U = ("u1", "u2")


class ConvergenceError(RuntimeError):
    pass


def vec(label: str) -> Poly:
    """The vector ``label`` as a series with free index ``mu``."""
    return Poly.from_raw([(1, (gf("mu", label),))], free=("mu",))


def compose(p: Poly, mapping: dict, order: int) -> Poly:
    """Substitute series in ``u1, u2`` for the vector labels of ``p``, truncated at ``order``."""
    out = substitute(p, mapping, slot="mu", max_order=order, order_labels=U)
    out.free = p.free
    return out


@lru_cache(maxsize=None)
def defect_parity_split(order: int) -> tuple[Poly, Poly]:
    """``delta_+`` and ``delta_-`` in the labels ``u, v``: even and odd parts in ``u``."""
    d = geodesic_defect(order).poly
    plus = d.filter(lambda h, fs: count_label(fs, "u") % 2 == 0)
    minus = d.filter(lambda h, fs: count_label(fs, "u") % 2 == 1)
    plus.free = minus.free = ("mu",)
    return plus, minus


@dataclass
class TriangleSolution:
    v1: Poly
    v2: Poly
    w: Poly
    w_tilde: Poly
    order: int
    iterations: int

    def series(self, name: str) -> Series:
        return Series(getattr(self, name), U, self.order)


def _delta_at(d: Poly, a, b, order: int) -> Poly:
    return compose(d, {"u": a, "v": b}, order)


@lru_cache(maxsize=None)
def solve_triangle_system(order: int) -> TriangleSolution:
    """Fixed point iteration of the closed form relations for ``v1, v2, w, w~``.

    Each sweep fixes one more total degree, so ``order`` sweeps must reach a fixed point."""
    dp, dm = defect_parity_split(order)
    u1, u2 = vec("u1"), vec("u2")
    v1, v2 = u1, u2
    it = 0
    for it in range(1, order + 2):
        n1 = u1 + _delta_at(dm, u1, v2, order) - _delta_at(dp, u2, v1, order)
        n2 = u2 - _delta_at(dp, u1, v2, order) + _delta_at(dm, u2, v1, order)
        done = n1 == v1 and n2 == v2
        v1, v2 = n1, n2
        if done:
            break
    else:
        raise ConvergenceError("triangle iteration did not stabilize")
    x1 = _delta_at(dm, u1, v2, order)
    x2 = _delta_at(dm, u2, v1, order)
    w = (u2 - u1) - x1 + x2
    wt = u1 + u2 + x1 + x2
    for p in (v1, v2, w, wt):
        p.free = ("mu",)
    return TriangleSolution(v1, v2, w, wt, order, it)


def exchange(p: Poly) -> Poly:
    """Swap ``u1`` and ``u2``."""
    return rename_labels(rename_labels(p, {"u1": "__t"}), {"u2": "u1", "__t": "u2"}, free=p.free)


def defect_on_solution(order: int) -> dict:
    """``delta_pm(u1, v2)`` and ``delta_pm(u2, v1)`` as series in ``u1, u2``."""
    sol = solve_triangle_system(order)
    dp, dm = defect_parity_split(order)
    u1, u2 = vec("u1"), vec("u2")
    return {
        "plus_12": _delta_at(dp, u1, sol.v2, order),
        "minus_12": _delta_at(dm, u1, sol.v2, order),
        "plus_21": _delta_at(dp, u2, sol.v1, order),
        "minus_21": _delta_at(dm, u2, sol.v1, order),
    }


def triangle_residuals(order: int) -> list[Poly]:
    """Residuals of the four triangle relations written with the full defect."""
    sol = solve_triangle_system(order)
    d = geodesic_defect(order).poly
    u1, u2 = vec("u1"), vec("u2")
    m1, m2 = u1.scale(-1), u2.scale(-1)
    res = [
        sol.w - (m1 + sol.v2 + _delta_at(d, m1, sol.v2, order)),
        -sol.w - (m2 + sol.v1 + _delta_at(d, m2, sol.v1, order)),
        sol.w_tilde - (u2 + sol.v1 + _delta_at(d, u2, sol.v1, order)),
        sol.w_tilde - (u1 + sol.v2 + _delta_at(d, u1, sol.v2, order)),
    ]
    return [truncate_degree(r, U, order) for r in res]


# ---------------------------------------------------------------- Jacobian


def _jacobian_blocks(order: int) -> dict:
    """``A[i, j]^mu_nu = d X_i^mu / d u_j^nu`` with ``X_1 = delta_-(u1, v2)`` and
    ``X_2 = delta_-(u2, v1)``; degrees kept up to ``order`` after differentiation."""
    sol = solve_triangle_system(order + 1)
    _, dm = defect_parity_split(order + 1)
    u1, u2 = vec("u1"), vec("u2")
    X = {1: _delta_at(dm, u1, sol.v2, order + 1), 2: _delta_at(dm, u2, sol.v1, order + 1)}
    A = {}
    for i in (1, 2):
        for j in (1, 2):
            A[i, j] = vector_deriv(X[i], f"u{j}", "nu")
            A[i, j].free = ("mu", "nu")
    return A


def _block_mul(A: dict, B: dict, order: int) -> dict:
    C = {}
    for i in (1, 2):
        for k in (1, 2):
            acc = Poly({}, ("mu", "nu"))
            for j in (1, 2):
                a = rename_labels(A[i, j], {"nu": "__m"})
                b = rename_labels(B[j, k], {"mu": "__n"})
                prod = truncate_degree(a * b, U, order)
                acc = acc + contract_labels(prod, "__m", "__n", free=("mu", "nu"))
            C[i, k] = acc
    return C


def _block_trace(A: dict) -> Poly:
    out = Poly({})
    for i in (1, 2):
        out = out + contract_labels(A[i, i], "mu", "nu", free=())
    return out


def _min_degree(A: dict) -> int:
    ds = [sum(count_label(fs, x) for x in U) for blk in A.values() for (_, fs) in blk.terms]
    return min(ds) if ds else 10 ** 6


@lru_cache(maxsize=None)
def jacobian_det_expansion(order: int) -> Series:
    """``log(2^-d |d(w, w~)/d(u1, u2)|) = log det(1 + A) = sum_k (-1)^(k+1)/k tr A^k``."""
    A = _jacobian_blocks(order)
    out = Poly({})
    power = A
    k = 1
    while power and _min_degree(power) <= order:
        out = out + truncate_degree(_block_trace(power), U, order).scale(Fraction((-1) ** (k + 1), k))
        power = _block_mul(power, A, order)
        k += 1
    return Series(out, U, order)


# ---------------------------------------------------------------- Lambda


def lambda_components(order: int) -> dict:
    """The logarithms of the five factors of Lambda as series in ``u1, u2``."""
    sol = solve_triangle_system(order)
    u1, u2 = vec("u1"), vec("u2")
    zss = zeta_shifted_symmetric(order).poly
    zsym = zeta_symmetric(order).poly
    z = zeta(order).poly
    return {
        "jacobian": jacobian_det_expansion(order).poly,
        "minus_w_to_w_tilde": compose(zss, {"u": u1, "v": sol.v2}, order),
        "w_to_w_tilde": compose(zss, {"u": u2, "v": sol.v1}, order),
        "minus_w_to_w": compose(zsym, {"u": sol.w}, order),
        "z_to_w_tilde": compose(z, {"u": sol.w_tilde}, order),
    }


@lru_cache(maxsize=None)
def lambda_factor(order: int) -> Series:
    """``log Lambda``; the factor ``Delta(z, z + w~)`` enters with power ``-1``, i.e. ``-2 zeta``."""
    c = lambda_components(order)
    out = (c["jacobian"] + c["minus_w_to_w_tilde"] + c["w_to_w_tilde"]
           - c["minus_w_to_w"] - c["z_to_w_tilde"].scale(2))
    return Series(out, U, order)


def is_exchange_symmetric(p: Poly, sign: int = 1) -> bool:
    return is_zero(exchange(p) - p.scale(sign))


def scale_u(p: Poly, a, b) -> Poly:
    return scale_labels(p, {"u1": a, "u2": b})
