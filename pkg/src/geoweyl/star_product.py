"""Asymptotic expansion of the balanced geodesic star product and related symbol calculus.

Terms are graded by the power of hbar stored in each monomial key.  Momentum factors coming
from the phase carry grade -1 and every Wick pairing adds +1, so during assembly the grade of
a monomial is ``hbar + degree in (u1, u2)``, which equals its final hbar order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .cov_expansion import geodesic_defect, zeta_shifted
from .tensor_expr import (
    CURV, GQ, TAU, Poly, Ff, contract_labels, count_label, covd, from_json, gf, homogeneous_part,
    is_zero, max_dummy, rename_labels, substitute, to_json_obj, to_latex, to_text,
    truncate_degree, vdiff,
)
from .triangle_solver import U, lambda_factor, solve_triangle_system, vec

P = "p"


def atom(name: str, pdep: bool = True) -> Poly:
    return Poly.factor(Ff(name, pdep=pdep))


def grade_of(h: int, fs) -> int:
    return h + count_label(fs, "u1") + count_label(fs, "u2")


def truncate_grade(p: Poly, order: int) -> Poly:
    return p.filter(lambda h, fs: grade_of(h, fs) <= order)


def mul_graded(a: Poly, b: Poly, order: int) -> Poly:
    """Product keeping only monomials of grade at most ``order``."""
    out = Poly({}, tuple(dict.fromkeys(a.free + b.free)))
    bl = [(grade_of(h, fs), h, fs, c) for (h, fs), c in b.terms.items()]
    for (h1, f1), c1 in a.terms.items():
        g1 = grade_of(h1, f1)
        k = max_dummy(f1) + 1
        for g2, h2, f2, c2 in bl:
            if g1 + g2 <= order:
                out.add_term(c1 * c2, f1 + _shift(f2, k), h1 + h2)
    return out


def _shift(fs, k):
    return tuple((f[0], f[1], tuple(s + k if type(s) is int else s for s in f[2])) for f in fs)


def exp_graded(x: Poly, order: int) -> Poly:
    """``exp(x)`` for a series without grade zero part."""
    out = Poly.scalar(1)
    power = Poly.scalar(1)
    for k in range(1, order + 1):
        power = mul_graded(power, x, order)
        if not power:
            break
        out = out + power.scale(Fraction(1, math.factorial(k)))
    return out


# ---------------------------------------------------------------- building blocks


@lru_cache(maxsize=None)
def phase_factor_expansion(order: int) -> Poly:
    """Logarithm of ``exp(2i (w + u1 - u2) . p / hbar)`` with grade at most ``order``."""
    sol = solve_triangle_system(order + 1)
    d = sol.w + vec("u1") - vec("u2")
    d = rename_labels(d, {"mu": P}, free=())
    out = d.map_terms(lambda c, fs, h: [(c * GQ(0, 2), fs, h - 1)], free=())
    return truncate_grade(out, order)


@lru_cache(maxsize=None)
def geometric_weight(order: int) -> Poly:
    """``Lambda * exp(2i (w + u1 - u2) . p / hbar)`` with grade at most ``order``."""
    logl = lambda_factor(order).poly
    return exp_graded(logl + phase_factor_expansion(order), order)


def symbol_pullback_expansion(x: Poly, shift: Poly, order: int, plabel: str = "p1",
                              max_vertical: int | None = None) -> Poly:
    """``x(z + v, [[p + p']]^v)`` expanded in ``v`` and ``p'`` with ``v`` replaced by ``shift``.

    ``shift`` is a vector series in ``u1, u2`` with free index ``mu``.  The vertical variable
    ``p'`` is named ``plabel``; its degree is capped by ``max_vertical`` (default ``order``)."""
    maxv = order if max_vertical is None else max_vertical
    out = Poly({})
    hor = x
    n = 0
    while True:
        # each horizontal derivative brings at least one power of u after substitution
        hor = hor.filter(lambda h, fs, n=n: grade_of(h, fs) + n <= order)
        if not hor:
            break
        hn = hor.scale(Fraction(1, math.factorial(n)))
        vert = hn
        k = 0
        while vert and k <= maxv:
            out = out + vert.scale(Fraction(1, math.factorial(k)))
            vert = vdiff(vert, plabel)
            k += 1
        n += 1
        hor = covd(hor.filter(lambda h, fs, n=n: grade_of(h, fs) + n <= order), "_v")
    out = substitute(out, {"_v": shift}, slot="mu", max_order=order, order_labels=U)
    return truncate_grade(out, order)


def wick_evaluate(left: Poly, right: Poly, order: int, p_left: str = "p1", p_right: str = "p2") -> Poly:
    """Apply ``exp(i hbar/2 (d_u1 . d_p2 - d_u2 . d_p1))`` to ``left * right`` and set the
    formal variables to zero.  ``p_left`` occurs only in ``left`` and ``p_right`` only in
    ``right``.  Monomials with unmatched counts vanish."""
    buckets: dict = {}
    for (h, fs), c in right.terms.items():
        key = (count_label(fs, p_right) - count_label(fs, "u1"), count_label(fs, "u2"))
        buckets.setdefault(key, []).append((h, fs, c))
    out = Poly({})
    half_i = GQ(0, Fraction(1, 2))
    for (h1, f1), c1 in left.terms.items():
        a1 = count_label(f1, "u1")
        b1 = count_label(f1, p_left) - count_label(f1, "u2")
        if count_label(f1, p_right):
            raise ValueError("right momentum variable found in left factor")
        for h2, f2, c2 in buckets.get((a1, b1), ()):
            k1 = a1 + count_label(f2, "u1")
            k2 = count_label(f1, "u2") + count_label(f2, "u2")
            hb = h1 + h2 + k1 + k2
            if hb > order:
                continue
            base = max_dummy(f1) + 1
            fs0 = f1 + _shift(f2, base)
            coef = c1 * c2 * half_i ** k1 * (-half_i) ** k2
            for fs, mult in _pairings(fs0, p_left, p_right):
                out.add_term(coef * mult, fs, hb)
    return out


def _pairings(fs, p_left: str, p_right: str):
    """All contractions of ``u1`` with ``p_right`` and ``u2`` with ``p_left`` with multiplicity.

    When the momentum slots of a label lie in one symmetric atom group every bijection gives
    the same term, so a single representative is used."""
    out = [(fs, 1)]
    for u, q in (("u1", p_right), ("u2", p_left)):
        k = count_label(fs, u)
        nxt = []
        for g, m in out:
            start = max_dummy(g) + 1
            if _in_one_sym_group(g, q):
                nxt.append((_pair(g, u, q, start, tuple(range(k))), m * math.factorial(k)))
            else:
                nxt.extend((_pair(g, u, q, start, perm), m) for perm in itertools.permutations(range(k)))
        out = nxt
    return out


def _in_one_sym_group(fs, q: str) -> bool:
    hits = {i for i, f in enumerate(fs) if q in f[2]}
    if len(hits) > 1:
        return False
    if not hits:
        return True
    f = fs[hits.pop()]
    if f[0] != "F":
        return f[2].count(q) == 1
    _, nb, nh, nv, _ = f[1]
    return q not in f[2][:nb + nh]


def _pair(fs, a: str, b: str, start: int, perm: tuple):
    """Contract the k-th occurrence of ``a`` with occurrence ``perm[k]`` of ``b``."""
    ca = cb = 0
    res = []
    for f in fs:
        slots = []
        for s in f[2]:
            if s == a:
                slots.append(start + ca)
                ca += 1
            elif s == b:
                slots.append(start + perm.index(cb))
                cb += 1
            else:
                slots.append(s)
        res.append((f[0], f[1], tuple(slots)))
    assert ca == cb
    return tuple(res)


# ---------------------------------------------------------------- star product


@dataclass
class StarExpansion:
    """``terms[n]`` is the coefficient of ``hbar^n`` (stored with hbar key 0)."""

    terms: list
    atoms: tuple = ("a", "b")
    meta: dict = field(default_factory=dict)

    def __getitem__(self, n: int) -> Poly:
        return self.terms[n]

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    def total(self) -> Poly:
        out = Poly({})
        for n, p in enumerate(self.terms):
            out = out + p.map_terms(lambda c, fs, h, n=n: [(c, fs, n)])
        return out


def split_orders(p: Poly, order: int) -> list:
    return [p.filter(lambda h, fs, n=n: h == n).map_terms(lambda c, fs, h: [(c, fs, 0)])
            for n in range(order + 1)]


def star(x: Poly, y: Poly, order: int) -> Poly:
    """Star product of two symbol polynomials (hbar keys in ``x``, ``y`` are their grades);
    the result keeps hbar powers in the monomial keys, truncated at ``order``."""
    sol = solve_triangle_system(order + 1)
    weight = geometric_weight(order)
    a = symbol_pullback_expansion(x, sol.v1, order, "p1")
    b = symbol_pullback_expansion(y, sol.v2, order, "p2")
    left = mul_graded(weight, a, order)
    return wick_evaluate(left, b, order)


@lru_cache(maxsize=None)
def _star_atoms(order: int) -> StarExpansion:
    p = star(atom("a"), atom("b"), order)
    return StarExpansion(split_orders(p, order))


def star_expansion(order: int) -> StarExpansion:
    """``(a * b)_n`` for ``n <= order`` with generic symbols ``a`` and ``b``."""
    return _star_atoms(order)


def star_of_expansions(x: Poly, y: Poly, order: int) -> Poly:
    return star(x, y, order)


# ---------------------------------------------------------------- serialization


def expansion_to_json_obj(e: StarExpansion) -> dict:
    return {"atoms": list(e.atoms), "order": e.order, "meta": e.meta,
            "terms": [to_json_obj(t) for t in e.terms]}


def expansion_from_json_obj(d: dict) -> StarExpansion:
    return StarExpansion([from_json(t) for t in d["terms"]], tuple(d["atoms"]), dict(d.get("meta", {})))


def expansion_to_latex(e: StarExpansion) -> str:
    a, b = e.atoms
    return "\n".join(f"({a} \\star {b})_{{{n}}} &= {to_latex(t)} \\\\" for n, t in enumerate(e.terms))


def expansion_to_text(e: StarExpansion) -> str:
    a, b = e.atoms
    return "\n".join(f"({a}*{b})_{n} = {to_text(t)}" for n, t in enumerate(e.terms))


# ---------------------------------------------------------------- term structure


@dataclass
class TermShape:
    """Counts attached to one monomial ``R...R p_eta a^{beta1}_{alpha1} b^{beta2}_{alpha2}``."""

    r: int
    s: int
    nu: int
    eta: int
    alpha: tuple
    beta: tuple


def term_shape(term, atoms=("a", "b"), r: int | None = None) -> TermShape:
    h, fs = term
    h = h if r is None else r
    s = sum(1 for f in fs if f[0] in CURV)
    nu = sum(len(f[2]) - {"R": 4, "Ric": 2, "Rs": 0}[f[0]] for f in fs if f[0] in CURV)
    eta = count_label(fs, P)
    alpha, beta = [], []
    for name in atoms:
        got = [f for f in fs if f[0] == "F" and f[1][0] == name]
        if len(got) != 1:
            raise ValueError(f"atom {name!r} must occur exactly once")
        _, nb, nh, nv, _ = got[0][1]
        alpha.append(nh)
        beta.append(nv)
    return TermShape(h, s, nu, eta, tuple(alpha), tuple(beta))


def structure_violations(term, atoms=("a", "b"), r: int | None = None) -> list[str]:
    """Broken identities and bounds for one monomial; empty when the term is admissible.
    ``r`` overrides the hbar power stored in the key (expansion terms are stored at 0)."""
    t = term_shape(term, atoms, r)
    bad = []
    if t.r != sum(t.beta) - t.eta:
        bad.append(f"r={t.r} but |beta|-|eta|={sum(t.beta) - t.eta}")
    if t.r != 2 * t.s + t.nu + sum(t.alpha):
        bad.append(f"r={t.r} but 2s+|nu|+|alpha|={2 * t.s + t.nu + sum(t.alpha)}")
    if len(atoms) == 2:
        (a1, a2), (b1, b2) = t.alpha, t.beta
        if t.s == 0:
            if t.eta or t.nu or b1 != a2 or b2 != a1:
                bad.append("flat term with mismatched derivative counts")
        else:
            if t.s < max(1, t.eta):
                bad.append("s < max(1, |eta|)")
            if b1 < max(1, t.eta + a2):
                bad.append("|beta1| < max(1, |eta|+|alpha2|)")
            if b2 < max(1, t.eta + a1):
                bad.append("|beta2| < max(1, |eta|+|alpha1|)")
    elif t.s < t.eta:
        bad.append("s < |eta|")
    return bad


def verify_term_structure(term, atoms=("a", "b"), r: int | None = None) -> bool:
    """``term`` is a ``(hbar, factors)`` key or a one-monomial polynomial."""
    if isinstance(term, Poly):
        if len(term) != 1:
            raise ValueError("expected a single monomial")
        term = next(iter(term.terms))
    return not structure_violations(term, atoms, r)


def check_structure(e: StarExpansion) -> list[tuple]:
    """Terms of an expansion that break the structure identities, as ``(n, key, reasons)``."""
    out = []
    for n, p in enumerate(e.terms):
        for key in p.terms:
            bad = structure_violations(key, e.atoms, n)
            if bad:
                out.append((n, key, bad))
    return out


# ---------------------------------------------------------------- flat reduction


def drop_curvature(p: Poly) -> Poly:
    return p.filter(lambda h, fs: not any(f[0] in CURV for f in fs))


def moyal_term(n: int, a: str = "a", b: str = "b") -> Poly:
    """Flat ``(a * b)_n`` from expanding ``exp(i/2 (d_u1 d_p2 - d_u2 d_p1))`` directly:
    ``(i/2)^n / n! sum_k C(n,k) (-1)^(n-k) a_{x^k}^{p^(n-k)} b_{p^(n-k)}^{x^k}``."""
    out = Poly({})
    for k in range(n + 1):
        xs = tuple(f"_x{i}" for i in range(k))
        ps = tuple(f"_p{i}" for i in range(n - k))
        c = GQ(0, Fraction(1, 2)) ** n * Fraction(math.comb(n, k) * (-1) ** (n - k), math.factorial(n))
        t = Poly.from_raw([(c, (Ff(a, H=xs, V=ps), Ff(b, H=ps, V=xs)))])
        for L in xs + ps:
            t = contract_labels(t, L, L, free=())
        out = out + t
    return out


def conjugate(p: Poly) -> Poly:
    return Poly({k: c.conj() for k, c in p.terms.items()}, p.free)


def swap_atoms(p: Poly, a: str = "a", b: str = "b") -> Poly:
    def fn(c, fs, h):
        nf = []
        for f in fs:
            if f[0] == "F" and f[1][0] in (a, b):
                meta = (b if f[1][0] == a else a,) + f[1][1:]
                f = ("F", meta, f[2])
            nf.append(f)
        return [(c, tuple(nf), h)]
    return p.map_terms(fn)


def check_unit_law(order: int) -> bool:
    one = Poly.scalar(1)
    a = atom("a")
    for p in (star(one, a, order), star(a, one, order)):
        if not is_zero(p - a):
            return False
    return True


def check_adjoint(order: int) -> bool:
    """``conj((a*b)_n) = (b*a)_n`` for real symbols; the right side is computed separately."""
    ab = star(atom("a"), atom("b"), order)
    ba = star(atom("b"), atom("a"), order)
    return is_zero(conjugate(ab) - ba) and is_zero(swap_atoms(ab) - ba)


def check_associativity(order: int) -> list[bool]:
    a, b, c = atom("a"), atom("b"), atom("c")
    left = star(star(a, b, order), c, order)
    right = star(a, star(b, c, order), order)
    d = left - right
    return [is_zero(d.filter(lambda h, fs, n=n: h == n)) for n in range(order + 1)]


def check_moyal(order: int) -> list[bool]:
    e = star_expansion(order)
    return [is_zero(drop_curvature(e[n]) - moyal_term(n)) for n in range(order + 1)]


# ---------------------------------------------------------------- tau translation


def _dp_nabla(p: Poly) -> Poly:
    """``d_p . nabla`` with one power of hbar."""
    q = vdiff(covd(p, "_h"), "_q")
    q = contract_labels(q, "_h", "_q", free=p.free)
    return q.map_terms(lambda c, fs, h: [(c, fs, h + 1)])


def tau_translate(symbol: Poly, tau, tau_prime, order: int) -> Poly:
    """Symbol for ``Op_tau`` from a symbol for ``Op_tau'``: ``sum_n (tau'-tau)^n/n! (-i hbar d_p.nabla)^n``."""
    t = Fraction(tau_prime) - Fraction(tau)
    out = symbol.truncate_hbar(order)
    cur = symbol
    for n in range(1, order + 1):
        cur = _dp_nabla(cur).truncate_hbar(order)
        if not cur:
            break
        out = out + cur.scale(GQ(0, -1) ** n * (t ** n / math.factorial(n)))
    return out


# ---------------------------------------------------------------- xi coefficients


@dataclass
class XiTable:
    """``raw[(m, n)]`` is ``[nabla_x^m nabla_y^n Delta(x,y)^(-1/2)]`` contracted with ``m`` copies
    of ``x`` (first point) and ``n`` copies of ``y`` (second point)."""

    raw: dict
    max_order: int

    def xi(self, m: int, n: int) -> Poly:
        """``xi_{gamma delta} = (-1)^m (-i)^(m+n) raw(m, n)``."""
        return self.raw[(m, n)].scale(GQ(-1) ** m * GQ(0, -1) ** (m + n))

    def weyl(self, n: int, w: str = "w") -> Poly:
        """``sum_{alpha+beta=gamma}`` version contracted with ``n`` copies of ``w``."""
        out = Poly({})
        for m in range(n + 1):
            out = out + self.xi(m, n - m).scale(math.comb(n, m))
        return rename_labels(out, {"x": w, "y": w})


def _exp_scalar(x: Poly, labels, order: int) -> Poly:
    out = Poly.scalar(1)
    power = Poly.scalar(1)
    for k in range(1, order + 1):
        power = truncate_degree(power * x, labels, order)
        if not power:
            break
        out = out + power.scale(Fraction(1, math.factorial(k)))
    return out


@lru_cache(maxsize=None)
def xi_coefficients(max_order: int) -> XiTable:
    """``Delta^(-1/2)(z + x, z + y) = exp(-zeta(z + x, z + x + [[X]]^x))`` where ``X`` solves
    ``X + delta(X, x) = y - x``; derivatives along geodesics from ``z`` give the coincidence limits."""
    labels = ("x", "y")
    d = geodesic_defect(max_order).poly
    vx, vy = vec("x"), vec("y")
    X = vy - vx
    for _ in range(max_order + 1):
        nxt = vy - vx - substitute(d, {"u": X, "v": vx}, slot="mu", max_order=max_order, order_labels=labels)
        nxt.free = ("mu",)
        if nxt == X:
            break
        X = nxt
    z = zeta_shifted(max_order).poly
    zs = substitute(z, {"u": X, "v": vx}, slot="mu", max_order=max_order, order_labels=labels)
    f = _exp_scalar(-zs, labels, max_order)
    raw = {}
    for tot in range(max_order + 1):
        for m in range(tot + 1):
            part = homogeneous_part(f, {"x": m, "y": tot - m})
            raw[(m, tot - m)] = part.scale(math.factorial(m) * math.factorial(tot - m))
    return XiTable(raw, max_order)


# ---------------------------------------------------------------- polynomial quantization


@dataclass
class QuantizedOperator:
    """``Op_tau(a)`` acting on a half density ``|g|^(1/4) h``, divided by ``|g|^(1/4)``.

    ``expression`` is linear in the test atom ``h``; the formal factor ``tau`` is kept symbolic
    when no numeric value is given and powers of hbar sit in the monomial keys."""

    expression: Poly
    tau: object
    pieces: list

    def at_tau(self, value) -> Poly:
        return substitute_tau(self.expression, value)


def substitute_tau(p: Poly, value) -> Poly:
    v = Fraction(value)
    return p.map_terms(lambda c, fs, h: [(c * v ** sum(1 for f in fs if f[0] == "tau"),
                                          tuple(f for f in fs if f[0] != "tau"), h)])


def _tau_poly(j: int, k: int, tau) -> Poly:
    """``tau^j (1 - tau)^k`` as a polynomial in the formal ``tau`` factor or as a number."""
    if tau is not None:
        t = Fraction(tau)
        return Poly.scalar(t ** j * (1 - t) ** k)
    out = Poly({})
    for i in range(k + 1):
        out = out + Poly.from_raw([(math.comb(k, i) * (-1) ** i, (TAU,) * (j + i))])
    return out


def _relabel_occurrences(fs, label: str, names):
    it = iter(names)
    res = []
    for f in fs:
        res.append((f[0], f[1], tuple(next(it) if x == label else x for x in f[2])))
    return tuple(res)


def generic_polynomial_symbol(degree: int, name: str = "a") -> Poly:
    """``a(z)^{alpha} p_alpha`` with a symmetric coefficient tensor of the given rank."""
    return Poly.factor(Ff(name, V=(P,) * degree, pdep=False))


def quantize_polynomial(symbol: Poly, tau=None, test: str = "h") -> QuantizedOperator:
    """Normal ordered operator for a symbol polynomial in the momentum label ``p``.

    Each monomial of degree ``n`` contributes, for ``A + B + C + D = n``, the multinomial
    ``n!/(A!B!C!D!)`` times ``hbar^n tau^(A+C) (1-tau)^(B+D) (-i)^(A+B)
    nabla_alpha (a^{alpha beta gamma delta} xi_{gamma delta} nabla_beta h)``."""
    degs = {count_label(fs, P) for (_, fs) in symbol.terms}
    n_max = max(degs) if degs else 0
    table = xi_coefficients(n_max)
    out = Poly({})
    pieces = []
    for n in sorted(degs):
        part = symbol.filter(lambda h, fs, n=n: count_label(fs, P) == n)
        for A in range(n + 1):
            for B in range(n + 1 - A):
                for C in range(n + 1 - A - B):
                    D = n - A - B - C
                    xi = table.xi(C, D)
                    if not xi:
                        continue
                    la = [f"_a{i}" for i in range(A)]
                    lb = [f"_b{i}" for i in range(B)]
                    lc = [f"_c{i}" for i in range(C)]
                    ld = [f"_d{i}" for i in range(D)]
                    coeff = part.map_terms(lambda c, fs, h: [(c, _relabel_occurrences(fs, P, la + lb + lc + ld), h)])
                    xr = xi.map_terms(lambda c, fs, h: [(c, _relabel_occurrences(
                        _relabel_occurrences(fs, "x", lc), "y", ld), h)])
                    body = coeff * xr * Poly.factor(Ff(test, H=tuple(lb), pdep=False))
                    for L in lc + ld + lb:
                        body = contract_labels(body, L, L, free=())
                    for L in la:
                        body = contract_labels(covd(body, L + "'"), L, L + "'", free=())
                    mult = math.factorial(n) // (math.factorial(A) * math.factorial(B)
                                                 * math.factorial(C) * math.factorial(D))
                    term = (body * _tau_poly(A + C, B + D, tau)).scale(GQ(0, -1) ** (A + B) * mult)
                    term = term.map_terms(lambda c, fs, h, n=n: [(c, fs, h + n)])
                    pieces.append(((n, A, B, C, D), term))
                    out = out + term
    return QuantizedOperator(out, tau, pieces)


def laplace_expected(test: str = "h") -> Poly:
    """``hbar^2 (-g^{mu nu} nabla_mu nabla_nu + R/6) h``."""
    lap = Poly.from_raw([(-1, (Ff(test, H=(0, 0), pdep=False),), 2)])
    r = Poly.from_raw([(Fraction(1, 6), (("Rs", None, ()), Ff(test, pdep=False)), 2)])
    return lap + r


def metric_symbol() -> Poly:
    """``g^{mu nu} p_mu p_nu``."""
    return Poly.factor(gf(P, P))
