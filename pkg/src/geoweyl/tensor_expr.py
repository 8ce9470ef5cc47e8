"""Abstract tensor polynomials in curvature, its covariant derivatives and symbol atoms.

Factors are tuples ``(kind, meta, slots)``:

* ``R``   Riemann tensor, 4 principal slots then covariant derivative slots (the tail).
* ``Ric`` Ricci tensor ``R^a_{b a d}``, 2 principal slots then tail.
* ``Rs``  scalar curvature, tail only.
* ``g``   metric, 2 slots.
* ``dim`` the trace of the identity, evaluates to the dimension.
* ``tau`` a formal scalar parameter.
* ``S``   a covariant derivative of the world function, slots in application order.
* ``F``   a symbol atom with ``meta = (name, nb, nh, nv, pdep)``; slots are the base indices,
  the symmetrized horizontal derivative indices and the symmetrized vertical derivative indices.

Integer labels are contracted dummies and string labels are external (vector names or free
indices).  The metric is implicit, so index position only matters for display.
Curvature convention: ``R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + ...`` and
``[nabla_c, nabla_d] w_b = -R^a_{bcd} w_a``.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

# ---------------------------------------------------------------- coefficients


class GQ:
    """Gaussian rational ``re + i*im`` with exact arithmetic."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is Fraction else Fraction(re)
        self.im = im if type(im) is Fraction else Fraction(im)

    @staticmethod
    def of(x) -> "GQ":
        if isinstance(x, GQ):
            return x
        if isinstance(x, complex):
            return GQ(Fraction(x.real), Fraction(x.imag))
        return GQ(x)

    def __add__(self, o):
        o = GQ.of(o)
        return GQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = GQ.of(o)
        return GQ(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return GQ.of(o) - self

    def __neg__(self):
        return GQ(-self.re, -self.im)

    def __mul__(self, o):
        if isinstance(o, (int, Fraction)):
            return GQ(self.re * o, self.im * o)
        o = GQ.of(o)
        return GQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, (int, Fraction)):
            return GQ(self.re / o, self.im / o)
        o = GQ.of(o)
        n = o.re * o.re + o.im * o.im
        return self * GQ(o.re / n, -o.im / n)

    def __pow__(self, n: int):
        r = GQ(1)
        for _ in range(n):
            r = r * self
        return r

    def conj(self):
        return GQ(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, o):
        try:
            o = GQ.of(o)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GQ({self.text()})"

    def text(self) -> str:
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{_frac_text(self.im)}i"
        return f"({self.re}{'+' if self.im > 0 else '-'}{_frac_text(abs(self.im))}i)"

    def to_json(self) -> dict:
        return {"re": str(self.re), "im": str(self.im)}

    @staticmethod
    def from_json(d: dict) -> "GQ":
        return GQ(Fraction(d["re"]), Fraction(d["im"]))


def _frac_text(q: Fraction) -> str:
    if q == 1:
        return ""
    if q == -1:
        return "-"
    return str(q)


ONE = GQ(1)
I = GQ(0, 1)

# ---------------------------------------------------------------- factors

KIND_RANK = {"dim": 0, "tau": 1, "g": 2, "Rs": 3, "Ric": 4, "R": 5, "F": 6, "S": 7}
NPRINC = {"R": 4, "Ric": 2, "Rs": 0}
CURV = ("R", "Ric", "Rs")
DIM = ("dim", None, ())
TAU = ("tau", None, ())


def Rf(*slots, tail=()) -> tuple:
    return ("R", None, tuple(slots) + tuple(tail))


def Ricf(a, b, tail=()) -> tuple:
    return ("Ric", None, (a, b) + tuple(tail))


def Rsf(tail=()) -> tuple:
    return ("Rs", None, tuple(tail))


def gf(a, b) -> tuple:
    return ("g", None, (a, b))


def Ff(name: str, base=(), H=(), V=(), pdep: bool = True) -> tuple:
    return ("F", (name, len(base), len(H), len(V), bool(pdep)), tuple(base) + tuple(H) + tuple(V))


def f_groups(meta) -> tuple:
    _, nb, nh, nv, _ = meta
    return ((0, nb), (nb, nb + nh), (nb + nh, nb + nh + nv))


def is_dummy(x) -> bool:
    return type(x) is int


def max_dummy(factors) -> int:
    m = -1
    for f in factors:
        for s in f[2]:
            if type(s) is int and s > m:
                m = s
    return m


def shift_dummies(factors, k: int) -> tuple:
    if k == 0:
        return tuple(factors)
    return tuple((f[0], f[1], tuple(s + k if type(s) is int else s for s in f[2])) for f in factors)


def rename(factors, mapping: dict) -> tuple:
    return tuple((f[0], f[1], tuple(mapping.get(s, s) for s in f[2])) for f in factors)


def count_label(factors, label) -> int:
    return sum(f[2].count(label) for f in factors)


def external_labels(factors) -> Counter:
    c = Counter()
    for f in factors:
        for s in f[2]:
            if type(s) is str:
                c[s] += 1
    return c


def curvature_weight(factors) -> int:
    w = 0
    for k, _, s in factors:
        if k in CURV:
            w += 2 + len(s) - NPRINC[k]
    return w


# ---------------------------------------------------------------- normalization


def _normalize(factors) -> tuple[int, list] | None:
    """Remove metric contractions and curvature self traces.  Returns (sign, factors) or None for zero."""
    fs = list(factors)
    sign = 1
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(fs):
            kind, meta, s = f
            if kind == "g":
                a, b = s
                if type(a) is int and a == b:
                    fs[i] = DIM
                    changed = True
                    break
                for x, y in ((a, b), (b, a)):
                    if type(x) is int:
                        for j, h in enumerate(fs):
                            if j != i and x in h[2]:
                                hs = list(h[2])
                                hs[hs.index(x)] = y
                                fs[j] = (h[0], h[1], tuple(hs))
                                del fs[i]
                                changed = True
                                break
                        if changed:
                            break
                if changed:
                    break
            elif kind == "R":
                p = s[:4]
                tail = s[4:]
                hit = None
                for (x, y) in ((0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)):
                    if type(p[x]) is int and p[x] == p[y]:
                        hit = (x, y)
                        break
                if hit is None:
                    continue
                if hit in ((0, 1), (2, 3)):
                    return None
                if hit == (0, 2):
                    fs[i] = ("Ric", None, (p[1], p[3]) + tail)
                elif hit == (1, 3):
                    fs[i] = ("Ric", None, (p[0], p[2]) + tail)
                elif hit == (0, 3):
                    fs[i] = ("Ric", None, (p[1], p[2]) + tail)
                    sign = -sign
                else:
                    fs[i] = ("Ric", None, (p[0], p[3]) + tail)
                    sign = -sign
                changed = True
                break
            elif kind == "Ric":
                if type(s[0]) is int and s[0] == s[1]:
                    fs[i] = ("Rs", None, s[2:])
                    changed = True
                    break
    return sign, fs


# ---------------------------------------------------------------- canonical search

_R_ARR = (
    ((0, 1, 2, 3), 1), ((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((1, 0, 3, 2), 1),
    ((2, 3, 0, 1), 1), ((3, 2, 0, 1), -1), ((2, 3, 1, 0), -1), ((3, 2, 1, 0), 1),
)


def _arrangements(f) -> list:
    kind, meta, s = f
    if kind == "R":
        tail = s[4:]
        out = []
        for perm, sg in _R_ARR:
            out.append((tuple(s[p] for p in perm) + tail, sg))
        return out
    if kind in ("Ric", "g") or (kind == "S" and len(s) >= 2):
        return [(s, 1), ((s[1], s[0]) + s[2:], 1)]
    return [(s, 1)]


def _invariant_key(f) -> tuple:
    """Relabel invariant summary of a factor used to order factors before the search."""
    kind, meta, s = f
    if kind == "F":
        grps = []
        for lo, hi in f_groups(meta):
            g = s[lo:hi]
            ext = tuple(sorted(x for x in g if type(x) is str))
            grps.append((ext, sum(1 for x in g if type(x) is int)))
        return (KIND_RANK[kind], meta, tuple(grps))
    n = NPRINC.get(kind, len(s))
    ext = tuple(sorted(x for x in s[:n] if type(x) is str))
    text = tuple(sorted(x for x in s[n:] if type(x) is str))
    return (KIND_RANK[kind], meta, len(s), ext, text)


def _factor_tokens(pos, kind, meta, slots, opened, pending):
    """Tokens of one placed factor.  ``opened`` maps dummy -> reference and is updated in place
    through ``pending`` (a list of (dummy, ref)) so the caller can roll back."""
    toks = []
    if kind != "F":
        for j, L in enumerate(slots):
            if type(L) is str:
                toks.append((0, L))
            elif L in opened:
                toks.append((1,) + opened[L])
            else:
                opened[L] = (pos, j)
                pending.append(L)
                toks.append((3,))
        return (KIND_RANK[kind], meta, tuple(toks))
    for gi, (lo, hi) in enumerate(f_groups(meta)):
        grp = slots[lo:hi]
        gt = []
        cnt = Counter(L for L in grp if type(L) is int and L not in opened)
        for L in grp:
            if type(L) is str:
                gt.append((0, L))
            elif L in opened and L not in cnt:
                gt.append((1,) + opened[L])
        for L, c in cnt.items():
            if c == 2:
                gt.append((2,))
                gt.append((2,))
            else:
                opened[L] = (pos, 100 + gi)
                pending.append(L)
                gt.append((3,))
        gt.sort()
        toks.append(tuple(gt))
    return (KIND_RANK[kind], meta, tuple(toks))


class _Search:
    __slots__ = ("factors", "arr", "best", "best_layout", "signs", "n")

    def __init__(self, factors):
        self.factors = factors
        self.arr = [_arrangements(f) for f in factors]
        self.best = None
        self.best_layout = None
        self.signs = set()
        self.n = len(factors)

    def run(self):
        keys = [_invariant_key(f) for f in self.factors]
        order = sorted(range(self.n), key=lambda i: keys[i])
        classes = []
        for i in order:
            if classes and keys[classes[-1][0]] == keys[i]:
                classes[-1].append(i)
            else:
                classes.append([i])
        self._dfs(classes, 0, [], [], {}, 1, [])

    def _dfs(self, classes, ci, remaining_unused, prefix, opened, sign, layout):
        pos = len(prefix)
        if pos == self.n:
            t = tuple(prefix)
            if self.best is None or t < self.best:
                self.best = t
                self.best_layout = list(layout)
                self.signs = {sign}
            elif t == self.best:
                self.signs.add(sign)
            return
        if not remaining_unused:
            remaining_unused = list(classes[ci])
            ci += 1
        for idx_pos, fi in enumerate(remaining_unused):
            kind, meta, _ = self.factors[fi]
            rest = remaining_unused[:idx_pos] + remaining_unused[idx_pos + 1:]
            seen_tok = set()
            for slots, sg in self.arr[fi]:
                pending = []
                tok = _factor_tokens(pos, kind, meta, slots, opened, pending)
                key = (slots, sg)
                if key in seen_tok:
                    for L in pending:
                        del opened[L]
                    continue
                seen_tok.add(key)
                prune = self.best is not None and tuple(prefix) + (tok,) > self.best[:pos + 1]
                if not prune:
                    prefix.append(tok)
                    layout.append((kind, meta, slots))
                    self._dfs(classes, ci, rest, prefix, opened, sign * sg, layout)
                    prefix.pop()
                    layout.pop()
                for L in pending:
                    del opened[L]


def _concrete(layout) -> tuple:
    opened = {}
    num = {}
    nxt = 0
    for pos, (kind, meta, slots) in enumerate(layout):
        if kind != "F":
            for j, L in enumerate(slots):
                if type(L) is int:
                    if L in opened:
                        num[L] = nxt
                        nxt += 1
                    else:
                        opened[L] = (pos, j)
            continue
        for gi, (lo, hi) in enumerate(f_groups(meta)):
            grp = slots[lo:hi]
            cnt = Counter(L for L in grp if type(L) is int and L not in opened)
            closes = sorted({L for L in grp if type(L) is int and L in opened and L not in cnt},
                            key=lambda L: opened[L])
            for L in closes:
                num[L] = nxt
                nxt += 1
            for L, c in cnt.items():
                if c == 2:
                    num[L] = nxt
                    nxt += 1
                else:
                    opened[L] = (pos, 100 + gi)
    out = []
    for kind, meta, slots in layout:
        if kind != "F":
            out.append((kind, meta, tuple(num[L] if type(L) is int else L for L in slots)))
        else:
            new = []
            for lo, hi in f_groups(meta):
                grp = [num[L] if type(L) is int else L for L in slots[lo:hi]]
                grp.sort(key=lambda x: (1, x) if type(x) is int else (0, x))
                new.extend(grp)
            out.append((kind, meta, tuple(new)))
    return tuple(out)


_CANON_CACHE: dict = {}


def _prerelabel(factors) -> tuple:
    m = {}
    out = []
    for k, meta, s in factors:
        ns = []
        for L in s:
            if type(L) is int:
                if L not in m:
                    m[L] = len(m)
                ns.append(m[L])
            else:
                ns.append(L)
        out.append((k, meta, tuple(ns)))
    return tuple(out)


def canon_term(factors) -> tuple[int, tuple] | None:
    """Monoterm canonical form.  Returns (sign, canonical factors) or None when the term vanishes."""
    raw = _prerelabel(sorted(factors, key=_invariant_key))
    hit = _CANON_CACHE.get(raw)
    if hit is not None:
        return hit[0]
    nz = _normalize(raw)
    if nz is None:
        res = None
    else:
        sign, fs = nz
        # metrics with two external labels stay; contraction left no dummy g partner
        s = _Search(fs)
        s.run()
        if len(s.signs) != 1:
            res = None
        else:
            res = (sign * s.signs.pop(), _concrete(s.best_layout))
    _CANON_CACHE[raw] = (res,)
    return res


# ---------------------------------------------------------------- polynomials


class Poly:
    """Linear combination of monomials with Gaussian rational coefficients.

    Terms are keyed by ``(hbar_power, canonical_factors)``.  ``free`` records the external
    index names (vectors are external labels too but are not listed)."""

    __slots__ = ("terms", "free")

    def __init__(self, terms: dict | None = None, free: Sequence[str] = ()):
        self.terms = terms if terms is not None else {}
        self.free = tuple(free)

    # construction -----------------------------------------------------------
    @staticmethod
    def from_raw(raw: Iterable, free: Sequence[str] = ()) -> "Poly":
        p = Poly({}, free)
        for item in raw:
            if len(item) == 2:
                c, fs = item
                h = 0
            else:
                c, fs, h = item
            p.add_term(c, fs, h)
        return p

    @staticmethod
    def scalar(c, hbar: int = 0) -> "Poly":
        return Poly.from_raw([(GQ.of(c), (), hbar)])

    @staticmethod
    def factor(f, c=1) -> "Poly":
        return Poly.from_raw([(GQ.of(c), (f,))])

    def add_term(self, c, factors, hbar: int = 0) -> None:
        c = GQ.of(c)
        if not c:
            return
        r = canon_term(tuple(factors))
        if r is None:
            return
        sg, fs = r
        key = (hbar, fs)
        v = self.terms.get(key)
        v = (c if sg > 0 else -c) if v is None else (v + c if sg > 0 else v - c)
        if v:
            self.terms[key] = v
        else:
            self.terms.pop(key, None)

    def add_canonical(self, c, key) -> None:
        v = self.terms.get(key)
        v = c if v is None else v + c
        if v:
            self.terms[key] = v
        else:
            self.terms.pop(key, None)

    def copy(self) -> "Poly":
        return Poly(dict(self.terms), self.free)

    # arithmetic -------------------------------------------------------------
    def __add__(self, o) -> "Poly":
        if not isinstance(o, Poly):
            o = Poly.scalar(o)
        r = Poly(dict(self.terms), self.free or o.free)
        for k, c in o.terms.items():
            r.add_canonical(c, k)
        return r

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly({k: -c for k, c in self.terms.items()}, self.free)

    def __sub__(self, o) -> "Poly":
        if not isinstance(o, Poly):
            o = Poly.scalar(o)
        return self + (-o)

    def __rsub__(self, o) -> "Poly":
        return (-self) + o

    def scale(self, c) -> "Poly":
        c = GQ.of(c)
        if not c:
            return Poly({}, self.free)
        return Poly({k: v * c for k, v in self.terms.items()}, self.free)

    def __mul__(self, o) -> "Poly":
        if not isinstance(o, Poly):
            return self.scale(o)
        r = Poly({}, tuple(dict.fromkeys(self.free + o.free)))
        for (h1, f1), c1 in self.terms.items():
            k = max_dummy(f1) + 1
            for (h2, f2), c2 in o.terms.items():
                r.add_term(c1 * c2, f1 + shift_dummies(f2, k), h1 + h2)
        return r

    __rmul__ = __mul__

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __eq__(self, o) -> bool:
        if not isinstance(o, Poly):
            return NotImplemented
        return self.terms == o.terms

    def __repr__(self) -> str:
        return f"Poly({to_text(self)})"

    def items(self):
        return self.terms.items()

    def filter(self, pred) -> "Poly":
        return Poly({k: c for k, c in self.terms.items() if pred(k[0], k[1])}, self.free)

    def map_terms(self, fn, free=None) -> "Poly":
        """``fn(c, factors, hbar)`` yields raw (c, factors, hbar) triples."""
        r = Poly({}, self.free if free is None else free)
        for (h, fs), c in self.terms.items():
            for c2, f2, h2 in fn(c, fs, h):
                r.add_term(c2, f2, h2)
        return r

    def coeff_of(self, factors, hbar: int = 0) -> GQ:
        r = canon_term(tuple(factors))
        if r is None:
            return GQ(0)
        return self.terms.get((hbar, r[1]), GQ(0)) * r[0]

    def truncate_hbar(self, n: int) -> "Poly":
        return self.filter(lambda h, fs: h <= n)


def poly_sum(items: Iterable[Poly], free=()) -> Poly:
    r = Poly({}, free)
    for p in items:
        for k, c in p.terms.items():
            r.add_canonical(c, k)
        if not r.free:
            r.free = p.free
    return r


# ---------------------------------------------------------------- label operations


def rename_labels(p: Poly, mapping: dict, free=None) -> Poly:
    return p.map_terms(lambda c, fs, h: [(c, rename(fs, mapping), h)],
                       free=tuple(mapping.get(x, x) for x in p.free) if free is None else free)


def contract_labels(p: Poly, a: str, b: str, free=None) -> Poly:
    """Replace external labels ``a`` and ``b`` by one contracted dummy."""
    def fn(c, fs, h):
        d = max_dummy(fs) + 1
        return [(c, rename(fs, {a: d, b: d}), h)]
    nf = tuple(x for x in p.free if x not in (a, b)) if free is None else free
    return p.map_terms(fn, free=nf)


def contract(a: Poly, b: Poly, pairs: Sequence[tuple[str, str]]) -> Poly:
    """Product of ``a`` and ``b`` with ``pairs`` of (label in a, label in b) contracted."""
    mp = {y: f"__c{i}" for i, (_, y) in enumerate(pairs)}
    prod = a * rename_labels(b, mp)
    for x, y in pairs:
        prod = contract_labels(prod, x, mp[y])
    gone = {x for x, _ in pairs} | {y for _, y in pairs}
    prod.free = tuple(f for f in dict.fromkeys(a.free + b.free) if f not in gone)
    return prod


def symmetrize(p: Poly, labels: Sequence[str]) -> Poly:
    labels = list(labels)
    perms = list(itertools.permutations(labels))
    out = Poly({}, p.free)
    for perm in perms:
        out = out + rename_labels(p, dict(zip(labels, perm)), free=p.free)
    return out.scale(Fraction(1, len(perms)))


def degree_in(fs, labels) -> int:
    return sum(count_label(fs, x) for x in labels)


def filter_degree(p: Poly, labels, deg: int) -> Poly:
    return p.filter(lambda h, fs: degree_in(fs, labels) == deg)


def substitute(p: Poly, mapping: dict, slot: str = "mu", max_order: int | None = None,
               order_labels: Sequence[str] = ()) -> Poly:
    """Replace vector labels by vector valued series.

    ``mapping`` sends a label to a polynomial with one free index ``slot`` per term, the
    index that takes the place of the vector.  With ``max_order`` every product whose total
    degree in ``order_labels`` exceeds the bound is dropped during the expansion."""
    prepared = {}
    mindeg = {}
    for L, ser in mapping.items():
        items = [(c, fs, h, degree_in(fs, order_labels)) for (h, fs), c in ser.terms.items()]
        prepared[L] = items
        mindeg[L] = min((d for *_, d in items), default=0)
    out = Poly({}, p.free)
    for (h, fs), c in p.terms.items():
        occ = [L for f in fs for L in f[2] if L in prepared]
        deg0 = degree_in(fs, order_labels) - sum(1 for L in occ if L in order_labels)
        states = [(c, fs, h, deg0, occ)]
        for _ in range(len(occ)):
            nxt = []
            for c0, f0, h0, d0, rest in states:
                L = rest[0]
                tail = rest[1:]
                floor = sum(mindeg[x] for x in tail)
                i = next(k for k, f in enumerate(f0) if L in f[2])
                f = f0[i]
                j = f[2].index(L)
                base = max_dummy(f0) + 1
                for c1, f1, h1, d1 in prepared[L]:
                    if max_order is not None and d0 + d1 + floor > max_order:
                        continue
                    f1s = shift_dummies(f1, base + 1)
                    ns = list(f[2])
                    ns[j] = base
                    newf = f0[:i] + ((f[0], f[1], tuple(ns)),) + f0[i + 1:]
                    nxt.append((c0 * c1, newf + rename(f1s, {slot: base}), h0 + h1, d0 + d1, tail))
            states = nxt
        for c0, f0, h0, _, _ in states:
            out.add_term(c0, f0, h0)
    return out


def vector_deriv(p: Poly, label: str, new: str) -> Poly:
    """Derivative with respect to the formal vector ``label``; the freed slot is named ``new``."""
    def fn(c, fs, h):
        res = []
        for i, f in enumerate(fs):
            for j, s in enumerate(f[2]):
                if s == label:
                    ns = list(f[2])
                    ns[j] = new
                    res.append((c, fs[:i] + ((f[0], f[1], tuple(ns)),) + fs[i + 1:], h))
        return res
    return p.map_terms(fn)


def scale_labels(p: Poly, factors: dict) -> Poly:
    """Multiply each term by ``prod factors[L] ** count(L)`` (linear rescaling of vectors)."""
    out = Poly({}, p.free)
    for (h, fs), c in p.terms.items():
        k = GQ(1)
        for L, x in factors.items():
            k = k * GQ.of(x) ** count_label(fs, L)
        out.add_canonical(c * k, (h, fs))
    return out


def homogeneous_part(p: Poly, degrees: dict) -> Poly:
    return p.filter(lambda h, fs: all(count_label(fs, L) == d for L, d in degrees.items()))


def truncate_degree(p: Poly, labels, max_order: int) -> Poly:
    return p.filter(lambda h, fs: degree_in(fs, labels) <= max_order)


# ---------------------------------------------------------------- covariant derivatives


def _curv_deriv(f, x) -> tuple:
    return (f[0], f[1], f[2] + (x,))


@lru_cache(maxsize=None)
def _fsym_deriv_shape(meta) -> Poly:
    """nabla_x of a symmetrized atom with placeholder labels b*, h*, v*, x, in the sym basis."""
    name, nb, nh, nv, pdep = meta
    base = tuple(f"b{i}" for i in range(nb))
    H = tuple(f"h{i}" for i in range(nh))
    V = tuple(f"v{i}" for i in range(nv))
    # the symmetrized atom is the average of ordered ones; differentiate each ordering
    out = Poly({})
    hp = list(itertools.permutations(H))
    for perm in hp:
        out = out + ordered_atom(name, base, tuple(perm) + ("x",), V, pdep)
    return out.scale(Fraction(1, len(hp)))


def _instantiate(shape: Poly, mapping: dict, offset: int):
    for (h, fs), c in shape.terms.items():
        nf = tuple((f[0], f[1], tuple(mapping.get(s, s) if type(s) is str else s + offset for s in f[2]))
                   for f in fs)
        yield c, nf, h


def _f_placeholder_map(f, x) -> dict:
    _, meta, s = f
    _, nb, nh, nv, _ = meta
    m = {}
    for i in range(nb):
        m[f"b{i}"] = s[i]
    for i in range(nh):
        m[f"h{i}"] = s[nb + i]
    for i in range(nv):
        m[f"v{i}"] = s[nb + nh + i]
    m["x"] = x
    return m


def covd_term(c, fs, h, x):
    """Leibniz rule for ``nabla_x`` on one monomial; ``x`` is an external label."""
    out = []
    for i, f in enumerate(fs):
        k = f[0]
        if k in CURV:
            out.append((c, fs[:i] + (_curv_deriv(f, x),) + fs[i + 1:], h))
        elif k == "F":
            rest = fs[:i] + fs[i + 1:]
            off = max_dummy(fs) + 1
            for c2, nf, h2 in _instantiate(_fsym_deriv_shape(f[1]), _f_placeholder_map(f, x), off):
                out.append((c * c2, rest + nf, h + h2))
    return out


def covd(p: Poly, x: str) -> Poly:
    """Covariant (horizontal) derivative along external label ``x``; p and g are parallel."""
    return p.map_terms(lambda c, fs, h: covd_term(c, fs, h, x))


def covd_along(p: Poly, v: str, n: int = 1) -> Poly:
    """``(v . nabla)^n p``: derivative slots contracted with the vector ``v``."""
    out = p
    for _ in range(n):
        out = covd(out, v)
    return out


def vdiff_term(c, fs, h, x, plabel="p"):
    out = []
    for i, f in enumerate(fs):
        for j, s in enumerate(f[2]):
            if s == plabel:
                ns = list(f[2])
                ns[j] = x
                out.append((c, fs[:i] + ((f[0], f[1], tuple(ns)),) + fs[i + 1:], h))
        if f[0] == "F" and f[1][4]:
            name, nb, nh, nv, pdep = f[1]
            nf = ("F", (name, nb, nh, nv + 1, pdep), f[2] + (x,))
            out.append((c, fs[:i] + (nf,) + fs[i + 1:], h))
    return out


def vdiff(p: Poly, x: str, plabel: str = "p") -> Poly:
    """Vertical derivative ``d/dp_x``: acts on explicit momentum labels and on atom dependence."""
    return p.map_terms(lambda c, fs, h: vdiff_term(c, fs, h, x, plabel))


# ---------------------------------------------------------------- ordered atoms


@lru_cache(maxsize=None)
def _ordered_shape(name, nb, k, nv, pdep) -> Poly:
    base = tuple(f"b{i}" for i in range(nb))
    W = tuple(f"w{i}" for i in range(k))
    V = tuple(f"v{i}" for i in range(nv))
    meta = (name, nb, k, nv, pdep)
    out = Poly.factor(("F", meta, base + W + V))
    if k < 2:
        return out
    acc = Poly({})
    for perm in itertools.permutations(range(k)):
        X = [W[i] for i in perm]
        # bubble sort X back to W, collecting O(X) - O(swap X) pieces
        pos = {w: i for i, w in enumerate(W)}
        changed = True
        while changed:
            changed = False
            for j in range(k - 1):
                if pos[X[j]] > pos[X[j + 1]]:
                    acc = acc - _swap_comm(name, base, tuple(X), j, V, pdep)
                    X[j], X[j + 1] = X[j + 1], X[j]
                    changed = True
    return out + acc.scale(Fraction(1, math.factorial(k)))


def _swap_comm(name, base, X, j, V, pdep) -> Poly:
    """O(X) - O(X with positions j, j+1 swapped), in the sym basis."""
    Y = X[:j]
    c, d = X[j + 1], X[j]
    N = X[j + 2:]
    pieces = []  # (coeff, R factor, base, word, V); rho is contracted afterwards
    rho = "_r"
    if pdep:
        # R^l_{s c d} p_l d^s Y
        pieces.append((GQ(1), Rf("p", rho, c, d), base, Y, V + (rho,)))
    for i in range(len(V)):
        nv = V[:i] + (rho,) + V[i + 1:]
        pieces.append((GQ(1), Rf(V[i], rho, c, d), base, Y, nv))
    lower = base + Y
    for i in range(len(lower)):
        nl = lower[:i] + (rho,) + lower[i + 1:]
        pieces.append((GQ(-1), Rf(rho, lower[i], c, d), nl[:len(base)], nl[len(base):], V))
    out = Poly({})
    for coef, R, b, w, v in pieces:
        # Leibniz for nabla_N applied to R * O(w)
        n = len(N)
        for mask in range(1 << n):
            n1 = tuple(N[t] for t in range(n) if mask >> t & 1)
            n2 = tuple(N[t] for t in range(n) if not mask >> t & 1)
            Rt = (R[0], R[1], R[2] + n2)
            atom = ordered_atom(name, b, w + n1, v, pdep)
            out = out + contract_labels(atom * Poly.from_raw([(coef, (Rt,))]), rho, rho)
    return out


def ordered_atom(name: str, base, word, V=(), pdep: bool = True) -> Poly:
    """Atom with horizontal derivatives applied in the given order (first index applied first),
    rewritten exactly in the symmetrized basis plus curvature corrections."""
    base, word, V = tuple(base), tuple(word), tuple(V)
    shape = _ordered_shape(name, len(base), len(word), len(V), bool(pdep))
    m = {}
    for i, s in enumerate(base):
        m[f"b{i}"] = s
    for i, s in enumerate(word):
        m[f"w{i}"] = s
    for i, s in enumerate(V):
        m[f"v{i}"] = s
    if any(type(x) is int for x in base + word + V):
        raise ValueError("ordered_atom takes string labels; contract afterwards")
    return Poly.from_raw(list(_instantiate(shape, m, 0)))


# ---------------------------------------------------------------- tail reordering


def commute_derivatives(factors: tuple, index: int, j: int) -> Poly:
    """Swap derivative slots ``j`` and ``j+1`` of the tail of curvature factor ``index``.

    Returns the monomial with the two slots swapped plus the curvature correction, so the
    result equals the input monomial."""
    f = factors[index]
    kind, meta, s = f
    if kind not in CURV:
        raise ValueError("only curvature tails can be commuted")
    n0 = NPRINC[kind]
    tail = s[n0:]
    if not 0 <= j < len(tail) - 1:
        raise ValueError("slot out of range")
    rest = factors[:index] + factors[index + 1:]
    x, y = tail[j], tail[j + 1]
    swapped = (kind, meta, s[:n0] + tail[:j] + (y, x) + tail[j + 2:])
    out = Poly.from_raw([(ONE, rest + (swapped,))])
    # T_{;A x y N} - T_{;A y x N} = nabla_N ( -sum_l R^r_{l y x} T_{..r..} )
    off = max_dummy(factors) + 1
    rho = off
    lower = s[:n0] + tail[:j]
    N = tail[j + 2:]
    if kind == "R":
        mk = lambda L: ("R", None, tuple(L))
    elif kind == "Ric":
        mk = lambda L: ("Ric", None, tuple(L))
    else:
        mk = lambda L: ("Rs", None, tuple(L))
    n = len(N)
    for i in range(len(lower)):
        nl = list(lower)
        nl[i] = rho
        T = nl
        for mask in range(1 << n):
            n1 = tuple(N[t] for t in range(n) if mask >> t & 1)
            n2 = tuple(N[t] for t in range(n) if not mask >> t & 1)
            out.add_term(GQ(-1), rest + (mk(tuple(T) + n1), ("R", None, (rho, lower[i], y, x) + n2)))
    return out


# ---------------------------------------------------------------- text output

_VEC_NAMES_DEFAULT = ("u", "v", "w", "p", "x", "y", "z")


def factor_text(f) -> str:
    kind, meta, s = f
    lab = lambda L: f"d{L}" if type(L) is int else str(L)
    if kind == "dim":
        return "dim"
    if kind == "tau":
        return "tau"
    if kind == "g":
        return f"g[{lab(s[0])},{lab(s[1])}]"
    if kind == "S":
        return f"S[{','.join(lab(x) for x in s)}]"
    if kind in CURV:
        n0 = NPRINC[kind]
        head = ",".join(lab(x) for x in s[:n0])
        tail = s[n0:]
        t = (";" + ",".join(lab(x) for x in tail)) if tail else ""
        return f"{kind}[{head}{t}]"
    name, nb, nh, nv, pdep = meta
    b = ",".join(lab(x) for x in s[:nb])
    H = ",".join(lab(x) for x in s[nb:nb + nh])
    V = ",".join(lab(x) for x in s[nb + nh:])
    head = f"{name}{{{b}}}" if nb else name
    if not pdep:
        head += "!"
    return f"{head}({H}|{V})"


def term_text(c: GQ, fs, h) -> str:
    parts = [factor_text(f) for f in fs]
    if h:
        parts.insert(0, "hbar" if h == 1 else f"hbar^{h}")
    body = "*".join(parts)
    coef = c.text()
    if not body:
        return c.text() if (c.re or c.im) else "0"
    if coef == "1":
        return body
    if coef == "-1":
        return "-" + body
    return f"{coef}*{body}"


def to_text(p: Poly) -> str:
    if not p.terms:
        return "0"
    items = sorted(p.terms.items(), key=lambda kv: _sort_key(kv[0]))
    out = ""
    for (h, fs), c in items:
        t = term_text(c, fs, h)
        if out and not t.startswith("-"):
            out += " + " + t
        elif out:
            out += " - " + t[1:]
        else:
            out = t
    return out


def _sort_key(key):
    h, fs = key
    return (h, len(fs), repr(fs))


# ---------------------------------------------------------------- LaTeX output

_GREEK = ["\\mu", "\\nu", "\\rho", "\\lambda", "\\kappa", "\\gamma", "\\delta", "\\epsilon",
          "\\eta", "\\theta", "\\omega", "\\phi", "\\chi", "\\psi", "\\xi", "\\zeta"]


def _latex_label(L) -> str:
    if type(L) is int:
        return _GREEK[L % len(_GREEK)] + ("'" * (L // len(_GREEK)))
    m = re.fullmatch(r"([A-Za-z]+)(\d+)", L)
    if m:
        return f"{m.group(1)}_{{{m.group(2)}}}"
    if L in ("mu", "nu", "rho", "alpha", "beta", "gamma", "sigma", "tau", "lambda"):
        return "\\" + L
    return L


def factor_latex(f, up_first: bool = False) -> str:
    kind, meta, s = f
    if kind == "dim":
        return "d"
    if kind == "tau":
        return "\\tau"
    if kind == "g":
        return f"g_{{{_latex_label(s[0])}{_latex_label(s[1])}}}"
    if kind == "S":
        return "\\sigma_{" + "".join(_latex_label(x) for x in s) + "}" if s else "\\sigma"
    if kind in CURV:
        n0 = NPRINC[kind]
        name = {"R": "R", "Ric": "R", "Rs": "R"}[kind]
        pr = "".join(_latex_label(x) for x in s[:n0])
        tail = "".join(_latex_label(x) for x in s[n0:])
        sub = pr + (";" + tail if tail else "")
        if kind == "R" and up_first:
            return f"{name}^{{{_latex_label(s[0])}}}{{}}_{{{''.join(_latex_label(x) for x in s[1:4])}" + \
                (";" + tail if tail else "") + "}"
        return f"{name}_{{{sub}}}" if sub else name
    name, nb, nh, nv, pdep = meta
    b = "".join(_latex_label(x) for x in s[:nb])
    H = "".join(_latex_label(x) for x in s[nb:nb + nh])
    V = "".join(_latex_label(x) for x in s[nb + nh:])
    out = name
    if b:
        out += f"_{{{b}}}"
    if V:
        out += f"^{{{V}}}"
    if H:
        out += f"{{}}_{{;{H}}}"
    return out


def _coef_latex(c: GQ) -> str:
    def q(x: Fraction) -> str:
        if x.denominator == 1:
            return str(x.numerator)
        return f"\\frac{{{x.numerator}}}{{{x.denominator}}}"
    if not c.im:
        return q(c.re)
    if not c.re:
        if c.im == 1:
            return "i"
        if c.im == -1:
            return "-i"
        return q(c.im) + "i"
    return f"\\left({q(c.re)}{'+' if c.im > 0 else '-'}{q(abs(c.im))}i\\right)"


def to_latex(p: Poly, up_first: bool = True) -> str:
    if not p.terms:
        return "0"
    items = sorted(p.terms.items(), key=lambda kv: _sort_key(kv[0]))
    out = ""
    for (h, fs), c in items:
        parts = []
        if h:
            parts.append("\\hbar" if h == 1 else f"\\hbar^{{{h}}}")
        parts.extend(factor_latex(f, up_first) for f in fs)
        body = " ".join(parts)
        coef = _coef_latex(c)
        if coef == "1" and body:
            t = body
        elif coef == "-1" and body:
            t = "-" + body
        else:
            t = coef + (" " + body if body else "")
        if out:
            out += (" - " + t[1:]) if t.startswith("-") else (" + " + t)
        else:
            out = t
    return out


# ---------------------------------------------------------------- JSON


def to_json(p: Poly) -> str:
    return json.dumps(to_json_obj(p), sort_keys=True)


def to_json_obj(p: Poly) -> dict:
    terms = []
    for (h, fs), c in sorted(p.terms.items(), key=lambda kv: _sort_key(kv[0])):
        terms.append({
            "coeff": c.to_json(),
            "hbar": h,
            "factors": [[f[0], list(f[1]) if f[1] is not None else None, list(f[2])] for f in fs],
        })
    return {"free_signature": list(p.free), "terms": terms}


def from_json(s: str | dict) -> Poly:
    d = json.loads(s) if isinstance(s, str) else s
    p = Poly({}, tuple(d.get("free_signature", ())))
    for t in d["terms"]:
        fs = tuple((f[0], tuple(f[1]) if f[1] is not None else None, tuple(f[2])) for f in t["factors"])
        p.add_term(GQ.from_json(t["coeff"]), fs, t["hbar"])
    return p


# ---------------------------------------------------------------- parser

_TOKEN = re.compile(r"\s*(?:(\d+/\d+|\d+)|([A-Za-z_][A-Za-z_0-9']*!?)|(.))")


class ParseError(ValueError):
    pass


def parse(src: str, vectors: Sequence[str] = ("u", "v", "p"), free: Sequence[str] = ()) -> Poly:
    """Parse a sum of products.

    Factors: ``R[a,b,c,d;e,f]``, ``Ric[a,b;e]``, ``Rs[;e]``, ``g[a,b]``, ``dim``, ``tau``,
    ``hbar``, ``i``, rationals, symbol atoms ``a(H|V)`` (symmetrized derivatives), ordered atoms
    ``a<H|V>``, atoms with base indices ``A{b}(H|V)`` (append ``!`` to the name for no momentum
    dependence) and vector contractions ``u[a]`` for any declared vector name.
    Labels appearing twice in a product are contracted; other labels must be vectors or free."""
    toks = [m for m in _TOKEN.findall(src) if any(m)]
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else ("", "", "")

    def take():
        t = peek()
        pos[0] += 1
        return t

    def expect(ch):
        t = take()
        if t[2] != ch:
            raise ParseError(f"expected {ch!r} got {t!r}")

    def label_list(stop):
        out = []
        while True:
            t = peek()
            if t[2] in stop:
                return out
            t = take()
            if t[1]:
                out.append(t[1])
            elif t[0]:
                out.append(t[0])
            else:
                raise ParseError(f"bad label {t!r}")
            if peek()[2] == ",":
                take()

    vec = set(vectors)

    # an expression is a list of (coef, hbar, factor list with string labels, ordered atom list)
    def expr():
        terms = term()
        while peek()[2] in ("+", "-"):
            op = take()[2]
            t2 = term()
            if op == "-":
                t2 = [(-c, h, fs) for c, h, fs in t2]
            terms = terms + t2
        return terms

    def term():
        sign = GQ(1)
        while peek()[2] in ("+", "-"):
            if take()[2] == "-":
                sign = -sign
        acc = [(sign, 0, [])]
        first = True
        while True:
            t = peek()
            if not first:
                if t[2] == "*":
                    take()
                elif t[2] == "/":
                    take()
                    n = take()
                    if not n[0]:
                        raise ParseError("division by non number")
                    acc = [(c / Fraction(n[0]), h, fs) for c, h, fs in acc]
                    continue
                elif t[0] or t[1] or t[2] == "(":
                    pass
                else:
                    return acc
            first = False
            acc = [(c1 * c2, h1 + h2, f1 + f2) for c1, h1, f1 in acc for c2, h2, f2 in atom()]

    def atom():
        t = take()
        if t[0]:
            return [(GQ(Fraction(t[0])), 0, [])]
        if t[2] == "(":
            e = expr()
            expect(")")
            return e
        name = t[1]
        if not name:
            raise ParseError(f"unexpected {t!r}")
        if name == "i":
            return [(I, 0, [])]
        if name == "hbar":
            if peek()[2] == "^":
                take()
                return [(ONE, int(take()[0]), [])]
            return [(ONE, 1, [])]
        if name == "dim":
            return [(ONE, 0, [("dim", None, ())])]
        if name == "tau":
            return [(ONE, 0, [("tau", None, ())])]
        nxt = peek()[2]
        if name in ("R", "Ric", "Rs", "g", "S") and nxt == "[":
            take()
            pr = label_list((";", "]"))
            tail = []
            if peek()[2] == ";":
                take()
                tail = label_list(("]",))
            expect("]")
            return [(ONE, 0, [(name, None, tuple(pr) + tuple(tail))])]
        if name in vec and nxt == "[":
            take()
            ls = label_list(("]",))
            expect("]")
            return [(ONE, 0, [("g", None, (name, ls[0]))])]
        pdep = True
        if name.endswith("!"):
            name = name[:-1]
            pdep = False
        base = []
        if nxt == "{":
            take()
            base = label_list(("}",))
            expect("}")
            nxt = peek()[2]
        if nxt in ("(", "<"):
            close = ")" if nxt == "(" else ">"
            take()
            H = label_list(("|", close))
            V = []
            if peek()[2] == "|":
                take()
                V = label_list((close,))
            expect(close)
            if close == ")":
                return [(ONE, 0, [Ff(name, base, H, V, pdep)])]
            return [(ONE, 0, [("ORD", (name, tuple(base), tuple(H), tuple(V), pdep), ())])]
        raise ParseError(f"unknown factor {name!r}")

    raw = expr()
    if pos[0] != len(toks):
        raise ParseError(f"trailing input at {toks[pos[0]]!r}")
    out = Poly({}, tuple(free))
    for c, h, fs in raw:
        _add_parsed(out, c, h, fs, vec, set(free))
    return out


def _add_parsed(out: Poly, c, h, fs, vec, free) -> None:
    cnt = Counter()
    for f in fs:
        if f[0] == "ORD":
            name, b, H, V, pdep = f[1]
            cnt.update(b + H + V)
        else:
            cnt.update(f[2])
    dummies = []
    for L, n in cnt.items():
        if L in vec or L in free:
            continue
        if n == 2:
            dummies.append(L)
        elif n > 2:
            raise ParseError(f"label {L!r} used {n} times")
        else:
            raise ParseError(f"label {L!r} is neither contracted, a vector nor free")
    plain = tuple(f for f in fs if f[0] != "ORD")
    ords = [f for f in fs if f[0] == "ORD"]
    if not ords:
        d = {L: i for i, L in enumerate(dummies)}
        out.add_term(c, rename(plain, d), h)
        return
    prod = Poly.from_raw([(c, plain, h)])
    for f in ords:
        name, b, H, V, pdep = f[1]
        prod = prod * ordered_atom(name, b, H, V, pdep)
    for L in dummies:
        prod = contract_labels(prod, L, L)
    for k, v in prod.terms.items():
        out.add_canonical(v, k)


# ---------------------------------------------------------------- identity testing


def max_tail(p: Poly) -> int:
    m = 0
    for (_, fs) in p.terms:
        for k, _, s in fs:
            if k in CURV:
                m = max(m, len(s) - NPRINC[k])
    return m


def _mod_coeffs(c: GQ) -> tuple[int, int]:
    from ._jets import frac_mod
    return frac_mod(c.re), frac_mod(c.im)


def _groups(p: Poly) -> dict:
    out: dict = {}
    for (h, fs), c in p.terms.items():
        nd = sum(1 for f in fs if f[0] == "dim")
        out.setdefault((h, nd), []).append((fs, c))
    return out


def is_zero(p: Poly, samples: int = 4) -> bool:
    """True when ``p`` vanishes identically; the dimension factor and hbar are kept formal."""
    from ._jets import P, oracle_for
    import numpy as np
    orc = oracle_for(max_tail(p))
    for items in _groups(p).values():
        re = np.zeros(samples, dtype=np.int64)
        im = np.zeros(samples, dtype=np.int64)
        for fs, c in items:
            v = orc.values(fs, samples)
            a, b = _mod_coeffs(c)
            re = (re + a * v) % P
            im = (im + b * v) % P
        if re.any() or im.any():
            return False
    return True


def equal(a: Poly, b: Poly) -> bool:
    return is_zero(a - b)


def sector_key(h: int, fs) -> tuple:
    ext = []
    fsig = []
    for k, meta, s in fs:
        ext.extend(x for x in s if type(x) is str)
        if k == "F":
            fsig.append(meta)
    return (h, curvature_weight(fs), tuple(sorted(fsig)), tuple(sorted(ext)),
            sum(1 for f in fs if f[0] == "dim"), sum(1 for f in fs if f[0] == "tau"))


def _pref_key(fs) -> tuple:
    ncurv = sum(1 for f in fs if f[0] in CURV)
    return (-ncurv, repr(fs))


def normal_form(p: Poly) -> Poly:
    """Reduce ``p`` to a linearly independent set of its own monomials.

    Within each sector the monomials are ordered by preference (products of more curvature
    factors first), dependent monomials are rewritten through exact relations recovered
    from modular samples, and the result is verified on fresh samples."""
    from ._jets import oracle_for, ratrec, rref
    import numpy as np
    orc = oracle_for(max_tail(p))
    sectors: dict = {}
    for (h, fs), c in p.terms.items():
        sectors.setdefault(sector_key(h, fs), []).append(((h, fs), c))
    out = Poly({}, p.free)
    for items in sectors.values():
        items.sort(key=lambda kc: _pref_key(kc[0][1]))
        n = len(items)
        if n == 1:
            out.add_canonical(items[0][1], items[0][0])
            continue
        S = n + 4
        while True:
            M = np.stack([orc.values(k[1], S) for k, _ in items], axis=1)
            R, piv = rref(M)
            if len(piv) < S:
                break
            S *= 2
        coeff = {j: items[j][1] for j in piv}
        ok = True
        for j in range(n):
            if j in coeff:
                continue
            rel = []
            for r, pj in enumerate(piv):
                if pj > j:
                    continue
                q = ratrec(int(R[r, j]))
                if q is None:
                    ok = False
                    break
                if q:
                    rel.append((pj, q))
            if not ok:
                break
            for pj, q in rel:
                coeff[pj] = coeff[pj] + items[j][1] * q
        if not ok:
            raise ArithmeticError("relation coefficients could not be reconstructed")
        red = Poly({}, p.free)
        for j, c in coeff.items():
            red.add_canonical(c, items[j][0])
        orig = Poly(dict(items), p.free)
        # fresh samples beyond those used for the elimination
        if not _zero_on(red - orig, orc, S, 3):
            raise ArithmeticError("normal form verification failed")
        for k, c in red.terms.items():
            out.add_canonical(c, k)
    return out


def _zero_on(p: Poly, orc, start: int, n: int) -> bool:
    from ._jets import P
    import numpy as np
    for items in _groups(p).values():
        re = np.zeros(n, dtype=np.int64)
        im = np.zeros(n, dtype=np.int64)
        for fs, c in items:
            v = orc.values(fs, n, start)
            a, b = _mod_coeffs(c)
            re = (re + a * v) % P
            im = (im + b * v) % P
        if re.any() or im.any():
            return False
    return True
