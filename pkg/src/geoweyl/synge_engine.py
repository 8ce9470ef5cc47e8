"""Coincidence limits of covariant derivatives of the world function.

Words are tuples of string labels.  A label may be a formal vector (``u``, ``v``) so that
repeated occurrences symmetrize automatically, or a free index name such as ``mu``.
Unprimed limits come from differentiating ``2 sigma = sigma_a sigma^a`` and reordering the
resulting words; primed indices are moved to unprimed ones with Synge's rule.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .tensor_expr import (
    GQ, Poly, Rf, contract_labels, covd, gf, rename, rename_labels,
)

DEFAULT_CAP = 6


class OrderError(ValueError):
    pass


def _shape(word: tuple) -> tuple[tuple, list]:
    """Pattern of first appearances and the distinct labels in order."""
    seen: dict = {}
    pat = []
    for x in word:
        if x not in seen:
            seen[x] = len(seen)
        pat.append(seen[x])
    return tuple(pat), list(seen)


def _instantiate(p: Poly, labels) -> Poly:
    return rename_labels(p, {f"w{i}": L for i, L in enumerate(labels)})


def unprimed_limit(word) -> Poly:
    """``[sigma_{i1 ... in}]`` with derivatives applied left to right."""
    word = tuple(word)
    pat, labels = _shape(word)
    return _instantiate(_limit_pattern(pat), labels)


def _L(word) -> Poly:
    return unprimed_limit(word)


def _leibniz_splits(N: tuple):
    n = len(N)
    for mask in range(1 << n):
        yield (tuple(N[t] for t in range(n) if mask >> t & 1),
               tuple(N[t] for t in range(n) if not mask >> t & 1))


def reorder_correction(X: tuple, pos: int) -> Poly:
    """``[sigma_X] - [sigma_{X with pos, pos+1 swapped}]`` for ``pos >= 1``.

    Uses ``sigma_{A b c} = sigma_{A c b} + sum_i sigma_{A[i->d]} R_{c b A_i}{}^d`` and
    distributes the trailing derivatives with the Leibniz rule."""
    A = X[:pos]
    b, c = X[pos], X[pos + 1]
    N = X[pos + 2:]
    out = Poly({})
    d = "_d"
    for i in range(len(A)):
        Ad = A[:i] + (d,) + A[i + 1:]
        for n1, n2 in _leibniz_splits(N):
            lim = _L(Ad + n1)
            if not lim:
                continue
            R = Poly.factor(Rf(c, b, A[i], d, tail=n2))
            out = out + contract_labels(lim * R, d, d, free=())
    return out


@lru_cache(maxsize=None)
def _limit_pattern(pat: tuple) -> Poly:
    n = len(pat)
    W = tuple(f"w{i}" for i in pat)
    if n < 2:
        return Poly({})
    if n == 2:
        return Poly.factor(gf(W[0], W[1]))
    corr = Poly({})
    for k in range(2, n):
        X = [W[0], W[k]] + [W[j] for j in range(1, n) if j != k]
        for pos in range(1, k):
            corr = corr + reorder_correction(tuple(X), pos)
            X[pos], X[pos + 1] = X[pos + 1], X[pos]
        assert tuple(X) == W
    lsum = Poly({})
    rest = list(range(1, n))
    for r in range(2, n - 1):
        for K in itertools.combinations(rest, r):
            J = tuple(W[j] for j in rest if j not in K)
            left = _L(("_b", W[0]) + J)
            if not left:
                continue
            right = _L(("_b",) + tuple(W[j] for j in K))
            if not right:
                continue
            lsum = lsum + contract_labels(left * right, "_b", "_b", free=())
    return (corr + lsum).scale(Fraction(-1, n - 1))


def mixed_limit(unprimed, primed) -> Poly:
    """``[sigma_{A B'}]`` with unprimed word ``A`` and primed word ``B``, via Synge's rule
    ``[T_{x'}] = [T]_{;x} - [T_{;x}]`` applied to the last primed index."""
    A, B = tuple(unprimed), tuple(primed)
    if not B:
        return _L(A)
    return _mixed_cached(A, B)


@lru_cache(maxsize=None)
def _mixed_cached(A: tuple, B: tuple) -> Poly:
    return apply_synge_rule(A, B[:-1], B[-1])


def apply_synge_rule(unprimed, primed, x: str) -> Poly:
    """``[sigma_{A B' x'}] = [sigma_{A B'}]_{;x} - [sigma_{A x B'}]``."""
    A, B = tuple(unprimed), tuple(primed)
    return covd(mixed_limit(A, B), x) - mixed_limit(A + (x,), B)


@dataclass(frozen=True)
class LimitKey:
    """``[sigma^mu_{(alpha ...)(beta' ...)}]``: ``unprimed`` and ``primed`` are words of vector
    labels; equal labels are symmetrized by construction.  ``m`` and ``n`` count them."""

    unprimed: tuple = ()
    primed: tuple = ()
    head: str = "mu"

    @property
    def m(self) -> int:
        return len(self.unprimed)

    @property
    def n(self) -> int:
        return len(self.primed)

    @staticmethod
    def primed_pattern(a: int, b: int, head: str = "mu") -> "LimitKey":
        """All primed key with ``a`` copies of ``u`` followed by ``b`` copies of ``v``."""
        return LimitKey((), ("u",) * a + ("v",) * b, head)


def coincidence_limit(key: LimitKey, cap: int = DEFAULT_CAP) -> Poly:
    if key.m + key.n > cap:
        raise OrderError(f"order {key.m + key.n} above cap {cap}")
    out = mixed_limit((key.head,) + tuple(key.unprimed), key.primed)
    out.free = (key.head,)
    return out


class CoincidenceTable:
    """Memoized ``[sigma^mu_{(alpha'^a)(beta'^b)}]`` keyed by ``(a, b)``; ``u`` stands for
    alpha and ``v`` for beta."""

    def __init__(self, cap: int = DEFAULT_CAP):
        self.cap = cap
        self.entries: dict = {}

    def __getitem__(self, ab: tuple[int, int]) -> Poly:
        if ab not in self.entries:
            self.entries[ab] = coincidence_limit(LimitKey.primed_pattern(*ab), self.cap)
        return self.entries[ab]

    def populate(self, max_order: int) -> dict:
        for tot in range(0, max_order + 1):
            for a in range(tot + 1):
                self[(a, tot - a)]
        return dict(self.entries)


_TABLE = CoincidenceTable()


def table_entry(a: int, b: int) -> Poly:
    return _TABLE[(a, b)]


def trace_limit(word) -> Poly:
    """``[sigma^{a}{}_{a w}]`` with the trace on the first two unprimed slots."""
    return contract_labels(_L(("_t", "_t") + tuple(word)), "_t", "_t", free=())


def sigma_normal_form(word) -> Poly:
    """Rewrite the σ derivative ``word`` with its slots in sorted order (the first two
    slots commute freely) plus curvature corrections carrying lower σ derivatives."""
    terms = [(GQ(1), tuple(word), ())]
    result = Poly({})
    while terms:
        c, w, extra = terms.pop()
        w = list(w)
        target = _sorted_word(w)
        if tuple(w) == target:
            result.add_term(c, (("S", None, tuple(w)),) + extra)
            continue
        # find the first adjacent inversion beyond the free pair
        done = False
        if len(w) >= 2 and _key(w[0]) > _key(w[1]):
            w[0], w[1] = w[1], w[0]
            terms.append((c, tuple(w), extra))
            continue
        for pos in range(1, len(w) - 1):
            if _key(w[pos]) > _key(w[pos + 1]):
                A = tuple(w[:pos])
                b, cc = w[pos], w[pos + 1]
                N = tuple(w[pos + 2:])
                sw = list(w)
                sw[pos], sw[pos + 1] = cc, b
                terms.append((c, tuple(sw), extra))
                for i in range(len(A)):
                    d = f"_s{len(extra)}_{pos}_{i}"
                    for n1, n2 in _leibniz_splits(N):
                        Ad = A[:i] + (d,) + A[i + 1:] + n1
                        R = Rf(cc, b, A[i], d, tail=n2)
                        terms.append((c, Ad, extra + (R,)))
                done = True
                break
        assert done
    # contract the helper labels
    labels = set()
    for (_, fs) in result.terms:
        for f in fs:
            labels.update(x for x in f[2] if isinstance(x, str) and x.startswith("_s"))
    for L in sorted(labels):
        result = contract_labels(result, L, L, free=())
    result.free = tuple(dict.fromkeys(x for x in word if not x.startswith("_")))
    return result


def _key(x: str) -> tuple:
    return (x.startswith("_"), x)


def _sorted_word(w) -> tuple:
    """Target order: the σ slots sorted, helper labels last."""
    return tuple(sorted(w, key=_key))


def sigma_at_coincidence(p: Poly) -> Poly:
    """Replace every σ factor by its coincidence limit."""
    out = Poly({}, p.free)
    for (h, fs), c in p.terms.items():
        mp = {x: f"_z{x}" for f in fs for x in f[2] if type(x) is int}
        fs2 = rename(fs, mp)
        prod = Poly.from_raw([(c, tuple(f for f in fs2 if f[0] != "S"), h)])
        for f in fs2:
            if f[0] == "S":
                prod = prod * _L(f[2])
        for L in mp.values():
            prod = contract_labels(prod, L, L, free=())
        out = out + prod
    return out
