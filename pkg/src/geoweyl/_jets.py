"""Modular evaluation oracle: random metric jets over a prime field.

A monomial is evaluated by building the Taylor jet of a random metric ``g = delta + O(x^2)``
in dimension ``D``, computing its curvature and covariant derivatives at the origin (where
``g = delta``, so index position is immaterial), drawing random symmetric tensors for symbol
atoms and random vectors for external labels, and contracting.  Two polynomials agree
identically exactly when their difference vanishes on generic samples, which is checked with
a few independent samples.
"""

from __future__ import annotations

import itertools
import math
import string
from fractions import Fraction

import numpy as np

P = 4194301  # prime below 2**22 so that products fit comfortably in int64
assert all(P % q for q in range(2, math.isqrt(P) + 1))
INV2 = pow(2, P - 2, P)
_RR_BOUND = math.isqrt(P // 2)


def inv(a: int) -> int:
    return pow(int(a) % P, P - 2, P)


def frac_mod(q: Fraction) -> int:
    return q.numerator % P * inv(q.denominator) % P


def ratrec(a: int) -> Fraction | None:
    """Rational reconstruction of ``a`` mod P with numerator and denominator below sqrt(P/2)."""
    a = int(a) % P
    r0, r1 = P, a
    s0, s1 = 0, 1
    while r1 > _RR_BOUND:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0 or abs(s1) > _RR_BOUND:
        return None
    return Fraction(r1, s1)


def rref(M: np.ndarray) -> tuple[np.ndarray, list[int]]:
    M = M.copy() % P
    rows, cols = M.shape
    r = 0
    piv = []
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(M[r:, c])[0]
        if not len(nz):
            continue
        k = r + int(nz[0])
        if k != r:
            M[[r, k]] = M[[k, r]]
        M[r] = M[r] * inv(M[r, c]) % P
        col = M[:, c].copy()
        col[r] = 0
        M -= np.outer(col, M[r]) % P
        M %= P
        piv.append(c)
        r += 1
    return M[:r], piv


# ---------------------------------------------------------------- series machinery


class _Monomials:
    def __init__(self, D: int, K: int):
        self.D, self.K = D, K
        mons = []
        for d in range(K + 1):
            for combo in itertools.combinations_with_replacement(range(D), d):
                a = [0] * D
                for i in combo:
                    a[i] += 1
                mons.append(tuple(a))
        self.mons = mons
        self.index = {a: i for i, a in enumerate(mons)}
        self.count = [sum(1 for a in mons if sum(a) <= t) for t in range(K + 1)]
        self._pairs = {}
        self._deriv = {}

    def pairs(self, ma: int, mb: int, t: int):
        key = (ma, mb, t)
        if key not in self._pairs:
            ia, ib, tg = [], [], []
            for i in range(ma):
                di = sum(self.mons[i])
                if di > t:
                    break
                for j in range(mb):
                    dj = sum(self.mons[j])
                    if di + dj > t:
                        break
                    ia.append(i)
                    ib.append(j)
                    tg.append(self.index[tuple(x + y for x, y in zip(self.mons[i], self.mons[j]))])
            order = np.argsort(tg, kind="stable")
            tg = np.array(tg)[order]
            starts = np.flatnonzero(np.r_[True, tg[1:] != tg[:-1]])
            self._pairs[key] = (np.array(ia)[order], np.array(ib)[order], (starts, tg[starts], self.count[t]))
        return self._pairs[key]

    def deriv(self, t: int):
        """Gather tables for d/dx_v mapping degree <= t+1 series to degree <= t."""
        if t not in self._deriv:
            n = self.count[t]
            src = np.zeros((self.D, n), dtype=np.int64)
            fac = np.zeros((self.D, n), dtype=np.int64)
            for j in range(n):
                b = self.mons[j]
                for v in range(self.D):
                    a = list(b)
                    a[v] += 1
                    src[v, j] = self.index[tuple(a)]
                    fac[v, j] = b[v] + 1
            self._deriv[t] = (src, fac)
        return self._deriv[t]


def _letters(n: int, skip: str = "zq") -> str:
    return "".join(c for c in string.ascii_letters if c not in skip)[:n]


class _Geometry:
    """Curvature jets of ``S`` random metrics at the origin."""

    def __init__(self, mon: _Monomials, S: int, rng: np.random.Generator):
        self.mon = mon
        D, K = mon.D, mon.K
        self.S, self.D, self.K = S, D, K
        M = mon.count[K]
        h = rng.integers(0, P, size=(S, D, D, M), dtype=np.int64)
        h = (h + h.transpose(0, 2, 1, 3)) % P
        h[..., : mon.count[1]] = 0
        g = h.copy()
        for a in range(D):
            g[:, a, a, 0] = 1
        ginv = -h % P
        for a in range(D):
            ginv[:, a, a, 0] = (ginv[:, a, a, 0] + 1) % P
        hp = h
        n = 1
        while 2 * (n + 1) <= K:
            hp = self.mul(hp, "ab", h, "bc", "ac", K)
            sign = -1 if (n + 1) % 2 else 1
            ginv = (ginv + sign * hp) % P
            n += 1
        dg = self.d(g, K - 1)  # dg[s,d,c,b,q] = d_b g_dc
        T = (dg + dg.transpose(0, 1, 3, 2, 4) - dg.transpose(0, 3, 2, 1, 4)) % P
        # T[d,c,b] = d_b g_dc + d_c g_db - d_d g_bc
        ginv_t = ginv[..., : mon.count[K - 1]]
        G = self.mul(ginv_t, "ad", T, "dcb", "abc", K - 1) * INV2 % P
        self.Gamma = G  # Gamma^a_{bc}, symmetric in b, c
        dG = self.d(G, K - 2)  # dG[a,d,b,c] = d_c Gamma^a_{db}
        Gt = G[..., : mon.count[K - 2]]
        # dG[a,b,c,e] = d_e Gamma^a_{bc}
        R = (dG.transpose(0, 1, 3, 4, 2, 5) - dG.transpose(0, 1, 3, 2, 4, 5)) % P
        R = (R + self.mul(Gt, "ace", Gt, "edb", "abcd", K - 2)
             - self.mul(Gt, "ade", Gt, "ecb", "abcd", K - 2)) % P
        Rl = self.mul(g[..., : mon.count[K - 2]], "ae", R, "ebcd", "abcd", K - 2)
        self.jets = [Rl]
        self.values = {}

    def mul(self, A, sa, B, sb, so, t):
        ia, ib, (starts, targets, n) = self.mon.pairs(A.shape[-1], B.shape[-1], t)
        C = np.einsum(f"z{sa}q,z{sb}q->z{so}q", A[..., ia], B[..., ib]) % P
        out = np.zeros(C.shape[:-1] + (n,), dtype=np.int64)
        out[..., targets] = np.add.reduceat(C, starts, axis=-1) % P
        return out

    def d(self, A, t):
        src, fac = self.mon.deriv(t)
        out = np.empty(A.shape[:-1] + (self.D, src.shape[1]), dtype=np.int64)
        for v in range(self.D):
            out[..., v, :] = A[..., src[v]] * fac[v] % P
        return out

    def covd(self, T, t):
        """nabla of an all-lower tensor series, derivative index appended; result degree <= t."""
        n = T.ndim - 2
        idx = _letters(n + 2)
        e, f = idx[n], idx[n + 1]
        out = self.d(T, t)
        G = self.Gamma[..., : self.mon.count[t]]
        Tt = T[..., : self.mon.count[t]]
        base = idx[:n]
        for i in range(n):
            src = base[:i] + f + base[i + 1:]
            out = (out - self.mul(G, f + e + base[i], Tt, src, base + e, t)) % P
        return out

    def riemann(self, m: int) -> np.ndarray:
        """R_{abcd;e1..em} at the origin, shape (S, D, ..., D)."""
        while len(self.jets) <= m:
            k = len(self.jets)
            self.jets.append(self.covd(self.jets[-1], self.K - 3 - (k - 1)))
        return self.jets[m][..., 0]


class Block:
    """One batch of samples with lazily drawn random atoms and vectors."""

    def __init__(self, mon: _Monomials, S: int, seed: int):
        self.rng = np.random.default_rng(seed)
        self.S = S
        self.D = mon.D
        self.geo = _Geometry(mon, S, self.rng)
        self.cache = {}

    def vector(self, name: str) -> np.ndarray:
        key = ("vec", name)
        if key not in self.cache:
            self.cache[key] = self.rng.integers(0, P, size=(self.S, self.D), dtype=np.int64)
        return self.cache[key]

    def tau(self) -> np.ndarray:
        key = ("tau",)
        if key not in self.cache:
            self.cache[key] = self.rng.integers(1, P, size=(self.S,), dtype=np.int64)
        return self.cache[key]

    def curvature(self, kind: str, m: int) -> np.ndarray:
        key = (kind, m)
        if key not in self.cache:
            R = self.geo.riemann(m)
            if kind == "R":
                v = R
            else:
                idx = _letters(4 + m, "z")
                tail = idx[4:]
                if kind == "Ric":
                    v = np.einsum(f"zabad{tail}->zbd{tail}", R) % P
                else:
                    v = np.einsum(f"zabab{tail}->z{tail}", R) % P
            self.cache[key] = v
        return self.cache[key]

    def atom(self, meta) -> np.ndarray:
        key = ("F", meta)
        if key not in self.cache:
            _, nb, nh, nv, _ = meta
            D = self.D
            sets_h = list(itertools.combinations_with_replacement(range(D), nh))
            sets_v = list(itertools.combinations_with_replacement(range(D), nv))
            raw = self.rng.integers(0, P, size=(self.S, D ** nb, len(sets_h), len(sets_v)), dtype=np.int64)
            ih = {s: i for i, s in enumerate(sets_h)}
            iv = {s: i for i, s in enumerate(sets_v)}
            mh = np.array([ih[tuple(sorted(t))] for t in itertools.product(range(D), repeat=nh)])
            mv = np.array([iv[tuple(sorted(t))] for t in itertools.product(range(D), repeat=nv)])
            full = raw[:, :, mh, :][:, :, :, mv]
            self.cache[key] = full.reshape((self.S,) + (D,) * (nb + nh + nv))
        return self.cache[key]

    def evaluate(self, factors, dim: int) -> np.ndarray:
        ops = []
        scalar = np.ones(self.S, dtype=np.int64)
        for kind, meta, slots in factors:
            if kind == "dim":
                scalar = scalar * dim % P
                continue
            if kind == "tau":
                scalar = scalar * self.tau() % P
                continue
            if kind == "g":
                arr = np.broadcast_to(np.eye(self.D, dtype=np.int64), (self.S, self.D, self.D))
            elif kind == "F":
                arr = self.atom(meta)
            else:
                arr = self.curvature(kind, len(slots) - {"R": 4, "Ric": 2, "Rs": 0}[kind])
            ops.append([arr, list(slots)])
        # contract external labels with their vectors first
        letters = iter(_letters(52, "z"))
        lab = {}
        for op in ops:
            arr, slots = op
            for L in list(set(x for x in slots if type(x) is str)):
                vec = self.vector(L)
                while L in slots:
                    j = slots.index(L)
                    sub = _letters(arr.ndim - 1, "z")
                    out = sub[:j] + sub[j + 1:]
                    arr = np.einsum(f"z{sub},z{sub[j]}->z{out}", arr, vec) % P
                    slots = slots[:j] + slots[j + 1:]
            op[0], op[1] = arr, slots
        for op in ops:
            for L in op[1]:
                if L not in lab:
                    lab[L] = next(letters)
        # pairwise contraction
        while len(ops) > 1:
            best = None
            for i in range(len(ops)):
                for j in range(i + 1, len(ops)):
                    sh = len(set(ops[i][1]) & set(ops[j][1]))
                    size = ops[i][0].ndim + ops[j][0].ndim - 2 * sh
                    key = (-sh, size)
                    if best is None or key < best[0]:
                        best = (key, i, j)
            _, i, j = best
            (a, sa), (b, sb) = ops[i], ops[j]
            shared = set(sa) & set(sb)
            so = [x for x in sa if x not in shared] + [x for x in sb if x not in shared]
            so = list(dict.fromkeys(x for x in so if (sa + sb).count(x) == 1))
            sub = "z" + "".join(lab[x] for x in sa) + ",z" + "".join(lab[x] for x in sb) + \
                "->z" + "".join(lab[x] for x in so)
            c = np.einsum(sub, a, b) % P
            ops = [o for k, o in enumerate(ops) if k not in (i, j)] + [[c, so]]
        if ops:
            arr, slots = ops[0]
            if slots:
                sub = "z" + "".join(lab[x] for x in slots) + "->z"
                arr = np.einsum(sub, arr) % P
            scalar = scalar * arr % P
        return scalar


class Oracle:
    """Lazily sampled modular evaluator for monomials, with per-monomial caching."""

    def __init__(self, K: int = 5, D: int = 6, block: int = 8, seed: int = 20240601):
        self.K, self.D, self.block, self.seed = K, D, block, seed
        self.mon = _Monomials(D, K)
        self.blocks: list[Block] = []
        self.cache: dict = {}

    def _block(self, i: int) -> Block:
        while len(self.blocks) <= i:
            self.blocks.append(Block(self.mon, self.block, self.seed + 7919 * len(self.blocks)))
        return self.blocks[i]

    def values(self, factors, n: int, start: int = 0) -> np.ndarray:
        """Values of a monomial on samples ``start .. start+n-1``."""
        have = self.cache.get(factors)
        need = start + n
        nb = -(-need // self.block)
        if have is None or len(have) < nb * self.block:
            parts = [] if have is None else [have]
            for b in range(0 if have is None else len(have) // self.block, nb):
                parts.append(self._block(b).evaluate(factors, self.D))
            have = np.concatenate(parts)
            self.cache[factors] = have
        return have[start:need]


_ORACLES: dict = {}


def oracle_for(max_tail: int) -> Oracle:
    K = max(5, max_tail + 2)
    if K not in _ORACLES:
        _ORACLES[K] = Oracle(K=K)
    return _ORACLES[K]
