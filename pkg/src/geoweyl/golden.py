"""Frozen reference series used by the golden tests and by ``verify --check golden``.

Each entry is ``(coefficient, pattern, word)``: the digits of ``word`` select ``u1`` or ``u2``
for the placeholders ``a1, a2, ...`` of ``pattern`` in order.
"""

from __future__ import annotations

import re
from fractions import Fraction as F

from geoweyl.tensor_expr import Poly, parse

R1 = "R[mu,a1,a2,a3]"
R1D = "R[mu,a1,a2,a3;a4]"
R1DD = "R[mu,a1,a2,a3;a4,a5]"
RR5 = "R[mu,a1,b,a2]*R[b,a3,a4,a5]"
RIC = "Ric[a1,a2]"
RICD = "Ric[a1,a2;a3]"
RICDD = "Ric[a1,a2;a3,a4]"
RICR = "Ric[m,a1]*R[m,a2,a3,a4]"
RR4 = "R[m,a1,n,a2]*R[n,a3,m,a4]"
RR4X = "R[m,a1,n,a2]*R[n,a4,m,a3]"


def build(entries, free=()) -> Poly:
    out = Poly({}, free)
    for c, pat, word in entries:
        s = pat
        for i in range(len(word), 0, -1):
            s = s.replace(f"a{i}", f"u{word[i - 1]}")
        c = F(c)
        out = out + parse(f"({c.numerator}/{c.denominator})*{s}", vectors=("u1", "u2"), free=free)
    out.free = tuple(free)
    return out


def vector(entries, linear=()) -> Poly:
    p = build(entries, free=("mu",))
    for c, lab in linear:
        p = p + parse(f"{c}*g[mu,{lab}]", vectors=("u1", "u2"), free=("mu",))
    p.free = ("mu",)
    return p


V1 = [
    (F(1, 2), R1, "212"),
    (F(-1, 24), R1D, "1212"), (F(5, 24), R1D, "2121"), (F(-1, 12), R1D, "1211"), (F(1, 12), R1D, "2122"),
    (F(1, 24), R1DD, "21222"), (F(-1, 12), R1DD, "12112"), (F(1, 12), R1DD, "21211"),
    (F(5, 24), RR5, "22212"), (F(-1, 6), RR5, "21121"), (F(1, 12), RR5, "11212"),
]
V2 = [
    (F(1, 2), R1, "121"),
    (F(-1, 24), R1D, "2121"), (F(5, 24), R1D, "1212"), (F(-1, 12), R1D, "2122"), (F(1, 12), R1D, "1211"),
    (F(1, 24), R1DD, "12111"), (F(-1, 12), R1DD, "21221"), (F(1, 12), R1DD, "12122"),
    (F(5, 24), RR5, "11121"), (F(-1, 6), RR5, "12212"), (F(1, 12), RR5, "22121"),
]
W = [
    (F(1, 6), R1, "121"), (F(-1, 6), R1, "212"),
    (F(-1, 6), R1D, "2122"), (F(1, 6), R1D, "1211"),
    (F(-7, 120), R1DD, "21221"), (F(1, 120), R1DD, "12122"), (F(1, 40), R1DD, "12111"),
    (F(7, 120), R1DD, "12112"), (F(-1, 120), R1DD, "21211"), (F(-1, 40), R1DD, "21222"),
    (F(7, 360), RR5, "22121"), (F(-11, 360), RR5, "21212"), (F(-11, 90), RR5, "12212"),
    (F(7, 360), RR5, "11121"), (F(-7, 360), RR5, "11212"), (F(11, 360), RR5, "12121"),
    (F(11, 90), RR5, "21121"), (F(-7, 360), RR5, "22212"),
]
W_TILDE = [
    (F(1, 6), R1, "121"), (F(1, 6), R1, "212"),
    (F(-7, 120), R1DD, "21221"), (F(1, 120), R1DD, "12122"), (F(1, 40), R1DD, "12111"),
    (F(-7, 120), R1DD, "12112"), (F(1, 120), R1DD, "21211"), (F(1, 40), R1DD, "21222"),
    (F(7, 360), RR5, "22121"), (F(-11, 360), RR5, "21212"), (F(-11, 90), RR5, "12212"),
    (F(7, 360), RR5, "11121"), (F(7, 360), RR5, "11212"), (F(-11, 360), RR5, "12121"),
    (F(-11, 90), RR5, "21121"), (F(7, 360), RR5, "22212"),
]
DELTA_PLUS_12 = [
    (F(-1, 3), R1, "121"),
    (F(1, 24), R1D, "2121"), (F(-5, 24), R1D, "1212"),
    (F(-1, 60), R1DD, "12111"), (F(-3, 40), R1DD, "12122"), (F(1, 40), R1DD, "21212"),
    (F(1, 6), RR5, "11112"), (F(-1, 45), RR5, "11121"), (F(2, 45), RR5, "12212"),
    (F(-1, 180), RR5, "21212"), (F(-7, 180), RR5, "22121"),
]
DELTA_MINUS_12 = [
    (F(1, 6), R1, "212"),
    (F(-1, 12), R1D, "1211"), (F(1, 12), R1D, "2122"),
    (F(-7, 120), R1DD, "12112"), (F(1, 120), R1DD, "21211"), (F(1, 40), R1DD, "21222"),
    (F(7, 360), RR5, "11212"), (F(-41, 360), RR5, "12121"), (F(-1, 12), RR5, "12112"),
    (F(1, 6), RR5, "21112"), (F(2, 45), RR5, "21121"), (F(7, 360), RR5, "22212"),
]
LOG_JACOBIAN = [
    (F(1, 6), RIC, "11"), (F(1, 6), RIC, "22"),
    (F(1, 12), RICD, "111"), (F(-1, 12), RICD, "112"), (F(1, 6), RICD, "121"),
    (F(1, 6), RICD, "212"), (F(-1, 12), RICD, "221"), (F(1, 12), RICD, "222"),
    (F(1, 40), RICDD, "1111"), (F(-1, 30), RICDD, "1122"), (F(1, 10), RICDD, "1212"),
    (F(1, 10), RICDD, "2121"), (F(-1, 30), RICDD, "2211"), (F(1, 40), RICDD, "2222"),
    (F(1, 9), RICR, "1212"), (F(1, 9), RICR, "2121"),
    (F(1, 180), RR4, "1111"), (F(1, 45), RR4, "1122"), (F(1, 45), RR4, "1212"),
    (F(49, 180), RR4, "1221"), (F(1, 180), RR4, "2222"),
]
LOG_LAMBDA = [
    (F(1, 3), RIC, "12"),
    (F(1, 6), RICD, "112"), (F(1, 6), RICD, "221"),
    (F(1, 120), RICDD, "1112"), (F(1, 120), RICDD, "1121"), (F(1, 60), RICDD, "1211"),
    (F(-1, 60), RICDD, "1221"), (F(-1, 60), RICDD, "1212"), (F(3, 40), RICDD, "1122"),
    (F(3, 40), RICDD, "2211"), (F(1, 120), RICDD, "2221"), (F(1, 120), RICDD, "2212"),
    (F(1, 60), RICDD, "1222"),
    (F(1, 18), RICR, "1121"), (F(-1, 18), RICR, "1212"), (F(-1, 18), RICR, "2121"), (F(1, 18), RICR, "2212"),
    (F(7, 45), RR4X, "2111"), (F(-7, 90), RR4X, "1221"), (F(31, 180), RR4X, "1212"),
    (F(-7, 90), RR4X, "1122"), (F(7, 45), RR4X, "1222"),
]
# log Delta(z - w, z + w~)^(1/2) through order 4
LOG_DELTA_MINUS_W_TO_W_TILDE = [
    (F(1, 3), RIC, "11"), (F(1, 3), RICD, "112"),
    (F(2, 45), RR4, "1111"), (F(1, 30), RICDD, "1111"), (F(1, 6), RICDD, "1122"),
]

# coincidence table entries [sigma^mu_(alpha' ^a)(beta' ^b)] with u for alpha and v for beta
TABLE = {
    (0, 2): "0",
    (1, 1): "0",
    (2, 1): "2/3*R[mu,u,v,u]",
    (1, 2): "-1/3*R[mu,v,u,v]",
    (3, 1): "1/2*R[mu,u,v,u;u]",
    (2, 2): "5/6*R[mu,u,v,u;v] - 1/6*R[mu,v,u,v;u]",
    (1, 3): "-1/2*R[mu,v,u,v;v]",
    (4, 1): "2/5*R[mu,u,v,u;u,u] + 8/15*R[mu,u,c,u]*R[c,u,v,u]",
    (3, 2): "7/10*R[mu,u,v,u;v,u] - 1/10*R[mu,v,u,v;u,u] + 7/15*R[mu,u,c,u]*R[c,v,u,v]"
            " + 31/15*R[mu,u,c,v]*R[c,u,v,u] - 8/15*R[mu,v,c,u]*R[c,u,v,u]",
    (2, 3): "-3/10*R[mu,v,u,v;u,v] + 9/10*R[mu,u,v,u;v,v] + 7/15*R[mu,v,c,v]*R[c,u,v,u]"
            " + 1/15*R[mu,v,c,u]*R[c,v,u,v] - 8/15*R[mu,u,c,v]*R[c,v,u,v]",
    (1, 4): "-3/5*R[mu,v,u,v;v,v] - 7/15*R[mu,v,c,v]*R[c,v,u,v]",
}

ZETA = {2: "1/12*Ric[u,u]", 3: "1/24*Ric[u,u;u]",
        4: "1/360*R[b,u,c,u]*R[c,u,b,u] + 1/80*Ric[u,u;u,u]"}
# (u degree, v degree) -> coefficient polynomial of zeta(z + v, z + v + [[u]]^v), literal reference
ZETA_SHIFTED = {(2, 0): "1/12*Ric[u,u]", (3, 0): "1/24*Ric[u,u;u]", (2, 1): "1/12*Ric[u,u;v]",
                (4, 0): "1/360*R[b,u,c,u]*R[c,u,b,u] + 1/80*Ric[u,u;u,u]",
                (3, 1): "1/24*Ric[u,u;u,v]", (2, 2): "1/12*Ric[u,u;v,v]"}
ZETA_SYMMETRIC = {2: "1/3*Ric[u,u]", 3: "0", 4: "2/45*R[b,u,c,u]*R[c,u,b,u] + 1/30*Ric[u,u;u,u]"}
ZETA_SHIFTED_SYMMETRIC = {(2, 0): "1/3*Ric[u,u]", (2, 1): "1/3*Ric[u,u;v]",
                          (4, 0): "2/45*R[b,u,c,u]*R[c,u,b,u] + 1/30*Ric[u,u;u,u]",
                          (2, 2): "1/6*Ric[u,u;v,v]"}

# (a * b)_n, literal reference; a<H|V> keeps the listed order of horizontal derivatives
STAR = {
    0: "a(|)*b(|)",
    1: "(1/2)*i*(a(k1|)*b(|k1) - a(|k1)*b(k1|))",
    2: "(-1/8)*(a<k1,k2|>*b(|k1,k2) - 2*a<k1|k2>*b<k2|k1> + a(|k1,k2)*b<k1,k2|>)"
       " + (1/12)*Ric[k1,k2]*a(|k2)*b(|k1)"
       " - (1/24)*R[p,k1,k2,k3]*(a(|k2)*b(|k1,k3) + a(|k1,k3)*b(|k2))",
    3: "(-1/48)*i*(a<k1,k2,k3|>*b(|k1,k2,k3) - 3*a<k1,k2|k3>*b<k3|k1,k2>"
       " + 3*a<k1|k2,k3>*b<k2,k3|k1> - a(|k1,k2,k3)*b<k1,k2,k3|>)"
       " + (1/24)*i*Ric[k1,k2]*(a<k3|k2>*b(|k1,k3) - a(|k2,k3)*b<k3|k1>)"
       " - (1/16)*i*R[s,k1,k2,k3]*(a<s|k1,k3>*b(|k2) - a(|k2)*b<s|k1,k3>)"
       " - (1/48)*i*R[p,k1,k2,k3]*(-a<k4|k1,k3>*b(|k2,k4) - a<k4|k2>*b(|k1,k3,k4)"
       " + a(|k1,k3,k4)*b<k4|k2> + a(|k2,k4)*b<k4|k1,k3>)"
       " + (1/48)*i*Ric[k1,k2;k3]*(a(|k3)*b(|k1,k2) - a(|k1,k2)*b(|k3))"
       " + (1/48)*i*R[p,k1,k2,k3;k4]*(a(|k1,k3,k4)*b(|k2) - a(|k2)*b(|k1,k3,k4))",
    4: "(1/384)*(a<k1,k2,k3,k4|>*b(|k1,k2,k3,k4) - 4*a<k1,k2,k3|k4>*b<k4|k1,k2,k3>"
       " + 6*a<k1,k2|k3,k4>*b<k3,k4|k1,k2> - 4*a<k1|k2,k3,k4>*b<k2,k3,k4|k1>"
       " + a(|k1,k2,k3,k4)*b<k1,k2,k3,k4|>)"
       " - (1/96)*Ric[k1,k2]*(a<k3,k4|k2>*b(|k1,k3,k4) - 2*a<k3|k2,k4>*b<k4|k1,k3>"
       " + a(|k2,k3,k4)*b<k3,k4|k1>)"
       " + (1/32)*R[s,k1,k2,k3]*(a<s,k4|k1,k3>*b(|k2,k4) - a<s|k1,k3,k4>*b<k4|k2>"
       " - a<k4|k2>*b<s|k1,k3,k4> + a(|k2,k4)*b<s,k4|k1,k3>)"
       " + (1/192)*R[p,k1,k2,k3]*(a<k4,k5|k1,k3>*b(|k2,k4,k5) + a<k4,k5|k2>*b(|k1,k3,k4,k5)"
       " - 2*a<k4|k1,k3,k5>*b<k5|k2,k4> - 2*a<k4|k2,k5>*b<k5|k1,k3,k4>"
       " + a(|k1,k3,k4,k5)*b<k4,k5|k2> + a(|k2,k4,k5)*b<k4,k5|k1,k3>)"
       " - (1/96)*Ric[k1,k2;k3]*(a<k4|k3>*b(|k1,k2,k4) - a(|k3,k4)*b<k4|k1,k2>"
       " - a<k4|k1,k2>*b(|k3,k4) + a(|k1,k2,k4)*b<k4|k3>)"
       " - (1/384)*R[s,k1,k2,k3;k4]*(2*a<s|k1,k3,k4>*b(|k2) + a<s|k2,k4>*b(|k1,k3)"
       " - 5*a<s|k1,k3>*b(|k2,k4) - 2*a<s|k2>*b(|k1,k3,k4) + 2*a(|k2)*b<s|k1,k3,k4>"
       " - 5*a(|k2,k4)*b<s|k1,k3> + a(|k1,k3)*b<s|k2,k4> - 2*a(|k1,k3,k4)*b<s|k2>)"
       " - (1/96)*R[p,k1,k2,k3;k4]*(a<k5|k1,k3,k4>*b(|k2,k5) - a<k5|k2>*b(|k1,k3,k4,k5)"
       " - a(|k1,k3,k4,k5)*b<k5|k2> + a(|k2,k5)*b<k5|k1,k3,k4>)"
       " + (1/288)*Ric[k1,k2]*Ric[k3,k4]*a(|k2,k4)*b(|k1,k3)"
       " - (1/288)*Ric[k1,k2]*R[p,k3,k4,k5]*(a(|k1,k3,k5)*b(|k2,k4) + a(|k2,k4)*b(|k1,k3,k5))"
       " - (1/288)*Ric[s,k1]*R[s,k2,k3,k4]*(a(|k2,k4)*b(|k1,k3) + a(|k1,k3)*b(|k2,k4)"
       " + a(|k3)*b(|k1,k2,k4) + a(|k1,k2,k4)*b(|k3))"
       " - (1/2880)*R[s,k1,t,k2]*R[s,k3,t,k4]*(28*a(|k2,k3,k4)*b(|k1) + 14*a(|k1,k2)*b(|k3,k4)"
       " - 31*a(|k1,k3)*b(|k2,k4) + 14*a(|k1,k4)*b(|k2,k3) + 28*a(|k1)*b(|k2,k3,k4))"
       " + (1/5760)*R[p,k1,t,k2]*R[t,k3,k4,k5]*(7*a(|k1,k2,k3,k5)*b(|k4) - 11*a(|k1,k3,k5)*b(|k2,k4)"
       " - 44*a(|k2,k3,k5)*b(|k1,k4) + 7*a(|k1,k2,k4)*b(|k3,k5) + 7*a(|k3,k5)*b(|k1,k2,k4)"
       " - 44*a(|k1,k4)*b(|k2,k3,k5) - 11*a(|k2,k4)*b(|k1,k3,k5) + 7*a(|k4)*b(|k1,k2,k3,k5))"
       " + (1/1152)*R[p,k1,k2,k3]*R[p,k4,k5,k6]*(a(|k1,k3,k4,k6)*b(|k2,k5)"
       " + 2*a(|k1,k3,k5)*b(|k2,k4,k6) + a(|k2,k5)*b(|k1,k3,k4,k6))"
       " - (1/1920)*Ric[k1,k2;k3,k4]*(a(|k1,k2,k3)*b(|k4) + a(|k1,k2,k4)*b(|k3)"
       " + 2*a(|k1,k3,k4)*b(|k2) + 2*a(|k1,k3)*b(|k2,k4) - 9*a(|k1,k2)*b(|k3,k4)"
       " - 9*a(|k3,k4)*b(|k1,k2) + 2*a(|k2,k4)*b(|k1,k3) + 2*a(|k2)*b(|k1,k3,k4)"
       " + a(|k3)*b(|k1,k2,k4) + a(|k4)*b(|k1,k2,k3))"
       " + (1/1920)*R[p,k1,k2,k3;k4,k5]*(3*a(|k1,k3,k4,k5)*b(|k2) + 3*a(|k2)*b(|k1,k3,k4,k5)"
       " + a(|k2,k4,k5)*b(|k1,k3) + a(|k1,k3)*b(|k2,k4,k5) - 7*a(|k1,k3,k4)*b(|k2,k5)"
       " - 7*a(|k2,k5)*b(|k1,k3,k4))",
}


# horizontal multi-indices read as symmetrized derivatives
STAR_SYMMETRIZED = {n: re.sub(r"([ab])<([^|]*)\|([^>]*)>", r"\1(\2|\3)", src) for n, src in STAR.items()}

# hbar^3 with the sign of the one-horizontal-derivative R p group flipped
_GROUP = "- (1/48)*i*R[p,k1,k2,k3]*(-a(k4|k1,k3)"
assert _GROUP in STAR_SYMMETRIZED[3]
STAR_3_SIGN_CORRECTED = STAR_SYMMETRIZED[3].replace(_GROUP, "+ (1/48)*i*R[p,k1,k2,k3]*(-a(k4|k1,k3)")

# (2, 2) shifted coefficient implied by the covariant Taylor factor 1/2! on 1/12 Ric[u,u]
ZETA_SHIFTED_CORRECTED = dict(ZETA_SHIFTED)
ZETA_SHIFTED_CORRECTED[(2, 2)] = "1/24*Ric[u,u;v,v]"

# the reference used when a build checks itself
STAR_CHECKED = dict(STAR_SYMMETRIZED)
STAR_CHECKED[3] = STAR_3_SIGN_CORRECTED
