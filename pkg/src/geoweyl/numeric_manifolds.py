"""Numerical geometry on concrete two dimensional charts and quadrature checks of the calculus.

Points and tangent vectors are arrays whose last axis holds chart components.  Sphere and
hyperbolic plane use conformal charts (stereographic, Poincare disc); their geodesics are
available both by integrating the geodesic equation and in closed form through the standard
embeddings, which is what the vectorized quadratures use.
"""

from __future__ import annotations

import configparser
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

MODELS = ("flat-torus", "euclidean", "sphere-2", "hyperbolic-2")


class GeodesicError(RuntimeError):
    """Geodesic leaves the chart domain or the point pair is outside the convex neighbourhood."""


class LogMapError(GeodesicError):
    pass


# ---------------------------------------------------------------- cutoff


def _smooth_step(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth bump in the geodesic distance: 1 below ``r1``, 0 above ``r2``."""

    r1: float
    r2: float

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ValueError("cutoff radii must satisfy 0 < r1 < r2")

    def __call__(self, dist):
        return 1.0 - _smooth_step((np.asarray(dist) - self.r1) / (self.r2 - self.r1))


# ---------------------------------------------------------------- charts


@dataclass(frozen=True)
class ChartModel:
    """Conformally flat chart ``g = exp(2 phi) delta`` of a constant curvature model."""

    model: str
    radius: float = 1.0
    period: float = 2 * math.pi
    domain: float = 3.0
    cutoff: CutoffSpec | None = None
    dim: int = 2

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.cutoff is not None and self.cutoff.r2 >= 0.9 * self.injectivity_bound:
            raise ValueError("cutoff outer radius beyond 0.9 of the injectivity bound")

    # curvature data
    @property
    def sectional_curvature(self) -> float:
        return {"sphere-2": 1.0, "hyperbolic-2": -1.0}.get(self.model, 0.0) / self.radius ** 2

    @property
    def scalar_curvature(self) -> float:
        return self.dim * (self.dim - 1) * self.sectional_curvature

    @property
    def injectivity_bound(self) -> float:
        if self.model == "sphere-2":
            return math.pi * self.radius
        if self.model == "flat-torus":
            return self.period / 2
        return math.inf

    # conformal factor
    def _phi_grad(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        if self.model == "sphere-2":
            return np.log(2 * self.radius) - np.log1p(r2[..., 0]), -2 * x / (1 + r2)
        if self.model == "hyperbolic-2":
            return np.log(2 * self.radius) - np.log(1 - r2[..., 0]), 2 * x / (1 - r2)
        return np.zeros(x.shape[:-1]), np.zeros_like(x)

    def conformal(self, x):
        return np.exp(2 * self._phi_grad(x)[0])

    def metric(self, x):
        return self.conformal(x)[..., None, None] * np.eye(self.dim)

    def sqrt_det(self, x):
        """``|g(x)|^(1/2)``."""
        return self.conformal(x) ** (self.dim / 2)

    def christoffel(self, x):
        """``Gamma[..., k, i, j]`` for the conformal metric."""
        _, dphi = self._phi_grad(x)
        e = np.eye(self.dim)
        return (np.einsum("ki,...j->...kij", e, dphi) + np.einsum("kj,...i->...kij", e, dphi)
                - np.einsum("ij,...k->...kij", e, dphi))

    def christoffel_fd(self, x, h: float = 1e-5):
        """Christoffel symbols from central differences of the metric."""
        x = np.asarray(x, dtype=float)
        d = self.dim
        dg = np.zeros((d, d, d))
        for m in range(d):
            e = np.zeros(d)
            e[m] = h
            dg[m] = (self.metric(x + e) - self.metric(x - e)) / (2 * h)
        ginv = np.linalg.inv(self.metric(x))
        low = 0.5 * (np.einsum("jil->lij", dg) + np.einsum("ijl->lij", dg) - dg)
        return np.einsum("kl,lij->kij", ginv, low)

    def inside(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x), axis=-1)
        if self.model == "hyperbolic-2":
            return r < min(self.domain, 0.999)
        if self.model == "sphere-2":
            return r < self.domain
        return np.ones(r.shape, dtype=bool)

    def norm(self, x, u):
        return np.sqrt(self.conformal(x)) * np.linalg.norm(u, axis=-1)

    def wrap(self, x):
        return np.mod(x, self.period) if self.model == "flat-torus" else x


def make_chart(model: str, **kw) -> ChartModel:
    return ChartModel(model, **kw)


# ---------------------------------------------------------------- embeddings (closed form)


def _minkowski(a, b):
    return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)


class _Embedding:
    """Sphere in R^3 or hyperboloid in R^{1,2} with the conformal chart above."""

    def __init__(self, chart: ChartModel):
        self.c = chart
        self.r = chart.radius
        self.sphere = chart.model == "sphere-2"

    def dot(self, a, b):
        return np.sum(a * b, axis=-1) if self.sphere else _minkowski(a, b)

    def embed(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        if self.sphere:
            s = 1 + r2
            return self.r * np.concatenate([2 * x / s[..., None], ((1 - r2) / s)[..., None]], axis=-1)
        s = 1 - r2
        return self.r * np.concatenate([((1 + r2) / s)[..., None], 2 * x / s[..., None]], axis=-1)

    def chart(self, X):
        if self.sphere:
            return X[..., :2] / (self.r + X[..., 2:3])
        return X[..., 1:] / (self.r + X[..., 0:1])

    def jac(self, x):
        """``dX/dx`` with shape ``(..., 3, 2)``."""
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        e = np.eye(2)
        xx = np.einsum("...i,...j->...ij", x, x)
        if self.sphere:
            s = 1 + r2
            top = 2 * self.r * (e / s - 2 * xx / s ** 2)
            bot = self.r * (-4 * x[..., None, :] / s ** 2)
            return np.concatenate([top, bot], axis=-2)
        s = 1 - r2
        first = self.r * (4 * x[..., None, :] / s ** 2)
        rest = 2 * self.r * (e / s + 2 * xx / s ** 2)
        return np.concatenate([first, rest], axis=-2)

    def push(self, x, u):
        return np.einsum("...ai,...i->...a", self.jac(x), u)

    def pull(self, x, V):
        """Chart components of a tangent vector given in the embedding."""
        J = self.jac(x)
        if not self.sphere:
            V = V * np.array([-1.0, 1.0, 1.0])
        w = np.einsum("...ai,...a->...i", J, V)
        return w / self.c.conformal(x)[..., None]

    def geodesic(self, x, u, t):
        """Position and velocity (embedding) at parameter ``t`` of ``s -> exp_x(s u)``."""
        X = self.embed(x)
        V = self.push(x, u)
        n = np.sqrt(np.maximum(self.dot(V, V), 0.0))[..., None]
        th = t * n / self.r
        safe = np.where(n > 0, n, 1.0)
        if self.sphere:
            c, s = np.cos(th), np.sin(th)
            pos = c * X + self.r * np.where(n > 0, s / safe, t / self.r) * V
            vel = -s * n / self.r * X + c * V
        else:
            c, s = np.cosh(th), np.sinh(th)
            pos = c * X + self.r * np.where(n > 0, s / safe, t / self.r) * V
            vel = s * n / self.r * X + c * V
        return pos, vel

    def log(self, x, y):
        X, Y = self.embed(x), self.embed(y)
        c = self.dot(X, Y) / self.r ** 2
        if self.sphere:
            th = np.arccos(np.clip(c, -1.0, 1.0))
            W = Y - c[..., None] * X
        else:
            th = np.arccosh(np.maximum(-c, 1.0))
            W = Y + c[..., None] * X
        wn = np.sqrt(np.maximum(self.dot(W, W), 0.0))
        scale = np.where(wn > 1e-300, self.r * th / np.where(wn > 1e-300, wn, 1.0), 1.0)
        return self.pull(x, scale[..., None] * W), self.r * th

    def transport(self, x, u, T, t):
        """Parallel transport of the chart vector ``T`` along ``s -> exp_x(s u)`` to ``s = t``."""
        X = self.embed(x)
        V = self.push(x, u)
        W = self.push(x, T)
        n = np.sqrt(np.maximum(self.dot(V, V), 0.0))
        safe = np.where(n > 0, n, 1.0)[..., None]
        e = V / safe
        th = (t * n / self.r)[..., None]
        a = self.dot(W, e)[..., None]
        Xh = X / self.r
        if self.sphere:
            e_t = np.cos(th) * e - np.sin(th) * Xh
        else:
            e_t = np.cosh(th) * e + np.sinh(th) * Xh
        Wt = W - a * e + a * e_t
        pos, _ = self.geodesic(x, u, t)
        return self.pull(self.chart(pos), Wt)


# ---------------------------------------------------------------- geodesics by integration


def _geodesic_rhs(chart: ChartModel, extra: int = 0):
    d = chart.dim

    def f(t, y):
        x, v = y[:d], y[d:2 * d]
        G = chart.christoffel(x)
        out = [v, -np.einsum("kij,i,j->k", G, v, v)]
        for k in range(extra):
            T = y[2 * d + k * d: 2 * d + (k + 1) * d]
            out.append(-np.einsum("kij,i,j->k", G, v, T))
        return np.concatenate(out)
    return f


def _integrate(chart: ChartModel, x, u, t1: float = 1.0, transported=()):
    d = chart.dim
    y0 = np.concatenate([np.asarray(x, float), np.asarray(u, float)] + [np.asarray(T, float) for T in transported])

    def leave(t, y):
        if chart.model in ("sphere-2", "hyperbolic-2"):
            lim = chart.domain if chart.model == "sphere-2" else min(chart.domain, 0.999)
            return lim - np.linalg.norm(y[:d])
        return 1.0
    leave.terminal = True
    sol = solve_ivp(_geodesic_rhs(chart, len(transported)), (0.0, t1), y0, method="DOP853",
                    rtol=1e-12, atol=1e-13, events=leave)
    if sol.status == 1:
        raise GeodesicError("geodesic leaves the chart domain")
    if not sol.success:
        raise GeodesicError(sol.message)
    return sol.y[:, -1]


def exp_map(chart: ChartModel, x, u, method: str = "closed"):
    """``exp_x(u)``; ``method`` is ``ode`` (geodesic equation) or ``closed`` (embedding formulas)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if chart.model in ("euclidean", "flat-torus"):
        return chart.wrap(x + u)
    if method == "ode":
        return _integrate(chart, x, u)[:chart.dim]
    E = _Embedding(chart)
    pos, _ = E.geodesic(x, u, 1.0)
    y = E.chart(pos)
    if not np.all(chart.inside(y)):
        raise GeodesicError("geodesic end point outside the chart domain")
    return y


def _check_distance(chart: ChartModel, dist):
    if np.any(np.asarray(dist) >= 0.9 * chart.injectivity_bound):
        raise LogMapError("point pair beyond 0.9 of the injectivity bound")


def raw_distance(chart: ChartModel, x, y):
    """Geodesic distance without the convexity guard of ``log_map``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if chart.model == "euclidean":
        return np.linalg.norm(y - x, axis=-1)
    if chart.model == "flat-torus":
        L = chart.period
        return np.linalg.norm((y - x + L / 2) % L - L / 2, axis=-1)
    return _Embedding(chart).log(x, y)[1]


def log_map(chart: ChartModel, x, y, method: str = "closed", tol: float = 1e-12, max_iter: int = 50):
    """``exp_x^{-1}(y)``; the ``ode`` method is damped Newton shooting on the geodesic equation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if chart.model == "euclidean":
        return y - x
    if chart.model == "flat-torus":
        L = chart.period
        u = (y - x + L / 2) % L - L / 2
        _check_distance(chart, np.linalg.norm(u, axis=-1))
        return u
    E = _Embedding(chart)
    u0, dist = E.log(x, y)
    _check_distance(chart, dist)
    if method != "ode":
        return u0
    return _shoot(chart, x, y, y - x, tol, max_iter)


def _shoot(chart: ChartModel, x, y, u, tol: float, max_iter: int):
    def F(v):
        return _integrate(chart, x, v)[:chart.dim] - y
    r = F(u)
    h = 1e-7
    for _ in range(max_iter):
        nr = np.linalg.norm(r)
        if nr < tol:
            return u
        J = np.empty((chart.dim, chart.dim))
        for j in range(chart.dim):
            e = np.zeros(chart.dim)
            e[j] = h
            J[:, j] = (F(u + e) - F(u - e)) / (2 * h)
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while lam > 1e-4:
            cand = u + lam * step
            try:
                rc = F(cand)
            except GeodesicError:
                lam /= 2
                continue
            if np.linalg.norm(rc) < nr:
                u, r = cand, rc
                break
            lam /= 2
        else:
            break
    if np.linalg.norm(r) < max(tol, 1e-10):
        return u
    raise LogMapError("shooting did not converge")


def parallel_transport(chart: ChartModel, x, u, T, t: float = 1.0, method: str = "closed"):
    """Transport the vector ``T`` at ``x`` along ``s -> exp_x(s u)`` up to ``s = t``."""
    x = np.asarray(x, dtype=float)
    T = np.asarray(T, dtype=float)
    if chart.model in ("euclidean", "flat-torus"):
        return T.copy()
    if method == "ode":
        return _integrate(chart, x, u, t, (T,))[2 * chart.dim:]
    return _Embedding(chart).transport(x, np.asarray(u, float), T, t)


def geodesic_point(chart: ChartModel, x, u, t):
    """Point and velocity of ``s -> exp_x(s u)`` at ``s = t``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if chart.model in ("euclidean", "flat-torus"):
        return chart.wrap(x + t * u), u.copy()
    E = _Embedding(chart)
    pos, vel = E.geodesic(x, u, t)
    p = E.chart(pos)
    return p, E.pull(p, vel)


def synge_sigma(chart: ChartModel, x, y):
    u = log_map(chart, x, y)
    return 0.5 * chart.conformal(x) * np.sum(u * u, axis=-1)


def geodesic_distance(chart: ChartModel, x, y):
    return np.sqrt(2 * synge_sigma(chart, x, y))


# ---------------------------------------------------------------- Van Vleck-Morette determinant


_STENCIL = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))


def _jacobian(fn: Callable, z, h: float):
    """Fourth order central difference Jacobian of a vectorized map on the last axis."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        acc = 0
        for k, w in _STENCIL:
            acc = acc + w * fn(z + k * e)
        cols.append(acc / h)
    return np.stack(cols, axis=-1)


def vvm_det(chart: ChartModel, x, y, h: float = 1e-3):
    """``Delta(x, y) = |d(y - x)/dy| |g(x)|^(1/2) / |g(y)|^(1/2)`` by finite differences."""
    x = np.asarray(x, dtype=float)
    J = _jacobian(lambda yy: log_map(chart, np.broadcast_to(x, yy.shape), yy), y, h)
    return np.abs(np.linalg.det(J)) * chart.sqrt_det(x) / chart.sqrt_det(y)


def midpoint_vvm(chart: ChartModel, x, y, tau: float, h: float = 1e-3):
    """``|d(y - x)_tau / dy| |g(z_tau)|^(1/2) / |g(y)|^(1/2)`` where the derivative is the bitensor
    ``d(y - x)/dy`` with its leg at ``x`` parallel transported to ``z_tau``; equals ``Delta(x, y)`` for
    every ``tau``.  The plain coordinate Jacobian of ``y -> u_tau`` is a different object once
    ``z_tau`` moves with ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    J = _jacobian(lambda yy: log_map(chart, np.broadcast_to(x, yy.shape), yy), y, h)
    u = log_map(chart, x, y)
    PJ = np.stack([parallel_transport(chart, x, u, J[:, j], tau) for j in range(chart.dim)], axis=-1)
    z = geodesic_point(chart, x, u, tau)[0]
    return np.abs(np.linalg.det(PJ)) * chart.sqrt_det(z) / chart.sqrt_det(y)


def tau_coordinates(chart: ChartModel, x, y, tau: float):
    """``(z_tau, u_tau)``: point at parameter ``tau`` and the geodesic velocity there."""
    u = log_map(chart, x, y)
    return geodesic_point(chart, x, u, tau)


def measure_jacobian(chart: ChartModel, x, y, tau: float, h: float = 1e-3):
    """``|d(z_tau, u_tau)/d(x, y)|`` by finite differences."""
    d = chart.dim

    def fn(w):
        z, u = tau_coordinates(chart, w[..., :d], w[..., d:], tau)
        return np.concatenate([z, u], axis=-1)
    w = np.concatenate([np.asarray(x, float), np.asarray(y, float)], axis=-1)
    return np.abs(np.linalg.det(_jacobian(fn, w, h)))


def measure_jacobian_expected(chart: ChartModel, x, y, tau: float):
    """``Delta(x,y) |g(x)|^(1/2) |g(y)|^(1/2) / |g(z_tau)|``."""
    z, _ = tau_coordinates(chart, x, y, tau)
    return vvm_det(chart, x, y) * chart.sqrt_det(x) * chart.sqrt_det(y) / chart.sqrt_det(z) ** 2


# ---------------------------------------------------------------- symbols and kernels


def _zero_vector(z):
    return np.zeros(np.shape(z))


@dataclass
class GaussianSymbol:
    """``b(z, p) = f(z) exp(-s |p|_g^2 / 2 + i k(z) . p)`` with ``s > 0``."""

    amplitude: Callable
    width: float = 1.0
    drift: Callable = _zero_vector
    tag: str = "gaussian"

    def __call__(self, chart: ChartModel, z, p):
        z = np.asarray(z, float)
        p = np.asarray(p, float)
        g = chart.conformal(z)
        q = np.sum(p * p, axis=-1) / g
        return self.amplitude(z) * np.exp(-0.5 * self.width * q + 1j * np.sum(self.drift(z) * p, axis=-1))

    def fourier(self, chart: ChartModel, z, u, hbar: float):
        """``int b(z, p) exp(-i u.p / hbar) dp / (2 pi hbar)^d``."""
        z = np.asarray(z, float)
        d = chart.dim
        w = self.drift(z) - np.asarray(u) / hbar
        q = chart.conformal(z) * np.sum(w * w, axis=-1)
        pref = (2 * math.pi * hbar) ** (-d) * (2 * math.pi / self.width) ** (d / 2) * chart.sqrt_det(z)
        return self.amplitude(z) * pref * np.exp(-0.5 * q / self.width)


def cutoff_for(chart: ChartModel) -> CutoffSpec:
    if chart.cutoff is not None:
        return chart.cutoff
    b = chart.injectivity_bound
    if math.isinf(b):
        return CutoffSpec(2.0, 3.0)
    return CutoffSpec(0.5 * b, 0.8 * b)


def upsilon(chart: ChartModel, x, y, tau: float):
    """``Delta^(1/2) |g(x)|^(1/4) |g(y)|^(1/4) / |g(z_tau)|^(1/2)``."""
    z, _ = tau_coordinates(chart, x, y, tau)
    return np.sqrt(vvm_det(chart, x, y)) * np.sqrt(chart.sqrt_det(x) * chart.sqrt_det(y)) / chart.sqrt_det(z)


def op_tau_kernel(chart: ChartModel, b: GaussianSymbol, tau: float, x, y, hbar: float = 1.0):
    """Kernel of ``Op_tau(b)`` at ``(x, y)`` (vectorized), including the cutoff."""
    if not isinstance(b, GaussianSymbol):
        raise TypeError("only the Gaussian symbol family is supported")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    cut = cutoff_for(chart)
    dist = raw_distance(chart, x, y)
    inside = dist < cut.r2
    # pairs outside the cutoff support are replaced by the diagonal and then zeroed
    y = np.where(inside[..., None], y, x)
    chi = np.where(inside, cut(dist), 0.0)
    z, u = tau_coordinates(chart, x, y, tau)
    ups = np.sqrt(vvm_det(chart, x, y)) * np.sqrt(chart.sqrt_det(x) * chart.sqrt_det(y)) / chart.sqrt_det(z)
    return np.where(chi > 0, chi * ups * b.fourier(chart, z, u, hbar), 0.0)


@dataclass
class KernelGrid:
    points_x: np.ndarray
    points_y: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("kernel values must be finite")


def kernel_grid(chart: ChartModel, b: GaussianSymbol, tau: float, xs, ys, hbar: float = 1.0) -> KernelGrid:
    return KernelGrid(np.asarray(xs), np.asarray(ys), op_tau_kernel(chart, b, tau, xs, ys, hbar))


def _u_box(chart: ChartModel, b: GaussianSymbol, z, hbar: float) -> tuple[np.ndarray, float]:
    g = float(chart.conformal(np.asarray(z, float)))
    centre = hbar * np.asarray(b.drift(np.asarray(z, float)), float)
    half = hbar * 9.0 * math.sqrt(b.width) / math.sqrt(g)
    return centre, half


def kernel_to_symbol(chart: ChartModel, kernel: Callable, tau: float, z, p, hbar: float = 1.0,
                     centre=None, half: float = 1.0, n: int = 48):
    """``b_tau(z, p) = int |g(z)|^(1/2) / (Delta^(1/2) |g(x)|^(1/4) |g(y)|^(1/4)) K(x, y) e^{i u.p/hbar} du``
    with ``x = exp_z(-tau u)``, ``y = exp_z((1 - tau) u)``; tensor Gauss-Legendre on a box."""
    z = np.asarray(z, float)
    d = chart.dim
    centre = np.zeros(d) if centre is None else np.asarray(centre, float)
    t, w = leggauss(n)
    grids = np.meshgrid(*[centre[i] + half * t for i in range(d)], indexing="ij")
    U = np.stack([gr.ravel() for gr in grids], axis=-1)
    W = np.prod(np.stack(np.meshgrid(*[half * w] * d, indexing="ij"), axis=-1).reshape(-1, d), axis=-1)
    keep = chart.norm(z, U) < cutoff_for(chart).r2
    U, W = U[keep], W[keep]
    Z = np.broadcast_to(z, U.shape)
    x = geodesic_point(chart, Z, U, -tau)[0]
    y = geodesic_point(chart, Z, U, 1 - tau)[0]
    K = kernel(x, y)
    fac = chart.sqrt_det(z) / (np.sqrt(vvm_det(chart, x, y)) * np.sqrt(chart.sqrt_det(x) * chart.sqrt_det(y)))
    phase = np.exp(1j * (U @ np.asarray(p, float)) / hbar)
    return np.sum(W * fac * K * phase)


def round_trip_error(chart: ChartModel, b: GaussianSymbol, tau: float, z, p, hbar: float = 1.0, n: int = 48):
    centre, half = _u_box(chart, b, z, hbar)
    val = kernel_to_symbol(chart, lambda x, y: op_tau_kernel(chart, b, tau, x, y, hbar), tau, z, p, hbar,
                           centre, half, n)
    ref = b(chart, z, p)
    return abs(val - ref) / abs(ref), val, ref


# ---------------------------------------------------------------- quadrature on regions


def disc_rule(n_r: int, n_t: int, rho: float, centre=(0.0, 0.0)):
    """Gauss-Legendre in the radius and trapezoid in the angle on a coordinate disc."""
    t, w = leggauss(n_r)
    r = 0.5 * rho * (t + 1)
    wr = 0.5 * rho * w * r
    th = 2 * math.pi * np.arange(n_t) / n_t
    R, T = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([centre[0] + R * np.cos(T), centre[1] + R * np.sin(T)], axis=-1).reshape(-1, 2)
    wts = np.repeat(wr, n_t) * (2 * math.pi / n_t)
    return pts, wts


def torus_rule(n: int, period: float):
    s = period * np.arange(n) / n
    X, Y = np.meshgrid(s, s, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=-1), np.full(n * n, (period / n) ** 2)


def region_rule(chart: ChartModel, n: int, rho: float):
    if chart.model == "flat-torus":
        return torus_rule(n, chart.period)
    return disc_rule(n, n + 8, rho)


def _pair_sum(fn: Callable, pts, wts, chunk: int = 400):
    total = 0j
    m = len(pts)
    for i in range(0, m, chunk):
        xs = pts[i:i + chunk]
        wx = wts[i:i + chunk]
        X = np.repeat(xs, m, axis=0)
        Y = np.tile(pts, (len(xs), 1))
        Wt = np.repeat(wx, m) * np.tile(wts, len(xs))
        total += np.sum(Wt * fn(X, Y))
    return total


def hs_trace_check(chart: ChartModel, a: GaussianSymbol, b: GaussianSymbol, tau: float = 0.5,
                   hbar: float = 1.0, n: int = 24, rho: float = 1.0):
    """``(lhs, rhs)`` of ``Tr(A* B) = int conj(a) b dz dp / (2 pi hbar)^d``."""
    pts, wts = region_rule(chart, n, rho)

    def integrand(X, Y):
        return np.conj(op_tau_kernel(chart, a, tau, X, Y, hbar)) * op_tau_kernel(chart, b, tau, X, Y, hbar)
    lhs = _pair_sum(integrand, pts, wts)
    d = chart.dim
    s = a.width + b.width
    k = b.drift(pts) - a.drift(pts)
    q = chart.conformal(pts) * np.sum(k * k, axis=-1)
    pint = (2 * math.pi * hbar) ** (-d) * (2 * math.pi / s) ** (d / 2) * chart.sqrt_det(pts) * np.exp(-0.5 * q / s)
    rhs = np.sum(wts * np.conj(a.amplitude(pts)) * b.amplitude(pts) * pint)
    return complex(lhs), complex(rhs)


# ---------------------------------------------------------------- Laplace check


def apply_quadratic_operator(chart: ChartModel, x, h: Callable, tau: float = 0.5, eps: float = 1e-3,
                             n_r: int = 48, n_t: int = 32):
    """``(Op_tau(g^{mu nu} p_mu p_nu e^{-eps |p|^2/2}) h)(x)`` with hbar = 1 by quadrature in ``y``.

    The momentum integral is closed form: ``-g^{mu nu} d_mu d_nu`` of the Gaussian in ``u_tau``."""
    x = np.asarray(x, float)
    d = chart.dim
    g0 = float(chart.conformal(x))
    rho = 12 * math.sqrt(eps / g0)
    pts, wts = disc_rule(n_r, n_t, rho, tuple(x))
    X = np.broadcast_to(x, pts.shape)
    z, u = tau_coordinates(chart, X, pts, tau)
    gz = chart.conformal(z)
    q = gz * np.sum(u * u, axis=-1)
    gauss = (2 * math.pi * eps) ** (-d / 2) * chart.sqrt_det(z) * np.exp(-0.5 * q / eps)
    # g^{mu nu} d_mu d_nu exp(-q/(2 eps)) = (q/eps^2 - d/eps) exp(...)
    sym = -(q / eps ** 2 - d / eps) * gauss
    ups = np.sqrt(vvm_det(chart, X, pts)) * np.sqrt(chart.sqrt_det(X) * chart.sqrt_det(pts)) / chart.sqrt_det(z)
    return np.sum(wts * ups * sym * h(pts))


def laplacian_fd(chart: ChartModel, phi: Callable, x, step: float = 1e-3):
    """``nabla^2 phi`` for the conformal metric by fourth order central differences."""
    x = np.asarray(x, float)
    acc = 0.0
    for j in range(chart.dim):
        e = np.zeros(chart.dim)
        e[j] = step
        acc += (-phi(x + 2 * e) + 16 * phi(x + e) - 30 * phi(x) + 16 * phi(x - e) - phi(x - 2 * e)) / (12 * step ** 2)
    return acc / chart.conformal(x)


def laplace_check(chart: ChartModel, phi: Callable, points, tau: float = 0.5,
                  eps_pair=(1e-3, 5e-4)):
    """Max relative residual of ``Op(g pp) (|g|^(1/4) phi)`` against ``|g|^(1/4) (-nabla^2 + R/6) phi``.

    The Gaussian regularization error is linear in ``eps`` and removed by Richardson
    extrapolation over ``eps_pair``."""
    R = chart.scalar_curvature
    res = []
    for x in np.atleast_2d(points):
        def h(y):
            return chart.sqrt_det(y) ** 0.5 * phi(y)
        e1, e2 = eps_pair
        v1 = apply_quadratic_operator(chart, x, h, tau, e1)
        v2 = apply_quadratic_operator(chart, x, h, tau, e2)
        val = (e1 * v2 - e2 * v1) / (e1 - e2)
        ref = chart.sqrt_det(x) ** 0.5 * (-laplacian_fd(chart, phi, x) + R / 6 * phi(x))
        res.append(abs(val - ref) / max(abs(ref), 1e-300))
    return float(max(res))


# ---------------------------------------------------------------- series evaluation


def curvature_tensors(chart: ChartModel) -> dict:
    """Orthonormal frame components of the constant curvature tensors (all derivatives vanish)."""
    d = chart.dim
    K = chart.sectional_curvature
    e = np.eye(d)
    R = K * (np.einsum("ac,bd->abcd", e, e) - np.einsum("ad,bc->abcd", e, e))
    return {"R": R, "Ric": np.einsum("abad->bd", R), "Rs": np.einsum("abab->", R), "g": e}


def evaluate_poly(p, tensors: dict, vectors: dict, free=None):
    """Numeric value of a tensor polynomial on constant curvature data.

    ``vectors`` maps vector labels to frame components; a free index, if any, is returned as
    the last axis.  hbar powers and coefficients are taken as given (hbar = 1)."""
    from .tensor_expr import NPRINC

    free = tuple(p.free) if free is None else tuple(free)
    total = 0
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    for (h, fs), c in p.terms.items():
        ops, subs = [], []
        lab: dict = {}

        def letter(x):
            if x not in lab:
                lab[x] = letters[len(lab)]
            return lab[x]
        val = complex(c)
        skip = False
        for kind, meta, slots in fs:
            if kind == "dim":
                val *= tensors["g"].shape[0]
                continue
            if kind in ("R", "Ric", "Rs"):
                if len(slots) > NPRINC[kind]:
                    skip = True
                    break
                arr = tensors[kind]
            elif kind == "g":
                arr = tensors["g"]
            else:
                raise ValueError(f"cannot evaluate factor {kind}")
            sub = ""
            for s in slots:
                if isinstance(s, str) and s in vectors:
                    ops.append(np.asarray(vectors[s]))
                    subs.append(letter(("vec", s, len(subs))))
                    sub += subs[-1]
                else:
                    sub += letter(s)
            ops.append(arr)
            subs.append(sub)
        if skip:
            continue
        out = "".join(lab[f] for f in free if f in lab)
        total = total + val * np.einsum(",".join(subs) + "->" + out, *ops) if ops else total + val
    return total


def _frame(chart: ChartModel, z):
    return math.sqrt(float(chart.conformal(np.asarray(z, float))))


def zeta_numeric(chart: ChartModel, z, u):
    """``log Delta(z, exp_z u)^(1/2)``."""
    y = exp_map(chart, z, u)
    return 0.5 * math.log(float(vvm_det(chart, np.asarray(z, float), y)))


def defect_numeric(chart: ChartModel, z, u, v):
    """``delta(u, v) = ((z + v) + P u) - z - u - v`` in chart components at ``z``."""
    z = np.asarray(z, float)
    y1 = exp_map(chart, z, v)
    pu = parallel_transport(chart, z, v, u)
    y2 = exp_map(chart, y1, pu)
    return log_map(chart, z, y2) - u - v


def order_scaling(chart: ChartModel, quantity: str, order: int, z=(0.1, -0.05), direction=(0.6, 0.8),
                  second=(-0.3, 0.9), scales=None):
    """Fit ``log err = k log t + c`` for the truncated series against numerics; ``k`` is returned
    with the samples.  ``quantity`` is ``zeta`` or ``defect``."""
    from .cov_expansion import geodesic_defect, zeta

    z = np.asarray(z, float)
    f = _frame(chart, z)
    tensors = curvature_tensors(chart)
    base = 0.2 if quantity == "zeta" else 0.1
    scales = np.geomspace(base, 10 * base, 7) if scales is None else np.asarray(scales)
    d1 = np.asarray(direction, float) / np.linalg.norm(direction) / f
    d2 = np.asarray(second, float) / np.linalg.norm(second) / f
    if quantity == "zeta":
        ser = zeta(order).poly
    elif quantity == "defect":
        ser = geodesic_defect(order).poly
    else:
        raise ValueError(quantity)
    errs = []
    for t in scales:
        u = t * d1
        if quantity == "zeta":
            approx = evaluate_poly(ser, tensors, {"u": f * u})
            exact = zeta_numeric(chart, z, u)
            errs.append(abs(exact - approx))
        else:
            v = t * d2
            approx = np.real(evaluate_poly(ser, tensors, {"u": f * u, "v": f * v}, free=("mu",))) / f
            exact = defect_numeric(chart, z, u, v)
            errs.append(float(np.linalg.norm(exact - approx) * f))
    errs = np.asarray(errs)
    k, _ = np.polyfit(np.log(scales), np.log(errs), 1)
    return float(k), list(map(float, scales)), list(map(float, errs))


# ---------------------------------------------------------------- experiments and reports


@dataclass
class Report:
    experiment: str
    lhs: object
    rhs: object
    rel_error: float
    resolution_pair: list
    tolerance: float
    passed: bool
    seconds: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rel_error = float(self.rel_error)
        self.passed = bool(self.passed)
        for k in ("lhs", "rhs"):
            v = getattr(self, k)
            setattr(self, k, complex(v) if np.iscomplexobj(v) else float(v))

    def to_json_obj(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            del d["seconds"]
        for k in ("lhs", "rhs"):
            v = d[k]
            if isinstance(v, complex):
                d[k] = [v.real, v.imag]
        return d


DEFAULTS = {
    "model": "sphere-2",
    "radius": 1.0,
    "hbar": 0.2,
    "torus_hbar": 0.3,
    "tau": 0.5,
    "grid": 16,
    "torus_grid": 24,
    "cap": 1.3,
}


def load_config(path: str | None) -> dict:
    """Plain ``key = value`` file; unknown keys are kept as strings."""
    cfg = dict(DEFAULTS)
    if not path:
        return cfg
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_string("[numeric]\n" + fh.read())
    for k, v in parser["numeric"].items():
        if k in DEFAULTS and not isinstance(DEFAULTS[k], str):
            cfg[k] = type(DEFAULTS[k])(v)
        else:
            cfg[k] = v
    return cfg


def _rel(a, b) -> float:
    return abs(a - b) / abs(b)


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def _torus_symbols():
    a = GaussianSymbol(lambda z: np.exp(0.3 * np.cos(z[..., 0]) + 0.2 * np.sin(z[..., 1])), 1.0,
                       lambda z: np.stack([0.4 * np.sin(z[..., 1]), 0.3 * np.cos(z[..., 0])], axis=-1))
    b = GaussianSymbol(lambda z: (1 + 0.25 * np.sin(z[..., 0] + z[..., 1])) + 0.1j * np.cos(z[..., 1]), 1.5,
                       lambda z: np.stack([0.2 * np.cos(z[..., 0]), -0.1 * np.ones(z.shape[:-1])], axis=-1))
    return a, b


def _cap_symbols(chart: ChartModel, width: float = 0.25):
    def bump(z, c):
        dz = z - np.asarray(c)
        return np.exp(-np.sum(dz * dz, axis=-1) / (2 * width ** 2))
    a = GaussianSymbol(lambda z: bump(z, (0.05, 0.0)), 1.0,
                       lambda z: np.stack([0.3 + 0 * z[..., 0], 0.2 * z[..., 0]], axis=-1))
    b = GaussianSymbol(lambda z: (1 + 0.5j) * bump(z, (0.0, 0.05)), 1.2, _zero_vector)
    return a, b


def trace_experiment(chart: ChartModel, n: int, hbar: float, tau: float = 0.5, rho: float = 1.0,
                     tol: float = 1e-6) -> Report:
    if chart.model == "flat-torus":
        a, b = _torus_symbols()
    else:
        a, b = _cap_symbols(chart)
    (r1, r2), secs = _timed(lambda: (hs_trace_check(chart, a, b, tau, hbar, n, rho),
                                     hs_trace_check(chart, a, b, tau, hbar, 2 * n, rho)))
    (l1, rh1), (l2, rh2) = r1, r2
    err = max(_rel(l1, rh1), _rel(l2, rh2))
    return Report(f"trace-{chart.model}", l2, rh2, err, [n, 2 * n], tol, err < tol, secs,
                  {"coarse_lhs": [l1.real, l1.imag]})


def round_trip_experiment(chart: ChartModel, hbar: float, tau: float = 0.5, tol: float = 1e-6) -> Report:
    a, _ = (_torus_symbols() if chart.model == "flat-torus" else _cap_symbols(chart))
    samples = [((0.3, 0.2), (0.7, -0.4)), ((0.0, 0.1), (0.0, 0.0)), ((-0.2, 0.15), (-1.0, 0.5))]

    def run(n):
        worst = 0.0
        for z, p in samples:
            e, _, _ = round_trip_error(chart, a, tau, np.asarray(z), np.asarray(p), hbar, n)
            worst = max(worst, e)
        return worst
    (e1, e2), secs = _timed(lambda: (run(32), run(64)))
    return Report(f"round-trip-{chart.model}", e2, 0.0, max(e1, e2), [32, 64], tol, max(e1, e2) < tol, secs)


def jacobian_experiment(chart: ChartModel, taus=(0.0, 0.25, 0.5, 1.0), tol: float = 1e-5) -> Report:
    pairs = [((0.1, -0.2), (0.4, 0.3)), ((-0.3, 0.1), (0.2, -0.25)), ((0.05, 0.05), (-0.35, 0.4))]
    worst = 0.0

    def run():
        nonlocal worst
        for x, y in pairs:
            for t in taus:
                lhs = measure_jacobian(chart, np.asarray(x), np.asarray(y), t)
                rhs = measure_jacobian_expected(chart, np.asarray(x), np.asarray(y), t)
                worst = max(worst, _rel(lhs, rhs))
    _, secs = _timed(run)
    return Report(f"jacobian-{chart.model}", worst, 0.0, worst, [1e-3, 5e-4], tol, worst < tol, secs)


def sphere_vvm_experiment(chart: ChartModel, tol: float = 1e-6) -> Report:
    x = np.array([0.1, 0.2])
    worst = 0.0

    def run():
        nonlocal worst
        for th in (0.1, 0.5, 1.0, 1.5, 2.0, 2.5):
            u = np.array([0.6, -0.8]) * th * chart.radius / math.sqrt(float(chart.conformal(x)))
            y = exp_map(chart, x, u)
            val = float(vvm_det(chart, x, y))
            t = th
            worst = max(worst, abs(val - t / math.sin(t)) / (t / math.sin(t)))
    _, secs = _timed(run)
    return Report("vvm-sphere", worst, 0.0, worst, [1e-3, 1e-3], tol, worst < tol, secs)


def laplace_experiment(chart: ChartModel, tol: float = 1e-4) -> Report:
    E = _Embedding(chart) if chart.model in ("sphere-2", "hyperbolic-2") else None

    def phi(y):
        if E is None:
            return np.cos(y[..., 0]) * np.sin(2 * y[..., 1]) + 0.5
        X = E.embed(y)
        return X[..., -1] / chart.radius + 0.3 * X[..., 0] * X[..., 1] / chart.radius ** 2 + 0.2
    pts = np.array([[0.1, 0.2], [-0.3, 0.15], [0.25, -0.3]])
    res, secs = _timed(lambda: laplace_check(chart, phi, pts))
    return Report(f"laplace-{chart.model}", res, 0.0, res, [48, 32], tol, res < tol, secs)


def scaling_experiment(chart: ChartModel, quantity: str, order: int, tol: float = 0.3) -> Report:
    (k, scales, errs), secs = _timed(lambda: order_scaling(chart, quantity, order))
    nominal = order + 1
    return Report(f"scaling-{quantity}-{order}", k, nominal, abs(k - nominal), [scales[0], scales[-1]], tol,
                  abs(k - nominal) < tol, secs, {"errors": errs})


def experiments_for(model: str, cfg: dict | None = None) -> list[tuple[str, Callable[[], Report]]]:
    """Named experiment thunks for one model at the configured grids."""
    cfg = dict(DEFAULTS) if cfg is None else cfg
    hbar, tau = float(cfg["hbar"]), float(cfg["tau"])
    if model == "flat-torus":
        th = float(cfg["torus_hbar"])
        torus = make_chart("flat-torus", cutoff=CutoffSpec(2.4, 2.8))
        return [
            ("trace", lambda: trace_experiment(torus, int(cfg["torus_grid"]), th, tau, tol=1e-6)),
            ("round-trip", lambda: round_trip_experiment(torus, th, tau)),
        ]
    chart = make_chart(model, radius=float(cfg["radius"]))
    out = [
        ("round-trip", lambda: round_trip_experiment(chart, hbar, tau)),
        ("laplace", lambda: laplace_experiment(chart)),
        ("jacobian", lambda: jacobian_experiment(chart)),
    ]
    if model == "sphere-2":
        out.insert(0, ("trace", lambda: trace_experiment(chart, int(cfg["grid"]), hbar, tau,
                                                         rho=float(cfg["cap"]), tol=1e-4)))
        out.append(("vvm", lambda: sphere_vvm_experiment(chart)))
    if model in ("sphere-2", "hyperbolic-2"):
        out += [(f"scaling-{q}-{n}", lambda q=q, n=n: scaling_experiment(chart, q, n)) for q, n in SCALING_ORDERS]
    return out


# orders whose first omitted term is non-zero on a symmetric space: odd for zeta, even for
# the defect, so the expected exponent is order + 1 in every case
SCALING_ORDERS = (("zeta", 1), ("zeta", 3), ("zeta", 5), ("defect", 2), ("defect", 4))


def run_numeric_suite(cfg: dict | None = None, models=("flat-torus", "sphere-2")) -> list[Report]:
    return [fn() for m in models for _, fn in experiments_for(m, cfg)]


def reports_to_json(reports) -> str:
    return json.dumps([r.to_json_obj() for r in reports], indent=1, sort_keys=True)
