"""Weighted Gibbons-Hawking-York functionals on rotationally symmetric domains.

A domain is a ball or an annulus carrying the metric
``g = q(r)^2 dr^2 + phi(r)^2 g_sphere`` and a radial potential ``f``.
Everything reduces to one-dimensional quadratures in ``r``.

Conventions: ``d/ds = q^{-1} d/dr`` is the unit radial derivative;
curvatures are written in the orthonormal frame (``e_r`` and unit sphere
directions); ``e0`` is the inward unit normal of each boundary sphere,
``e0 = sigma d/ds`` with ``sigma = -1`` on the outer and ``+1`` on the
inner sphere, and ``A = kappa * g_boundary`` with ``kappa = -sigma phi_s / phi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from . import spectral
from .errors import BadParams, DegenerateMetric, NotMeasurePreserving

Profile = Union[None, float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def sphere_area(k: int) -> float:
    """Area of the unit k-sphere."""
    return 2 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def clenshaw_curtis(N: int) -> np.ndarray:
    """Quadrature weights on the Chebyshev-Lobatto nodes cos(pi j / N) over [-1, 1]."""
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    ii = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(N * theta[ii]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2 * v / N
    return w


def gregory_weights(M: int, h: float) -> np.ndarray:
    """4th-order Gregory end-corrected trapezoid weights on M uniform nodes."""
    if M < 6:
        raise BadParams("the Gregory rule needs at least 6 nodes")
    w = np.ones(M)
    w[:3] = w[-3:][::-1] = (3 / 8, 7 / 6, 23 / 24)
    return w * h


# ----------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class RadialGrid:
    """Nodes with parity-aware derivative matrices and quadrature weights.

    Ball grids are the positive half of a grid symmetric about ``r = 0``
    that never samples the pole; odd functions (``phi``) and even functions
    (``q``, ``f``) are differentiated through their reflected extension.
    ``weights[k]`` integrates ``F = G(r) r^k`` over the radial interval,
    where ``G`` is even on balls (exact for the interpolant of ``G``).
    """

    kind: str
    method: str
    r: np.ndarray
    weights: dict
    D1: dict
    D2: dict

    @property
    def M(self) -> int:
        return len(self.r)

    def d(self, F: np.ndarray, parity: int = 1) -> np.ndarray:
        return self.D1[parity if self.kind == "ball" else 0] @ F

    def d2(self, F: np.ndarray, parity: int = 1) -> np.ndarray:
        return self.D2[parity if self.kind == "ball" else 0] @ F

    def integrate(self, F: np.ndarray, power: int = 0) -> float:
        """Integral of F dr, where F behaves like r^power near the pole."""
        return float(self.weights[power if self.kind == "ball" else 0] @ F)

    @property
    def boundaries(self) -> tuple:
        """(node index, sigma) for each boundary sphere."""
        if self.kind == "ball":
            return ((self.M - 1, -1),)
        return ((self.M - 1, -1), (0, 1))


MAX_POWER = 4


def _fold(D: np.ndarray, M: int, parity: int) -> np.ndarray:
    return D[M:, M:] + parity * D[M:, :M][:, ::-1]


def _product_weights(y: np.ndarray, M: int, power: int, method: str) -> np.ndarray:
    """Weights for the integral over [0, y_max] of G(r) r^power, G even.

    ``G`` is interpolated on the symmetric grid ``y`` (globally for
    Chebyshev, by local 6-point Lagrange for the uniform grid) and the
    product is integrated by Gauss-Legendre.
    """
    W = np.zeros(len(y))
    if method == "chebyshev":
        gx, gw = np.polynomial.legendre.leggauss(M + power + 2)
        pts = 0.5 * y[-1] * (gx + 1)
        B = spectral.barycentric_matrix(y, pts)
        W = (0.5 * y[-1] * gw * pts ** power) @ B
    else:
        gx, gw = np.polynomial.legendre.leggauss(6)
        edges = np.concatenate([[0.0], y[M:]])
        for lo, hi in zip(edges[:-1], edges[1:]):
            c = 0.5 * (lo + hi)
            j0 = int(np.clip(np.searchsorted(y, c) - 3, 0, len(y) - 6))
            idx = np.arange(j0, j0 + 6)
            pts = lo + 0.5 * (hi - lo) * (gx + 1)
            for z, wz in zip(pts, gw):
                W[idx] += 0.5 * (hi - lo) * wz * z ** power \
                    * spectral.fornberg_weights(z, y[idx], 0)[:, 0]
    G = W[M:] + W[:M][::-1]
    return G / y[M:] ** power


@lru_cache(maxsize=64)
def _grid(kind: str, method: str, M: int, lo: float, hi: float) -> RadialGrid:
    if method not in ("chebyshev", "fd"):
        raise BadParams(f"unknown radial method {method!r}")
    if kind == "ball":
        if M < 4:
            raise BadParams("ball grids need at least 4 nodes")
        if method == "chebyshev":
            x, D = spectral.cheb_lobatto(2 * M - 1)
            x, D = x[::-1], D[::-1, ::-1]
            y, D = hi * x, D / hi
            D2 = D @ D
        else:
            h = hi / (M - 0.5)
            y = (np.arange(2 * M) - M + 0.5) * h
            D, D2 = spectral.fd_matrices(2 * M, h)
        W = {k: _product_weights(y, M, k, method) for k in range(MAX_POWER + 1)}
        return RadialGrid(kind, method, y[M:].copy(), W,
                          {p: _fold(D, M, p) for p in (1, -1)},
                          {p: _fold(D2, M, p) for p in (1, -1)})
    if kind != "annulus":
        raise BadParams(f"unknown domain kind {kind!r}")
    if not 0 < lo < hi:
        raise BadParams("annulus needs 0 < r_in < r_out")
    if method == "chebyshev":
        x, D = spectral.cheb_lobatto(M - 1)
        x, D = x[::-1], D[::-1, ::-1]
        s = 0.5 * (hi - lo)
        r, D, w = lo + s * (x + 1), D / s, clenshaw_curtis(M - 1) * s
        D2 = D @ D
    else:
        h = (hi - lo) / (M - 1)
        r = lo + np.arange(M) * h
        D, D2 = spectral.fd_matrices(M, h)
        w = gregory_weights(M, h)
    return RadialGrid(kind, method, r, {0: w}, {0: D}, {0: D2})


def _sample(p: Profile, r: np.ndarray, default: float) -> np.ndarray:
    if p is None:
        return np.full_like(r, default)
    if callable(p):
        return np.asarray(p(r), dtype=float) * np.ones_like(r)
    return np.asarray(p, dtype=float) * np.ones_like(r)


# ----------------------------------------------------------------------------
# domain


@dataclass(frozen=True)
class RadialDomain:
    """Rotationally symmetric n-manifold with boundary and a radial potential."""

    n: int
    grid: RadialGrid
    q: np.ndarray
    phi: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise BadParams("dimension must be at least 2")
        if not np.all(np.diff(self.grid.r) > 0):
            raise BadParams("radial grid must be strictly increasing")
        if np.any(~np.isfinite(self.q)) or np.any(~np.isfinite(self.phi)) \
                or np.min(self.q) <= 0 or np.min(self.phi) <= 0:
            raise DegenerateMetric("q and phi must be positive on the grid")

    @classmethod
    def ball(cls, n: int, radius: float, M: int = 32, q: Profile = None, phi: Profile = None,
             f: Profile = None, method: str = "chebyshev") -> "RadialDomain":
        """Ball of coordinate radius ``radius``; defaults are flat with f = 0.

        ``q`` must be even and ``phi`` odd in r (pole regularity).
        """
        if radius <= 0:
            raise BadParams("radius must be positive")
        g = _grid("ball", method, int(M), 0.0, float(radius))
        return cls(n, g, _sample(q, g.r, 1.0),
                   g.r.copy() if phi is None else _sample(phi, g.r, 0.0), _sample(f, g.r, 0.0))

    @classmethod
    def annulus(cls, n: int, r_in: float, r_out: float, M: int = 32, q: Profile = None,
                phi: Profile = None, f: Profile = None, method: str = "chebyshev"
                ) -> "RadialDomain":
        g = _grid("annulus", method, int(M), float(r_in), float(r_out))
        return cls(n, g, _sample(q, g.r, 1.0),
                   g.r.copy() if phi is None else _sample(phi, g.r, 0.0), _sample(f, g.r, 0.0))

    @classmethod
    def conformal(cls, n: int, radius: float, A: Callable, M: int = 32, f: Profile = None,
                  method: str = "chebyshev") -> "RadialDomain":
        """Ball with ``g = A(r)^2 (dr^2 + r^2 g_sphere)``."""
        g = _grid("ball", method, int(M), 0.0, float(radius))
        a = np.asarray(A(g.r), dtype=float)
        return cls(n, g, a, g.r * a, _sample(f, g.r, 0.0))

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def kind(self) -> str:
        return self.grid.kind

    def integrate(self, F: np.ndarray) -> float:
        """Radial integral of a volume-type integrand (vanishing like r^(n-1) at a pole)."""
        return self.grid.integrate(F, self.n - 1)

    def with_fields(self, q=None, phi=None, f=None) -> "RadialDomain":
        return replace(self, q=self.q if q is None else np.asarray(q, dtype=float),
                       phi=self.phi if phi is None else np.asarray(phi, dtype=float),
                       f=self.f if f is None else np.asarray(f, dtype=float))

    def describe(self) -> str:
        return (f"{self.kind} n={self.n} M={self.grid.M} ({self.grid.method}), "
                f"r in [{self.r[0]:.4g}, {self.r[-1]:.4g}]")


@dataclass
class RadialGeometry:
    """Frame components of curvature and potential derivatives at the nodes."""

    phi_s: np.ndarray
    phi_ss: np.ndarray
    ric_rr: np.ndarray
    ric_sph: np.ndarray
    R: np.ndarray
    R_s: np.ndarray
    ric_rr_s: np.ndarray
    f_s: np.ndarray
    f_ss: np.ndarray
    hess_sph: np.ndarray
    lap_f: np.ndarray
    density: np.ndarray
    boundary_area: np.ndarray
    derived: dict = field(default_factory=dict)


def radial_geometry(dom: RadialDomain) -> RadialGeometry:
    n, G, q, phi, f = dom.n, dom.grid, dom.q, dom.phi, dom.f
    phi_s = G.d(phi, -1) / q
    phi_ss = G.d(phi_s, 1) / q
    ric_rr = -(n - 1) * phi_ss / phi
    ric_sph = -phi_ss / phi + (n - 2) * (1 - phi_s ** 2) / phi ** 2
    R = ric_rr + (n - 1) * ric_sph
    f_s = G.d(f, 1) / q
    f_ss = G.d(f_s, -1) / q
    hess_sph = phi_s * f_s / phi
    omega = sphere_area(n - 1)
    return RadialGeometry(phi_s, phi_ss, ric_rr, ric_sph, R, G.d(R, 1) / q,
                          G.d(ric_rr, 1) / q, f_s, f_ss, hess_sph, f_ss + (n - 1) * hess_sph,
                          omega * q * phi ** (n - 1), omega * phi ** (n - 1))


def boundary_terms(dom: RadialDomain, geo: RadialGeometry) -> list[dict]:
    """Per-boundary kappa, H, e0 f, e0 R, frame curvatures and the area."""
    out = []
    for i, sigma in dom.grid.boundaries:
        kappa = -sigma * geo.phi_s[i] / dom.phi[i]
        out.append({"index": i, "sigma": sigma, "kappa": kappa, "H": (dom.n - 1) * kappa,
                    "e0f": sigma * geo.f_s[i], "e0R": sigma * geo.R_s[i],
                    "e0_ric00": sigma * geo.ric_rr_s[i], "ric00": geo.ric_rr[i],
                    "ric_sph": geo.ric_sph[i], "area": geo.boundary_area[i],
                    "weight": math.exp(-dom.f[i]), "f": dom.f[i]})
    return out


def ghy_action(dom: RadialDomain, geo: Optional[RadialGeometry] = None) -> float:
    """Integral of R dV plus twice the integral of H dA."""
    geo = geo or radial_geometry(dom)
    bulk = dom.integrate(geo.R * geo.density)
    return bulk + 2 * sum(b["H"] * b["area"] for b in boundary_terms(dom, geo))


def weighted_action(dom: RadialDomain, geo: Optional[RadialGeometry] = None) -> float:
    """Integral of (R + 2 lap f - |grad f|^2) e^-f dV plus twice (H + e0 f) e^-f dA."""
    geo = geo or radial_geometry(dom)
    r_inf = geo.R + 2 * geo.lap_f - geo.f_s ** 2
    bulk = dom.integrate(r_inf * np.exp(-dom.f) * geo.density)
    return bulk + 2 * sum((b["H"] + b["e0f"]) * b["weight"] * b["area"]
                          for b in boundary_terms(dom, geo))


def weighted_volume(dom: RadialDomain, geo: Optional[RadialGeometry] = None) -> float:
    geo = geo or radial_geometry(dom)
    return dom.integrate(np.exp(-dom.f) * geo.density)


# ----------------------------------------------------------------------------
# variations


@dataclass(frozen=True)
class VariationField:
    """Rotationally symmetric variation ``v = v_rr dr^2 + v_s g_sphere`` and ``delta f = h``."""

    v_rr: np.ndarray
    v_s: np.ndarray
    h: np.ndarray
    measure_preserving: bool = False

    @staticmethod
    def frame(dom: RadialDomain, v_rr, v_s) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal-frame eigenvalues (a, b) of v."""
        return np.asarray(v_rr) / dom.q ** 2, np.asarray(v_s) / dom.phi ** 2

    def trace(self, dom: RadialDomain) -> np.ndarray:
        a, b = self.frame(dom, self.v_rr, self.v_s)
        return a + (dom.n - 1) * b

    @classmethod
    def measure_preserving_from(cls, dom: RadialDomain, v_rr, v_s) -> "VariationField":
        a, b = cls.frame(dom, v_rr, v_s)
        return cls(np.asarray(v_rr, float), np.asarray(v_s, float),
                   0.5 * (a + (dom.n - 1) * b), True)

    @classmethod
    def conformal(cls, dom: RadialDomain, eta: Profile, h: Profile = None) -> "VariationField":
        """v = eta g; with h omitted, the measure-preserving choice h = n eta / 2."""
        e = _sample(eta, dom.r, 0.0)
        if h is None:
            return cls.measure_preserving_from(dom, e * dom.q ** 2, e * dom.phi ** 2)
        return cls(e * dom.q ** 2, e * dom.phi ** 2, _sample(h, dom.r, 0.0))

    @classmethod
    def lie_derivative(cls, dom: RadialDomain, xi: Profile, h: str = "diffeo") -> "VariationField":
        """v = L_X g for X = xi(r) d/dr (xi odd on balls).

        ``h="diffeo"`` takes h = X f, so (g, f) move along a diffeomorphism;
        ``h="measure"`` takes the measure-preserving h = v / 2.
        """
        G = dom.grid
        x = _sample(xi, dom.r, 0.0)
        v_rr = x * G.d(dom.q ** 2, 1) + 2 * dom.q ** 2 * G.d(x, -1)
        v_s = x * G.d(dom.phi ** 2, 1)
        if h == "measure":
            return cls.measure_preserving_from(dom, v_rr, v_s)
        return cls(v_rr, v_s, x * G.d(dom.f, 1))


def perturbed(dom: RadialDomain, var: VariationField, eps: float) -> RadialDomain:
    """(g + eps v, f + eps h), keeping the parity of q and phi."""
    a, b = VariationField.frame(dom, var.v_rr, var.v_s)
    return dom.with_fields(q=dom.q * np.sqrt(1 + eps * a), phi=dom.phi * np.sqrt(1 + eps * b),
                           f=dom.f + eps * var.h)


def fd_derivative(fn: Callable[[float], np.ndarray], delta: float = 1e-2):
    """5-point centered derivative at 0 with one Richardson extrapolation."""

    def five(d):
        return (-fn(2 * d) + 8 * fn(d) - 8 * fn(-d) + fn(-2 * d)) / (12 * d)

    return (64 * five(delta / 2) - five(delta)) / 63


def first_variation(dom: RadialDomain, var: VariationField, which: str = "ghy",
                    geo: Optional[RadialGeometry] = None, scale: bool = False):
    """Closed-form first variation of the GHY (``ghy``) or weighted (``weighted``) action.

    With ``scale=True`` returns ``(value, magnitude)`` where the magnitude
    integrates the absolute values of the bulk and boundary contributions; it
    normalizes residuals when the variation itself cancels (2D GHY).
    """
    value, mag = _first_variation(dom, var, which, geo or radial_geometry(dom))
    return (value, mag) if scale else value


def _first_variation(dom, var, which, geo):
    a, b = VariationField.frame(dom, var.v_rr, var.v_s)
    k = dom.n - 1
    bts = boundary_terms(dom, geo)
    if which == "ghy":
        bulk = a * (geo.ric_rr - 0.5 * geo.R) + k * b * (geo.ric_sph - 0.5 * geo.R)
        out = -dom.integrate(bulk * geo.density)
        mag = dom.integrate(np.abs(bulk) * geo.density)
        for bt in bts:
            i = bt["index"]
            term = k * b[i] * (bt["kappa"] - bt["H"]) * bt["area"]
            out -= term
            mag += abs(term)
        return out, mag
    if which != "weighted":
        raise BadParams(f"unknown action {which!r}")
    bulk = a * (geo.ric_rr + geo.f_ss) + k * b * (geo.ric_sph + geo.hess_sph)
    out = -dom.integrate(bulk * np.exp(-dom.f) * geo.density)
    mag = dom.integrate(np.abs(bulk) * np.exp(-dom.f) * geo.density)
    for bt in bts:
        i = bt["index"]
        term = (k * b[i] * bt["kappa"] + a[i] * (bt["H"] + bt["e0f"])) * bt["weight"] * bt["area"]
        out -= term
        mag += abs(term)
    return out, mag


@dataclass
class VariationReport:
    fd: float
    formula: float
    residual: float
    relative: float
    sub: dict


def _pointwise(dom: RadialDomain, geo: RadialGeometry) -> dict:
    bt = boundary_terms(dom, geo)[0]
    i = bt["index"]
    return {"dV": geo.density, "R": geo.R, "A": np.array([bt["kappa"] * dom.phi[i] ** 2]),
            "H": np.array([bt["H"]]), "dA": np.array([bt["area"]])}


def variation_formulas(dom: RadialDomain, var: VariationField,
                       geo: Optional[RadialGeometry] = None) -> dict:
    """Closed-form variations of dV, R, A (sphere component), H and dA at the outer boundary."""
    geo = geo or radial_geometry(dom)
    n, G, q = dom.n, dom.grid, dom.q
    k = n - 1
    a, b = VariationField.frame(dom, var.v_rr, var.v_s)
    v = a + k * b
    ratio = geo.phi_s / dom.phi
    W = G.d(a, 1) / q + k * ratio * (a - b)
    divdiv = G.d(W, -1) / q + k * ratio * W
    v_s = G.d(v, 1) / q
    lap_v = G.d(v_s, -1) / q + k * ratio * v_s
    dR = divdiv - lap_v - (a * geo.ric_rr + k * b * geo.ric_sph)
    bt = boundary_terms(dom, geo)[0]
    i, sigma, kappa = bt["index"], bt["sigma"], bt["kappa"]
    b_s = (G.d(b, 1) / q)[i]
    return {"dV": 0.5 * v * geo.density, "R": dR,
            "A": np.array([dom.phi[i] ** 2 * (kappa * b[i] - 0.5 * kappa * a[i]
                                              - 0.5 * sigma * b_s)]),
            "H": np.array([-0.5 * (k * sigma * b_s + bt["H"] * a[i])]),
            "dA": np.array([0.5 * k * b[i] * bt["area"]])}


def variation_check(dom: RadialDomain, var: VariationField, which: str = "ghy",
                    delta: float = 1e-2, floor: float = 1e-6) -> VariationReport:
    """Finite-difference first variation against the closed form, plus pointwise sub-checks.

    ``relative`` divides by the largest of |formula|, the magnitude of its
    contributions, |I| max|v| (the size a finite difference in eps can
    resolve; the 2D GHY variation vanishes pointwise) and ``floor``; ``sub`` holds the pointwise discrepancies
    relative to max(1, max|closed form|).
    """
    if which == "weighted":
        gap = np.max(np.abs(var.h - 0.5 * var.trace(dom)))
        if gap > 1e-10 * max(1.0, float(np.max(np.abs(var.h)))):
            raise NotMeasurePreserving(f"h - v/2 = {gap:.3e}")
        action = weighted_action
    elif which == "ghy":
        action = ghy_action
    else:
        raise BadParams(f"unknown action {which!r}")
    fd = float(fd_derivative(lambda e: action(perturbed(dom, var, e)), delta))
    a, b = VariationField.frame(dom, var.v_rr, var.v_s)
    resolvable = abs(action(dom)) * float(max(np.max(np.abs(a)), np.max(np.abs(b))))
    formula, mag = first_variation(dom, var, which, scale=True)
    sub_fd = {key: fd_derivative(lambda e, key=key: _pointwise(
        perturbed(dom, var, e), radial_geometry(perturbed(dom, var, e)))[key], delta)
        for key in ("dV", "R", "A", "H", "dA")}
    sub_formula = variation_formulas(dom, var)
    sub = {key: float(np.max(np.abs(sub_fd[key] - sub_formula[key]))
                      / max(1.0, float(np.max(np.abs(sub_formula[key])))))
           for key in sub_formula}
    res = abs(fd - formula)
    return VariationReport(fd, formula, res, res / max(abs(formula), mag, resolvable, floor), sub)
