"""Catalog of closed-form Ricci flow backgrounds.

Every catalog metric has the block form ``g = F(s, t) P + Q`` with ``s = x.P.x``
for constant projectors ``P`` and ``Q``; this covers flat space, the cigar,
the cigar times a line and the stereographic round sphere, and gives exact
jets by the chain rule in ``s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import tensor
from .errors import BadParams, OutOfChart, UnknownBackground
from .tensor import MetricJet, ScalarFieldJet

# F(s, t) -> (F, F_s, F_ss, F_sss, F_t)
BlockProfile = Callable[[np.ndarray, float], tuple]
# G(s, t) -> (G, G_s, G_ss, G_t)
PotentialProfile = Callable[[np.ndarray, float], tuple]


def _block_jet(profile: BlockProfile, P: np.ndarray, Q: np.ndarray, x: np.ndarray, t: float,
               order: int) -> MetricJet:
    y = x @ P
    s = np.einsum("...a,...a->...", y, x)
    F, F1, F2, F3, Ft = (np.broadcast_to(v, s.shape) for v in profile(s, t))
    ex = lambda a: a[..., None, None]
    g = ex(F) * P + Q
    dphi = 2 * F1[..., None] * y
    dg = dphi[..., :, None, None] * P
    d2g = d3g = None
    if order >= 2:
        yy = np.einsum("...a,...b->...ab", y, y)
        d2phi = 4 * ex(F2) * yy + 2 * ex(F1) * P
        d2g = d2phi[..., :, :, None, None] * P
        if order >= 3:
            yyy = np.einsum("...ab,...c->...abc", yy, y)
            Py = (np.einsum("ab,...c->...abc", P, y) + np.einsum("ac,...b->...abc", P, y)
                  + np.einsum("bc,...a->...abc", P, y))
            d3phi = 8 * F3[..., None, None, None] * yyy + 4 * F2[..., None, None, None] * Py
            d3g = d3phi[..., :, :, :, None, None] * P
    dtg = ex(Ft) * P
    return MetricJet(g=g, dg=dg, d2g=d2g, d3g=d3g, dtg=dtg)


@dataclass(frozen=True)
class ScalarField:
    """A scalar function f(x, t) with an optional closed-form jet."""

    value: Callable[[np.ndarray, float], np.ndarray]
    jet: Optional[Callable[[np.ndarray, float], ScalarFieldJet]] = None

    def __call__(self, x, t):
        return self.value(np.asarray(x, dtype=float), t)


def radial_field(profile: PotentialProfile, P: np.ndarray) -> ScalarField:
    """Scalar field G(x.P.x, t) with exact jets."""

    def value(x, t):
        s = np.einsum("...a,ab,...b->...", x, P, x)
        return np.broadcast_to(profile(s, t)[0], s.shape).copy()

    def jet(x, t):
        y = x @ P
        s = np.einsum("...a,...a->...", y, x)
        G, G1, G2, Gt = (np.broadcast_to(v, s.shape) for v in profile(s, t))
        grad = 2 * G1[..., None] * y
        hess = 4 * G2[..., None, None] * np.einsum("...a,...b->...ab", y, y) \
            + 2 * G1[..., None, None] * P
        return ScalarFieldJet(value=G.copy(), grad=grad, hess=hess, dt=Gt.copy())

    return ScalarField(value, jet)


def affine_field(a: np.ndarray, c0: float, rate: float) -> ScalarField:
    """f = a.x + c0 + rate * t."""
    a = np.asarray(a, dtype=float)

    def value(x, t):
        return x @ a + c0 + rate * t

    def jet(x, t):
        shape = x.shape[:-1]
        n = len(a)
        return ScalarFieldJet(value=value(x, t), grad=np.broadcast_to(a, shape + (n,)).copy(),
                              hess=np.zeros(shape + (n, n)), dt=np.full(shape, float(rate)))

    return ScalarField(value, jet)


@dataclass(frozen=True)
class Background:
    """A time-dependent chart metric with optional soliton potential.

    ``soliton_map(x, t)`` is the closed-form isometry from ``(R^n, g(t))`` onto
    ``(R^n, g(0))`` that carries the potential at time t to the potential at
    time 0; it realizes the soliton as a pullback family.
    ``conformal(r, t)`` returns ``(A, dA/dr)`` when ``g = A(|x|, t)^2 * identity``.
    """

    name: str
    n: int
    soliton_class: Optional[str]
    time_domain: tuple[float, float]
    profile: BlockProfile
    P: np.ndarray
    Q: np.ndarray
    potential: Optional[ScalarField] = None
    chart_radius: Optional[float] = None
    exact_scalar: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    soliton_map: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    conformal: Optional[Callable[[np.ndarray, float], tuple]] = None
    params: dict = field(default_factory=dict)
    flat: bool = False
    has_analytic_jet: bool = True

    def metric(self, x, t):
        x = np.asarray(x, dtype=float)
        s = np.einsum("...a,ab,...b->...", x, self.P, x)
        F = np.broadcast_to(self.profile(s, t)[0], s.shape)
        return F[..., None, None] * self.P + self.Q

    def analytic_jet(self, x, t, order: int = 3) -> MetricJet:
        return _block_jet(self.profile, self.P, self.Q, np.asarray(x, dtype=float), t, order)

    def check_point(self, x, t):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise OutOfChart(f"{self.name}: expected {self.n} coordinates, got {x.shape[-1]}")
        lo, hi = self.time_domain
        if not (lo < t < hi):
            raise OutOfChart(f"{self.name}: time {t} outside ({lo}, {hi})")
        if not np.all(np.isfinite(x)):
            raise OutOfChart(f"{self.name}: non-finite chart point")
        if self.chart_radius is not None and np.max(np.linalg.norm(x, axis=-1)) > self.chart_radius:
            raise OutOfChart(f"{self.name}: point outside chart radius {self.chart_radius}")
        return x

    def potential_jet(self, x, t, method: str = "auto", h_fd: float = tensor.H_FD) -> ScalarFieldJet:
        if self.potential is None:
            from .errors import NoPotential
            raise NoPotential(f"background {self.name!r} has no potential")
        x = np.asarray(x, dtype=float)
        if method in ("auto", "analytic") and self.potential.jet is not None:
            return self.potential.jet(x, t)
        return tensor.scalar_jet_fd(self.potential.value, x, t, h_fd, self.time_domain)

    def describe(self) -> str:
        extra = ", ".join(f"{k}={v}" for k, v in self.params.items() if k != "n")
        return (f"{self.name}: n={self.n}, soliton={self.soliton_class or 'none'}, "
                f"t in ({self.time_domain[0]}, {self.time_domain[1]})"
                + (f", {extra}" if extra else ""))


# ----------------------------------------------------------------------------
# catalog entries


def _const_profile(s, t):
    return 1.0, 0.0, 0.0, 0.0, 0.0


def _zero_potential(n):
    return affine_field(np.zeros(n), 0.0, 0.0)


def _flat_static(n=2):
    I = np.eye(n)
    return Background("flat-static", n, "steady", (-np.inf, np.inf), _const_profile, I,
                      np.zeros((n, n)), potential=_zero_potential(n),
                      exact_scalar=lambda x, t: np.zeros(np.shape(x)[:-1]),
                      soliton_map=lambda x, t: np.asarray(x, dtype=float),
                      conformal=lambda r, t: (np.ones_like(r), np.zeros_like(r)),
                      params={"n": n}, flat=True)


def _gaussian_shrinker(n=2):
    I = np.eye(n)

    def pot(s, t):
        tau = -t
        return s / (4 * tau), 1.0 / (4 * tau), 0.0, s / (4 * tau ** 2)

    return Background("gaussian-shrinker", n, "shrinking", (-np.inf, 0.0), _const_profile, I,
                      np.zeros((n, n)), potential=radial_field(pot, I),
                      exact_scalar=lambda x, t: np.zeros(np.shape(x)[:-1]),
                      conformal=lambda r, t: (np.ones_like(r), np.zeros_like(r)),
                      params={"n": n}, flat=True)


def _translating_steady(n=2, grad_L=None, L0=0.0):
    if grad_L is None:
        grad_L = np.zeros(n)
        grad_L[-1] = -1.0
    a = np.asarray(grad_L, dtype=float)
    if a.shape != (n,):
        raise BadParams(f"grad_L must have {n} components")
    I = np.eye(n)
    return Background("translating-steady", n, "steady", (-np.inf, np.inf), _const_profile, I,
                      np.zeros((n, n)), potential=affine_field(a, float(L0), float(a @ a)),
                      exact_scalar=lambda x, t: np.zeros(np.shape(x)[:-1]),
                      soliton_map=lambda x, t: np.asarray(x, dtype=float) + t * a,
                      conformal=lambda r, t: (np.ones_like(r), np.zeros_like(r)),
                      params={"n": n, "grad_L": a.tolist(), "L0": L0}, flat=True)


def _cigar_profile(s, t):
    F = 1.0 / (np.exp(4 * t) + s)
    return F, -F ** 2, 2 * F ** 3, -6 * F ** 4, -4 * np.exp(4 * t) * F ** 2


def _cigar_potential(s, t):
    w = np.exp(4 * t) + s
    return -np.log(w) + 4 * t, -1.0 / w, 1.0 / w ** 2, 4.0 - 4 * np.exp(4 * t) / w


def _cigar_map(x, t):
    x = np.asarray(x, dtype=float)
    y = x.copy()
    y[..., :2] *= np.exp(-2 * t)
    return y


def _cigar_scalar(x, t):
    s = np.sum(np.asarray(x)[..., :2] ** 2, axis=-1)
    return 4 * np.exp(4 * t) / (np.exp(4 * t) + s)


def _cigar_steady():
    I = np.eye(2)
    return Background("cigar-steady", 2, "steady", (-np.inf, np.inf), _cigar_profile, I,
                      np.zeros((2, 2)), potential=radial_field(_cigar_potential, I),
                      exact_scalar=_cigar_scalar, soliton_map=_cigar_map,
                      conformal=lambda r, t: (
                          (np.exp(4 * t) + r ** 2) ** -0.5,
                          -r * (np.exp(4 * t) + r ** 2) ** -1.5),
                      params={})


def _cigar_line():
    P = np.diag([1.0, 1.0, 0.0])
    Q = np.diag([0.0, 0.0, 1.0])
    return Background("cigar-line", 3, "steady", (-np.inf, np.inf), _cigar_profile, P, Q,
                      potential=radial_field(_cigar_potential, P),
                      exact_scalar=_cigar_scalar, soliton_map=_cigar_map, params={})


def _round_shrinking_sphere(n=3):
    I = np.eye(n)

    def radius_sq(t):
        return -2.0 * (n - 1) * t

    def prof(s, t):
        r2 = radius_sq(t)
        u = 1 + s / 4
        return (r2 * u ** -2, -0.5 * r2 * u ** -3, 0.375 * r2 * u ** -4, -0.375 * r2 * u ** -5,
                -2.0 * (n - 1) * u ** -2)

    def conf(r, t):
        rad = np.sqrt(radius_sq(t))
        u = 1 + r ** 2 / 4
        return rad / u, -rad * r / (2 * u ** 2)

    return Background("round-shrinking-sphere", n, "shrinking", (-np.inf, 0.0), prof, I,
                      np.zeros((n, n)), potential=_zero_potential(n), chart_radius=1e3,
                      exact_scalar=lambda x, t: np.full(np.shape(x)[:-1],
                                                        n * (n - 1) / radius_sq(t)),
                      conformal=conf, params={"n": n})


_CATALOG = {
    "flat-static": (_flat_static, {"n": (2, 3)}),
    "gaussian-shrinker": (_gaussian_shrinker, {"n": (2, 3)}),
    "translating-steady": (_translating_steady, {"n": (2, 3), "grad_L": None, "L0": None}),
    "cigar-steady": (_cigar_steady, {}),
    "cigar-line": (_cigar_line, {}),
    "round-shrinking-sphere": (_round_shrinking_sphere, {"n": (2, 3)}),
}


def catalog_names() -> list[str]:
    return list(_CATALOG)


def catalog_params(name: str) -> dict:
    if name not in _CATALOG:
        raise UnknownBackground(name)
    return dict(_CATALOG[name][1])


def get_background(name: str, **params) -> Background:
    """Build a catalog background; raises UnknownBackground / BadParams."""
    if name not in _CATALOG:
        raise UnknownBackground(f"unknown background {name!r}; known: {', '.join(_CATALOG)}")
    factory, allowed = _CATALOG[name]
    for key, val in params.items():
        if key not in allowed:
            raise BadParams(f"{name}: unexpected parameter {key!r}")
        choices = allowed[key]
        if choices is not None and val not in choices:
            raise BadParams(f"{name}: {key}={val!r} not in {choices}")
    try:
        return factory(**params)
    except TypeError as exc:
        raise BadParams(str(exc)) from exc


def sample_times(bg: Background) -> list[float]:
    if bg.soliton_class == "shrinking":
        return [-2.0, -1.0, -0.5]
    return [-0.5, 0.0, 0.5]


def catalog_selfcheck(name: str, n_samples: int = 100, seed: int = 0, method: str = "auto",
                      box: float = 2.0, **params) -> dict:
    """Max soliton, Ricci-flow and curvature cross-check residuals on a random sample."""
    bg = get_background(name, **params)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, size=(n_samples, bg.n))
    report = {"name": name, "method": method, "soliton_tensor": 0.0, "soliton_scalar": 0.0,
              "ricci_flow": 0.0, "scalar_curvature": 0.0, "failures": []}
    for t in sample_times(bg):
        try:
            if bg.soliton_class is not None and bg.potential is not None:
                rt, rs = tensor.soliton_residuals(bg, x, t, method=method)
                report["soliton_tensor"] = max(report["soliton_tensor"], rt)
                report["soliton_scalar"] = max(report["soliton_scalar"], rs)
            report["ricci_flow"] = max(report["ricci_flow"],
                                       tensor.ricci_flow_residual(bg, x, t, method=method))
            if bg.exact_scalar is not None:
                b = tensor.curvature(bg, x, t, order=2, method=method)
                err = np.max(np.abs(b.scalar - bg.exact_scalar(x, t)))
                report["scalar_curvature"] = max(report["scalar_curvature"], float(err))
        except Exception as exc:  # report carries failures
            report["failures"].append(f"t={t}: {exc}")
    return report
