"""Ambient differential geometry of a time-dependent chart metric.

Everything here is vectorized over a leading batch of points: ``x`` has shape
``(..., n)`` and every tensor carries the same leading ``...`` axes.

Index layout of the jets::

    g[..., a, b]                 g_ab
    dg[..., c, a, b]             d_c g_ab
    d2g[..., d, c, a, b]         d_d d_c g_ab
    d3g[..., e, d, c, a, b]      d_e d_d d_c g_ab

Sign convention: ``riemann[..., a, b, c, d]`` is R_abcd with
Ric_bd = g^ac R_abcd and R_1212 > 0 on the round sphere, so the sphere has
positive Ricci and scalar curvature.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMetric, NonPositiveU, NoPotential

EIG_TOL = 1e-12
H_FD = 1e-3


@dataclass(frozen=True)
class MetricJet:
    g: np.ndarray
    dg: np.ndarray
    d2g: Optional[np.ndarray] = None
    d3g: Optional[np.ndarray] = None
    dtg: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        if self.d3g is not None:
            return 3
        if self.d2g is not None:
            return 2
        return 1


@dataclass(frozen=True)
class CurvatureBundle:
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray
    riemann: Optional[np.ndarray] = None
    ricci: Optional[np.ndarray] = None
    scalar: Optional[np.ndarray] = None
    d_riemann: Optional[np.ndarray] = None
    d_ricci: Optional[np.ndarray] = None
    d_scalar: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ScalarFieldJet:
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    dt: Optional[np.ndarray] = None


# ----------------------------------------------------------------------------
# finite differences


def _steps(x: np.ndarray, h_fd: float) -> np.ndarray:
    return h_fd * np.maximum(1.0, np.abs(x))


def fd_gradient(fn: Callable[[np.ndarray], np.ndarray], h_fd: float = H_FD):
    """Wrap ``fn(x)`` so the result is its 4th-order centered coordinate gradient.

    The derivative index is inserted right after the batch axes of ``x``.
    Nesting the wrapper gives higher derivative blocks.
    """

    def grad(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        h = _steps(x, h_fd)
        cols = []
        for c in range(n):
            e = np.zeros_like(x)
            e[..., c] = h[..., c]
            diff = (fn(x - 2 * e) - 8 * fn(x - e) + 8 * fn(x + e) - fn(x + 2 * e))
            hc = h[..., c].reshape(h.shape[:-1] + (1,) * (diff.ndim - x.ndim + 1))
            cols.append(diff / (12.0 * hc))
        return np.stack(cols, axis=x.ndim - 1)

    return grad


def fd_time_derivative(fn: Callable[[float], np.ndarray], t: float, h_fd: float = H_FD,
                       time_domain: tuple[float, float] = (-np.inf, np.inf)) -> np.ndarray:
    k = h_fd * max(1.0, abs(t))
    lo, hi = time_domain
    room = min(t - lo, hi - t)
    if 2 * k >= room:
        k = 0.4 * room
    return (fn(t - 2 * k) - 8 * fn(t - k) + 8 * fn(t + k) - fn(t + 2 * k)) / (12 * k)


def metric_jet_fd(metric: Callable[[np.ndarray, float], np.ndarray], x: np.ndarray, t: float,
                  order: int = 3, h_fd: float = H_FD,
                  time_domain: tuple[float, float] = (-np.inf, np.inf)) -> MetricJet:
    """Metric jet by nested 4th-order centered differences of the component functions."""
    x = np.asarray(x, dtype=float)
    f0 = lambda y: metric(y, t)
    f1 = fd_gradient(f0, h_fd)
    g = f0(x)
    dg = f1(x)
    d2g = d3g = None
    if order >= 2:
        f2 = fd_gradient(f1, h_fd)
        d2g = f2(x)
        if order >= 3:
            d3g = fd_gradient(f2, h_fd)(x)
    dtg = fd_time_derivative(lambda s: metric(x, s), t, h_fd, time_domain)
    return MetricJet(g=g, dg=dg, d2g=d2g, d3g=d3g, dtg=dtg)


def scalar_jet_fd(fn: Callable[[np.ndarray, float], np.ndarray], x: np.ndarray, t: float,
                  h_fd: float = H_FD,
                  time_domain: tuple[float, float] = (-np.inf, np.inf)) -> ScalarFieldJet:
    x = np.asarray(x, dtype=float)
    f0 = lambda y: fn(y, t)
    f1 = fd_gradient(f0, h_fd)
    return ScalarFieldJet(
        value=f0(x),
        grad=f1(x),
        hess=fd_gradient(f1, h_fd)(x),
        dt=fd_time_derivative(lambda s: fn(x, s), t, h_fd, time_domain),
    )


# ----------------------------------------------------------------------------
# curvature from a jet


def check_metric(g: np.ndarray, tol: float = EIG_TOL) -> None:
    lam = np.linalg.eigvalsh(g)
    if not np.all(np.isfinite(lam)) or np.min(lam) <= tol:
        raise DegenerateMetric(f"metric eigenvalue {np.min(lam):.3e} below tolerance {tol:g}")


def _first_kind(dg: np.ndarray) -> np.ndarray:
    # G[d,b,c] = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    return 0.5 * (np.swapaxes(dg, -3, -2) + np.einsum("...cdb->...dbc", dg) - dg)


def curvature_from_jet(jet: MetricJet) -> CurvatureBundle:
    g = jet.g
    ginv = np.linalg.inv(g)
    G1 = _first_kind(jet.dg)
    gam = np.einsum("...ad,...dbc->...abc", ginv, G1)
    if jet.d2g is None:
        return CurvatureBundle(g=g, ginv=ginv, christoffel=gam)

    d2g = jet.d2g
    second = 0.5 * (
        np.einsum("...bcad->...abcd", d2g)
        + np.einsum("...adbc->...abcd", d2g)
        - np.einsum("...acbd->...abcd", d2g)
        - np.einsum("...bdac->...abcd", d2g)
    )
    quad = (np.einsum("...fbc,...fad->...abcd", G1, gam)
            - np.einsum("...fbd,...fac->...abcd", G1, gam))
    riem = second + quad
    ric = np.einsum("...ac,...abcd->...bd", ginv, riem)
    scal = np.einsum("...bd,...bd->...", ginv, ric)
    if jet.d3g is None:
        return CurvatureBundle(g=g, ginv=ginv, christoffel=gam, riemann=riem, ricci=ric,
                               scalar=scal)

    d3g = jet.d3g
    dG1 = 0.5 * (np.einsum("...ebdc->...edbc", d2g) + np.einsum("...ecdb->...edbc", d2g)
                 - d2g)
    dginv = -np.einsum("...ap,...epq,...qd->...ead", ginv, jet.dg, ginv)
    dgam = (np.einsum("...ead,...dbc->...eabc", dginv, G1)
            + np.einsum("...ad,...edbc->...eabc", ginv, dG1))
    dsecond = 0.5 * (
        np.einsum("...ebcad->...eabcd", d3g)
        + np.einsum("...eadbc->...eabcd", d3g)
        - np.einsum("...eacbd->...eabcd", d3g)
        - np.einsum("...ebdac->...eabcd", d3g)
    )
    dquad = (np.einsum("...efbc,...fad->...eabcd", dG1, gam)
             + np.einsum("...fbc,...efad->...eabcd", G1, dgam)
             - np.einsum("...efbd,...fac->...eabcd", dG1, gam)
             - np.einsum("...fbd,...efac->...eabcd", G1, dgam))
    d_riem = dsecond + dquad
    cov = (d_riem
           - np.einsum("...pea,...pbcd->...eabcd", gam, riem)
           - np.einsum("...peb,...apcd->...eabcd", gam, riem)
           - np.einsum("...pec,...abpd->...eabcd", gam, riem)
           - np.einsum("...ped,...abcp->...eabcd", gam, riem))
    d_ric = np.einsum("...ac,...eabcd->...ebd", ginv, cov)
    d_scal = np.einsum("...bd,...ebd->...e", ginv, d_ric)
    return CurvatureBundle(g=g, ginv=ginv, christoffel=gam, riemann=riem, ricci=ric,
                           scalar=scal, d_riemann=cov, d_ricci=d_ric, d_scalar=d_scal)


# ----------------------------------------------------------------------------
# operations on a background


def metric_jet(background, x, t: float, order: int = 3, method: str = "auto",
               h_fd: float = H_FD) -> MetricJet:
    """Metric jet at chart points ``x`` (shape ``(..., n)``) and time ``t``.

    ``method`` is ``"analytic"``, ``"fd"`` or ``"auto"`` (analytic when the
    background supplies closed-form jets).
    """
    x = background.check_point(x, t)
    if method == "auto":
        method = "analytic" if background.has_analytic_jet else "fd"
    if method == "analytic":
        jet = background.analytic_jet(x, t, order)
    else:
        jet = metric_jet_fd(background.metric, x, t, order, h_fd, background.time_domain)
    check_metric(jet.g)
    return jet


def curvature(background, x, t: float, order: int = 3, method: str = "auto",
              h_fd: float = H_FD) -> CurvatureBundle:
    """Christoffels, curvature and (for ``order=3``) covariant derivatives of curvature.

    ``order=1`` stops at the Christoffel symbols, ``order=2`` at curvature.
    """
    return curvature_from_jet(metric_jet(background, x, t, order, method, h_fd))


def hessian(bundle: CurvatureBundle, field_jet: ScalarFieldJet) -> np.ndarray:
    """Covariant Hessian d_a d_b f - Gamma^c_ab d_c f."""
    return field_jet.hess - np.einsum("...cab,...c->...ab", bundle.christoffel, field_jet.grad)


def laplacian(bundle: CurvatureBundle, field_jet: ScalarFieldJet) -> np.ndarray:
    return np.einsum("...ab,...ab->...", bundle.ginv, hessian(bundle, field_jet))


def norm_sq_gradient(bundle: CurvatureBundle, field_jet: ScalarFieldJet) -> np.ndarray:
    return np.einsum("...ab,...a,...b->...", bundle.ginv, field_jet.grad, field_jet.grad)


def soliton_constant(background, t: float) -> float:
    """The factor c/(2t) multiplying g in the soliton equation."""
    c = {"steady": 0.0, "shrinking": -1.0}[background.soliton_class]
    return 0.0 if c == 0.0 else c / (2.0 * t)


def soliton_residuals(background, x, t: float, method: str = "auto",
                      h_fd: float = H_FD) -> tuple[float, float]:
    """Max-norm residuals of Ric + Hess f = (c/2t) g and of d_t f = |grad f|^2."""
    if background.potential is None or background.soliton_class is None:
        raise NoPotential(f"background {background.name!r} declares no soliton potential")
    bundle = curvature(background, x, t, order=2, method=method, h_fd=h_fd)
    fj = background.potential_jet(x, t, method=method, h_fd=h_fd)
    tens = bundle.ricci + hessian(bundle, fj) - soliton_constant(background, t) * bundle.g
    scal = fj.dt - norm_sq_gradient(bundle, fj)
    return float(np.max(np.abs(tens))), float(np.max(np.abs(scal)))


def conjugate_heat_residual(background, u_jet: ScalarFieldJet, x, t: float,
                            method: str = "auto", h_fd: float = H_FD) -> np.ndarray:
    """Pointwise d_t u - (-Lap u + R u); zero for solutions of the conjugate heat equation."""
    if np.any(np.asarray(u_jet.value) <= 0):
        raise NonPositiveU("conjugate heat residual needs u > 0")
    bundle = curvature(background, x, t, order=2, method=method, h_fd=h_fd)
    return u_jet.dt + laplacian(bundle, u_jet) - bundle.scalar * u_jet.value


def ricci_flow_residual(background, x, t: float, method: str = "auto",
                        h_fd: float = H_FD) -> float:
    jet = metric_jet(background, x, t, order=2, method=method, h_fd=h_fd)
    bundle = curvature_from_jet(jet)
    return float(np.max(np.abs(jet.dtg + 2.0 * bundle.ricci)))


def bundle_invariant_residuals(bundle: CurvatureBundle) -> dict[str, float]:
    """Residuals of the algebraic and differential symmetries of the curvature."""
    R = bundle.riemann
    out = {
        "christoffel_symmetry": np.max(np.abs(bundle.christoffel
                                              - np.swapaxes(bundle.christoffel, -1, -2))),
        "antisym_12": np.max(np.abs(R + np.einsum("...bacd->...abcd", R))),
        "antisym_34": np.max(np.abs(R + np.einsum("...abdc->...abcd", R))),
        "pair_symmetry": np.max(np.abs(R - np.einsum("...cdab->...abcd", R))),
        "first_bianchi": np.max(np.abs(R + np.einsum("...acdb->...abcd", R)
                                       + np.einsum("...adbc->...abcd", R))),
        "ricci_trace": np.max(np.abs(np.einsum("...ab,...ab->...", bundle.ginv, bundle.ricci)
                                     - bundle.scalar)),
    }
    if bundle.d_ricci is not None:
        div = np.einsum("...ea,...eab->...b", bundle.ginv, bundle.d_ricci)
        out["contracted_bianchi"] = np.max(np.abs(div - 0.5 * bundle.d_scalar))
    return {k: float(v) for k, v in out.items()}
