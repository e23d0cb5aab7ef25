"""Conjugate heat flow on a ball moving by mean curvature flow, and the dI/dt identities.

The background is a catalog Ricci flow of the form ``g = A(r, t)^2 delta``.
The coordinate ball of radius ``rho(t)`` moves by mean curvature flow,
``rho' = -H / A``. On it, ``u = e^{-f}`` solves
``du/dt = -lap u + R u`` backwards from ``t = b`` with the Robin condition
``e0 u = H u``. Pulling ``(g, f)`` back along the flow of ``-grad f``
turns this into the modified Ricci flow on the initial ball, so the weighted
action and its time-derivative identities can be evaluated on ``(g(t), f(t))``
over the moving ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from . import tensor
from .backgrounds import Background
from .errors import BadParams, PositivityLoss
from .ghy import (RadialDomain, RadialGeometry, _grid, boundary_terms, ghy_action,
                  radial_geometry, sphere_area, weighted_action)

Terminal = Union[float, Callable[[np.ndarray], np.ndarray]]


def _conformal(bg: Background):
    if bg.conformal is None:
        raise BadParams(f"background {bg.name!r} is not rotationally symmetric")
    return bg.conformal


def _axis_points(bg: Background, r: np.ndarray) -> np.ndarray:
    X = np.zeros((len(r), bg.n))
    X[:, 0] = r
    return X


def background_curvature(bg: Background, r: np.ndarray, t: float) -> dict:
    """Frame curvature of a radial background along the first axis.

    Returns the radial and spherical Ricci eigenvalues, the scalar curvature
    and the unit radial derivatives of R and Ric(e_r, e_r).
    """
    r = np.asarray(r, dtype=float)
    if bg.flat:
        z = np.zeros_like(r)
        return {"ric_rr": z, "ric_sph": z, "R": z, "R_s": z, "ric_rr_s": z}
    cb = tensor.curvature(bg, _axis_points(bg, r), t, order=3)
    g00, g11 = cb.g[:, 0, 0], cb.g[:, 1, 1]
    return {"ric_rr": cb.ricci[:, 0, 0] / g00, "ric_sph": cb.ricci[:, 1, 1] / g11,
            "R": cb.scalar, "R_s": cb.d_scalar[:, 0] / np.sqrt(g00),
            "ric_rr_s": cb.d_ricci[:, 0, 0, 0] / g00 ** 1.5}


def scalar_curvature(bg: Background, r: np.ndarray, t: float) -> np.ndarray:
    if bg.flat:
        return np.zeros_like(r)
    X = _axis_points(bg, r)
    if bg.exact_scalar is not None:
        return np.asarray(bg.exact_scalar(X, t), dtype=float)
    return tensor.curvature(bg, X, t, order=2).scalar


def sphere_mean_curvature(bg: Background, rho, t: float):
    """Mean curvature of the coordinate sphere |x| = rho, inward normal."""
    A, Ar = _conformal(bg)(np.asarray(rho, dtype=float), t)
    return (bg.n - 1) * (A + rho * Ar) / (rho * A * A)


def mcf_radius(bg: Background, rho_a: float, window: tuple[float, float]):
    """Dense solution of rho' = -H / A on the window; returns (rho(t), rho'(t))."""
    a, b = window

    def rhs(t, y):
        A = _conformal(bg)(y, t)[0]
        return -sphere_mean_curvature(bg, y, t) / A

    sol = solve_ivp(rhs, (a, b), [rho_a], method="DOP853", rtol=1e-13, atol=1e-14,
                    dense_output=True)
    if not sol.success or sol.t[-1] < b - 1e-12:
        raise PositivityLoss(f"boundary sphere collapsed before t={b}: {sol.message}")

    def rho(t):
        return float(sol.sol(t)[0])

    def rho_dot(t):
        return float(rhs(t, np.array([rho(t)]))[0])

    return rho, rho_dot


@dataclass
class HeatSolution:
    """Stored outputs of a backward conjugate heat solve (ascending times).

    ``U[k]`` holds u on the nodes ``xi * radius[k]``.
    """

    background: Background
    xi: np.ndarray
    times: np.ndarray
    radius: np.ndarray
    U: np.ndarray
    bc_residual: np.ndarray
    mass: np.ndarray
    budget_residual: float
    boundary: str
    steps: int
    M: int

    @property
    def n(self) -> int:
        return self.background.n

    def f(self, k: int) -> np.ndarray:
        return -np.log(self.U[k])

    def nodes(self, k: int) -> np.ndarray:
        return self.xi * self.radius[k]

    def domain(self, k: int) -> RadialDomain:
        """(g(t_k), f(t_k)) on the ball at output k, on the solver grid."""
        t = float(self.times[k])
        conf = _conformal(self.background)
        return RadialDomain.conformal(self.n, float(self.radius[k]),
                                      lambda r: conf(r, t)[0], self.M, f=self.f(k), method="fd")


def _terminal(u_b: Terminal, r: np.ndarray) -> np.ndarray:
    if callable(u_b):
        return np.asarray(u_b(r), dtype=float) * np.ones_like(r)
    return float(u_b) * np.ones_like(r)


def conjugate_heat_solve(bg: Background, rho_a: float, u_b: Terminal,
                         window: tuple[float, float], M: int = 48, n_out: int = 11,
                         boundary: str = "mcf", c_cfl: float = 0.2) -> HeatSolution:
    """Solve du/dt = -lap u + R u backwards from t = b with e0 u = H u.

    The ball has coordinate radius rho_a at t = a and moves by mean
    curvature flow (``boundary="mcf"``) or stays fixed (``"fixed"``).
    Space: 4th-order finite differences on a pole-free staggered grid with
    the Robin row eliminated; time: RK4 in s = b - t with a parabolic step
    limit. Outputs are uniform in t, endpoints included.
    """
    a, b = map(float, window)
    if not b > a:
        raise BadParams("window must satisfy a < b")
    if boundary not in ("mcf", "fixed"):
        raise BadParams(f"unknown boundary motion {boundary!r}")
    n = bg.n
    conf = _conformal(bg)
    if boundary == "mcf":
        rho, rho_dot = mcf_radius(bg, rho_a, (a, b))
    else:
        rho, rho_dot = (lambda t: float(rho_a)), (lambda t: 0.0)
    G = _grid("ball", "fd", int(M), 0.0, 1.0)
    xi, D1, D2 = G.r, G.D1[1], G.D2[1]
    last = M - 1
    omega = sphere_area(n - 1)

    def complete(Ui, t):
        rb = rho(t)
        A, _ = conf(np.array([rb]), t)
        Hb = sphere_mean_curvature(bg, rb, t)
        num = -D1[last, :last] @ Ui / rb
        return np.append(Ui, num / (D1[last, last] / rb + A[0] * Hb))

    def rhs(Ui, t):
        U = complete(Ui, t)
        rb, rd = rho(t), rho_dot(t)
        r = xi * rb
        A, Ar = conf(r, t)
        Ux = D1 @ U
        ur, urr = Ux / rb, (D2 @ U) / (rb * rb)
        lap = (urr + ((n - 1) / r + (n - 2) * Ar / A) * ur) / (A * A)
        out = lap - scalar_curvature(bg, r, t) * U - (rd / rb) * xi * Ux
        return out[:last]

    def diagnostics(U, t):
        rb = rho(t)
        r = xi * rb
        A, _ = conf(r, t)
        Hb = sphere_mean_curvature(bg, rb, t)
        e0u = -(D1[last] @ U) / (rb * A[-1])
        area = omega * (rb * A[-1]) ** (n - 1)
        mass = omega * rb * G.integrate(U * A ** n * r ** (n - 1), n - 1)
        flux = area * (e0u + A[-1] * rho_dot(t) * U[-1])
        return abs(e0u - Hb * U[-1]), mass, flux

    t_out = np.linspace(a, b, n_out)
    U = _terminal(u_b, xi * rho(b))
    if np.min(U) <= 0:
        raise PositivityLoss("terminal data must be positive")
    Ui = U[:last].copy()
    U = complete(Ui, b)
    store = {n_out - 1: U}
    bc, mass, flux0 = diagnostics(U, b)
    bcs, masses = {n_out - 1: bc}, {n_out - 1: mass}
    flux_int, t, steps = 0.0, b, 0
    for k in range(n_out - 2, -1, -1):
        target = t_out[k]
        while t > target + 1e-14 * max(1.0, abs(target)):
            rb = rho(t)
            A = conf(xi * rb, t)[0]
            ds = min(c_cfl * float(np.min((rb * (xi[1] - xi[0]) * A) ** 2)), t - target)
            k1 = rhs(Ui, t)
            k2 = rhs(Ui + 0.5 * ds * k1, t - 0.5 * ds)
            k3 = rhs(Ui + 0.5 * ds * k2, t - 0.5 * ds)
            k4 = rhs(Ui + ds * k3, t - ds)
            Ui = Ui + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t -= ds
            steps += 1
            U = complete(Ui, t)
            if not np.all(np.isfinite(U)) or np.min(U) <= 0:
                raise PositivityLoss(f"u lost positivity at t={t:.6g}")
            _, _, flux1 = diagnostics(U, t)
            flux_int += 0.5 * ds * (flux0 + flux1)
            flux0 = flux1
        t = target
        store[k] = U
        bcs[k], masses[k], _ = diagnostics(U, t)
    mass_arr = np.array([masses[k] for k in range(n_out)])
    # d(mass)/dt = flux, integrated from a to b
    budget = abs(mass_arr[-1] - mass_arr[0] - flux_int)
    return HeatSolution(bg, xi, t_out, np.array([rho(tk) for tk in t_out]),
                        np.array([store[k] for k in range(n_out)]),
                        np.array([bcs[k] for k in range(n_out)]), mass_arr, budget, boundary,
                        steps, int(M))


# ----------------------------------------------------------------------------
# time derivative of the weighted action


def exact_geometry(dom: RadialDomain, bg: Background, t: float) -> RadialGeometry:
    """Radial geometry with background curvature from the closed-form metric jets."""
    geo = radial_geometry(dom)
    A, Ar = _conformal(bg)(dom.r, t)
    cur = background_curvature(bg, dom.r, t)
    geo.phi_s = (A + dom.r * Ar) / A
    geo.ric_rr, geo.ric_sph, geo.R = cur["ric_rr"], cur["ric_sph"], cur["R"]
    geo.R_s, geo.ric_rr_s = cur["R_s"], cur["ric_rr_s"]
    geo.hess_sph = geo.phi_s * geo.f_s / dom.phi
    geo.lap_f = geo.f_ss + (dom.n - 1) * geo.hess_sph
    return geo


@dataclass
class ActionRow:
    t: float
    I_GHY: float
    I_inf: float
    dI_lhs: float
    dI_rhs_bulk: float
    dI_rhs_boundary: float
    dI_rhs_harnack: float
    res_boundary_form: float
    res_harnack_form: float
    res_pointwise: float
    bc_residual: float
    mass_drift: float

    @classmethod
    def columns(cls) -> list[str]:
        return list(cls.__dataclass_fields__)

    def values(self) -> list:
        return [getattr(self, c) for c in self.columns()]


def _slice_terms(dom: RadialDomain, geo: RadialGeometry) -> dict:
    k = dom.n - 1
    bt = boundary_terms(dom, geo)[0]
    kap, H = bt["kappa"], bt["H"]
    bulk = 2 * dom.integrate(((geo.ric_rr + geo.f_ss) ** 2
                              + k * (geo.ric_sph + geo.hess_sph) ** 2)
                             * np.exp(-dom.f) * geo.density)
    wa = bt["weight"] * bt["area"]
    # boundary integrand of the bulk+boundary form; gradient terms vanish by symmetry
    form_330 = k * k * kap ** 3 + k * kap * bt["ric_sph"]
    dH_sub = 2 * k * kap * bt["ric_sph"] + k * kap * kap * H + bt["e0_ric00"]
    form_h_sub = dH_sub - 0.5 * bt["e0R"] - H * bt["ric00"]
    return {"bulk": bulk, "form_330": form_330, "form_h_sub": form_h_sub, "wa": wa, "H": H,
            "e0R": bt["e0R"], "ric00": bt["ric00"]}


def modified_flow_dI(sol: HeatSolution) -> list[ActionRow]:
    """I_GHY, I_inf and the three expressions for dI_inf/dt at each output.

    ``dI_lhs`` is the centered difference of I_inf across outputs; the
    right sides are the bulk term plus either the curvature form of the
    boundary integrand or the Harnack form with dH/dt from centered
    differences of H. ``res_pointwise`` compares the two boundary integrands
    at a single time, with dH/dt from the mean curvature evolution equation.
    """
    bg, times = sol.background, sol.times
    slices, I_g, I_w = [], [], []
    for k, t in enumerate(times):
        dom = sol.domain(k)
        geo = exact_geometry(dom, bg, float(t))
        I_g.append(ghy_action(dom, geo))
        I_w.append(weighted_action(dom, geo))
        slices.append(_slice_terms(dom, geo))
    rows = []
    nan = math.nan
    for k, t in enumerate(times):
        s = slices[k]
        rhs_b = s["bulk"] + 2 * s["form_330"] * s["wa"]
        lhs = rhs_h = nan
        if 0 < k < len(times) - 1:
            dt = times[k + 1] - times[k - 1]
            lhs = (I_w[k + 1] - I_w[k - 1]) / dt
            dH = (slices[k + 1]["H"] - slices[k - 1]["H"]) / dt
            rhs_h = s["bulk"] + 2 * (dH - 0.5 * s["e0R"] - s["H"] * s["ric00"]) * s["wa"]
        rows.append(ActionRow(float(t), I_g[k], I_w[k], lhs, s["bulk"], rhs_b - s["bulk"],
                              rhs_h - s["bulk"] if not math.isnan(rhs_h) else nan,
                              abs(lhs - rhs_b) if not math.isnan(lhs) else nan,
                              abs(lhs - rhs_h) if not math.isnan(lhs) else nan,
                              abs(s["form_330"] - s["form_h_sub"]),
                              float(sol.bc_residual[k]),
                              abs(sol.mass[k] - sol.mass[-1]) / abs(sol.mass[-1])))
    return rows


def gaussian_terminal(n: int, b: float, T: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Backward heat kernel (4 pi (T - t))^(-n/2) exp(-r^2 / (4 (T - t))) at t = b."""
    lam = T - b
    return lambda r: (4 * np.pi * lam) ** (-n / 2) * np.exp(-r ** 2 / (4 * lam))


def closed_form_heat_residual(bg: Background, x, t: float) -> np.ndarray:
    """Conjugate heat residual of u = exp(-f) for the background potential f."""
    x = np.asarray(x, dtype=float)
    fj = bg.potential_jet(x, t)
    u = np.exp(-fj.value)
    grad = -u[..., None] * fj.grad
    hess = u[..., None, None] * (fj.grad[..., :, None] * fj.grad[..., None, :] - fj.hess)
    uj = tensor.ScalarFieldJet(u, grad, hess, -u * fj.dt)
    return tensor.conjugate_heat_residual(bg, uj, x, t)
