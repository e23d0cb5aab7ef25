"""Explicit time stepping of mean curvature flow in a Ricci flow background.

Two frames are supported:

* ``ambient-mcf``: node velocity ``H e0`` in the metric ``g(t)``;
* ``static-weighted``: node velocity ``(H + e0 f) e0`` in the frozen metric
  and potential at time 0 (steady backgrounds only), i.e. the negative
  gradient flow of the weighted area.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import hypersurface as hs
from . import spectral
from .errors import (CflViolation, DegenerateMetric, DegenerateTangent, OpenImmersion,
                     OutOfChart, WrongSolitonClass)

FRAMES = ("ambient-mcf", "static-weighted")
# RK4 reaches -2.78 on the negative real axis and the spectral second
# derivative has eigenvalues down to -(pi/h)^2, so dt <= 0.28 h^2 is needed.
STABILITY_LIMIT = 0.25


@dataclass(frozen=True)
class Stepper:
    c_cfl: float = 0.4
    redistribute_every: int = 20
    extinction_area_ratio: float = 0.5
    extinction_curvature: float = 0.5
    dt_min: float = 1e-12
    dt_fixed: Optional[float] = None
    stability_cap: bool = True
    spectral_filter: bool = True


@dataclass(frozen=True)
class FlowState:
    t: float
    imm: hs.Immersion
    frame: str = "ambient-mcf"
    stepper: Stepper = field(default_factory=Stepper)
    steps: int = 0

    @property
    def background(self):
        return self.imm.background

    def geometry_time(self, t: Optional[float] = None) -> float:
        return 0.0 if self.frame == "static-weighted" else (self.t if t is None else t)


def _check_frame(state: FlowState) -> None:
    if state.frame not in FRAMES:
        raise ValueError(f"unknown frame {state.frame!r}")
    if state.frame == "static-weighted" and state.background.soliton_class != "steady":
        raise WrongSolitonClass("the static weighted frame needs a steady soliton background")
    if not state.imm.closed:
        raise OpenImmersion("flows are implemented for closed immersions only")


def normal_speed(imm: hs.Immersion, t: float, frame: str) -> tuple[np.ndarray, hs.NormalData]:
    if frame == "static-weighted":
        nd = hs.normal_data(imm, 0.0, with_potential=True)
        return nd.H + nd.e0f, nd
    nd = hs.normal_data(imm, t)
    return nd.H, nd


def velocity(imm: hs.Immersion, t: float, frame: str) -> np.ndarray:
    speed, nd = normal_speed(imm, t, frame)
    return speed[:, None] * nd.normal


def spacing(imm: hs.Immersion, geo) -> float:
    """Minimal induced node spacing along the grid parameter."""
    return float(np.min(np.sqrt(geo.induced[:, 0, 0])) * imm.dsigma)


def adaptive_dt(state: FlowState, geo=None) -> float:
    """c_cfl h_min^2 / (1 + max(|A|^2, H^2)), capped by the RK4 stability limit."""
    if geo is None:
        geo = hs.normal_data(state.imm, state.geometry_time())
    h = spacing(state.imm, geo)
    curv = max(float(np.max(geo.A_norm_sq)), float(np.max(geo.H ** 2)))
    dt = state.stepper.c_cfl * h * h / (1.0 + curv)
    if state.stepper.stability_cap:
        dt = min(dt, STABILITY_LIMIT * h * h)
    return dt


def step(state: FlowState, dt: Optional[float] = None,
         k1: Optional[np.ndarray] = None) -> FlowState:
    """One classical RK4 step; velocities are re-evaluated at every stage.

    ``k1`` may carry the already evaluated velocity at the current state.
    """
    _check_frame(state)
    imm, t = state.imm, state.t
    if dt is None:
        dt = state.stepper.dt_fixed or adaptive_dt(state)
    elif state.stepper.stability_cap:
        h = spacing(imm, hs.normal_data(imm, state.geometry_time()))
        if dt > 0.282 * h * h * (1 + 1e-9):
            raise CflViolation(f"dt={dt:.3e} exceeds the RK4 stability bound for h={h:.3e}")
    X = imm.nodes
    if k1 is None:
        k1 = velocity(imm, t, state.frame)
    k2 = velocity(imm.with_nodes(X + 0.5 * dt * k1), t + 0.5 * dt, state.frame)
    k3 = velocity(imm.with_nodes(X + 0.5 * dt * k2), t + 0.5 * dt, state.frame)
    k4 = velocity(imm.with_nodes(X + dt * k3), t + dt, state.frame)
    Xn = X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(Xn)):
        raise DegenerateTangent("non-finite node positions")
    if state.stepper.spectral_filter:
        Xn = filter_nodes(imm, Xn)
    return replace(state, t=t + dt, imm=imm.with_nodes(Xn), steps=state.steps + 1)


def filter_nodes(imm: hs.Immersion, X: np.ndarray) -> np.ndarray:
    """Exponential filter against aliasing growth of the grid-scale mode."""
    if imm.kind == "closed-curve":
        return spectral.exponential_filter(X)
    if imm.kind == "revolution-profile":
        return spectral.exponential_filter(X, np.array([-1.0, 1.0, 1.0]))
    return X


# ----------------------------------------------------------------------------
# tangential redistribution


def _interp_periodic(imm: hs.Immersion, F_ext: np.ndarray, s: np.ndarray) -> np.ndarray:
    M = F_ext.shape[0]
    shift = 0.5 * 2 * np.pi / M if imm.kind == "revolution-profile" else 0.0
    return spectral.fourier_interpolate(F_ext, np.asarray(s) - shift)


def redistribute(imm: hs.Immersion, t: float = 0.0, iters: int = 30) -> hs.Immersion:
    """Resample the nodes at uniform induced arclength (spectral interpolation)."""
    if not imm.closed:
        raise OpenImmersion("redistribution needs a closed immersion")
    geo = hs.geometry(imm, t, level="velocity", potential=None)
    speed = np.sqrt(geo.induced[:, 0, 0])
    N = imm.N
    if imm.kind == "revolution-profile":
        X_ext = spectral.reflect(imm.nodes, np.array([-1.0, 1.0, 1.0]))
        v_ext = spectral.reflect(speed, 1.0)
        grid = np.concatenate([imm.sigma, 2 * np.pi - imm.sigma[::-1]])
    else:
        X_ext, v_ext, grid = imm.nodes, speed, imm.sigma
    P, mean = spectral.fourier_antiderivative(v_ext)
    s_of = lambda sig: _interp_periodic(imm, P, sig) + mean * sig
    if imm.kind == "revolution-profile":
        origin = float(s_of(np.array([0.0]))[0])
        targets = (np.arange(N) + 0.5) * (np.pi * mean / N) + origin
        lo, hi = 0.0, np.pi
    else:
        origin = float(P[0])
        targets = origin + np.arange(N) * (2 * np.pi * mean / N)
        lo, hi = 0.0, 2 * np.pi
    s_nodes = P + mean * grid
    sig = np.interp(targets, s_nodes[: len(grid)], grid)
    for _ in range(iters):
        err = s_of(sig) - targets
        sig = np.clip(sig - err / _interp_periodic(imm, v_ext, sig), lo, hi)
        if np.max(np.abs(err)) < 1e-14 * max(1.0, mean):
            break
    return imm.with_nodes(_interp_periodic(imm, X_ext, sig))


# ----------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class Scenario:
    imm: hs.Immersion
    t0: float
    t_end: float
    frame: str = "ambient-mcf"
    output_interval: Optional[float] = None
    stepper: Stepper = field(default_factory=Stepper)
    max_steps: int = 5_000_000


@dataclass
class FlowResult:
    """Stored output states and the termination record.

    ``extinction_time`` is the extrapolated collapse time (see ``run``).
    """

    times: list
    states: list
    termination: str
    t_final: float
    steps: int
    frame: str
    redistributed: bool
    extinction_time: Optional[float] = None
    message: str = ""
    dt_history: list = field(default_factory=list)


def area_rate(imm: hs.Immersion, t: float) -> tuple[float, float]:
    """(area, dA/dt) with dA/dt = -integral of (tangential trace of Ric + H^2)."""
    geo = hs.geometry(imm, t, level="velocity", potential=None)
    ric = geo.bundle.ricci if geo.bundle.ricci is not None else None
    if ric is None:
        from . import tensor
        ric = tensor.curvature(imm.background, imm.nodes, t, order=2).ricci
    ric_t = np.einsum("nij,nia,njb,nab->n", geo.induced_inv, geo.E, geo.E, ric)
    area = hs.integrate(imm, geo, np.ones(imm.N))
    rate = -hs.integrate(imm, geo, ric_t + geo.H ** 2)
    return area, rate


def extrapolated_extinction(imm: hs.Immersion, t: float) -> float:
    """t + (k/2) A / |dA/dt|, exact for round shrinking spheres of dimension k."""
    area, rate = area_rate(imm, t)
    return t + 0.5 * imm.dim * area / abs(rate)


def run(scenario: Scenario) -> FlowResult:
    """Integrate until t_end, extinction, blowup or chart exit.

    Outputs are stored at ``t0 + j * output_interval`` (every step when the
    interval is None); steps are shortened to land on output times.
    Extinction is declared when the area drops below
    ``extinction_area_ratio`` times the initial area or when
    max|A| h_min exceeds ``extinction_curvature``; the extinction time is
    then extrapolated from the current area and its rate.
    """
    st = scenario.stepper
    state = FlowState(scenario.t0, scenario.imm, scenario.frame, st)
    _check_frame(state)
    area_time = lambda s: s.geometry_time()
    A0 = hs.weighted_area(state.imm, area_time(state), weight=None)
    times, states, dts = [state.t], [state.imm], []
    interval = scenario.output_interval
    next_out = scenario.t0 + interval if interval else None
    n_out = 1
    redistributed = False
    since = 0
    termination, message, t_ext = "reached_t_end", "", None
    try:
        while state.t < scenario.t_end - 1e-14 * max(1.0, abs(scenario.t_end)):
            if state.steps >= scenario.max_steps:
                termination, message = "blowup", "step budget exhausted"
                break
            speed, geo = normal_speed(state.imm, state.t, state.frame)
            if hs.integrate(state.imm, geo, np.ones(state.imm.N)) < st.extinction_area_ratio * A0:
                termination = "extinction"
                break
            dt = st.dt_fixed or adaptive_dt(state, geo)
            if dt < st.dt_min:
                termination, message = "blowup", f"dt={dt:.3e} below {st.dt_min:g}"
                break
            if float(np.max(np.sqrt(geo.A_norm_sq))) * spacing(state.imm, geo) > \
                    st.extinction_curvature:
                termination = "extinction"
                break
            target = scenario.t_end if next_out is None else min(next_out, scenario.t_end)
            dt = min(dt, target - state.t)
            state = step(state, dt, k1=speed[:, None] * geo.normal)
            dts.append(dt)
            since += 1
            landed = next_out is None or abs(state.t - next_out) <= 1e-12 * max(1.0, abs(next_out))
            if landed:
                if next_out is not None:
                    n_out += 1
                    state = replace(state, t=scenario.t0 + (n_out - 1) * interval)
                    next_out = scenario.t0 + n_out * interval
                if st.redistribute_every and since >= st.redistribute_every:
                    state = replace(state, imm=redistribute(state.imm, area_time(state)))
                    redistributed = True
                    since = 0
                times.append(state.t)
                states.append(state.imm)
    except OutOfChart as exc:
        termination, message = "chart_exit", str(exc)
    except (DegenerateTangent, DegenerateMetric, FloatingPointError) as exc:
        termination, message = "blowup", str(exc)
    if termination == "extinction":
        t_ext = extrapolated_extinction(state.imm, area_time(state)) \
            if scenario.frame == "ambient-mcf" else state.t
        if times[-1] != state.t:
            times.append(state.t)
            states.append(state.imm)
    return FlowResult(times, states, termination, state.t, state.steps, scenario.frame,
                      redistributed, t_ext, message, dts)
