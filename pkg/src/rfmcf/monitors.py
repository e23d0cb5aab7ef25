"""Per-flow identities and functionals evaluated as residuals or time series.

Slice monitors (Harnack expression, soliton deviation, Simons identity,
Huisken quantity) use a single stored state. Rate monitors (evolution
equations, area identity, weighted-area monotonicity) compare centered time
differences over three consecutive uniformly spaced outputs with the
closed-form right-hand side at the middle output.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from . import hypersurface as hs
from . import tensor
from .backgrounds import ScalarField
from .errors import (NonUniformDt, NoPotential, OpenImmersion, RedistributionActive,
                     WrongDimension, WrongSolitonClass)
from .flow import FlowResult

RES_FLOOR = 1e-6
UNIFORM_TOL = 1e-9


@dataclass
class MonitorRow:
    """One output time. Residual columns are NaN where a monitor does not apply."""

    t: float
    area: float
    weighted_area: float
    huisken_q: float
    min_H: float
    max_H: float
    soliton_dev_L2: float
    harnack_min: float
    res_dgdt: float
    res_dAdt: float
    res_dHdt: float
    res_simons: float
    res_area_identity: float
    res_monotonicity: float
    ext_bound_ok: bool

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list:
        return list(asdict(self).values())


COLUMN_DOCS = {
    "t": "output time",
    "area": "area (length) of the hypersurface in g(t)",
    "weighted_area": "integral of exp(-f) dA (f the background potential, 0 if none)",
    "huisken_q": "tau^(-(n-1)/2) * weighted_area on shrinking backgrounds",
    "min_H": "minimum mean curvature",
    "max_H": "maximum mean curvature",
    "soliton_dev_L2": "L2 norm of H + e0 f",
    "harnack_min": "minimum over nodes of the Harnack boundary integrand",
    "res_dgdt": "max residual of the induced-metric evolution",
    "res_dAdt": "max residual of the second fundamental form evolution",
    "res_dHdt": "max residual of the mean curvature evolution",
    "res_simons": "max residual of the Simons-type identity for Hess H",
    "res_area_identity": "residual of dA/dt = -integral (tangential Ric trace + H^2) dA",
    "res_monotonicity": "relative residual of the weighted-area (or Huisken) rate identity",
    "ext_bound_ok": "area-rate extinction inequality holds (true where not applicable)",
}


# ----------------------------------------------------------------------------
# slice monitors


def _geo(imm: hs.Immersion, t: float, frame: str = "ambient-mcf", potential="background"):
    return hs.geometry(imm, 0.0 if frame == "static-weighted" else t, level="full",
                       potential=potential)


def _require_potential(geo: hs.ExtrinsicGeometry) -> None:
    if geo.fbar is None:
        raise NoPotential("monitor needs a potential")


def harnack(imm: hs.Immersion, t: float, geo: Optional[hs.ExtrinsicGeometry] = None,
            field_: Optional[ScalarField] = None, dHdt: Optional[np.ndarray] = None
            ) -> tuple[np.ndarray, float]:
    """Per-node Harnack boundary integrand and its minimum.

    dH/dt - 2<grad f, grad H> + A(grad f, grad f) + 2 Ric(e0, grad f)
    - e0 R / 2 - H Ric(e0, e0), with gradients along the hypersurface.
    ``dHdt`` defaults to the mean curvature evolution right side; pass time
    differences to cross-check.
    """
    if geo is None or field_ is not None:
        geo = hs.geometry(imm, t, level="full",
                          potential=field_ if field_ is not None else "background")
    _require_potential(geo)
    gi = geo.induced_inv
    df = geo.grad_fbar
    up = np.einsum("nij,nj->ni", gi, df)
    dH = geo.derived["grad_H"]
    amb = geo.ambient
    if dHdt is None:
        dHdt = hs.dH_dt_rhs(geo)
    val = (dHdt - 2 * np.einsum("ni,ni->n", up, dH)
           + np.einsum("nij,ni,nj->n", geo.A, up, up)
           + 2 * np.einsum("ni,ni->n", amb["ricci"][:, 0, 1:], up)
           - 0.5 * amb["d_scalar"][:, 0]
           - geo.H * amb["ricci"][:, 0, 0])
    return val, float(np.min(val))


def hamilton_z(imm: hs.Immersion, t: float, V: np.ndarray,
               geo: Optional[hs.ExtrinsicGeometry] = None) -> np.ndarray:
    """Z = dH/dt + 2<V, grad H> + A(V, V) for a tangent field V (contravariant components)."""
    if geo is None:
        geo = hs.geometry(imm, t, level="full", potential=None)
    return (hs.dH_dt_rhs(geo) + 2 * np.einsum("ni,ni->n", V, geo.derived["grad_H"])
            + np.einsum("nij,ni,nj->n", geo.A, V, V))


def soliton_deviation(imm: hs.Immersion, t: float, geo: Optional[hs.ExtrinsicGeometry] = None,
                      norms: Sequence[str] = ("l2", "max")) -> dict[str, float]:
    """Norms of H + e0 f and max residuals of the restricted soliton equations.

    tangential: R_ij + hat-Hess f_ij + H A_ij - (c/2t) g_ij
    mixed:      R_i0 - d_i H + A_i^k d_k f
    """
    if "l2" in norms and not imm.closed:
        raise OpenImmersion("the L2 deviation needs a closed immersion")
    if geo is None:
        geo = hs.geometry(imm, t, level="full")
    _require_potential(geo)
    dev = geo.H + geo.e0f
    out = {}
    if "max" in norms:
        out["max"] = float(np.max(np.abs(dev)))
    if "l2" in norms:
        out["l2"] = math.sqrt(max(hs.integrate(imm, geo, dev ** 2), 0.0))
    bg = imm.background
    c = tensor.soliton_constant(bg, t) if bg.soliton_class else 0.0
    R = geo.ambient["ricci"]
    tang = R[:, 1:, 1:] + geo.derived["hess_fbar"] + geo.H[:, None, None] * geo.A \
        - c * geo.induced
    mixed = (R[:, 1:, 0] - geo.derived["grad_H"]
             + np.einsum("nkl,nil,nk->ni", geo.induced_inv, geo.A, geo.grad_fbar))
    out["restricted_tangential"] = float(np.max(np.abs(tang)))
    out["restricted_mixed"] = float(np.max(np.abs(mixed)))
    return out


def weighted_area_at(imm: hs.Immersion, t: float, geo=None) -> float:
    bg = imm.background
    if geo is None:
        geo = hs.geometry(imm, t, level="velocity")
    f = geo.fbar if geo.fbar is not None else (
        bg.potential(imm.nodes, t) if bg.potential is not None else 0.0)
    return hs.integrate(imm, geo, np.exp(-np.asarray(f)) * np.ones(imm.N))


def huisken_quantity(imm: hs.Immersion, t: float, geo=None) -> float:
    """tau^(-(n-1)/2) times the weighted area, tau = -t, on shrinking backgrounds."""
    if imm.background.soliton_class != "shrinking":
        raise WrongSolitonClass("the Huisken quantity needs a shrinking background")
    tau = -t
    return tau ** (-imm.dim / 2) * weighted_area_at(imm, t, geo)


def monotonicity_rate(imm: hs.Immersion, t: float, geo=None, frame: str = "ambient-mcf") -> float:
    """Right side of the weighted-area (Huisken on shrinkers) rate identity.

    -integral (H + e0 f)^2 exp(-f) dA, times tau^(-(n-1)/2) on shrinkers.
    In the static frame everything is frozen at time 0.
    """
    if geo is None:
        geo = _geo(imm, t, frame)
    _require_potential(geo)
    rate = -hs.integrate(imm, geo, (geo.H + geo.e0f) ** 2 * np.exp(-geo.fbar))
    if frame == "ambient-mcf" and imm.background.soliton_class == "shrinking":
        rate *= (-t) ** (-imm.dim / 2)
    return rate


def area_rate(imm: hs.Immersion, geo: hs.ExtrinsicGeometry) -> float:
    """-integral of (tangential Ric trace + H^2) dA."""
    ric_t = np.einsum("nij,nij->n", geo.induced_inv, geo.ambient["ricci"][:, 1:, 1:])
    return -hs.integrate(imm, geo, ric_t + geo.H ** 2)


# ----------------------------------------------------------------------------
# rate monitors


def _check_window(times: Sequence[float]) -> float:
    d1, d2 = times[1] - times[0], times[2] - times[1]
    if d1 <= 0 or abs(d2 - d1) > UNIFORM_TOL * max(abs(d1), 1e-300) + 1e-14:
        raise NonUniformDt(f"outputs not uniformly spaced: {d1!r} vs {d2!r}")
    return 0.5 * (d1 + d2)


def evolution_residuals(states: Sequence[hs.Immersion], times: Sequence[float],
                        redistributed: bool = False, mid_geo=None) -> tuple[float, float, float]:
    """Max-norm residuals of the induced metric, A and H evolution equations.

    Left sides are centered differences over three consecutive outputs in the
    flowing parametrization; right sides come from the middle output.
    """
    if redistributed:
        raise RedistributionActive("evolution residuals need pure normal motion")
    dt = _check_window(times)
    g0 = hs.geometry(states[0], times[0], level="velocity", potential=None)
    g2 = hs.geometry(states[2], times[2], level="velocity", potential=None)
    gm = mid_geo if mid_geo is not None else hs.geometry(states[1], times[1], level="full",
                                                         potential=None)
    dg = (g2.induced - g0.induced) / (2 * dt)
    dA = (g2.A - g0.A) / (2 * dt)
    dH = (g2.H - g0.H) / (2 * dt)
    return (float(np.max(np.abs(dg - hs.dg_dt_rhs(gm)))),
            float(np.max(np.abs(dA - hs.dA_dt_rhs(gm)))),
            float(np.max(np.abs(dH - hs.dH_dt_rhs(gm)))))


def harnack_time_difference(states, times, redistributed=False):
    """Harnack integrand at the middle output with dH/dt from centered differences."""
    if redistributed:
        raise RedistributionActive("time differences need pure normal motion")
    dt = _check_window(times)
    H0 = hs.geometry(states[0], times[0], level="velocity", potential=None).H
    H2 = hs.geometry(states[2], times[2], level="velocity", potential=None).H
    return harnack(states[1], times[1], dHdt=(H2 - H0) / (2 * dt))[0]


def _rel(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(abs(rhs), RES_FLOOR)


@dataclass
class RateCheck:
    t: float
    lhs: float
    rhs: float
    residual: float
    relative: float


def area_identity(times, areas, rates) -> list[RateCheck]:
    """Centered difference of the area versus the integrated area rate."""
    out = []
    for j in range(1, len(times) - 1):
        dt = _check_window(times[j - 1:j + 2])
        lhs = (areas[j + 1] - areas[j - 1]) / (2 * dt)
        out.append(RateCheck(times[j], lhs, rates[j], abs(lhs - rates[j]), _rel(lhs, rates[j])))
    return out


def monotonicity_check(times, values, rates) -> tuple[list[RateCheck], bool]:
    """Rate identity for the weighted area (Huisken quantity on shrinkers) and its sign.

    Returns the per-output checks and whether the series is nonincreasing up
    to 1e-8 + 10 * residual between consecutive outputs.
    """
    checks = []
    for j in range(1, len(times) - 1):
        dt = _check_window(times[j - 1:j + 2])
        lhs = (values[j + 1] - values[j - 1]) / (2 * dt)
        checks.append(RateCheck(times[j], lhs, rates[j], abs(lhs - rates[j]),
                                _rel(lhs, rates[j])))
    res = max((c.relative for c in checks), default=0.0)
    ok = all(values[j + 1] <= values[j] + 1e-8 + 10 * res for j in range(len(values) - 1))
    return checks, ok


def extinction_bound(times, areas, rates, imm: hs.Immersion,
                     extinction_time: Optional[float] = None) -> dict:
    """Area-rate inequality dA/dt <= 3A/(4t) - 4 pi and the collapse-time bound.

    Needs a sphere in a 3D background with t0 > 0. The bound on the collapse
    time is t0 (1 + A(t0)/(16 pi t0))^4.
    """
    if imm.background.n != 3 or imm.kind != "revolution-profile":
        raise WrongDimension("the extinction bound needs a 2-sphere in a 3D background")
    t0, A0 = times[0], areas[0]
    if t0 <= 0:
        raise WrongDimension("the extinction bound needs a positive initial time")
    margin = [3 * A / (4 * t) - 4 * np.pi - r for t, A, r in zip(times, areas, rates)]
    first = next((j for j, m in enumerate(margin) if m < -1e-9 * max(1.0, abs(rates[j]))), None)
    bound = t0 * (1 + A0 / (16 * np.pi * t0)) ** 4
    return {"per_step_ok": first is None, "first_violation": first,
            "min_margin": float(min(margin)), "bound": bound,
            "extinction_time": extinction_time,
            "extinction_ok": extinction_time is not None and extinction_time <= bound}


# ----------------------------------------------------------------------------
# series


def series(result: FlowResult, with_harnack: bool = True) -> list[MonitorRow]:
    """Evaluate every applicable monitor at each stored output."""
    states, times = result.states, list(result.times)
    if not states:
        return []
    imm0 = states[0]
    bg = imm0.background
    frame = result.frame
    has_pot = bg.potential is not None
    shrinking = bg.soliton_class == "shrinking"
    geos, areas, area_rates, wareas, mono_vals, mono_rates = [], [], [], [], [], []
    rows = []
    for imm, t in zip(states, times):
        tg = 0.0 if frame == "static-weighted" else t
        geo = hs.geometry(imm, tg, level="full")
        geos.append(geo)
        area = hs.integrate(imm, geo, np.ones(imm.N))
        areas.append(area)
        area_rates.append(area_rate(imm, geo))
        w = weighted_area_at(imm, tg, geo) if has_pot else area
        wareas.append(w)
        q = huisken_quantity(imm, t, geo) if shrinking and frame == "ambient-mcf" else math.nan
        if has_pot and (bg.soliton_class is not None):
            mono_vals.append(q if shrinking else w)
            mono_rates.append(monotonicity_rate(imm, t, geo, frame))
        dev = soliton_deviation(imm, tg, geo, norms=("l2",))["l2"] if has_pot else math.nan
        hmin = harnack(imm, tg, geo)[1] if (has_pot and with_harnack) else math.nan
        simons = hs.simons_residuals(imm, tg, geo)[0]
        rows.append(MonitorRow(t, area, w, q, float(np.min(geo.H)), float(np.max(geo.H)), dev,
                               hmin, math.nan, math.nan, math.nan, simons, math.nan, math.nan,
                               True))
    uniform = len(times) >= 3 and all(
        abs((times[j + 1] - times[j]) - (times[1] - times[0])) <= 1e-9 * (times[1] - times[0])
        for j in range(len(times) - 1))
    # the last stored state may be an off-grid extinction snapshot
    n_uniform = len(times)
    if not uniform and len(times) >= 4:
        d = times[1] - times[0]
        n_uniform = next((j + 1 for j in range(len(times) - 1)
                          if abs(times[j + 1] - times[j] - d) > 1e-9 * d), len(times))
        uniform = n_uniform >= 3
    if uniform:
        for j in range(1, n_uniform - 1):
            win = times[j - 1:j + 2]
            if frame == "ambient-mcf" and not result.redistributed:
                r = evolution_residuals(states[j - 1:j + 2], win, mid_geo=geos[j])
                rows[j].res_dgdt, rows[j].res_dAdt, rows[j].res_dHdt = r
            if frame == "ambient-mcf":
                rows[j].res_area_identity = area_identity(win, areas[j - 1:j + 2],
                                                          area_rates[j - 1:j + 2])[0].residual
            if mono_vals:
                chk, _ = monotonicity_check(win, mono_vals[j - 1:j + 2], mono_rates[j - 1:j + 2])
                rows[j].res_monotonicity = chk[0].relative
    if bg.n == 3 and imm0.kind == "revolution-profile" and times[0] > 0 \
            and frame == "ambient-mcf":
        for j, (t, A, r) in enumerate(zip(times, areas, area_rates)):
            rows[j].ext_bound_ok = bool(r <= 3 * A / (4 * t) - 4 * np.pi
                                        + 1e-9 * max(1.0, abs(r)))
    return rows
