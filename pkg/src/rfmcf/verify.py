"""Property suites run at two resolutions with measured convergence orders.

Each check yields a :class:`CheckRow`. Refinement checks pass when the
fine-level value is below the tolerance and either the measured order
reaches ``ORDER_MIN`` or the fine value already sits at the roundoff floor
(spectral discretizations converge faster than any power and bottom out).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from . import backgrounds as B
from . import flow as F
from . import ghy as G
from . import heat as Ht
from . import hypersurface as S
from . import monitors as Mo
from . import tensor as T

ORDER_MIN = 1.95
SUITES = ("tensor", "hypersurface", "flow", "monitors", "ghy")


@dataclass
class CheckRow:
    suite: str
    name: str
    coarse: float
    fine: float
    order: float
    tol: float
    passed: bool
    note: str = ""


def measured_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    if coarse <= 0 or fine <= 0:
        return math.inf if fine == 0 else math.nan
    return math.log(coarse / fine) / math.log(ratio)


def refinement_row(suite: str, name: str, coarse: float, fine: float, tol: float,
                   floor: float = 1e-10, ratio: float = 2.0, min_order: float = ORDER_MIN,
                   note: str = "") -> CheckRow:
    order = measured_order(coarse, fine, ratio)
    ok = fine < tol and (fine < floor or (not math.isnan(order) and order >= min_order))
    return CheckRow(suite, name, coarse, fine, order, tol, bool(ok), note)


def value_row(suite: str, name: str, value: float, tol: float, note: str = "") -> CheckRow:
    return CheckRow(suite, name, math.nan, value, math.nan, tol, bool(abs(value) < tol), note)


# ----------------------------------------------------------------------------
# tensor


def tensor_suite(seed: int = 0) -> list[CheckRow]:
    rows = []
    rng = np.random.default_rng(seed)
    for name in B.catalog_names():
        bg = B.get_background(name)
        x = rng.uniform(-1.5, 1.5, size=(100, bg.n))
        inv = {}
        for t in B.sample_times(bg):
            cb = T.curvature(bg, x, t, order=3, method="analytic")
            for k, v in T.bundle_invariant_residuals(cb).items():
                inv[k] = max(inv.get(k, 0.0), v)
        for k, v in inv.items():
            rows.append(value_row("tensor", f"{name}: {k.replace('_', ' ')}", v, 1e-7))
        rep = B.catalog_selfcheck(name, n_samples=100, seed=seed, method="analytic")
        rows.append(value_row("tensor", f"{name}: Ricci flow equation", rep["ricci_flow"], 1e-7))
        if bg.soliton_class is not None and bg.potential is not None:
            rows.append(value_row("tensor", f"{name}: soliton equation",
                                  rep["soliton_tensor"], 1e-7))
            rows.append(value_row("tensor", f"{name}: traced soliton identity",
                                  rep["soliton_scalar"], 1e-7))
        t = B.sample_times(bg)[1]
        exact = T.curvature(bg, x, t, order=2, method="analytic").riemann
        errs = [float(np.max(np.abs(T.curvature(bg, x, t, order=2, method="fd", h_fd=h).riemann
                                    - exact))) for h in (2e-2, 1e-2)]
        rows.append(refinement_row("tensor", f"{name}: finite-difference Riemann vs closed form",
                                   errs[0], errs[1], 1e-6, floor=1e-9,
                                   min_order=3.8))
    return rows


# ----------------------------------------------------------------------------
# hypersurface


def _slice_cases():
    flat2 = B.get_background("flat-static", n=2)
    flat3 = B.get_background("flat-static", n=3)
    return [
        ("flat plane, perturbed circle", lambda N: S.build("closed-curve", flat2,
                                                           "perturbed-circle", N), 0.0),
        ("cigar, ellipse", lambda N: S.build("closed-curve", B.get_background("cigar-steady"),
                                             "ellipse", N, a=1.25, b=1.0), 0.0),
        ("gaussian shrinker, ellipse",
         lambda N: S.build("closed-curve", B.get_background("gaussian-shrinker"), "ellipse", N,
                           a=1.25, b=1.0), -1.0),
        ("flat space, perturbed sphere", lambda N: S.build("revolution-profile", flat3,
                                                           "perturbed-sphere", N), 0.0),
        ("cigar line, perturbed sphere",
         lambda N: S.build("revolution-profile", B.get_background("cigar-line"),
                           "perturbed-sphere", N, z0=0.2), 0.0),
    ]


def hypersurface_suite(levels=(32, 64)) -> list[CheckRow]:
    rows = []
    for label, make, t in _slice_cases():
        vals = []
        for N in levels:
            imm = make(N)
            geo = S.geometry(imm, t, level="full")
            cz = S.codazzi_residuals(imm, t, geo)
            sm = S.simons_residuals(imm, t, geo)
            out = {"Codazzi equation": cz[0], "traced Codazzi equation": cz[1],
                   "Simons identity for Hess H": sm[0], "traced Simons identity": sm[1]}
            if geo.fbar is not None:
                ri = S.restriction_identities(imm, t, geo=geo)
                out["tangential Hessian restriction"] = ri["tangential"]
                out["mixed Hessian restriction"] = ri["mixed"]
            vals.append(out)
        for key in vals[0]:
            rows.append(refinement_row("hypersurface", f"{label}: {key}", vals[0][key],
                                       vals[1][key], 1e-3, floor=1e-8))
    return rows


# ----------------------------------------------------------------------------
# flow


def extinction_error(kind: str, N: int) -> tuple[float, float]:
    """(|T - T_exact|, seconds) for the unit circle (T = 1/2) or sphere (T = 1/4) in flat space."""
    if kind == "circle":
        imm = S.build("closed-curve", B.get_background("flat-static", n=2), "circle", N)
        exact = 0.5
    else:
        imm = S.build("revolution-profile", B.get_background("flat-static", n=3), "sphere", N)
        exact = 0.25
    t0 = time.perf_counter()
    res = F.run(F.Scenario(imm, 0.0, 1.0))
    return abs(res.extinction_time - exact), time.perf_counter() - t0


def flow_suite(levels=(64, 128)) -> list[CheckRow]:
    rows = []
    for kind in ("circle", "sphere"):
        (e1, _), (e2, s2) = (extinction_error(kind, N) for N in levels)
        rows.append(refinement_row("flow", f"{kind} extinction time", e1, e2, 2e-3,
                                   floor=1e-10, note=f"fine run {s2:.1f}s"))
    return rows


# ----------------------------------------------------------------------------
# monitors


def _residual_cases():
    return [
        ("flat plane, ellipse", "closed-curve", B.get_background("flat-static", n=2),
         "ellipse", {"a": 1.25, "b": 1.0}, 0.0),
        ("cigar, ellipse", "closed-curve", B.get_background("cigar-steady"),
         "ellipse", {"a": 1.25, "b": 1.0}, 0.0),
        ("gaussian shrinker, ellipse", "closed-curve", B.get_background("gaussian-shrinker"),
         "ellipse", {"a": 1.25, "b": 1.0}, -1.0),
        ("flat space, perturbed sphere", "revolution-profile",
         B.get_background("flat-static", n=3), "perturbed-sphere", {}, 0.0),
        ("cigar line, perturbed sphere", "revolution-profile", B.get_background("cigar-line"),
         "perturbed-sphere", {"z0": 0.2}, 0.0),
    ]


RESIDUAL_COLUMNS = {
    "res_dgdt": "induced metric evolution",
    "res_dAdt": "second fundamental form evolution",
    "res_dHdt": "mean curvature evolution",
    "res_area_identity": "area rate identity",
    "res_monotonicity": "weighted area rate identity",
    "res_simons": "Simons identity for Hess H",
}


def residual_rows_at(kind, bg, shape, params, t0, N, interval, probe=0.012, t_len=0.02):
    imm = S.build(kind, bg, shape, N, **params)
    res = F.run(F.Scenario(imm, t0, t0 + t_len, output_interval=interval,
                           stepper=F.Stepper(redistribute_every=0)))
    rows = Mo.series(res, with_harnack=False)
    j = min(range(len(rows)), key=lambda i: abs(rows[i].t - (t0 + probe)))
    return rows[j]


def monitors_suite(levels=((64, 1e-3), (128, 5e-4)), rev_levels=((64, 1e-3), (128, 5e-4))
                   ) -> list[CheckRow]:
    rows = []
    for label, kind, bg, shape, params, t0 in _residual_cases():
        lv = rev_levels if kind == "revolution-profile" else levels
        c, f = (residual_rows_at(kind, bg, shape, params, t0, N, d) for N, d in lv)
        for col, desc in RESIDUAL_COLUMNS.items():
            a, b = getattr(c, col), getattr(f, col)
            if math.isnan(a) or math.isnan(b):
                continue
            # Simons involves fourth derivatives: spectral roundoff grows like N^4
            floor = 1e-7 if col == "res_simons" else 1e-10
            rows.append(refinement_row("monitors", f"{label}: {desc}", a, b, 1e-3, floor=floor))
    rows.extend(harnack_rows())
    rows.extend(shrinker_rows())
    return rows


def grim_reaper_harnack(N: int, margin: int = 3) -> float:
    imm = S.build("open-curve", B.get_background("translating-steady"), "grim-reaper", N)
    val, _ = Mo.harnack(imm, 0.0)
    return float(np.max(np.abs(val[margin:-margin])))


def harnack_rows(levels=(128, 256)) -> list[CheckRow]:
    a, b = (grim_reaper_harnack(N) for N in levels)
    rows = [refinement_row("monitors", "grim reaper: Harnack integrand vanishes", a, b, 1e-4)]
    imm = S.build("closed-curve", B.get_background("cigar-steady"), "ellipse", 64, a=1.25, b=1.0)
    res = F.run(F.Scenario(imm, 0.0, 0.004, output_interval=1e-3,
                           stepper=F.Stepper(redistribute_every=0)))
    dif = Mo.harnack_time_difference(res.states[1:4], res.times[1:4])
    sub = Mo.harnack(res.states[2], res.times[2])[0]
    imm = S.build("closed-curve", B.get_background("cigar-steady"), "ellipse", 64, a=1.25, b=1.0)
    res2 = F.run(F.Scenario(imm, 0.0, 0.004, output_interval=5e-4,
                            stepper=F.Stepper(redistribute_every=0)))
    j = 4
    dif2 = Mo.harnack_time_difference(res2.states[j - 1:j + 2], res2.times[j - 1:j + 2])
    sub2 = Mo.harnack(res2.states[j], res2.times[j])[0]
    rows.append(refinement_row("monitors", "cigar ellipse: Harnack by substitution vs differencing",
                               float(np.max(np.abs(dif - sub))), float(np.max(np.abs(dif2 - sub2))),
                               1e-2))
    return rows


def shrinking_sphere_run(N: int = 32, tau0: float = 1.0, tau1: float = 0.1, interval=0.05):
    """Sphere of radius 2 sqrt(tau) in the 3D Gaussian shrinker, flowed from tau0 to tau1."""
    bg = B.get_background("gaussian-shrinker", n=3)
    imm = S.build("revolution-profile", bg, "sphere", N, radius=2 * math.sqrt(tau0))
    res = F.run(F.Scenario(imm, -tau0, -tau1, output_interval=interval,
                           stepper=F.Stepper(extinction_area_ratio=0.0)))
    return res, Mo.series(res, with_harnack=False)


def shrinker_rows() -> list[CheckRow]:
    res, rows = shrinking_sphere_run()
    dev = max(Mo.soliton_deviation(s, t, norms=("l2", "max"))["max"]
              for s, t in zip(res.states, res.times))
    q = max(abs(r.huisken_q - 16 * math.pi / math.e) for r in rows)
    return [value_row("monitors", "self-shrinking sphere: soliton deviation", dev, 1e-6),
            value_row("monitors", "self-shrinking sphere: Huisken quantity equals 16 pi/e", q, 1e-5,
                      note=f"termination {res.termination}")]


# ----------------------------------------------------------------------------
# ghy


def random_variation_cases(count: int = 20, seed: int = 0, M: int = 32):
    """Randomized smooth radial variations on flat and curved balls."""
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(count):
        n = int(rng.choice([2, 3]))
        radius = float(rng.uniform(0.6, 1.5))
        if i % 2 == 0:
            dom = G.RadialDomain.ball(n, radius, M, f=lambda r, c=rng.normal(size=2):
                                      c[0] + 0.3 * c[1] * r ** 2)
        else:
            c = rng.uniform(-0.3, 0.3, size=4)
            dom = G.RadialDomain.conformal(
                n, radius, lambda r, c=c: np.exp(c[0] * r ** 2 + c[1] * r ** 4), M,
                f=lambda r, c=c: c[2] + c[3] * r ** 2)
        ca = rng.normal(size=3)
        cb = rng.normal(size=3)
        cb[0], cb[2] = ca[0], ca[2]  # a = b at the pole keeps the perturbed metric smooth
        v_rr = dom.q ** 2 * (ca[0] + ca[1] * dom.r ** 2 + ca[2] * np.cos(dom.r))
        v_s = dom.phi ** 2 * (cb[0] + cb[1] * dom.r ** 2 + cb[2] * np.cos(dom.r))
        cases.append((dom, G.VariationField.measure_preserving_from(dom, v_rr, v_s)))
    return cases


def ghy_suite(seed: int = 0) -> list[CheckRow]:
    rows = []
    err = 0.0
    for radius in (0.5, 1.0, 2.5):
        for A in (lambda r: np.ones_like(r), lambda r: np.exp(0.3 * r ** 2) / (1 + r ** 2),
                  lambda r: 2.0 / (1 + r ** 2)):
            err = max(err, abs(G.ghy_action(G.RadialDomain.conformal(2, radius, A, 32))
                               - 4 * math.pi))
    rows.append(value_row("ghy", "disk: GHY action equals 4 pi (Gauss-Bonnet)", err, 1e-6))
    err = max(abs(G.ghy_action(G.RadialDomain.ball(3, r, 32)) - 16 * math.pi * r)
              for r in (0.5, 1.0, 2.0))
    rows.append(value_row("ghy", "flat 3-ball: GHY action equals 16 pi r", err, 1e-6))
    rel_g = rel_w = sub = 0.0
    for dom, var in random_variation_cases(seed=seed):
        rel_g = max(rel_g, G.variation_check(dom, var, "ghy").relative)
        rep = G.variation_check(dom, var, "weighted")
        rel_w = max(rel_w, rep.relative)
        sub = max(sub, max(rep.sub.values()))
    rows.append(value_row("ghy", "first variation of the GHY action (20 random)", rel_g, 1e-5))
    rows.append(value_row("ghy", "first variation of the weighted action (20 random)", rel_w, 1e-5))
    rows.append(value_row("ghy", "pointwise variations of dV, R, A, H, dA (relative)", sub, 1e-4))
    dom = G.RadialDomain.conformal(3, 1.0, lambda r: 1 + 0.2 * r ** 2, 64,
                                   f=lambda r: 0.3 * r ** 2)
    bump = lambda r: np.where(np.abs(r - 0.5) < 0.35,
                              np.exp(-1 / np.maximum(1e-300, 1 - ((r - 0.5) / 0.35) ** 2)), 0.0)
    vd = G.VariationField.lie_derivative(dom, lambda r: r * bump(r), "diffeo")
    rows.append(value_row("ghy", "weighted action invariant under radial diffeomorphisms",
                          abs(G.fd_derivative(lambda e: G.weighted_action(G.perturbed(dom, vd, e)))),
                          1e-5))
    rows.extend(modified_flow_rows())
    return rows


def modified_flow_cases():
    return [
        ("flat 3-ball, self-similar Gaussian", B.get_background("flat-static", n=3), 2.0,
         Ht.gaussian_terminal(3, 0.5), (0.0, 0.5)),
        ("cigar disk", B.get_background("cigar-steady"), 1.0,
         lambda r: np.exp(-0.3 * r ** 2), (0.0, 0.2)),
        ("shrinking round sphere, ball", B.get_background("round-shrinking-sphere", n=3), 1.0,
         lambda r: np.exp(-0.3 * r ** 2), (-1.0, -0.8)),
    ]


def modified_flow_rows(levels=((24, 11), (48, 21))) -> list[CheckRow]:
    rows = []
    for label, bg, rho, ub, win in modified_flow_cases():
        out = []
        for M, n_out in levels:
            sol = Ht.conjugate_heat_solve(bg, rho, ub, win, M=M, n_out=n_out)
            ar = Ht.modified_flow_dI(sol)
            out.append((ar[(n_out - 1) // 2], max(r.res_pointwise for r in ar),
                        max(r.bc_residual for r in ar)))
        (c, pc, bcc), (f, pf, bcf) = out
        rows.append(refinement_row("ghy", f"{label}: dI/dt, bulk + curvature boundary form",
                                   c.res_boundary_form, f.res_boundary_form, 1.0))
        rows.append(refinement_row("ghy", f"{label}: dI/dt, bulk + Harnack boundary form",
                                   c.res_harnack_form, f.res_harnack_form, 1.0))
        rows.append(value_row("ghy", f"{label}: boundary integrands agree pointwise", pf, 1e-6))
        rows.append(value_row("ghy", f"{label}: Robin condition e0 u = H u", bcf, 1e-8))
    return rows


# ----------------------------------------------------------------------------


SUITE_FUNCS: dict[str, Callable[[], list[CheckRow]]] = {
    "tensor": tensor_suite,
    "hypersurface": hypersurface_suite,
    "flow": flow_suite,
    "monitors": monitors_suite,
    "ghy": ghy_suite,
}


def run_suites(names: Iterable[str]) -> list[CheckRow]:
    rows = []
    for name in names:
        rows.extend(SUITE_FUNCS[name]())
    return rows


def _fmt(x: float) -> str:
    return "-" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.2e}"


def format_table(rows: list[CheckRow]) -> str:
    width = max([len(r.name) for r in rows] + [5])
    head = f"{'suite':<13} {'check':<{width}} {'coarse':>9} {'fine':>9} {'order':>6} {'tol':>8}  result"
    lines = [head, "-" * len(head)]
    for r in rows:
        order = "-" if math.isnan(r.order) else ("inf" if math.isinf(r.order) else f"{r.order:.2f}")
        lines.append(f"{r.suite:<13} {r.name:<{width}} {_fmt(r.coarse):>9} {_fmt(r.fine):>9} "
                     f"{order:>6} {r.tol:>8.0e}  {'PASS' if r.passed else 'FAIL'}"
                     + (f"  ({r.note})" if r.note else ""))
    n_fail = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - n_fail}/{len(rows)} checks passed")
    return "\n".join(lines)
