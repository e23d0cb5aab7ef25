"""Acceptance criteria 1-7, each at its stated tolerance.

Every criterion prints one PASS/FAIL line (collected in the terminal summary
under pytest, printed directly when run as a script).
"""
import functools
import math
import time

import numpy as np
import pytest

from rfmcf import backgrounds as B
from rfmcf import flow as F
from rfmcf import ghy as G
from rfmcf import hypersurface as S
from rfmcf import monitors as M
from rfmcf import verify as V

RESULTS = {}


def record(k, title):
    def wrap(fn):
        @functools.wraps(fn)
        def inner():
            if k not in RESULTS:
                t0 = time.perf_counter()
                ok, detail = fn()
                RESULTS[k] = (bool(ok), f"{detail}; {time.perf_counter() - t0:.1f}s")
            ok, detail = RESULTS[k]
            line = f"criterion {k} ({title}): {'PASS' if ok else 'FAIL'} - {detail}"
            print(line)
            return ok, line
        return inner
    return wrap


@record(1, "exact constants")
def criterion_1():
    disk = max(abs(G.ghy_action(G.RadialDomain.ball(2, r, 32)) - 4 * math.pi)
               for r in (0.5, 1.0, 2.0))
    res, rows = V.shrinking_sphere_run(N=32, tau0=1.0, tau1=0.1, interval=0.05)
    taus = [-r.t for r in rows]
    q = max(abs(r.huisken_q - 16 * math.pi / math.e) for r in rows)
    ok = disk < 1e-6 and q < 1e-5 and min(taus) <= 0.1 + 1e-12 and max(taus) >= 1.0
    return ok, f"|I_GHY - 4pi| = {disk:.2e}, |Q - 16pi/e| = {q:.2e} over tau in [0.1, 1]"


@record(2, "closed-form extinction")
def criterion_2():
    parts, ok = [], True
    for kind, N0, N1 in (("circle", 128, 256), ("sphere", 128, 256)):
        e0, _ = V.extinction_error(kind, N0)
        e1, secs = V.extinction_error(kind, N1)
        row = V.refinement_row("flow", kind, e0, e1, 2e-3)
        ok &= row.passed and secs < 60
        parts.append(f"{kind} err {e1:.1e} at N={N1} ({secs:.1f}s, order-or-floor "
                     f"{'ok' if row.passed else 'no'})")
    return ok, "; ".join(parts)


IDENTITIES = {
    "induced metric evolution": lambda n: n.endswith("induced metric evolution"),
    "A evolution": lambda n: n.endswith("second fundamental form evolution"),
    "H evolution": lambda n: n.endswith("mean curvature evolution"),
    "Simons": lambda n: "Simons identity" in n,
    "Codazzi": lambda n: "Codazzi equation" in n,
    "restriction": lambda n: "Hessian restriction" in n,
    "area rate": lambda n: n.endswith(": area rate identity"),
    "weighted area rate": lambda n: n.endswith("weighted area rate identity"),
}


@functools.lru_cache(maxsize=None)
def identity_rows():
    return tuple(V.hypersurface_suite() + V.monitors_suite())


@record(3, "identity residual suite")
def criterion_3():
    rows = identity_rows()
    ok, bad = True, []
    for label, match in IDENTITIES.items():
        sel = [r for r in rows if match(r.name)]
        flat = [r for r in sel if r.name.startswith("flat")]
        curved = [r for r in sel if r.name.startswith(("cigar", "gaussian"))]
        good = bool(flat) and bool(curved) and all(r.passed for r in sel)
        if not good:
            bad.append(label)
        ok &= good
    worst = max(r.fine for r in rows if any(m(r.name) for m in IDENTITIES.values()))
    return ok, (f"{len(IDENTITIES)} identities on flat and curved scenarios, max fine residual "
                f"{worst:.1e}" + (f"; failing: {', '.join(bad)}" if bad else ""))


@record(4, "Harnack and soliton")
def criterion_4():
    h = V.grim_reaper_harnack(256)
    res, _ = V.shrinking_sphere_run(N=32, tau0=1.0, tau1=0.1, interval=0.05)
    dev = max(M.soliton_deviation(s, t)["max"] for s, t in zip(res.states, res.times))
    return h < 1e-4 and dev < 1e-6, \
        f"grim reaper interior |Harnack| = {h:.1e}, soliton sphere deviation = {dev:.1e}"


MONOTONE_RUNS = [
    ("flat ellipse", "flat-static", {"n": 2}, "closed-curve", "ellipse", 64,
     {"a": 2.0, "b": 1.0}, (0.0, 0.2), "ambient-mcf"),
    ("cigar perturbed circle", "cigar-steady", {}, "closed-curve", "perturbed-circle", 64, {},
     (0.0, 0.2), "ambient-mcf"),
    ("cigar ellipse, static frame", "cigar-steady", {}, "closed-curve", "ellipse", 64,
     {"a": 1.5, "b": 1.0}, (0.0, 0.2), "static-weighted"),
    ("translating ellipse", "translating-steady", {"n": 2}, "closed-curve", "ellipse", 64,
     {"a": 1.5, "b": 1.0}, (0.0, 0.2), "ambient-mcf"),
    ("gaussian ellipse", "gaussian-shrinker", {"n": 2}, "closed-curve", "ellipse", 64,
     {"a": 2.0, "b": 1.5}, (-1.0, -0.5), "ambient-mcf"),
    ("gaussian perturbed sphere", "gaussian-shrinker", {"n": 3}, "revolution-profile",
     "perturbed-sphere", 32, {"radius": 2.0}, (-1.0, -0.5), "ambient-mcf"),
    ("round-sphere background", "round-shrinking-sphere", {"n": 3}, "revolution-profile",
     "sphere", 32, {"radius": 0.5}, (-1.0, -0.8), "ambient-mcf"),
]


@record(5, "monotonicity")
def criterion_5():
    ok, worst_res, bad = True, 0.0, []
    for label, name, bp, kind, shape, N, sp, (t0, t1), frame in MONOTONE_RUNS:
        bg = B.get_background(name, **bp)
        shrinking = bg.soliton_class == "shrinking"
        stepper = F.Stepper(extinction_area_ratio=0.0) if shrinking else F.Stepper()
        res = F.run(F.Scenario(S.build(kind, bg, shape, N, **sp), t0, t1, frame,
                               output_interval=0.0025, stepper=stepper))
        rows = M.series(res, with_harnack=False)
        col = "huisken_q" if shrinking else "weighted_area"
        vals = [getattr(r, col) for r in rows]
        rel = [r.res_monotonicity for r in rows]
        rel_max = max(v for v in rel if not math.isnan(v))
        slack = lambda j: 1e-8 + 10 * (0.0 if math.isnan(rel[j]) else rel[j])
        mono = all(vals[j + 1] <= vals[j] + slack(j + 1) for j in range(len(vals) - 1))
        good = mono and rel_max < 1e-3 and res.termination == "reached_t_end"
        if not good:
            bad.append(label)
        ok &= good
        worst_res = max(worst_res, rel_max)
    return ok, (f"{len(MONOTONE_RUNS)} steady/shrinker runs nonincreasing, max relative rate "
                f"residual {worst_res:.1e}" + (f"; failing: {', '.join(bad)}" if bad else ""))


def _sphere_bound(bg, t0, N=32):
    res = F.run(F.Scenario(S.build("revolution-profile", bg, "sphere", N), t0, t0 + 5.0,
                           output_interval=0.005))
    areas = [S.weighted_area(s, t, weight=None) for s, t in zip(res.states, res.times)]
    rates = [M.area_rate(s, S.geometry(s, t)) for s, t in zip(res.states, res.times)]
    return res, M.extinction_bound(res.times, areas, rates, res.states[0], res.extinction_time)


@record(6, "extinction bound")
def criterion_6():
    res, rep = _sphere_bound(B.get_background("flat-static", n=3), 1.0)
    res_c, rep_c = _sphere_bound(B.get_background("cigar-line"), 0.1)
    ok = (res.termination == "extinction" and res.extinction_time <= 1.25 + 1e-6
          and abs(rep["bound"] - 1.25 ** 4) < 1e-12 and rep["extinction_ok"]
          and rep["per_step_ok"] and rep_c["per_step_ok"] and rep_c["extinction_ok"])
    return ok, (f"flat: T = {res.extinction_time:.6f} <= bound {rep['bound']:.4f}, per-step "
                f"margin {rep['min_margin']:.2e}; cigar-line: T = {res_c.extinction_time:.4f} "
                f"<= {rep_c['bound']:.4f}, per-step margin {rep_c['min_margin']:.2e}")


@record(7, "GHY variational suite")
def criterion_7():
    rows = V.ghy_suite()
    var = [r for r in rows if "first variation" in r.name]
    point = [r for r in rows if "boundary integrands agree pointwise" in r.name]
    dI = [r for r in rows if "dI/dt" in r.name]
    ok = (len(var) == 2 and all(r.fine < 1e-5 for r in var)
          and point and all(r.fine < 1e-6 for r in point)
          and dI and all(r.order >= 2 - 0.05 for r in dI))
    return ok, (f"variation relative residual {max(r.fine for r in var):.1e} (20 random), "
                f"pointwise boundary forms {max(r.fine for r in point):.1e}, dI/dt orders "
                f"{min(r.order for r in dI):.2f}-{max(r.order for r in dI):.2f}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7]


@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 8)])
def test_acceptance(crit):
    ok, line = crit()
    assert ok, line


if __name__ == "__main__":
    results = [c()[0] for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} acceptance criteria passed")
