import math

import numpy as np
import pytest

from rfmcf import backgrounds as B
from rfmcf import flow as F
from rfmcf import hypersurface as S
from rfmcf import monitors as M
from rfmcf.errors import NonUniformDt, OpenImmersion, RedistributionActive, WrongDimension, \
    WrongSolitonClass

NO_REDIST = F.Stepper(redistribute_every=0)


def _run(imm, t0, t1, dt_out, **kw):
    return F.run(F.Scenario(imm, t0, t1, output_interval=dt_out, stepper=kw.pop("stepper",
                                                                              NO_REDIST), **kw))


def test_monitor_row_schema():
    cols = M.MonitorRow.columns()
    assert cols[0] == "t" and cols[-1] == "ext_bound_ok"
    assert set(cols) == set(M.COLUMN_DOCS)


def test_shrinking_circle_dHdt_matches_closed_form(flat2):
    imm = S.build("closed-curve", flat2, "circle", 32)
    res = _run(imm, 0.0, 0.2, 0.01)
    j = 10
    geo = S.geometry(res.states[j], res.times[j])
    H = 1 / math.sqrt(1 - 2 * res.times[j])
    assert np.allclose(S.dH_dt_rhs(geo), H ** 3, atol=1e-10)
    r = M.evolution_residuals(res.states[j - 1:j + 2], res.times[j - 1:j + 2])
    assert max(r) < 1e-3


def _residuals_at(imm_fn, bg_t0, N, dt_out):
    res = _run(imm_fn(N), bg_t0, bg_t0 + 0.02, dt_out)
    j = int(round(0.012 / dt_out))
    return np.array(M.evolution_residuals(res.states[j - 1:j + 2], res.times[j - 1:j + 2]))


def test_shrinker_sphere_dAdt_second_order():
    bg = B.get_background("gaussian-shrinker", n=3)
    fn = lambda N: S.build("revolution-profile", bg, "sphere", N, radius=1.5)
    c = _residuals_at(fn, -1.0, 32, 2e-3)
    f = _residuals_at(fn, -1.0, 32, 1e-3)
    assert f[1] < 1e-3 and c[1] / f[1] > 3.8


def test_evolution_residual_errors(flat2):
    imm = S.build("closed-curve", flat2, "circle", 32)
    with pytest.raises(RedistributionActive):
        M.evolution_residuals([imm] * 3, [0.0, 0.1, 0.2], redistributed=True)
    with pytest.raises(NonUniformDt):
        M.evolution_residuals([imm] * 3, [0.0, 0.1, 0.3])


def test_harnack_static_line():
    bg = B.get_background("translating-steady")
    imm = S.build("open-curve", bg, "line", 64, start=(-1.0, 0.3), end=(1.0, 0.3))
    val, _ = M.harnack(imm, 0.0)
    assert np.max(np.abs(val)) < 1e-7  # finite-difference roundoff on the open grid


def test_harnack_grim_reaper():
    bg = B.get_background("translating-steady")
    vals = []
    for N in (128, 256):
        v, _ = M.harnack(S.build("open-curve", bg, "grim-reaper", N), 0.0)
        vals.append(np.max(np.abs(v[3:-3])))
    assert vals[1] < 1e-4 and vals[0] / vals[1] > 3.8


def test_harnack_shrinking_circle(flat2):
    for r in (0.5, 1.0, 2.0):
        val, vmin = M.harnack(S.build("closed-curve", flat2, "circle", 32, radius=r), 0.0)
        assert np.allclose(val, r ** -3, atol=1e-10) and vmin > 0


def test_hamilton_z_zero_field(flat2):
    imm = S.build("closed-curve", flat2, "circle", 32)
    assert np.allclose(M.hamilton_z(imm, 0.0, np.zeros((32, 1))), 1.0, atol=1e-10)


def test_soliton_deviation_examples(flat2, cigar):
    bg = B.get_background("gaussian-shrinker", n=3)
    for tau in (0.3, 1.0):
        imm = S.build("revolution-profile", bg, "sphere", 32, radius=2 * math.sqrt(tau))
        d = M.soliton_deviation(imm, -tau)
        assert d["max"] < 1e-10 and d["l2"] < 1e-10
        assert d["restricted_tangential"] < 1e-10 and d["restricted_mixed"] < 1e-10
    d = M.soliton_deviation(S.build("closed-curve", flat2, "circle", 64), 0.0)
    assert d["max"] == pytest.approx(1.0, abs=1e-12)
    assert d["l2"] == pytest.approx(math.sqrt(2 * math.pi), abs=1e-12)
    d = M.soliton_deviation(S.build("closed-curve", cigar, "circle", 64), 0.0)
    assert d["max"] == pytest.approx(1 / math.sqrt(2) + math.sqrt(2), abs=1e-12)


def test_soliton_deviation_open_curve_l2():
    imm = S.build("open-curve", B.get_background("translating-steady"), "grim-reaper", 32)
    with pytest.raises(OpenImmersion):
        M.soliton_deviation(imm, 0.0, norms=("l2",))
    assert M.soliton_deviation(imm, 0.0, norms=("max",))["max"] < 1e-3


def test_grim_reaper_restricted_soliton_equations():
    imm = S.build("open-curve", B.get_background("translating-steady"), "grim-reaper", 256)
    d = M.soliton_deviation(imm, 0.0, norms=("max",))
    assert d["restricted_tangential"] < 1e-4 and d["restricted_mixed"] < 1e-4


def test_monotonicity_soliton_sphere():
    bg = B.get_background("gaussian-shrinker", n=3)
    res = _run(S.build("revolution-profile", bg, "sphere", 32, radius=2.0), -1.0, -0.5, 0.1,
               stepper=F.Stepper(extinction_area_ratio=0.0))
    q = [M.huisken_quantity(s, t) for s, t in zip(res.states, res.times)]
    rates = [M.monotonicity_rate(s, t) for s, t in zip(res.states, res.times)]
    checks, ok = M.monotonicity_check(res.times, q, rates)
    assert ok and max(abs(r) for r in rates) < 1e-10
    assert max(abs(c.lhs) for c in checks) < 1e-10
    assert max(abs(v - 16 * math.pi / math.e) for v in q) < 1e-10


def test_monotonicity_cigar_perturbed_circle(cigar):
    out = []
    for N, dt in ((32, 2e-3), (64, 1e-3)):
        res = _run(S.build("closed-curve", cigar, "perturbed-circle", N), 0.0, 0.02, dt)
        w = [M.weighted_area_at(s, t) for s, t in zip(res.states, res.times)]
        rates = [M.monotonicity_rate(s, t) for s, t in zip(res.states, res.times)]
        checks, ok = M.monotonicity_check(res.times, w, rates)
        assert ok and all(c.lhs < 0 and c.rhs < 0 for c in checks)
        j = int(round(0.012 / dt)) - 1
        out.append(checks[j].relative)
    assert out[1] < 1e-4 and out[0] / out[1] > 3.8


def test_unit_circle_length_rate(flat2):
    res = _run(S.build("closed-curve", flat2, "circle", 64), 0.0, 0.2, 0.05)
    for s, t in zip(res.states, res.times):
        rate = M.area_rate(s, S.geometry(s, t))
        assert rate == pytest.approx(-2 * math.pi / math.sqrt(1 - 2 * t), rel=1e-9)
        assert M.monotonicity_rate(s, t) == pytest.approx(rate, rel=1e-9)


def test_huisken_examples():
    with pytest.raises(WrongSolitonClass):
        M.huisken_quantity(S.build("closed-curve", B.get_background("cigar-steady"), "circle",
                                   32), 0.0)
    bg = B.get_background("round-shrinking-sphere", n=3)
    res = _run(S.build("revolution-profile", bg, "sphere", 32, radius=0.5), -1.0, -0.8, 0.02)
    q = [M.huisken_quantity(s, t) for s, t in zip(res.states, res.times)]
    area = [S.weighted_area(s, t, weight=None) for s, t in zip(res.states, res.times)]
    assert np.allclose(q, [a / -t for a, t in zip(area, res.times)], rtol=1e-12)
    assert all(a >= b for a, b in zip(q, q[1:]))
    bg2 = B.get_background("gaussian-shrinker", n=2)
    res = _run(S.build("closed-curve", bg2, "ellipse", 32, a=2.0, b=1.5), -1.0, -0.7, 0.02)
    q = [M.huisken_quantity(s, t) for s, t in zip(res.states, res.times)]
    assert all(a >= b - 1e-12 for a, b in zip(q, q[1:]))


def test_area_identity_flat_circle(flat2):
    res = _run(S.build("closed-curve", flat2, "circle", 64), 0.0, 0.2, 0.005)
    areas = [S.weighted_area(s, t, weight=None) for s, t in zip(res.states, res.times)]
    rates = [M.area_rate(s, S.geometry(s, t)) for s, t in zip(res.states, res.times)]
    assert all(c.relative < 1e-3 for c in M.area_identity(res.times, areas, rates))


def _sphere_extinction(bg, t0, N=32):
    res = F.run(F.Scenario(S.build("revolution-profile", bg, "sphere", N), t0, t0 + 5.0,
                           output_interval=0.01))
    areas = [S.weighted_area(s, t, weight=None) for s, t in zip(res.states, res.times)]
    rates = [M.area_rate(s, S.geometry(s, t)) for s, t in zip(res.states, res.times)]
    return res, M.extinction_bound(res.times, areas, rates, res.states[0], res.extinction_time)


def test_extinction_bound_flat(flat3):
    res, rep = _sphere_extinction(flat3, 1.0)
    assert res.extinction_time == pytest.approx(1.25, abs=1e-6)
    assert rep["bound"] == pytest.approx(1.25 ** 4)
    assert rep["per_step_ok"] and rep["extinction_ok"]


def test_extinction_bound_cigar_line():
    res, rep = _sphere_extinction(B.get_background("cigar-line"), 0.1)
    assert res.termination == "extinction"
    assert rep["per_step_ok"] and rep["extinction_ok"]


def test_extinction_bound_needs_3d(flat2):
    imm = S.build("closed-curve", flat2, "circle", 32)
    with pytest.raises(WrongDimension):
        M.extinction_bound([1.0], [1.0], [0.0], imm)


def test_series_columns_and_nan(flat2):
    res = F.run(F.Scenario(S.build("closed-curve", flat2, "ellipse", 32, a=1.25, b=1.0), 0.0,
                           0.02, output_interval=0.005, stepper=NO_REDIST))
    rows = M.series(res)
    assert len(rows) == len(res.times)
    assert math.isnan(rows[0].res_dgdt) and math.isnan(rows[-1].res_dgdt)
    assert all(r.res_dgdt < 1e-2 for r in rows[1:-1])
    assert all(math.isnan(r.huisken_q) for r in rows)
    assert all(r.ext_bound_ok for r in rows)
    assert rows[0].values()[0] == rows[0].t
