import numpy as np
import pytest

from rfmcf import backgrounds as B
from rfmcf import tensor as T
from rfmcf.errors import NonPositiveU, OutOfChart


def _jet(value, grad, hess, dt):
    return T.ScalarFieldJet(np.asarray(value, float), np.asarray(grad, float),
                            np.asarray(hess, float), np.asarray(dt, float))


def test_flat_metric_jet_is_identity(flat2, rng):
    x = rng.uniform(-2, 2, size=(5, 2))
    jet = T.metric_jet(flat2, x, 0.3)
    assert np.allclose(jet.g, np.eye(2))
    for block in (jet.dg, jet.d2g, jet.d3g, jet.dtg):
        assert np.all(block == 0)


def test_cigar_metric_at_unit_point(cigar):
    g = T.metric_jet(cigar, np.array([1.0, 0.0]), 0.0).g
    assert g[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert g[1, 1] == pytest.approx(0.5, abs=1e-15)
    assert g[0, 1] == 0


def test_gaussian_shrinker_metric_is_static(rng):
    bg = B.get_background("gaussian-shrinker", n=2)
    jet = T.metric_jet(bg, rng.normal(size=(4, 2)), -1.0)
    assert np.all(jet.dtg == 0)


@pytest.mark.parametrize("n", [2, 3])
def test_flat_curvature_vanishes_exactly(n, rng):
    bg = B.get_background("flat-static", n=n)
    cb = T.curvature(bg, rng.normal(size=(3, n)), 0.0)
    for arr in (cb.christoffel, cb.riemann, cb.ricci, cb.scalar, cb.d_riemann):
        assert np.all(arr == 0)


def test_round_sphere_scalar_curvature():
    # round-shrinking-sphere (n=2) has radius^2 = 2 tau, so R = 2/r^2 = 1/tau
    bg = B.get_background("round-shrinking-sphere", n=2)
    x = np.array([[0.0, 0.0], [0.4, -0.3], [1.1, 0.7]])
    for tau in (0.5, 1.0, 2.0):
        r2 = 2 * tau
        assert np.allclose(T.curvature(bg, x, -tau, order=2).scalar, 2 / r2, atol=1e-12)


def test_cigar_scalar_curvature_profile(cigar, rng):
    x = rng.uniform(-2, 2, size=(50, 2))
    rho2 = np.sum(x ** 2, axis=1)
    assert np.allclose(T.curvature(cigar, x, 0.0, order=2).scalar, 4 / (1 + rho2), atol=1e-12)


def test_cigar_scalar_curvature_symbolic_oracle():
    # independent oracle: R = -Lap(log F)/F for g = F (dx^2 + dy^2)
    sp = pytest.importorskip("sympy")
    x, y = sp.symbols("x y", real=True)
    Fs = 1 / (1 + x ** 2 + y ** 2)
    Rs = sp.simplify(-(sp.diff(sp.log(Fs), x, 2) + sp.diff(sp.log(Fs), y, 2)) / Fs)
    fn = sp.lambdify((x, y), Rs, "numpy")
    pts = np.array([[0.3, -1.2], [1.5, 0.2], [0.0, 0.0]])
    cb = T.curvature(B.get_background("cigar-steady"), pts, 0.0, order=2)
    assert np.allclose(cb.scalar, fn(pts[:, 0], pts[:, 1]), atol=1e-12)


def test_sphere_has_positive_sectional_curvature():
    bg = B.get_background("round-shrinking-sphere", n=3)
    cb = T.curvature(bg, np.array([0.2, 0.1, -0.3]), -1.0, order=2)
    g, R = cb.g, cb.riemann
    sec = R[0, 1, 0, 1] / (g[0, 0] * g[1, 1] - g[0, 1] ** 2)
    assert sec > 0


@pytest.mark.parametrize("name", B.catalog_names())
def test_bundle_invariants_analytic(name, rng):
    bg = B.get_background(name)
    x = rng.uniform(-1.5, 1.5, size=(100, bg.n))
    for t in B.sample_times(bg):
        res = T.bundle_invariant_residuals(T.curvature(bg, x, t))
        assert max(res.values()) < 1e-7, res


@pytest.mark.parametrize("name", ["cigar-steady", "cigar-line", "round-shrinking-sphere"])
def test_fd_jets_fourth_order(name, rng):
    bg = B.get_background(name)
    x = rng.uniform(-1, 1, size=(10, bg.n))
    t = B.sample_times(bg)[1]
    exact = T.curvature(bg, x, t, order=2, method="analytic").riemann
    e1, e2 = (np.max(np.abs(T.curvature(bg, x, t, order=2, method="fd", h_fd=h).riemann - exact))
              for h in (2e-2, 1e-2))
    assert np.log2(e1 / e2) > 3.8


def test_hessian_examples(flat2, cigar, rng):
    x = rng.normal(size=(6, 2))
    cb = T.curvature(flat2, x, 0.0, order=2)
    lin = _jet(x[:, 0], np.tile([1.0, 0.0], (6, 1)), np.zeros((6, 2, 2)), np.zeros(6))
    assert np.all(T.hessian(cb, lin) == 0)
    quad = _jet(np.sum(x ** 2, 1) / 4, x / 2, np.tile(np.eye(2) / 2, (6, 1, 1)), np.zeros(6))
    assert np.allclose(T.hessian(cb, quad), cb.g / 2)
    cc = T.curvature(cigar, x, 0.0, order=2)
    fj = cigar.potential_jet(x, 0.0)
    assert np.max(np.abs(T.hessian(cc, fj) + cc.ricci)) < 1e-12


@pytest.mark.parametrize("name,t", [("flat-static", 0.0), ("gaussian-shrinker", -1.0),
                                    ("gaussian-shrinker", -0.5), ("translating-steady", 0.7),
                                    ("cigar-steady", 0.0)])
def test_soliton_residuals_vanish(name, t, rng):
    bg = B.get_background(name)
    rt, rs = T.soliton_residuals(bg, rng.uniform(-2, 2, size=(20, bg.n)), t)
    assert rt < 1e-10 and rs < 1e-10


def test_conjugate_heat_residual_examples(flat2, cigar, rng):
    x = rng.uniform(-1, 1, size=(8, 2))
    t = 0.4
    a = np.array([0.3, -0.8])
    # u = exp(-(L + t|grad L|^2)) with L = a.x
    u = np.exp(-(x @ a + t * a @ a))
    jet = _jet(u, -u[:, None] * a, u[:, None, None] * np.outer(a, a), -(a @ a) * u)
    assert np.max(np.abs(T.conjugate_heat_residual(flat2, jet, x, t))) < 1e-14
    one = _jet(np.ones(8), np.zeros((8, 2)), np.zeros((8, 2, 2)), np.zeros(8))
    assert np.all(T.conjugate_heat_residual(flat2, one, x, t) == 0)
    res = T.conjugate_heat_residual(cigar, one, x, 0.0)
    assert np.allclose(res, -4 / (1 + np.sum(x ** 2, 1)), atol=1e-12)


def test_conjugate_heat_needs_positive_u(flat2):
    jet = _jet([-1.0], [[0.0, 0.0]], [[[0.0, 0.0], [0.0, 0.0]]], [0.0])
    with pytest.raises(NonPositiveU):
        T.conjugate_heat_residual(flat2, jet, np.zeros((1, 2)), 0.0)


def test_out_of_chart_time():
    bg = B.get_background("gaussian-shrinker", n=2)
    with pytest.raises(OutOfChart):
        T.metric_jet(bg, np.zeros(2), 0.5)
